//! Measurement helpers shared by the solver and acceptance tests.
//!
//! These operate on raw probe series only, so they stay independent of the
//! solver internals they are used to check.

#![allow(dead_code)]

pub mod gradcheck;

use std::f64::consts::PI;

use twr::fdtd::{
    run_simulation_with, GridSpec, MaterialGrid, PmlConfig, ProbeRecord, SourceSpec, Waveform,
    YBoundary, C0,
};

/// Width of the periodic strip used for plane-wave runs.
pub const STRIP: usize = 8;

/// A 1D plane-wave line: periodic in y, absorbing in x.
pub struct Line {
    pub nx: usize,
    pub dx: f64,
    pub eps: Vec<f64>,
    pub pml: PmlConfig,
}

impl Line {
    pub fn vacuum(nx: usize, dx: f64) -> Self {
        Self { nx, dx, eps: vec![1.0; nx], pml: PmlConfig::default() }
    }

    pub fn with_slab(mut self, start: usize, cells: usize, eps_r: f64) -> Self {
        for e in &mut self.eps[start..start + cells] {
            *e = eps_r;
        }
        self
    }

    pub fn grid(&self, n_steps: usize) -> GridSpec {
        GridSpec::with_courant(self.nx, STRIP, self.dx, self.dx, n_steps).unwrap()
    }

    pub fn run(&self, source: &Src, probes: &[usize], n_steps: usize) -> ProbeRecord {
        let grid = self.grid(n_steps);
        let mut mats = MaterialGrid::vacuum(self.nx, STRIP);
        for i in 0..self.nx {
            for j in 0..STRIP {
                mats.eps_r[i * STRIP + j] = self.eps[i];
            }
        }
        let spec = SourceSpec {
            cells: (0..STRIP).map(|j| (source.node, j)).collect(),
            frequency: source.frequency,
            waveform: source.waveform,
            amplitude: source.amplitude,
            ramp_cycles: source.cycles,
        };
        let probes: Vec<(usize, usize)> = probes.iter().map(|&i| (i, STRIP / 2)).collect();
        run_simulation_with(&mats, &grid, &spec, &probes, &self.pml, YBoundary::Periodic, |_| {})
            .unwrap()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Src {
    pub node: usize,
    pub frequency: f64,
    pub waveform: Waveform,
    pub amplitude: f64,
    pub cycles: f64,
}

impl Src {
    pub fn cw(node: usize, frequency: f64) -> Self {
        Self { node, frequency, waveform: Waveform::RampedCw, amplitude: 1.0, cycles: 3.0 }
    }

    pub fn pulse(node: usize, frequency: f64) -> Self {
        Self { node, frequency, waveform: Waveform::GaussianPulse, amplitude: 1.0, cycles: 3.0 }
    }
}

/// Least-squares amplitude and phase of a sinusoid at `f` over the last
/// `periods` whole periods of the series. Returns (cos, sin) coefficients.
pub fn phasor(series: &[f64], dt: f64, f: f64, periods: f64) -> (f64, f64) {
    let n = series.len();
    let window = ((periods / f) / dt).round() as usize;
    let start = n - window;
    // normal equations for a*cos + b*sin
    let (mut cc, mut ss, mut cs, mut yc, mut ys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, &y) in series.iter().enumerate().skip(start) {
        let w = 2.0 * PI * f * (k as f64 + 1.0) * dt;
        let (c, s) = (w.cos(), w.sin());
        cc += c * c;
        ss += s * s;
        cs += c * s;
        yc += y * c;
        ys += y * s;
    }
    let det = cc * ss - cs * cs;
    ((yc * ss - ys * cs) / det, (ys * cc - yc * cs) / det)
}

pub fn magnitude(p: (f64, f64)) -> f64 {
    p.0.hypot(p.1)
}

/// Measured slab reflection magnitude by two-run subtraction.
pub fn measured_slab_reflection(eps_r: f64, slab_cells: usize, dx: f64, f: f64, pml: PmlConfig) -> f64 {
    let nx = 2 * pml.depth_cells + slab_cells + 240;
    let source = pml.depth_cells + 40;
    let probe = source + 40;
    let slab_start = probe + 60;
    let mut reference = Line::vacuum(nx, dx);
    reference.pml = pml;
    let mut with_slab = Line::vacuum(nx, dx).with_slab(slab_start, slab_cells, eps_r);
    with_slab.pml = pml;

    let steps = {
        let dt = reference.grid(1).dt;
        // ramp, a dozen transits of the line and the fitting window
        let t = 3.0 / f + 12.0 * nx as f64 * dx / C0 * eps_r.sqrt() + 10.0 / f;
        (t / dt).ceil() as usize
    };
    let src = Src::cw(source, f);
    let inc = reference.run(&src, &[probe], steps);
    let tot = with_slab.run(&src, &[probe], steps);
    let refl: Vec<f64> = tot.ez[0].iter().zip(&inc.ez[0]).map(|(a, b)| a - b).collect();
    let dt = inc.dt;
    magnitude(phasor(&refl, dt, f, 8.0)) / magnitude(phasor(&inc.ez[0], dt, f, 8.0))
}

/// Energy-weighted arrival time of a pulse within `[from, to)` samples.
pub fn centroid_time(series: &[f64], dt: f64, from: usize, to: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (k, &v) in series.iter().enumerate().take(to.min(series.len())).skip(from) {
        let w = v * v;
        num += w * (k as f64 + 1.0) * dt;
        den += w;
    }
    num / den
}
