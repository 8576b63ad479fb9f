use std::f64::consts::PI;

use super::{FdtdError, GridSpec, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    /// Sine at the carrier frequency, linearly ramped over `ramp_cycles` periods.
    RampedCw,
    /// Gaussian-enveloped sine whose 1/e envelope width spans `ramp_cycles`
    /// periods, centred four envelope half-widths after t = 0.
    GaussianPulse,
}

impl Waveform {
    pub fn name(&self) -> &'static str {
        match self {
            Waveform::RampedCw => "ramped-cw",
            Waveform::GaussianPulse => "gaussian-pulse",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ramped-cw" => Some(Waveform::RampedCw),
            "gaussian-pulse" => Some(Waveform::GaussianPulse),
            _ => None,
        }
    }
}

/// Soft line source: adds the waveform to `E_z` on every listed node.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub cells: Vec<(usize, usize)>,
    pub frequency: f64,
    pub waveform: Waveform,
    pub amplitude: f64,
    pub ramp_cycles: f64,
}

impl SourceSpec {
    /// `x_margin`/`y_margin` are the number of edge nodes on each side that
    /// belong to the boundary (PEC node plus absorber).
    pub fn validate(&self, grid: &GridSpec, x_margin: usize, y_margin: usize) -> Result<()> {
        if !(self.frequency > 0.0) || !self.frequency.is_finite() {
            return Err(FdtdError::InvalidArgument(format!(
                "source frequency must be positive, got {}",
                self.frequency
            )));
        }
        if !(self.ramp_cycles > 0.0) {
            return Err(FdtdError::InvalidArgument(format!(
                "ramp cycles must be positive, got {}",
                self.ramp_cycles
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(FdtdError::InvalidArgument("source amplitude is not finite".into()));
        }
        for &(i, j) in &self.cells {
            if i >= grid.nx || j >= grid.ny {
                return Err(FdtdError::InvalidArgument(format!(
                    "source cell ({i}, {j}) lies outside the {}x{} grid",
                    grid.nx, grid.ny
                )));
            }
            let inner = |k: usize, n: usize, m: usize| k >= m && k + m < n;
            if !inner(i, grid.nx, x_margin) || !inner(j, grid.ny, y_margin) {
                return Err(FdtdError::InvalidArgument(format!(
                    "source cell ({i}, {j}) lies inside the absorbing boundary"
                )));
            }
        }
        Ok(())
    }

    /// Source value at time `t` seconds.
    pub fn value_at(&self, t: f64) -> f64 {
        let f = self.frequency;
        match self.waveform {
            Waveform::RampedCw => {
                let ramp = (t / (self.ramp_cycles / f)).min(1.0);
                self.amplitude * (2.0 * PI * f * t).sin() * ramp
            }
            Waveform::GaussianPulse => {
                let (tau, t0) = self.pulse_timing();
                let s = (t - t0) / tau;
                self.amplitude * (-s * s).exp() * (2.0 * PI * f * (t - t0)).sin()
            }
        }
    }

    /// Envelope half-width and centre time of the Gaussian pulse.
    pub fn pulse_timing(&self) -> (f64, f64) {
        let tau = self.ramp_cycles / (2.0 * self.frequency);
        (tau, 4.0 * tau)
    }

    /// Adds the source value for time index `q` to the field.
    pub fn inject(&self, ez: &mut [f64], ny: usize, q: usize, dt: f64) {
        if self.amplitude == 0.0 {
            return;
        }
        let v = self.value_at(q as f64 * dt);
        for &(i, j) in &self.cells {
            ez[i * ny + j] += v;
        }
    }
}
