use super::{
    FdtdError, FieldState, GridSpec, MaterialGrid, PmlConfig, PmlProfile, Result, SourceSpec,
    EPS0, FINITE_CHECK_INTERVAL, MU0,
};

/// Treatment of the two y edges. The x edges are always conductor + PML.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YBoundary {
    #[default]
    Absorbing,
    /// Wrap-around in y; with a full-height line source this is a 1D plane wave.
    Periodic,
}

/// Per-probe time series recorded during a run.
///
/// `E_z` is sampled at the probe node after the E update of each step; `H_x`
/// and `H_y` are the raw staggered samples at `(i, j + ½)` and `(i + ½, j)`
/// after the preceding H update.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub positions: Vec<(usize, usize)>,
    pub ez: Vec<Vec<f64>>,
    pub hx: Vec<Vec<f64>>,
    pub hy: Vec<Vec<f64>>,
    pub dt: f64,
}

impl ProbeRecord {
    pub fn n_steps(&self) -> usize {
        self.ez.first().map_or(0, Vec::len)
    }

    fn with_capacity(positions: &[(usize, usize)], n_steps: usize, dt: f64) -> Self {
        let series = || vec![Vec::with_capacity(n_steps); positions.len()];
        Self { positions: positions.to_vec(), ez: series(), hx: series(), hy: series(), dt }
    }
}

/// A configured solver: material coefficients, absorber state and fields.
#[derive(Debug, Clone)]
pub struct Simulation {
    grid: GridSpec,
    y_boundary: YBoundary,
    /// `E_z` decay factor per node; `None` when every node is lossless.
    ca: Option<Vec<f64>>,
    /// `dt / eps` per node (loss-corrected).
    cb: Vec<f64>,
    /// `dt / mu` per node.
    ch: Vec<f64>,
    pml_x: PmlProfile,
    pml_y: PmlProfile,
    psi_ezx: Vec<f64>,
    psi_ezy: Vec<f64>,
    psi_hyx: Vec<f64>,
    psi_hxy: Vec<f64>,
    fields: FieldState,
}

impl Simulation {
    pub fn new(
        materials: &MaterialGrid,
        grid: &GridSpec,
        pml: &PmlConfig,
        y_boundary: YBoundary,
    ) -> Result<Self> {
        grid.validate()?;
        pml.validate()?;
        materials.validate(grid)?;
        let y_pml = match y_boundary {
            YBoundary::Absorbing => *pml,
            YBoundary::Periodic => PmlConfig { depth_cells: 0, ..*pml },
        };
        for (axis, n) in [("x", grid.nx), ("y", grid.ny)] {
            let depth = if axis == "x" { pml.depth_cells } else { y_pml.depth_cells };
            if 2 * depth + 2 > n {
                return Err(FdtdError::InvalidArgument(format!(
                    "{n} cells along {axis} cannot hold two {depth}-cell absorbing layers"
                )));
            }
        }

        let n = grid.cells();
        let lossy = materials.sigma.iter().any(|&s| s != 0.0);
        let mut cb = Vec::with_capacity(n);
        let mut ca = lossy.then(|| Vec::with_capacity(n));
        for k in 0..n {
            let eps = EPS0 * materials.eps_r[k];
            let loss = materials.sigma[k] * grid.dt / (2.0 * eps);
            cb.push(grid.dt / eps / (1.0 + loss));
            if let Some(ca) = ca.as_mut() {
                ca.push((1.0 - loss) / (1.0 + loss));
            }
        }
        let ch = materials.mu_r.iter().map(|&m| grid.dt / (MU0 * m)).collect();

        Ok(Self {
            grid: *grid,
            y_boundary,
            ca,
            cb,
            ch,
            pml_x: PmlProfile::new(grid.nx, grid.dx, grid.dt, pml),
            pml_y: PmlProfile::new(grid.ny, grid.dy, grid.dt, &y_pml),
            psi_ezx: vec![0.0; n],
            psi_ezy: vec![0.0; n],
            psi_hyx: vec![0.0; n],
            psi_hxy: vec![0.0; n],
            fields: FieldState::zeros(grid.nx, grid.ny),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn fields(&self) -> &FieldState {
        &self.fields
    }

    pub fn fields_mut(&mut self) -> &mut FieldState {
        &mut self.fields
    }

    /// Nodes reserved for the boundary on each side of (x, y).
    pub fn margins(&self) -> (usize, usize) {
        let y = match self.y_boundary {
            YBoundary::Absorbing => self.pml_y.depth.max(1),
            YBoundary::Periodic => 0,
        };
        (self.pml_x.depth.max(1), y)
    }

    /// Advances `H_x` and `H_y` by one step from the current `E_z`.
    pub fn step_h(&mut self) {
        let GridSpec { nx, ny, dx, dy, .. } = self.grid;
        let (idx, idy) = (1.0 / dx, 1.0 / dy);
        let periodic = self.y_boundary == YBoundary::Periodic;
        let f = &mut self.fields;
        let (ez, hx, hy, ch) = (&f.ez, &mut f.hx, &mut f.hy, &self.ch);

        for i in 0..nx {
            let row = i * ny;
            let ez_r = &ez[row..row + ny];
            let hx_r = &mut hx[row..row + ny];
            let ch_r = &ch[row..row + ny];
            for j in 0..ny - 1 {
                hx_r[j] -= ch_r[j] * ((ez_r[j + 1] - ez_r[j]) * idy);
            }
            if periodic {
                hx_r[ny - 1] -= ch_r[ny - 1] * ((ez_r[0] - ez_r[ny - 1]) * idy);
            }
        }
        for i in 0..nx - 1 {
            let row = i * ny;
            let ez_r = &ez[row..row + ny];
            let ez_n = &ez[row + ny..row + 2 * ny];
            let hy_r = &mut hy[row..row + ny];
            let ch_r = &ch[row..row + ny];
            for j in 0..ny {
                hy_r[j] += ch_r[j] * ((ez_n[j] - ez_r[j]) * idx);
            }
        }

        for range in self.pml_x.h_ranges(nx) {
            for i in range {
                let (b, c) = (self.pml_x.b_h[i], self.pml_x.c_h[i]);
                for j in 0..ny {
                    let k = i * ny + j;
                    let d = (ez[k + ny] - ez[k]) * idx;
                    self.psi_hyx[k] = b * self.psi_hyx[k] + c * d;
                    hy[k] += ch[k] * self.psi_hyx[k];
                }
            }
        }
        for range in self.pml_y.h_ranges(ny) {
            for j in range {
                let (b, c) = (self.pml_y.b_h[j], self.pml_y.c_h[j]);
                for i in 0..nx {
                    let k = i * ny + j;
                    let d = (ez[k + 1] - ez[k]) * idy;
                    self.psi_hxy[k] = b * self.psi_hxy[k] + c * d;
                    hx[k] -= ch[k] * self.psi_hxy[k];
                }
            }
        }
    }

    /// Advances `E_z` by one step from the current `H` fields.
    pub fn step_e(&mut self) {
        let GridSpec { nx, ny, dx, dy, .. } = self.grid;
        let (idx, idy) = (1.0 / dx, 1.0 / dy);
        let periodic = self.y_boundary == YBoundary::Periodic;
        let f = &mut self.fields;
        let (ez, hx, hy, cb) = (&mut f.ez, &f.hx, &f.hy, &self.cb);

        let (j0, j1) = if periodic { (0, ny) } else { (1, ny - 1) };
        for i in 1..nx - 1 {
            let row = i * ny;
            let ez_r = &mut ez[row..row + ny];
            let hy_r = &hy[row..row + ny];
            let hy_p = &hy[row - ny..row];
            let hx_r = &hx[row..row + ny];
            let cb_r = &cb[row..row + ny];
            if let Some(ca) = &self.ca {
                let ca_r = &ca[row..row + ny];
                for j in j0..j1 {
                    ez_r[j] *= ca_r[j];
                }
            }
            if periodic {
                let curl = (hy_r[0] - hy_p[0]) * idx - (hx_r[0] - hx_r[ny - 1]) * idy;
                ez_r[0] += cb_r[0] * curl;
            }
            for j in j0.max(1)..j1 {
                let curl = (hy_r[j] - hy_p[j]) * idx - (hx_r[j] - hx_r[j - 1]) * idy;
                ez_r[j] += cb_r[j] * curl;
            }
        }

        for range in self.pml_x.e_ranges(nx) {
            for i in range {
                let (b, c) = (self.pml_x.b_e[i], self.pml_x.c_e[i]);
                for j in j0..j1 {
                    let k = i * ny + j;
                    let d = (hy[k] - hy[k - ny]) * idx;
                    self.psi_ezx[k] = b * self.psi_ezx[k] + c * d;
                    ez[k] += cb[k] * self.psi_ezx[k];
                }
            }
        }
        for range in self.pml_y.e_ranges(ny) {
            for j in range {
                let (b, c) = (self.pml_y.b_e[j], self.pml_y.c_e[j]);
                for i in 1..nx - 1 {
                    let k = i * ny + j;
                    let d = (hx[k] - hx[k - 1]) * idy;
                    self.psi_ezy[k] = b * self.psi_ezy[k] + c * d;
                    ez[k] -= cb[k] * self.psi_ezy[k];
                }
            }
        }
    }

    /// One full leapfrog step: H update, E update, source injection.
    pub fn step(&mut self, source: Option<&SourceSpec>) {
        self.step_h();
        self.step_e();
        self.fields.q += 1;
        if let Some(src) = source {
            src.inject(&mut self.fields.ez, self.grid.ny, self.fields.q, self.grid.dt);
        }
    }

    /// Runs `n_steps` steps, recording the probes and calling `observe` after
    /// every step. Fields are checked for finiteness every
    /// [`FINITE_CHECK_INTERVAL`] steps and at the end.
    pub fn run<F>(
        &mut self,
        source: &SourceSpec,
        probes: &[(usize, usize)],
        mut observe: F,
    ) -> Result<ProbeRecord>
    where
        F: FnMut(&FieldState),
    {
        let (xm, ym) = self.margins();
        source.validate(&self.grid, xm, ym)?;
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        if let Some(&(i, j)) = probes.iter().find(|&&(i, j)| i >= nx || j >= ny) {
            return Err(FdtdError::InvalidArgument(format!(
                "probe ({i}, {j}) lies outside the {nx}x{ny} grid"
            )));
        }
        let n_steps = self.grid.n_steps;
        let mut record = ProbeRecord::with_capacity(probes, n_steps, self.grid.dt);
        for q in 0..n_steps {
            self.step(Some(source));
            let f = &self.fields;
            for (p, &(i, j)) in probes.iter().enumerate() {
                let k = i * ny + j;
                record.ez[p].push(f.ez[k]);
                record.hx[p].push(f.hx[k]);
                record.hy[p].push(f.hy[k]);
            }
            observe(f);
            if (q + 1) % FINITE_CHECK_INTERVAL == 0 {
                f.check_finite()?;
            }
        }
        self.fields.check_finite()?;
        Ok(record)
    }
}

/// Runs a complete simulation with absorbing boundaries on all four edges.
pub fn run_simulation(
    materials: &MaterialGrid,
    grid: &GridSpec,
    source: &SourceSpec,
    probes: &[(usize, usize)],
    pml: &PmlConfig,
) -> Result<ProbeRecord> {
    run_simulation_with(materials, grid, source, probes, pml, YBoundary::Absorbing, |_| {})
}

pub fn run_simulation_with<F>(
    materials: &MaterialGrid,
    grid: &GridSpec,
    source: &SourceSpec,
    probes: &[(usize, usize)],
    pml: &PmlConfig,
    y_boundary: YBoundary,
    observe: F,
) -> Result<ProbeRecord>
where
    F: FnMut(&FieldState),
{
    let mut sim = Simulation::new(materials, grid, pml, y_boundary)?;
    sim.run(source, probes, observe)
}
