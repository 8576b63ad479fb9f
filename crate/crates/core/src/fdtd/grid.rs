use super::{FdtdError, Result, C0, COURANT_SAFETY};

/// Largest stable time step for the 2D leapfrog scheme in vacuum.
pub fn courant_dt(dx: f64, dy: f64) -> Result<f64> {
    if !(dx > 0.0 && dy > 0.0) || !dx.is_finite() || !dy.is_finite() {
        return Err(FdtdError::InvalidArgument(format!(
            "grid spacing must be positive, got dx={dx}, dy={dy}"
        )));
    }
    Ok(1.0 / (C0 * (1.0 / (dx * dx) + 1.0 / (dy * dy)).sqrt()))
}

/// Discretization of the full computational grid, PML included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, dt: f64, n_steps: usize) -> Result<Self> {
        let grid = Self { nx, ny, dx, dy, dt, n_steps };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid whose time step is the Courant limit times [`COURANT_SAFETY`].
    pub fn with_courant(nx: usize, ny: usize, dx: f64, dy: f64, n_steps: usize) -> Result<Self> {
        let dt = COURANT_SAFETY * courant_dt(dx, dy)?;
        Self::new(nx, ny, dx, dy, dt, n_steps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 8 || self.ny < 8 {
            return Err(FdtdError::InvalidArgument(format!(
                "grid must be at least 8x8 cells, got {}x{}",
                self.nx, self.ny
            )));
        }
        let limit = courant_dt(self.dx, self.dy)?;
        if !(self.dt > 0.0) || self.dt > limit {
            return Err(FdtdError::InvalidArgument(format!(
                "time step {:e} s violates the Courant limit {:e} s",
                self.dt, limit
            )));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    /// Checks that the shortest wavelength (at `frequency` inside a medium of
    /// `max_eps_r`) spans at least `min_cells` cells along both axes.
    pub fn check_resolution(&self, max_eps_r: f64, frequency: f64, min_cells: f64) -> Result<()> {
        let wavelength = C0 / (frequency * max_eps_r.max(1.0).sqrt());
        let cells = wavelength / self.dx.max(self.dy);
        if cells + 1e-9 < min_cells {
            return Err(FdtdError::InvalidArgument(format!(
                "grid resolves the shortest wavelength ({wavelength:.4e} m at eps_r={max_eps_r}) \
                 with {cells:.2} cells, need at least {min_cells}"
            )));
        }
        Ok(())
    }
}

/// Per-node material parameters, laid out like the field arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialGrid {
    pub nx: usize,
    pub ny: usize,
    pub eps_r: Vec<f64>,
    pub mu_r: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl MaterialGrid {
    pub fn vacuum(nx: usize, ny: usize) -> Self {
        let n = nx * ny;
        Self { nx, ny, eps_r: vec![1.0; n], mu_r: vec![1.0; n], sigma: vec![0.0; n] }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let n = grid.cells();
        if self.nx != grid.nx
            || self.ny != grid.ny
            || self.eps_r.len() != n
            || self.mu_r.len() != n
            || self.sigma.len() != n
        {
            return Err(FdtdError::InvalidArgument(format!(
                "material grid {}x{} does not match simulation grid {}x{}",
                self.nx, self.ny, grid.nx, grid.ny
            )));
        }
        if let Some(k) = self.eps_r.iter().position(|&e| !(e >= 1.0) || !e.is_finite()) {
            return Err(FdtdError::InvalidArgument(format!(
                "relative permittivity at cell {k} is {} (must be >= 1)",
                self.eps_r[k]
            )));
        }
        if let Some(k) = self.mu_r.iter().position(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(FdtdError::InvalidArgument(format!(
                "relative permeability at cell {k} is {}",
                self.mu_r[k]
            )));
        }
        if let Some(k) = self.sigma.iter().position(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(FdtdError::InvalidArgument(format!(
                "conductivity at cell {k} is {}",
                self.sigma[k]
            )));
        }
        Ok(())
    }

    pub fn max_eps_r(&self) -> f64 {
        self.eps_r.iter().copied().fold(1.0, f64::max)
    }

    #[inline]
    pub fn eps_at(&self, i: usize, j: usize) -> f64 {
        self.eps_r[i * self.ny + j]
    }

    /// Sets the relative permittivity on every node of `[i0, i1) x [j0, j1)`.
    pub fn fill_eps(&mut self, i0: usize, i1: usize, j0: usize, j1: usize, eps_r: f64) {
        for i in i0..i1.min(self.nx) {
            let row = &mut self.eps_r[i * self.ny..(i + 1) * self.ny];
            for v in &mut row[j0.min(self.ny)..j1.min(self.ny)] {
                *v = eps_r;
            }
        }
    }
}

/// Field arrays of one simulation.
///
/// All three arrays are `nx * ny`, indexed `i * ny + j`. `hx[i][j]` lives at
/// `(i, j + ½)` and `hy[i][j]` at `(i + ½, j)`. The last `hx` column and the
/// last `hy` row sit outside a bounded axis and stay zero; on a periodic y
/// axis the last `hx` column is the wrap-around sample between `ny - 1` and `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub nx: usize,
    pub ny: usize,
    pub ez: Vec<f64>,
    pub hx: Vec<f64>,
    pub hy: Vec<f64>,
    /// Number of completed time steps.
    pub q: usize,
}

impl FieldState {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        let n = nx * ny;
        Self { nx, ny, ez: vec![0.0; n], hx: vec![0.0; n], hy: vec![0.0; n], q: 0 }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn is_finite(&self) -> bool {
        self.ez.iter().chain(&self.hx).chain(&self.hy).all(|v| v.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(FdtdError::Unstable { step: self.q })
        }
    }

    pub fn max_abs_ez(&self) -> f64 {
        self.ez.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
