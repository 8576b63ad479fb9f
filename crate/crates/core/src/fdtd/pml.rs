use super::{FdtdError, Result, EPS0, MU0};

/// Absorbing layer settings shared by every edge of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlConfig {
    /// Layer thickness in cells. Zero leaves bare conducting walls.
    pub depth_cells: usize,
    /// Exponent of the polynomial conductivity grading.
    pub grading_order: f64,
    /// Theoretical normal-incidence reflection of the layer.
    pub target_reflection: f64,
}

impl Default for PmlConfig {
    fn default() -> Self {
        Self { depth_cells: 10, grading_order: 3.0, target_reflection: 1e-6 }
    }
}

impl PmlConfig {
    /// No absorber: the outermost nodes act as a perfect electric conductor.
    pub fn none() -> Self {
        Self { depth_cells: 0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth_cells != 0 && self.depth_cells < 8 {
            return Err(FdtdError::InvalidArgument(format!(
                "PML depth must be 0 or at least 8 cells, got {}",
                self.depth_cells
            )));
        }
        if !(2.0..=4.0).contains(&self.grading_order) {
            return Err(FdtdError::InvalidArgument(format!(
                "PML grading order must lie in [2, 4], got {}",
                self.grading_order
            )));
        }
        if !(self.target_reflection > 0.0 && self.target_reflection <= 1e-3) {
            return Err(FdtdError::InvalidArgument(format!(
                "PML target reflection must lie in (0, 1e-3], got {}",
                self.target_reflection
            )));
        }
        Ok(())
    }

    /// Peak conductivity giving `target_reflection` for a layer of the
    /// configured depth at cell size `spacing`.
    pub fn sigma_max(&self, spacing: f64) -> f64 {
        if self.depth_cells == 0 {
            return 0.0;
        }
        let eta0 = (MU0 / EPS0).sqrt();
        let thickness = self.depth_cells as f64 * spacing;
        -(self.grading_order + 1.0) * self.target_reflection.ln() / (2.0 * eta0 * thickness)
    }
}

/// CPML recursion coefficients along one axis.
///
/// `b_e`/`c_e` are sampled at the integer (E) nodes, `b_h`/`c_h` at the half
/// nodes `k + ½`. Outside the layer `b = 1`, `c = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PmlProfile {
    pub depth: usize,
    pub b_e: Vec<f64>,
    pub c_e: Vec<f64>,
    pub b_h: Vec<f64>,
    pub c_h: Vec<f64>,
}

impl PmlProfile {
    pub fn new(n: usize, spacing: f64, dt: f64, config: &PmlConfig) -> Self {
        let depth = config.depth_cells;
        let mut profile = Self {
            depth,
            b_e: vec![1.0; n],
            c_e: vec![0.0; n],
            b_h: vec![1.0; n],
            c_h: vec![0.0; n],
        };
        if depth == 0 {
            return profile;
        }
        let sigma_max = config.sigma_max(spacing);
        // Depth into the layer in half cells, measured from its inner face.
        let sigma = |half_cells: i64| -> f64 {
            if half_cells <= 0 {
                return 0.0;
            }
            let frac = half_cells as f64 / (2 * depth) as f64;
            sigma_max * frac.powf(config.grading_order)
        };
        let coeffs = |s: f64| -> (f64, f64) {
            let b = (-s * dt / EPS0).exp();
            (b, b - 1.0)
        };
        let (d, n_i) = (depth as i64, n as i64);
        for k in 0..n {
            let k_i = k as i64;
            let e_depth = (2 * (d - k_i)).max(2 * (k_i - (n_i - 1 - d)));
            let h_depth = (2 * (d - k_i) - 1).max(2 * (k_i - (n_i - 1 - d)) + 1);
            (profile.b_e[k], profile.c_e[k]) = coeffs(sigma(e_depth));
            (profile.b_h[k], profile.c_h[k]) = coeffs(sigma(h_depth));
        }
        profile
    }

    /// Index ranges of the E nodes that carry an auxiliary field.
    pub fn e_ranges(&self, n: usize) -> [std::ops::Range<usize>; 2] {
        if self.depth == 0 {
            return [0..0, 0..0];
        }
        [1..self.depth, n - self.depth..n - 1]
    }

    /// Index ranges of the H half-nodes that carry an auxiliary field.
    pub fn h_ranges(&self, n: usize) -> [std::ops::Range<usize>; 2] {
        if self.depth == 0 {
            return [0..0, 0..0];
        }
        [0..self.depth, n - 1 - self.depth..n - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(PmlConfig::default().validate().is_ok());
        assert!(PmlConfig::none().validate().is_ok());
        assert!(PmlConfig { depth_cells: 5, ..Default::default() }.validate().is_err());
        assert!(PmlConfig { grading_order: 5.0, ..Default::default() }.validate().is_err());
        assert!(PmlConfig { target_reflection: 1e-2, ..Default::default() }.validate().is_err());
        assert!(PmlConfig { target_reflection: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn profile_is_mirror_symmetric_and_zero_inside() {
        let cfg = PmlConfig::default();
        let n = 57;
        let p = PmlProfile::new(n, 1e-3, 1e-12, &cfg);
        for k in 0..n {
            assert_eq!(p.b_e[k], p.b_e[n - 1 - k]);
            if k + 1 < n {
                assert_eq!(p.b_h[k], p.b_h[n - 2 - k]);
            }
        }
        for k in cfg.depth_cells..n - cfg.depth_cells {
            assert_eq!(p.b_e[k], 1.0);
            assert_eq!(p.c_e[k], 0.0);
        }
        // grading grows toward the outer edge
        assert!(p.b_e[1] < p.b_e[5]);
        assert!(p.b_h[0] < p.b_h[1]);
    }

    #[test]
    fn theoretical_reflection_matches_target() {
        let cfg = PmlConfig::default();
        let dx = 2e-3;
        let s_max = cfg.sigma_max(dx);
        let eta0 = (MU0 / EPS0).sqrt();
        let d = cfg.depth_cells as f64 * dx;
        let r = (-2.0 * eta0 * s_max * d / (cfg.grading_order + 1.0)).exp();
        assert!((r - cfg.target_reflection).abs() / cfg.target_reflection < 1e-12);
    }
}
