use std::f64::consts::PI;

use num_complex::Complex64;

use super::C0;

/// Magnitude of the normal-incidence reflection coefficient of a lossless
/// dielectric slab in vacuum.
pub fn analytic_slab_reflection(eps_r: f64, thickness: f64, frequency: f64) -> f64 {
    let n = eps_r.sqrt();
    let r12 = (1.0 - n) / (1.0 + n);
    let beta = 2.0 * PI * frequency * n / C0;
    let phase = Complex64::from_polar(1.0, -2.0 * beta * thickness);
    let num = r12 * (Complex64::new(1.0, 0.0) - phase);
    let den = Complex64::new(1.0, 0.0) - r12 * r12 * phase;
    (num / den).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn in_slab_wavelength(eps_r: f64, f: f64) -> f64 {
        C0 / (f * eps_r.sqrt())
    }

    #[test]
    fn half_wave_slab_is_transparent() {
        let lam = in_slab_wavelength(4.0, 3e9);
        assert!(analytic_slab_reflection(4.0, lam / 2.0, 3e9) < 1e-12);
    }

    #[test]
    fn quarter_wave_slab_eps4() {
        // r12 = -1/3: |R| = |2 r12 / (1 + r12^2)| = (2/3) / (10/9) = 0.6
        let lam = in_slab_wavelength(4.0, 3e9);
        let r = analytic_slab_reflection(4.0, lam / 4.0, 3e9);
        assert!((r - 0.6).abs() < 1e-12, "{r}");
    }

    #[test]
    fn no_contrast_no_reflection() {
        for d in [0.01, 0.137, 2.5] {
            assert_eq!(analytic_slab_reflection(1.0, d, 3e9), 0.0);
        }
    }
}
