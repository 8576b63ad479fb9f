//! Dense feed-forward regression network in 64-bit arithmetic.
//!
//! Activations are batch-major [`Matrix`] values (one row per sample).
//! Layer products are split across output units on an [`Executor`]; every
//! output element is summed by one thread in a fixed order, so results do not
//! depend on the worker count.
//!
//! [`Executor`]: crate::par::Executor

mod adam;
mod checkpoint;
mod matrix;
mod network;

use rand::Rng;
use thiserror::Error;

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use matrix::Matrix;
pub use network::{
    backward, forward, init_network, layer_forward, predict, DenseLayer, ForwardCache, Gradients,
    Network, DEFAULT_DROPOUT, DEFAULT_HIDDEN,
};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not a model checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {MODEL_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("checkpoint truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Linear => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Linear),
            _ => None,
        }
    }

    pub fn apply(self, u: f64) -> f64 {
        match self {
            Activation::Relu => relu(u),
            Activation::Linear => linear(u),
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Activation::Relu => relu_grad(u),
            Activation::Linear => 1.0,
        }
    }
}

pub fn relu(u: f64) -> f64 {
    if u > 0.0 {
        u
    } else {
        0.0
    }
}

/// Derivative of [`relu`]; zero at the kink.
pub fn relu_grad(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn linear(u: f64) -> f64 {
    u
}

/// Inverted dropout. In training each unit is zeroed with probability `rate`
/// and survivors are scaled by `1/(1-rate)`; the returned mask holds the
/// factor applied to each unit. Outside training the input passes through.
pub fn dropout_forward<R: Rng + ?Sized>(
    x: &[f64],
    rate: f64,
    rng: &mut R,
    training: bool,
) -> (Vec<f64>, Option<Vec<f64>>) {
    if !training {
        return (x.to_vec(), None);
    }
    let mask = dropout_mask(x.len(), rate, rng);
    let y = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
    (y, Some(mask))
}

pub(crate) fn dropout_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    if rate <= 0.0 {
        return vec![1.0; n];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..n).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect()
}

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(NnError::InvalidArgument(format!(
            "label/prediction lengths {} and {} must match and be non-zero",
            y.len(),
            y_hat.len()
        )));
    }
    Ok(())
}

/// Mean squared logarithmic error; predictions are clipped at zero.
pub fn msle_loss(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let s: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(a, p)| {
            let d = a.ln_1p() - p.max(0.0).ln_1p();
            d * d
        })
        .sum();
    Ok(s / y.len() as f64)
}

/// Gradient of [`msle_loss`] with respect to the raw predictions. Below zero
/// the clip blocks the gradient; at exactly zero it passes.
pub fn msle_grad(y: &[f64], y_hat: &[f64]) -> Result<Vec<f64>> {
    check_pair(y, y_hat)?;
    let n = y.len() as f64;
    Ok(y.iter()
        .zip(y_hat)
        .map(|(a, &p)| {
            if p < 0.0 {
                0.0
            } else {
                -2.0 / n * (a.ln_1p() - p.ln_1p()) / (p + 1.0)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    #[test]
    fn activations() {
        assert_eq!(relu(-3.0), 0.0);
        assert_eq!(relu(5.0), 5.0);
        assert_eq!(linear(5.0), 5.0);
        assert_eq!(relu(0.0), 0.0);
        assert_eq!(relu_grad(0.0), 0.0);
        assert_eq!(Activation::Linear.derivative(-2.0), 1.0);
    }

    #[test]
    fn msle_examples() {
        assert_eq!(msle_loss(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((msle_loss(&[E - 1.0], &[0.0]).unwrap() - 1.0).abs() < 1e-15);
        let l = msle_loss(&[0.0, 0.0], &[E - 1.0, E * E - 1.0]).unwrap();
        assert!((l - 2.5).abs() < 1e-14);
        assert!(msle_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert!(msle_grad(&[1.0], &[]).is_err());
    }

    #[test]
    fn msle_clips_negative_predictions() {
        assert_eq!(msle_loss(&[2.0], &[-5.0]).unwrap(), msle_loss(&[2.0], &[0.0]).unwrap());
        assert_eq!(msle_grad(&[2.0], &[-5.0]).unwrap(), vec![0.0]);
        assert!(msle_grad(&[2.0], &[0.0]).unwrap()[0] < 0.0);
    }

    #[test]
    fn msle_grad_matches_closed_form() {
        let (y, p) = ([3.0, 0.5], [1.0, 2.0]);
        let g = msle_grad(&y, &p).unwrap();
        for k in 0..2 {
            let want = -(y[k] + 1.0f64).ln() / (p[k] + 1.0) + (p[k] + 1.0f64).ln() / (p[k] + 1.0);
            assert!((g[k] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn dropout_identity_cases() {
        let x = [1.0, -2.0, 3.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (y, m) = dropout_forward(&x, 0.0, &mut rng, true);
        assert_eq!(y, x);
        assert_eq!(m.unwrap(), vec![1.0; 3]);
        let (y, m) = dropout_forward(&x, 0.9, &mut rng, false);
        assert_eq!(y, x);
        assert!(m.is_none());
    }

    #[test]
    fn dropout_statistics() {
        let x: Vec<f64> = (0..10_000).map(|k| 1.0 + (k % 10) as f64 * 0.1).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (y, mask) = dropout_forward(&x, 0.5, &mut rng, true);
        let kept = mask.unwrap().iter().filter(|&&m| m > 0.0).count() as f64 / x.len() as f64;
        assert!((0.47..=0.53).contains(&kept), "kept {kept}");
        let mx = x.iter().sum::<f64>() / x.len() as f64;
        let my = y.iter().sum::<f64>() / y.len() as f64;
        assert!((my - mx).abs() / mx < 0.03, "{my} vs {mx}");
    }
}
