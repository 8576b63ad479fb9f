use super::{Gradients, Network, NnError, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Moment estimates for every parameter of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        Self {
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    /// One bias-corrected Adam update of `net` in place.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients, lr: f64) -> Result<()> {
        self.step_scaled(net, grads, lr, None)
    }

    /// Adam on rescaled parameters `theta = s * u`: moments see `s * g` and
    /// the update `du` is applied as `s * du`. `scales` holds one factor per
    /// output row of each layer (weights and bias of that row).
    pub fn step_scaled(
        &mut self,
        net: &mut Network,
        grads: &Gradients,
        lr: f64,
        scales: Option<&[Vec<f64>]>,
    ) -> Result<()> {
        if !(lr > 0.0) {
            return Err(NnError::InvalidArgument(format!("learning rate must be positive, got {lr}")));
        }
        let shapes_match = |g: &Gradients| {
            g.weights.len() == net.layers.len()
                && net.layers.iter().enumerate().all(|(k, l)| {
                    g.weights[k].len() == l.weights.len() && g.biases[k].len() == l.biases.len()
                })
        };
        if !shapes_match(grads) || !shapes_match(&self.m) {
            return Err(NnError::InvalidArgument("gradient shapes do not match the network".into()));
        }
        if let Some(sc) = scales {
            if sc.len() != net.layers.len() || sc.iter().zip(&net.layers).any(|(s, l)| s.len() != l.n_out) {
                return Err(NnError::InvalidArgument("one scale per output row is required".into()));
            }
        }
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powf(self.t as f64);
        let c2 = 1.0 - b2.powf(self.t as f64);
        for (k, layer) in net.layers.iter_mut().enumerate() {
            let row_len = [layer.n_in, 1];
            let groups = [
                (&mut layer.weights, &grads.weights[k], &mut self.m.weights[k], &mut self.v.weights[k]),
                (&mut layer.biases, &grads.biases[k], &mut self.m.biases[k], &mut self.v.biases[k]),
            ];
            for (gi, (theta, g, m, v)) in groups.into_iter().enumerate() {
                for i in 0..theta.len() {
                    let s = scales.map_or(1.0, |sc| sc[k][i / row_len[gi]]);
                    let gs = s * g[i];
                    m[i] = b1 * m[i] + (1.0 - b1) * gs;
                    v[i] = b2 * v[i] + (1.0 - b2) * gs * gs;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    theta[i] -= s * lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
