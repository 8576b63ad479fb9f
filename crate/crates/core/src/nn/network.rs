use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::par::Executor;

use super::matrix::{affine, input_grads, weight_grads, Matrix};
use super::{dropout_mask, Activation, NnError, Result};

/// Hidden widths of the default architecture.
pub const DEFAULT_HIDDEN: [usize; 4] = [512, 256, 128, 64];
/// Dropout after each default hidden layer.
pub const DEFAULT_DROPOUT: [f64; 4] = [0.2, 0.2, 0.0, 0.0];

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out x n_in`, row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, weights: vec![0.0; n_in * n_out], biases: vec![0.0; n_out] }
    }

    pub fn weight(&self, o: usize, i: usize) -> f64 {
        self.weights[o * self.n_in + i]
    }
}

/// `F(Wx + b)` for a single input vector.
pub fn layer_forward(x: &[f64], layer: &DenseLayer, activation: Activation) -> Result<Vec<f64>> {
    if x.len() != layer.n_in {
        return Err(NnError::InvalidArgument(format!(
            "layer expects {} inputs, got {}",
            layer.n_in,
            x.len()
        )));
    }
    Ok((0..layer.n_out)
        .map(|o| {
            let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
            activation.apply(layer.biases[o] + super::matrix::dot(row, x))
        })
        .collect())
}

/// Layers applied in order; `dropout_rates[l]` acts on the output of layer `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
    pub activations: Vec<Activation>,
    pub dropout_rates: Vec<f64>,
}

impl Network {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NnError::InvalidArgument(m));
        let n = self.layers.len();
        if n == 0 {
            return bad("network has no layers".into());
        }
        if self.activations.len() != n || self.dropout_rates.len() != n {
            return bad("one activation and one dropout rate per layer are required".into());
        }
        for (k, l) in self.layers.iter().enumerate() {
            if l.n_in == 0 || l.n_out == 0 {
                return bad(format!("layer {k} has a zero dimension"));
            }
            if l.weights.len() != l.n_in * l.n_out || l.biases.len() != l.n_out {
                return bad(format!("layer {k} parameter shapes do not match {}x{}", l.n_out, l.n_in));
            }
            if k > 0 && self.layers[k - 1].n_out != l.n_in {
                return bad(format!(
                    "layer {k} takes {} inputs but layer {} produces {}",
                    l.n_in,
                    k - 1,
                    self.layers[k - 1].n_out
                ));
            }
            if !l.weights.iter().chain(&l.biases).all(|v| v.is_finite()) {
                return bad(format!("layer {k} holds non-finite parameters"));
            }
            if !(0.0..1.0).contains(&self.dropout_rates[k]) {
                return bad(format!("layer {k} dropout {} is outside [0, 1)", self.dropout_rates[k]));
            }
        }
        if self.activations[n - 1] != Activation::Linear {
            return bad("the output layer must be linear".into());
        }
        if self.dropout_rates[n - 1] != 0.0 {
            return bad("the output layer cannot use dropout".into());
        }
        let head = self.output_len();
        if head != 5 && head != 8 {
            return bad(format!("output width must be 5 or 8, got {head}"));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out)
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_len()];
        w.extend(self.layers.iter().map(|l| l.n_out));
        w
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }
}

/// Builds a network with ReLU hidden layers and a linear head.
///
/// ReLU layers use He-uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`;
/// the head uses Glorot-uniform. Biases start at zero.
pub fn init_network(widths: &[usize], dropout_rates: &[f64], seed: u64) -> Result<Network> {
    if widths.len() < 2 || dropout_rates.len() != widths.len() - 1 {
        return Err(NnError::InvalidArgument(format!(
            "{} widths need {} dropout rates, got {}",
            widths.len(),
            widths.len().saturating_sub(1),
            dropout_rates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = widths.len() - 1;
    let mut layers = Vec::with_capacity(n);
    let mut activations = Vec::with_capacity(n);
    for k in 0..n {
        let (n_in, n_out) = (widths[k], widths[k + 1]);
        if n_in == 0 || n_out == 0 {
            return Err(NnError::InvalidArgument(format!("layer {k} has a zero dimension")));
        }
        let act = if k + 1 == n { Activation::Linear } else { Activation::Relu };
        let limit = match act {
            Activation::Relu => (6.0 / n_in as f64).sqrt(),
            Activation::Linear => (6.0 / (n_in + n_out) as f64).sqrt(),
        };
        let dist = Uniform::new_inclusive(-limit, limit);
        let mut layer = DenseLayer::zeros(n_in, n_out);
        layer.weights.iter_mut().for_each(|w| *w = dist.sample(&mut rng));
        layers.push(layer);
        activations.push(act);
    }
    // rates are stored as f32 in checkpoints
    let dropout_rates = dropout_rates.iter().map(|&r| r as f32 as f64).collect();
    let net = Network { layers, activations, dropout_rates };
    net.validate()?;
    Ok(net)
}

/// Intermediate values of one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer.
    pub inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pub pre: Vec<Matrix>,
    /// Dropout factors per layer (training passes with a non-zero rate).
    pub masks: Vec<Option<Vec<f64>>>,
}

fn check_input(net: &Network, x: &Matrix) -> Result<()> {
    if x.cols != net.input_len() {
        return Err(NnError::InvalidArgument(format!(
            "network expects {} features, got {}",
            net.input_len(),
            x.cols
        )));
    }
    if x.rows == 0 {
        return Err(NnError::InvalidArgument("empty batch".into()));
    }
    Ok(())
}

/// Forward pass over a batch. Dropout masks are drawn from `rng` in layer,
/// then row-major order.
pub fn forward<R: Rng + ?Sized>(
    net: &Network,
    x: &Matrix,
    training: bool,
    rng: &mut R,
    exec: &Executor,
) -> Result<(Matrix, ForwardCache)> {
    check_input(net, x)?;
    let n = net.layers.len();
    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(n),
        pre: Vec::with_capacity(n),
        masks: Vec::with_capacity(n),
    };
    let mut a = x.clone();
    for (k, layer) in net.layers.iter().enumerate() {
        let z = affine(&a, &layer.weights, &layer.biases, exec);
        let act = net.activations[k];
        let mut out = z.clone();
        out.data.iter_mut().for_each(|v| *v = act.apply(*v));
        let rate = net.dropout_rates[k];
        let mask = if training && rate > 0.0 {
            let m = dropout_mask(out.data.len(), rate, rng);
            out.data.iter_mut().zip(&m).for_each(|(v, f)| *v *= f);
            Some(m)
        } else {
            None
        };
        cache.inputs.push(std::mem::replace(&mut a, out));
        cache.pre.push(z);
        cache.masks.push(mask);
    }
    Ok((a, cache))
}

/// Inference pass (dropout off).
pub fn predict(net: &Network, x: &Matrix, exec: &Executor) -> Result<Matrix> {
    check_input(net, x)?;
    let mut a = x.clone();
    for (k, layer) in net.layers.iter().enumerate() {
        a = affine(&a, &layer.weights, &layer.biases, exec);
        let act = net.activations[k];
        a.data.iter_mut().for_each(|v| *v = act.apply(*v));
    }
    Ok(a)
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weights.iter().chain(&self.biases).flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite())
    }
}

/// Gradients of a loss with respect to every parameter, given the loss
/// gradient `dy` with respect to the batch output of the same pass.
pub fn backward(net: &Network, cache: &ForwardCache, dy: &Matrix, exec: &Executor) -> Result<Gradients> {
    let n = net.layers.len();
    if cache.pre.len() != n || cache.inputs.len() != n || cache.masks.len() != n {
        return Err(NnError::InvalidArgument("cache does not belong to this network".into()));
    }
    for (k, l) in net.layers.iter().enumerate() {
        if cache.pre[k].cols != l.n_out || cache.inputs[k].cols != l.n_in || cache.pre[k].rows != dy.rows {
            return Err(NnError::InvalidArgument(format!("cache shapes do not match layer {k}")));
        }
    }
    if dy.cols != net.output_len() {
        return Err(NnError::InvalidArgument(format!(
            "output gradient has {} columns, network produces {}",
            dy.cols,
            net.output_len()
        )));
    }
    let mut grads = Gradients::zeros_like(net);
    let mut d = dy.clone();
    for k in (0..n).rev() {
        if let Some(m) = &cache.masks[k] {
            d.data.iter_mut().zip(m).for_each(|(g, f)| *g *= f);
        }
        let act = net.activations[k];
        d.data.iter_mut().zip(&cache.pre[k].data).for_each(|(g, z)| *g *= act.derivative(*z));
        let (dw, db) = weight_grads(&d, &cache.inputs[k], exec);
        grads.weights[k] = dw;
        grads.biases[k] = db;
        if k > 0 {
            d = input_grads(&d, &net.layers[k].weights, net.layers[k].n_in, exec);
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: Vec<f64>, b: Vec<f64>, n_in: usize) -> DenseLayer {
        DenseLayer { n_in, n_out: b.len(), weights: w, biases: b }
    }

    #[test]
    fn layer_forward_examples() {
        let l = single(vec![1.0, 2.0], vec![1.0], 2);
        assert_eq!(layer_forward(&[3.0, 4.0], &l, Activation::Linear).unwrap(), vec![12.0]);
        let id = single(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], 2);
        assert_eq!(layer_forward(&[-1.0, 2.0], &id, Activation::Relu).unwrap(), vec![0.0, 2.0]);
        let b_only = single(vec![0.0; 4], vec![-1.5, 2.5], 2);
        assert_eq!(layer_forward(&[7.0, 9.0], &b_only, Activation::Relu).unwrap(), vec![0.0, 2.5]);
        assert!(layer_forward(&[1.0], &l, Activation::Linear).is_err());
    }

    #[test]
    fn init_is_seeded_and_zero_biased() {
        let a = init_network(&[30, 16, 5], &[0.2, 0.0], 4).unwrap();
        assert_eq!(a, init_network(&[30, 16, 5], &[0.2, 0.0], 4).unwrap());
        assert_ne!(a, init_network(&[30, 16, 5], &[0.2, 0.0], 5).unwrap());
        assert!(a.layers.iter().all(|l| l.biases.iter().all(|&b| b == 0.0)));
        assert_eq!(a.activations, vec![Activation::Relu, Activation::Linear]);
        assert_eq!(a.widths(), vec![30, 16, 5]);
    }

    #[test]
    fn he_variance() {
        let net = init_network(&[512, 512, 5], &[0.0, 0.0], 9).unwrap();
        let w = &net.layers[0].weights;
        let m = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        let want = 2.0 / 512.0;
        assert!((var - want).abs() / want < 0.10, "{var} vs {want}");
    }

    #[test]
    fn bad_architectures() {
        assert!(init_network(&[4, 3], &[0.0], 0).is_err());
        assert!(init_network(&[4, 5], &[0.1], 0).is_err());
        assert!(init_network(&[4, 6, 5], &[1.0, 0.0], 0).is_err());
        assert!(init_network(&[4, 6, 5], &[0.0], 0).is_err());
        let mut net = init_network(&[4, 6, 5], &[0.0, 0.0], 0).unwrap();
        net.layers[1].n_in = 7;
        assert!(net.validate().is_err());
    }

    #[test]
    fn inference_is_pure() {
        let net = init_network(&[6, 8, 8], &[0.5, 0.0], 1).unwrap();
        let x = Matrix::from_rows(&[vec![0.3, -0.2, 1.0, 0.0, 0.5, -1.0]]);
        let exec = Executor::sequential();
        let a = predict(&net, &x, &exec).unwrap();
        assert_eq!(a, predict(&net, &x, &exec).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (b, cache) = forward(&net, &x, false, &mut rng, &exec).unwrap();
        assert_eq!(a, b);
        assert!(cache.masks.iter().all(|m| m.is_none()));
    }

    #[test]
    fn hand_derived_two_parameter_gradient() {
        // y_hat = w x + b, L = (ln(y+1) - ln(y_hat+1))^2 over one output
        let (w, b, x, y) = (0.7, 0.2, 1.5, 3.0);
        let net = Network {
            layers: vec![DenseLayer { n_in: 1, n_out: 5, weights: vec![w; 5], biases: vec![b; 5] }],
            activations: vec![Activation::Linear],
            dropout_rates: vec![0.0],
        };
        let exec = Executor::sequential();
        let xm = Matrix::from_rows(&[vec![x]]);
        let (yh, cache) = forward(&net, &xm, true, &mut ChaCha8Rng::seed_from_u64(0), &exec).unwrap();
        let dy = super::super::msle_grad(&[y; 5], &yh.data).unwrap();
        let g = backward(&net, &cache, &Matrix { rows: 1, cols: 5, data: dy }, &exec).unwrap();
        let p = w * x + b;
        let dl_dp = -2.0 / 5.0 * ((y + 1.0f64).ln() - (p + 1.0f64).ln()) / (p + 1.0);
        for o in 0..5 {
            assert!((g.weights[0][o] - dl_dp * x).abs() < 1e-12);
            assert!((g.biases[0][o] - dl_dp).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_output_gradient() {
        let net = init_network(&[3, 4, 5], &[0.3, 0.0], 2).unwrap();
        let exec = Executor::sequential();
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]]);
        let (_, cache) = forward(&net, &x, true, &mut ChaCha8Rng::seed_from_u64(1), &exec).unwrap();
        let g = backward(&net, &cache, &Matrix::zeros(2, 5), &exec).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert!(backward(&net, &cache, &Matrix::zeros(2, 4), &exec).is_err());
    }
}
