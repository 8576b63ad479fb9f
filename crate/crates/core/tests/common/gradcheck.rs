//! Backprop versus central finite differences on small networks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twr::nn::{backward, forward, init_network, msle_grad, msle_loss, Matrix, Network};
use twr::par::Executor;

const STEP: f64 = 1e-5;
/// Pre-activations closer than this to a ReLU kink make the finite
/// difference meaningless.
const KINK_MARGIN: f64 = 1e-3;

pub struct Case {
    pub net: Network,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub training: bool,
    pub mask_seed: u64,
}

impl Case {
    pub fn loss(&self, net: &Network) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.mask_seed);
        let (out, _) = forward(net, &self.x, self.training, &mut rng, &Executor::sequential()).unwrap();
        msle_loss(&self.y, &out.data).unwrap()
    }

    pub fn near_kink(&self) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(self.mask_seed);
        let (out, cache) = forward(&self.net, &self.x, self.training, &mut rng, &Executor::sequential()).unwrap();
        let hidden = cache.pre[..cache.pre.len() - 1].iter().flat_map(|m| m.data.iter());
        hidden.chain(out.data.iter()).any(|z| z.abs() < KINK_MARGIN)
    }

    /// Largest relative disagreement between backprop and central differences.
    pub fn max_rel_error(&self) -> f64 {
        let exec = Executor::sequential();
        let mut rng = ChaCha8Rng::seed_from_u64(self.mask_seed);
        let (out, cache) = forward(&self.net, &self.x, self.training, &mut rng, &exec).unwrap();
        let dy = Matrix { rows: out.rows, cols: out.cols, data: msle_grad(&self.y, &out.data).unwrap() };
        let g = backward(&self.net, &cache, &dy, &exec).unwrap();

        let mut worst = 0.0f64;
        let mut net = self.net.clone();
        for k in 0..net.layers.len() {
            for which in 0..2 {
                let n = if which == 0 { net.layers[k].weights.len() } else { net.layers[k].biases.len() };
                for i in 0..n {
                    let orig = *param_mut(&mut net, k, which, i);
                    let mut at = |d: f64| {
                        *param_mut(&mut net, k, which, i) = orig + d * STEP;
                        self.loss(&net)
                    };
                    // fourth-order central difference
                    let numeric = (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * STEP);
                    *param_mut(&mut net, k, which, i) = orig;
                    let analytic = if which == 0 { g.weights[k][i] } else { g.biases[k][i] };
                    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
                    worst = worst.max((analytic - numeric).abs() / scale);
                }
            }
        }
        worst
    }
}

fn param_mut(net: &mut Network, layer: usize, which: usize, i: usize) -> &mut f64 {
    if which == 0 {
        &mut net.layers[layer].weights[i]
    } else {
        &mut net.layers[layer].biases[i]
    }
}

pub fn case(widths: [usize; 4], batch: usize, seed: u64, training: bool) -> Case {
    let rates = if training { [0.3, 0.2, 0.0] } else { [0.0, 0.0, 0.0] };
    let mut net = init_network(&widths, &rates, seed).unwrap();
    // non-zero biases so the head starts away from the clip
    for (k, l) in net.layers.iter_mut().enumerate() {
        for (o, b) in l.biases.iter_mut().enumerate() {
            *b = 0.05 * ((o * 7 + k * 3 + seed as usize) % 5) as f64 + if k == 2 { 1.5 } else { 0.0 };
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    use rand::Rng;
    let x = Matrix {
        rows: batch,
        cols: widths[0],
        data: (0..batch * widths[0]).map(|_| rng.gen_range(-1.5..1.5)).collect(),
    };
    let y = (0..batch * widths[3]).map(|_| rng.gen_range(0.0..4.0)).collect();
    Case { net, x, y, training, mask_seed: seed.wrapping_mul(31) }
}
