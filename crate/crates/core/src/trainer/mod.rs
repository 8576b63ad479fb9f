//! Mini-batch training, evaluation metrics and loss curves.

mod curves;
mod metrics;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, Normalizer, Sample};
use crate::nn::{
    backward, forward, init_network, msle_grad, msle_loss, predict, AdamState, Matrix, Network, NnError,
};
use crate::par::Executor;
use crate::scene::Interval;

pub use curves::{emit_curves, read_curves, render_svg, CURVE_HEADER};
pub use metrics::{evaluate, mean_predictor_baseline, tolerance_accuracy, EvalReport};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Accuracy tolerance as a fraction of each label's range.
    pub tolerance_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 20, learning_rate: 0.001, epochs: 200, seed: 0, shuffle: true, tolerance_fraction: 0.05 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::InvalidArgument(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.tolerance_fraction > 0.0 && self.tolerance_fraction < 1.0) {
            return bad(format!("tolerance_fraction must be in (0, 1), got {}", self.tolerance_fraction));
        }
        Ok(())
    }
}

/// Network-ready features and physical labels of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub scene_ids: Vec<u64>,
    pub x: Matrix,
    pub y: Matrix,
}

impl LabeledSet {
    /// Stacks samples, normalizing features with `norm` when given.
    pub fn from_samples(samples: &[&Sample], norm: Option<&Normalizer>) -> Result<Self> {
        let first = samples.first().ok_or_else(|| TrainError::InvalidArgument("empty split".into()))?;
        let (nf, nl) = (first.features.len(), first.labels.len());
        if let Some(n) = norm {
            if n.len() != nf {
                return Err(TrainError::InvalidArgument(format!(
                    "normalization covers {} features, samples have {nf}",
                    n.len()
                )));
            }
        }
        let mut x = Matrix::zeros(samples.len(), nf);
        let mut y = Matrix::zeros(samples.len(), nl);
        for (r, s) in samples.iter().enumerate() {
            if s.features.len() != nf || s.labels.len() != nl {
                return Err(TrainError::InvalidArgument(format!("sample {} has a different width", s.scene_id)));
            }
            match norm {
                Some(n) => x.row_mut(r).copy_from_slice(&n.apply(&s.features)),
                None => x.row_mut(r).iter_mut().zip(&s.features).for_each(|(d, &v)| *d = v as f64),
            }
            y.row_mut(r).iter_mut().zip(&s.labels).for_each(|(d, &v)| *d = v as f64);
        }
        Ok(Self { scene_ids: samples.iter().map(|s| s.scene_id).collect(), x, y })
    }

    pub fn len(&self) -> usize {
        self.x.rows
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows == 0
    }

    fn gather(&self, rows: &[usize]) -> (Matrix, Matrix) {
        let mut x = Matrix::zeros(rows.len(), self.x.cols);
        let mut y = Matrix::zeros(rows.len(), self.y.cols);
        for (k, &r) in rows.iter().enumerate() {
            x.row_mut(k).copy_from_slice(self.x.row(r));
            y.row_mut(k).copy_from_slice(self.y.row(r));
        }
        (x, y)
    }
}

/// Train/validation/test sets of a dataset with a stored split.
#[derive(Debug, Clone)]
pub struct PreparedSplits {
    /// Statistics that map raw features to network inputs.
    pub normalizer: Normalizer,
    pub train: LabeledSet,
    pub val: LabeledSet,
    pub test: LabeledSet,
}

/// Fits normalization on the training split (unless the stored features are
/// already normalized) and stacks the three splits.
pub fn prepare_splits(ds: &Dataset) -> Result<PreparedSplits> {
    let train = ds.split_samples("train")?;
    let val = ds.split_samples("val")?;
    let test = ds.split_samples("test")?;
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::InvalidArgument("train and validation splits must be non-empty".into()));
    }
    let (normalizer, apply) = match &ds.meta.normalization {
        Some(n) => (n.clone(), None),
        None => {
            let n = Normalizer::fit(train.iter().map(|s| s.features.as_slice()), ds.meta.feature_len);
            (n.clone(), Some(n))
        }
    };
    let stack = |s: &[&Sample]| -> Result<LabeledSet> {
        if s.is_empty() {
            Ok(LabeledSet {
                scene_ids: vec![],
                x: Matrix::zeros(0, ds.meta.feature_len),
                y: Matrix::zeros(0, ds.meta.label_len),
            })
        } else {
            LabeledSet::from_samples(s, apply.as_ref())
        }
    };
    Ok(PreparedSplits { train: stack(&train)?, val: stack(&val)?, test: stack(&test)?, normalizer })
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Wall-clock seconds since training started, at the end of each epoch.
    pub seconds: Vec<f64>,
    /// Optimizer steps taken in each epoch.
    pub batches: Vec<usize>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.train_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_loss.is_empty()
    }

    /// Equality ignoring wall-clock times.
    pub fn same_trajectory(&self, other: &Self) -> bool {
        self.train_loss == other.train_loss
            && self.val_loss == other.val_loss
            && self.val_accuracy == other.val_accuracy
            && self.batches == other.batches
    }
}

/// One row of [`TrainHistory`], passed to the epoch callback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub seconds: f64,
}

const EVAL_CHUNK: usize = 256;

/// Inference over a whole set in fixed-size chunks.
pub fn predict_set(net: &Network, set: &LabeledSet, exec: &Executor) -> Result<Matrix> {
    let mut out = Matrix::zeros(set.len(), net.output_len());
    let rows: Vec<usize> = (0..set.len()).collect();
    for chunk in rows.chunks(EVAL_CHUNK) {
        let (x, _) = set.gather(chunk);
        let p = predict(net, &x, exec)?;
        for (k, &r) in chunk.iter().enumerate() {
            out.row_mut(r).copy_from_slice(p.row(k));
        }
    }
    Ok(out)
}

/// Head parameters are optimised in units of this fraction of each label range.
pub const HEAD_UNIT_FRACTION: f64 = 0.03;

/// Hidden rows step in units of this multiple of their He scale `sqrt(2 / n_in)`.
pub const HIDDEN_STEP_GAIN: f64 = 3.0;

/// Per-row step scales used by [`train`]: hidden rows move relative to their
/// He initialisation scale, head rows relative to a fixed fraction of the
/// corresponding label range.
pub fn step_scales(net: &Network, ranges: &[Interval]) -> Vec<Vec<f64>> {
    let n = net.layers.len();
    net.layers
        .iter()
        .enumerate()
        .map(|(k, l)| {
            if k + 1 == n {
                ranges.iter().map(head_unit).collect()
            } else {
                vec![HIDDEN_STEP_GAIN * (2.0 / l.n_in as f64).sqrt(); l.n_out]
            }
        })
        .collect()
}

fn head_unit(r: &Interval) -> f64 {
    HEAD_UNIT_FRACTION * if r.width() > 0.0 { r.width() } else { 1.0 }
}

/// A network for `feature_len` inputs and `ranges.len()` labels whose head
/// starts at the centre of every label range.
///
/// Hidden layers are initialised as in [`init_network`]; head rows get
/// Glorot weights scaled to their label's step unit and the range midpoint as
/// bias.
pub fn init_model(
    feature_len: usize,
    hidden: &[usize],
    hidden_dropout: &[f64],
    ranges: &[Interval],
    seed: u64,
) -> Result<Network> {
    if hidden.len() != hidden_dropout.len() {
        return Err(TrainError::InvalidArgument(format!(
            "{} hidden widths but {} dropout rates",
            hidden.len(),
            hidden_dropout.len()
        )));
    }
    let mut widths = vec![feature_len];
    widths.extend_from_slice(hidden);
    widths.push(ranges.len());
    let mut rates = hidden_dropout.to_vec();
    rates.push(0.0);
    let mut net = init_network(&widths, &rates, seed)?;
    let head = net.layers.last_mut().expect("network has layers");
    let n_in = head.n_in;
    for (o, r) in ranges.iter().enumerate() {
        let s = head_unit(r);
        head.weights[o * n_in..(o + 1) * n_in].iter_mut().for_each(|w| *w *= s);
        head.biases[o] = 0.5 * (r.min + r.max);
    }
    Ok(net)
}

/// Mini-batch Adam on the MSLE loss.
///
/// One generator seeded from `config.seed` drives both the epoch shuffles and
/// the dropout masks, so a run is reproducible. The final partial batch is
/// kept. Validation runs once per epoch with dropout off.
///
/// Adam steps are rescaled per row by [`step_scales`], so an early step moves
/// every output by a similar fraction of its label range.
pub fn train(
    mut net: Network,
    train_set: &LabeledSet,
    val_set: &LabeledSet,
    ranges: &[Interval],
    config: &TrainConfig,
    exec: &Executor,
    mut on_epoch: Option<&mut dyn FnMut(&EpochRecord)>,
) -> Result<(Network, TrainHistory)> {
    config.validate()?;
    net.validate()?;
    for (name, set) in [("training", train_set), ("validation", val_set)] {
        if set.is_empty() {
            return Err(TrainError::InvalidArgument(format!("{name} split is empty")));
        }
        if set.x.cols != net.input_len() || set.y.cols != net.output_len() {
            return Err(TrainError::InvalidArgument(format!(
                "{name} split is {}->{} but the network is {}->{}",
                set.x.cols,
                set.y.cols,
                net.input_len(),
                net.output_len()
            )));
        }
    }
    if ranges.len() != net.output_len() {
        return Err(TrainError::InvalidArgument("one label range per output is required".into()));
    }

    let scales = step_scales(&net, ranges);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(&net);
    let mut history = TrainHistory::default();
    let start = Instant::now();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for (b, rows) in order.chunks(config.batch_size).enumerate() {
            let (x, y) = train_set.gather(rows);
            let (out, cache) = forward(&net, &x, true, &mut rng, exec)?;
            let loss = msle_loss(&y.data, &out.data)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch: epoch + 1, batch: b + 1 });
            }
            let dy = Matrix { rows: out.rows, cols: out.cols, data: msle_grad(&y.data, &out.data)? };
            let grads = backward(&net, &cache, &dy, exec)?;
            if !grads.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch: epoch + 1, batch: b + 1 });
            }
            adam.step_scaled(&mut net, &grads, config.learning_rate, Some(&scales))?;
            loss_sum += loss * rows.len() as f64;
            n_batches += 1;
        }
        let pred = predict_set(&net, val_set, exec)?;
        let val_loss = msle_loss(&val_set.y.data, &pred.data)?;
        let val_accuracy = tolerance_accuracy(&pred, &val_set.y, ranges, config.tolerance_fraction)?;
        let rec = EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / train_set.len() as f64,
            val_loss,
            val_accuracy,
            seconds: start.elapsed().as_secs_f64(),
        };
        history.train_loss.push(rec.train_loss);
        history.val_loss.push(rec.val_loss);
        history.val_accuracy.push(rec.val_accuracy);
        history.seconds.push(rec.seconds);
        history.batches.push(n_batches);
        if let Some(cb) = on_epoch.as_deref_mut() {
            cb(&rec);
        }
    }
    Ok((net, history))
}
