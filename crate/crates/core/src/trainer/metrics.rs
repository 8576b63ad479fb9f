use std::fmt::Write as _;

use crate::dataset::DatasetMeta;
use crate::nn::{msle_loss, Matrix, Network};
use crate::par::Executor;
use crate::scene::{label_names, Interval};

use super::{predict_set, LabeledSet, Result, TrainError};

/// Fraction of rows whose every entry lies within `tolerance_fraction` of
/// the corresponding range width of the label (inclusive).
pub fn tolerance_accuracy(pred: &Matrix, labels: &Matrix, ranges: &[Interval], tolerance_fraction: f64) -> Result<f64> {
    if ranges.is_empty() || ranges.len() != labels.cols {
        return Err(TrainError::InvalidArgument(format!(
            "{} label ranges for {} labels",
            ranges.len(),
            labels.cols
        )));
    }
    if pred.rows != labels.rows || pred.cols != labels.cols {
        return Err(TrainError::InvalidArgument("prediction and label shapes differ".into()));
    }
    if labels.rows == 0 {
        return Err(TrainError::InvalidArgument("no samples".into()));
    }
    let correct = (0..labels.rows)
        .filter(|&r| {
            pred.row(r)
                .iter()
                .zip(labels.row(r))
                .zip(ranges)
                .all(|((p, y), iv)| (p - y).abs() <= tolerance_fraction * iv.width())
        })
        .count();
    Ok(correct as f64 / labels.rows as f64)
}

/// MSLE of always predicting the mean training label.
pub fn mean_predictor_baseline(train_labels: &Matrix, eval_labels: &Matrix) -> Result<f64> {
    if train_labels.rows == 0 || eval_labels.rows == 0 || train_labels.cols != eval_labels.cols {
        return Err(TrainError::InvalidArgument("baseline needs non-empty label sets of equal width".into()));
    }
    let mean: Vec<f64> = (0..train_labels.cols)
        .map(|c| (0..train_labels.rows).map(|r| train_labels.row(r)[c]).sum::<f64>() / train_labels.rows as f64)
        .collect();
    let pred: Vec<f64> = (0..eval_labels.rows).flat_map(|_| mean.iter().copied()).collect();
    Ok(msle_loss(&eval_labels.data, &pred)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_samples: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub tolerance_fraction: f64,
    /// Label names with units.
    pub names: Vec<(String, &'static str)>,
    /// Mean absolute error per label, physical units.
    pub mae: Vec<f64>,
    /// Mean absolute error divided by the label's range width.
    pub range_error: Vec<f64>,
}

impl EvalReport {
    /// Aligned human-readable table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "samples    {}", self.n_samples);
        let _ = writeln!(s, "msle       {:.6e}", self.loss);
        let _ = writeln!(
            s,
            "accuracy   {:.4} (all labels within {}% of range)",
            self.accuracy,
            self.tolerance_fraction * 100.0
        );
        let _ = writeln!(s, "{:<16} {:>14} {:>12}", "parameter", "mae", "mae/range");
        for (k, (name, unit)) in self.names.iter().enumerate() {
            let mae = if unit.is_empty() { format!("{:.5}", self.mae[k]) } else { format!("{:.5} {unit}", self.mae[k]) };
            let _ = writeln!(s, "{:<16} {:>14} {:>12.5}", name, mae, self.range_error[k]);
        }
        s
    }

    /// `key = value` lines.
    pub fn key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "samples = {}", self.n_samples);
        let _ = writeln!(s, "msle = {:?}", self.loss);
        let _ = writeln!(s, "accuracy = {:?}", self.accuracy);
        let _ = writeln!(s, "tolerance_fraction = {:?}", self.tolerance_fraction);
        for (k, (name, _)) in self.names.iter().enumerate() {
            let _ = writeln!(s, "mae.{name} = {:?}", self.mae[k]);
            let _ = writeln!(s, "range_error.{name} = {:?}", self.range_error[k]);
        }
        s
    }
}

/// Loss, tolerance accuracy and per-label errors of `net` on `set`.
pub fn evaluate(
    net: &Network,
    set: &LabeledSet,
    meta: &DatasetMeta,
    tolerance_fraction: f64,
    exec: &Executor,
) -> Result<EvalReport> {
    if net.output_len() != meta.label_len {
        return Err(TrainError::InvalidArgument(format!(
            "model predicts {} labels but the dataset has {} ({} mode)",
            net.output_len(),
            meta.label_len,
            meta.mode.name()
        )));
    }
    if net.input_len() != set.x.cols {
        return Err(TrainError::InvalidArgument(format!(
            "model takes {} features but the dataset has {}",
            net.input_len(),
            set.x.cols
        )));
    }
    if set.is_empty() {
        return Err(TrainError::InvalidArgument("cannot evaluate an empty split".into()));
    }
    let ranges = meta.label_ranges();
    let pred = predict_set(net, set, exec)?;
    let loss = msle_loss(&set.y.data, &pred.data)?;
    let accuracy = tolerance_accuracy(&pred, &set.y, &ranges, tolerance_fraction)?;
    let n = set.len() as f64;
    let mae: Vec<f64> = (0..set.y.cols)
        .map(|c| (0..set.len()).map(|r| (pred.row(r)[c] - set.y.row(r)[c]).abs()).sum::<f64>() / n)
        .collect();
    let range_error = mae.iter().zip(&ranges).map(|(m, iv)| m / iv.width()).collect();
    Ok(EvalReport {
        n_samples: set.len(),
        loss,
        accuracy,
        tolerance_fraction,
        names: label_names(meta.mode),
        mae,
        range_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_ranges() -> Vec<Interval> {
        vec![
            Interval::new(0.95, 1.55),
            Interval::new(0.45, 1.55),
            Interval::new(5.0, 85.0),
            Interval::new(3.0, 9.0),
            Interval::new(0.1, 0.2),
        ]
    }

    fn labels() -> Matrix {
        Matrix::from_rows(&[vec![1.0, 1.0, 20.0, 6.0, 0.15], vec![1.2, 0.8, 70.0, 4.0, 0.11]])
    }

    #[test]
    fn perfect_predictions() {
        let y = labels();
        assert_eq!(tolerance_accuracy(&y, &y, &single_ranges(), 0.05).unwrap(), 1.0);
    }

    #[test]
    fn boundary_is_inclusive() {
        let y = Matrix::from_rows(&[vec![1.0, 1.0, 20.0, 6.0, 0.25]]);
        let ranges = vec![Interval::new(0.0, 1.0); 5];
        let mut p = y.clone();
        p.data[4] = 0.5; // off by exactly 0.25 = 0.25 * width
        assert_eq!(tolerance_accuracy(&p, &y, &ranges, 0.25).unwrap(), 1.0);
    }

    #[test]
    fn wall_error_beyond_tolerance() {
        let y = labels();
        let mut p = y.clone();
        p.data[3] += 0.4; // allowed 0.05 * 6 = 0.3
        assert_eq!(tolerance_accuracy(&p, &y, &single_ranges(), 0.05).unwrap(), 0.5);
    }

    #[test]
    fn monotone_in_tolerance() {
        let y = labels();
        let mut p = y.clone();
        p.data.iter_mut().enumerate().for_each(|(k, v)| *v *= 1.0 + 0.01 * k as f64);
        let mut last = 0.0;
        for t in [0.001, 0.01, 0.05, 0.1, 0.3, 0.9] {
            let a = tolerance_accuracy(&p, &y, &single_ranges(), t).unwrap();
            assert!(a >= last);
            last = a;
        }
    }

    #[test]
    fn missing_ranges_rejected() {
        let y = labels();
        assert!(tolerance_accuracy(&y, &y, &[], 0.05).is_err());
    }

    #[test]
    fn baseline_matches_direct_computation() {
        let train = Matrix::from_rows(&[vec![1.0, 3.0], vec![3.0, 5.0]]);
        let eval = Matrix::from_rows(&[vec![0.0, 4.0]]);
        // column means are [2, 4]
        let want = 3.0f64.ln().powi(2) / 2.0;
        assert!((mean_predictor_baseline(&train, &eval).unwrap() - want).abs() < 1e-15);
    }
}
