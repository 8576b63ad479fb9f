/// Floor applied to per-feature standard deviations.
pub const STD_FLOOR: f64 = 1e-12;

/// Per-feature z-score statistics, fitted on the training split only.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Population mean and standard deviation of each column.
    pub fn fit<'a, I>(rows: I, width: usize) -> Self
    where
        I: IntoIterator<Item = &'a [f32]>,
    {
        let rows: Vec<&[f32]> = rows.into_iter().collect();
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; width];
        for r in &rows {
            for (m, &v) in mean.iter_mut().zip(r.iter()) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for r in &rows {
            for ((s, &v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                let d = v as f64 - m;
                *s += d * d;
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Self { mean, std }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, row: &[f32]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (m, s))| (v as f64 - m) / s)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_maps_to_zero() {
        let rows = [vec![3.0f32, 1.0], vec![3.0, 2.0], vec![3.0, 6.0]];
        let n = Normalizer::fit(rows.iter().map(|r| r.as_slice()), 2);
        assert_eq!(n.std[0], STD_FLOOR);
        for r in &rows {
            assert_eq!(n.apply(r)[0], 0.0);
        }
    }

    #[test]
    fn training_columns_standardized() {
        let rows: Vec<Vec<f32>> = (0..257)
            .map(|k| vec![(k as f32 * 0.37).sin() * 5.0 + 2.0, k as f32 * 1e-3, (k % 7) as f32])
            .collect();
        let n = Normalizer::fit(rows.iter().map(|r| r.as_slice()), 3);
        let z: Vec<Vec<f64>> = rows.iter().map(|r| n.apply(r)).collect();
        for c in 0..3 {
            let m = z.iter().map(|r| r[c]).sum::<f64>() / z.len() as f64;
            let s = (z.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / z.len() as f64).sqrt();
            assert!(m.abs() < 1e-9, "column {c} mean {m}");
            assert!((s - 1.0).abs() < 1e-9, "column {c} std {s}");
        }
    }

    #[test]
    fn applies_training_statistics_to_other_data() {
        let train = [vec![0.0f32], vec![2.0]];
        let n = Normalizer::fit(train.iter().map(|r| r.as_slice()), 1);
        // validation row uses train mean 1 and std 1, not its own
        assert_eq!(n.apply(&[5.0]), vec![4.0]);
    }
}
