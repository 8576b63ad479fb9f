use crate::fdtd::ProbeRecord;

use super::{DatasetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Downsample {
    /// Every `n_steps / n_time_samples`-th sample, starting at the first.
    Stride,
    /// Mean of consecutive blocks of `n_steps / n_time_samples` samples.
    BlockMean,
}

impl Downsample {
    pub fn name(self) -> &'static str {
        match self {
            Downsample::Stride => "stride",
            Downsample::BlockMean => "block-mean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stride" => Some(Downsample::Stride),
            "block-mean" => Some(Downsample::BlockMean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    pub n_time_samples: usize,
    pub downsample: Downsample,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { n_time_samples: 512, downsample: Downsample::BlockMean }
    }
}

impl FeatureConfig {
    pub fn validate(&self, n_steps: usize) -> Result<()> {
        if self.n_time_samples < 16 || self.n_time_samples > n_steps {
            return Err(DatasetError::InvalidArgument(format!(
                "n_time_samples must lie in [16, {n_steps}], got {}",
                self.n_time_samples
            )));
        }
        Ok(())
    }

    pub fn feature_len(&self, probes: usize) -> usize {
        3 * probes * self.n_time_samples
    }

    fn reduce(&self, series: &[f64], out: &mut Vec<f64>) {
        let n = self.n_time_samples;
        let block = series.len() / n;
        match self.downsample {
            Downsample::Stride => out.extend((0..n).map(|k| series[k * block])),
            Downsample::BlockMean => out.extend(
                series
                    .chunks_exact(block)
                    .take(n)
                    .map(|c| c.iter().sum::<f64>() / block as f64),
            ),
        }
    }
}

/// Flattens a probe record into `[probe 0: Ez, Hx, Hy][probe 1: ...]`.
pub fn extract_features(record: &ProbeRecord, config: &FeatureConfig) -> Result<Vec<f64>> {
    let n = record.n_steps();
    if n < config.n_time_samples || config.n_time_samples == 0 {
        return Err(DatasetError::InvalidArgument(format!(
            "probe series of length {n} is shorter than {} feature samples",
            config.n_time_samples
        )));
    }
    let mut out = Vec::with_capacity(config.feature_len(record.positions.len()));
    for p in 0..record.positions.len() {
        for series in [&record.ez[p], &record.hx[p], &record.hy[p]] {
            config.reduce(series, &mut out);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(series: Vec<f64>) -> ProbeRecord {
        ProbeRecord {
            positions: vec![(0, 0)],
            ez: vec![series.clone()],
            hx: vec![series.iter().map(|v| v * 10.0).collect()],
            hy: vec![series.iter().map(|v| v * 100.0).collect()],
            dt: 1.0,
        }
    }

    #[test]
    fn constant_series_block_mean() {
        let r = record(vec![0.75; 64]);
        let cfg = FeatureConfig { n_time_samples: 16, downsample: Downsample::BlockMean };
        let f = extract_features(&r, &cfg).unwrap();
        assert_eq!(f.len(), 48);
        assert!(f[..16].iter().all(|&v| v == 0.75));
        assert!(f[16..32].iter().all(|&v| v == 7.5));
    }

    #[test]
    fn full_length_stride_is_identity() {
        let s: Vec<f64> = (0..32).map(|k| (k as f64).sin()).collect();
        let r = record(s.clone());
        let cfg = FeatureConfig { n_time_samples: 32, downsample: Downsample::Stride };
        let f = extract_features(&r, &cfg).unwrap();
        assert_eq!(&f[..32], &s[..]);
    }

    #[test]
    fn block_mean_arithmetic() {
        let cfg = FeatureConfig { n_time_samples: 2, downsample: Downsample::BlockMean };
        let mut out = Vec::new();
        cfg.reduce(&[0.0, 1.0, 2.0, 3.0], &mut out);
        assert_eq!(out, vec![0.5, 2.5]);
    }

    #[test]
    fn probe_major_order() {
        let mut r = record(vec![1.0; 16]);
        r.positions.push((1, 1));
        r.ez.push(vec![2.0; 16]);
        r.hx.push(vec![3.0; 16]);
        r.hy.push(vec![4.0; 16]);
        let cfg = FeatureConfig { n_time_samples: 16, downsample: Downsample::Stride };
        let f = extract_features(&r, &cfg).unwrap();
        let heads: Vec<f64> = f.chunks(16).map(|c| c[0]).collect();
        assert_eq!(heads, vec![1.0, 10.0, 100.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn short_series_rejected() {
        let r = record(vec![0.0; 10]);
        let cfg = FeatureConfig { n_time_samples: 16, downsample: Downsample::Stride };
        assert!(matches!(extract_features(&r, &cfg), Err(DatasetError::InvalidArgument(_))));
    }
}
