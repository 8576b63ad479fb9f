//! Labelled samples from simulations: features, splits, normalization and
//! the `TWRD` container.

mod features;
mod format;
mod generate;
mod normalize;
mod split;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fdtd::FdtdError;
use crate::scene::{Interval, Mode, ParameterRanges, SceneError};

pub use features::{extract_features, Downsample, FeatureConfig};
pub use format::{decode_dataset, encode_dataset, load_dataset, save_dataset, FORMAT_VERSION, MAGIC};
pub use generate::{
    generate_dataset, scene_sample, scene_seed, simulate_scene, GenerationFailure, GenerationReport, SimulationSetup,
    SourceSettings, MAX_FAILURE_FRACTION,
};
pub use normalize::{Normalizer, STD_FLOOR};
pub use split::{split, SplitAssignment, DEFAULT_FRACTIONS};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not a dataset file (bad magic)")]
    BadMagic,
    #[error("unsupported dataset format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("dataset file truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("dataset checksum mismatch")]
    ChecksumMismatch,
    #[error("inconsistent dataset file: {0}")]
    Inconsistent(String),
    #[error("{failed} of {total} simulations failed (first: {first})")]
    GenerationFailed { failed: usize, total: usize, first: String, report: GenerationReport },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Fdtd(#[from] FdtdError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// One labelled simulation. Features are stored at 32-bit precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub scene_id: u64,
    pub features: Vec<f32>,
    pub labels: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub mode: Mode,
    pub feature_len: usize,
    pub label_len: usize,
    /// Scene id of each sample, in file order.
    pub scene_ids: Vec<u64>,
    pub master_seed: Option<u64>,
    pub ranges: ParameterRanges,
    /// Free-form description of the generation settings.
    pub settings: BTreeMap<String, String>,
    /// Present iff the stored features are normalized.
    pub normalization: Option<Normalizer>,
    pub split: Option<SplitAssignment>,
}

impl DatasetMeta {
    pub fn new(mode: Mode, feature_len: usize, ranges: ParameterRanges) -> Self {
        Self {
            mode,
            feature_len,
            label_len: mode.label_len(),
            scene_ids: Vec::new(),
            master_seed: None,
            ranges,
            settings: BTreeMap::new(),
            normalization: None,
            split: None,
        }
    }

    pub fn label_ranges(&self) -> Vec<Interval> {
        self.ranges.label_ranges(self.mode)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(meta: DatasetMeta) -> Self {
        Self { meta, samples: Vec::new() }
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if sample.features.len() != self.meta.feature_len || sample.labels.len() != self.meta.label_len {
            return Err(DatasetError::InvalidArgument(format!(
                "sample {} has {} features / {} labels, dataset expects {} / {}",
                sample.scene_id,
                sample.features.len(),
                sample.labels.len(),
                self.meta.feature_len,
                self.meta.label_len
            )));
        }
        if self.meta.scene_ids.contains(&sample.scene_id) {
            return Err(DatasetError::InvalidArgument(format!(
                "duplicate scene id {}",
                sample.scene_id
            )));
        }
        self.meta.scene_ids.push(sample.scene_id);
        self.samples.push(sample);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.samples.iter().map(|s| s.scene_id).collect()
    }

    /// Samples with the given scene ids, in the order of `ids`.
    pub fn select(&self, ids: &[u64]) -> Result<Vec<&Sample>> {
        let index: BTreeMap<u64, &Sample> = self.samples.iter().map(|s| (s.scene_id, s)).collect();
        ids.iter()
            .map(|id| {
                index.get(id).copied().ok_or_else(|| {
                    DatasetError::InvalidArgument(format!("scene id {id} is not in the dataset"))
                })
            })
            .collect()
    }

    /// Samples of a named split stored in the metadata.
    pub fn split_samples(&self, name: &str) -> Result<Vec<&Sample>> {
        let split = self.meta.split.as_ref().ok_or_else(|| {
            DatasetError::InvalidArgument("dataset metadata holds no split assignment".into())
        })?;
        let ids = split.get(name).ok_or_else(|| {
            DatasetError::InvalidArgument(format!("unknown split '{name}' (use train, val or test)"))
        })?;
        self.select(ids)
    }
}
