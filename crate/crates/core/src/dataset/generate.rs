use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::fdtd::{run_simulation, PmlConfig, ProbeRecord, SourceSpec, Waveform};
use crate::par::Executor;
use crate::scene::{
    label_vector, rasterize, sample_scene, Discretization, Mode, ParameterRanges, SceneGeometry,
    SceneGrid, SceneLayout,
};

use super::{extract_features, Dataset, Downsample, DatasetError, DatasetMeta, FeatureConfig, Result, Sample};

/// Generation aborts when more than this fraction of simulations fail.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSettings {
    pub waveform: Waveform,
    pub amplitude: f64,
    pub ramp_cycles: f64,
}

impl Default for SourceSettings {
    fn default() -> Self {
        Self { waveform: Waveform::RampedCw, amplitude: 1.0, ramp_cycles: 3.0 }
    }
}

/// Everything needed to turn a scene id into a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSetup {
    pub geometry: SceneGeometry,
    pub ranges: ParameterRanges,
    pub discretization: Discretization,
    pub source: SourceSettings,
    pub features: FeatureConfig,
}

impl Default for SimulationSetup {
    fn default() -> Self {
        Self {
            geometry: SceneGeometry::default(),
            ranges: ParameterRanges::default(),
            discretization: Discretization::default(),
            source: SourceSettings::default(),
            features: FeatureConfig::default(),
        }
    }
}

impl SimulationSetup {
    /// A reduced-resolution setup that simulates a scene in about 0.1 s:
    /// 1.5 cm cells, 200 MHz pulse, three receivers, 64 samples per field.
    pub fn desk_scale() -> Self {
        let mut s = Self::default();
        s.geometry.receivers = vec![(0.12, 0.5), (0.12, 1.0), (0.12, 1.5)];
        s.discretization = Discretization {
            cell_size: 0.015,
            pml: PmlConfig::default(),
            n_steps: 1024,
            frequency: 2e8,
            min_cells_per_wavelength: 10.0,
        };
        s.source = SourceSettings { waveform: Waveform::GaussianPulse, amplitude: 1.0, ramp_cycles: 1.0 };
        s.features = FeatureConfig { n_time_samples: 64, downsample: Downsample::BlockMean };
        s
    }

    pub fn feature_len(&self) -> usize {
        self.features.feature_len(self.geometry.receivers.len())
    }

    pub fn validate(&self) -> Result<()> {
        self.ranges.validate()?;
        self.discretization.pml.validate()?;
        self.features.validate(self.discretization.n_steps)?;
        if self.geometry.receivers.is_empty() {
            return Err(DatasetError::InvalidArgument("at least one receiver is required".into()));
        }
        Ok(())
    }

    /// Settings recorded in dataset metadata.
    pub fn describe(&self) -> BTreeMap<String, String> {
        let d = &self.discretization;
        let g = &self.geometry;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("grid.cell_size", format!("{:?}", d.cell_size));
        put("grid.n_steps", d.n_steps.to_string());
        put("grid.pml_depth", d.pml.depth_cells.to_string());
        put("grid.pml_order", format!("{:?}", d.pml.grading_order));
        put("grid.pml_reflection", format!("{:?}", d.pml.target_reflection));
        put("grid.min_cells_per_wavelength", format!("{:?}", d.min_cells_per_wavelength));
        put("source.frequency", format!("{:?}", d.frequency));
        put("source.waveform", self.source.waveform.name().into());
        put("source.amplitude", format!("{:?}", self.source.amplitude));
        put("source.ramp_cycles", format!("{:?}", self.source.ramp_cycles));
        put("scene.width", format!("{:?}", g.width));
        put("scene.height", format!("{:?}", g.height));
        put(
            "scene.source_line",
            format!("{:?},{:?},{:?}", g.source_line.x, g.source_line.y0, g.source_line.y1),
        );
        put("scene.wall_front_x", format!("{:?}", g.wall_front_x));
        put(
            "scene.receivers",
            g.receivers.iter().map(|(x, y)| format!("{x:?}:{y:?}")).collect::<Vec<_>>().join(";"),
        );
        put("features.n_time_samples", self.features.n_time_samples.to_string());
        put("features.downsample", self.features.downsample.name().into());
        m
    }
}

/// Discretizes and simulates one scene.
pub fn simulate_scene(scene: &SceneLayout, setup: &SimulationSetup) -> Result<ProbeRecord> {
    let disc = &setup.discretization;
    let sg = SceneGrid::for_scene(scene, disc)?;
    let materials = rasterize(scene, &sg)?;
    let source = SourceSpec {
        cells: sg.source_cells(scene),
        frequency: disc.frequency,
        waveform: setup.source.waveform,
        amplitude: setup.source.amplitude,
        ramp_cycles: setup.source.ramp_cycles,
    };
    let probes = sg.receiver_nodes(scene);
    Ok(run_simulation(&materials, &sg.grid, &source, &probes, &disc.pml)?)
}

/// Builds the sample for one scene.
pub fn scene_sample(scene_id: u64, scene: &SceneLayout, setup: &SimulationSetup) -> Result<Sample> {
    let record = simulate_scene(scene, setup)?;
    let features = extract_features(&record, &setup.features)?;
    Ok(Sample {
        scene_id,
        features: features.into_iter().map(|v| v as f32).collect(),
        labels: label_vector(scene).into_iter().map(|v| v as f32).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationFailure {
    pub scene_id: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenerationReport {
    pub requested: usize,
    pub succeeded: usize,
    pub failures: Vec<GenerationFailure>,
}

/// Seed of scene `scene_id` under `master_seed`.
pub fn scene_seed(master_seed: u64, scene_id: u64) -> u64 {
    master_seed ^ scene_id
}

/// Samples, simulates and labels scenes `0..count`.
///
/// Scenes run on `exec`; results are gathered by scene id, so the dataset is
/// independent of the worker count. Failed scenes are skipped and reported;
/// more than [`MAX_FAILURE_FRACTION`] failures abort generation.
pub fn generate_dataset(
    mode: Mode,
    count: usize,
    setup: &SimulationSetup,
    master_seed: u64,
    exec: &Executor,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<(Dataset, GenerationReport)> {
    if count == 0 {
        return Err(DatasetError::InvalidArgument("count must be at least 1".into()));
    }
    setup.validate()?;
    let done = AtomicUsize::new(0);
    let results = exec.map(count, |k| {
        let id = k as u64;
        let out = sample_scene(scene_seed(master_seed, id), mode, &setup.ranges, &setup.geometry)
            .map_err(DatasetError::from)
            .and_then(|scene| scene_sample(id, &scene, setup));
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        if let Some(cb) = progress {
            cb(n, count);
        }
        out
    });

    let mut meta = DatasetMeta::new(mode, setup.feature_len(), setup.ranges);
    meta.master_seed = Some(master_seed);
    meta.settings = setup.describe();
    let mut ds = Dataset::new(meta);
    let mut report = GenerationReport { requested: count, ..Default::default() };
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(sample) => {
                ds.push(sample)?;
                report.succeeded += 1;
            }
            Err(e) => report.failures.push(GenerationFailure { scene_id: k as u64, message: e.to_string() }),
        }
    }
    if report.failures.len() as f64 > MAX_FAILURE_FRACTION * count as f64 {
        return Err(DatasetError::GenerationFailed {
            failed: report.failures.len(),
            total: count,
            first: report.failures[0].message.clone(),
            report,
        });
    }
    Ok((ds, report))
}
