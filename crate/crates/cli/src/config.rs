//! Run configuration: presets, file and flag layering, validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use twr::dataset::{split, Downsample, FeatureConfig, SimulationSetup, SourceSettings, DEFAULT_FRACTIONS};
use twr::fdtd::{courant_dt, GridSpec, PmlConfig, Waveform, C0};
use twr::nn::{DEFAULT_DROPOUT, DEFAULT_HIDDEN};
use twr::scene::{
    Discretization, Interval, Mode, ParameterRanges, Rect, SceneGeometry, SourceLine, TARGET_EPS_BOUNDS,
    WALL_EPS_BOUNDS, WALL_THICKNESS_BOUNDS,
};
use twr::trainer::TrainConfig;

use crate::error::CliError;

pub const PRESETS: [&str; 2] = ["full", "desk"];
pub const DEFAULT_PRESET: &str = "full";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub grid: GridSection,
    pub source: SourceSection,
    pub scene: SceneSection,
    pub features: FeatureSection,
    pub model: ModelSection,
    pub train: TrainSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub preset: String,
    pub mode: String,
    pub count: usize,
    pub seed: u64,
    /// Zero means every available core.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub cell_size: f64,
    pub n_steps: usize,
    pub pml_depth: usize,
    pub pml_order: f64,
    pub pml_reflection: f64,
    pub min_cells_per_wavelength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub waveform: String,
    pub frequency: f64,
    pub amplitude: f64,
    pub ramp_cycles: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub width: f64,
    pub height: f64,
    pub source_x: f64,
    pub source_y0: f64,
    pub source_y1: f64,
    pub wall_front_x: f64,
    pub receivers: Vec<[f64; 2]>,
    pub min_clearance: f64,
    pub wall_eps_min: f64,
    pub wall_eps_max: f64,
    pub wall_thickness_min: f64,
    pub wall_thickness_max: f64,
    pub target_eps_min: f64,
    pub target_eps_max: f64,
    pub region_x0: f64,
    pub region_x1: f64,
    pub region_y0: f64,
    pub region_y1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSection {
    pub n_time_samples: usize,
    pub downsample: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub dropout: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub shuffle: bool,
    pub tolerance_fraction: f64,
    pub split_train: f64,
    pub split_val: f64,
    pub split_test: f64,
}

impl RunConfig {
    pub fn preset(name: &str) -> Option<Self> {
        let setup = match name {
            "full" => SimulationSetup::default(),
            "desk" => SimulationSetup::desk_scale(),
            _ => return None,
        };
        let mut cfg = Self::from_setup(&setup);
        cfg.run.preset = name.to_string();
        if name == "desk" {
            // a few thousand samples are too few to afford dropout
            cfg.model.dropout = vec![0.0; cfg.model.hidden.len()];
        }
        Some(cfg)
    }

    fn from_setup(s: &SimulationSetup) -> Self {
        let d = &s.discretization;
        let g = &s.geometry;
        let r = &s.ranges;
        let t = TrainConfig::default();
        Self {
            run: RunSection { preset: String::new(), mode: "single".into(), count: 1000, seed: 0, workers: 0 },
            grid: GridSection {
                cell_size: d.cell_size,
                n_steps: d.n_steps,
                pml_depth: d.pml.depth_cells,
                pml_order: d.pml.grading_order,
                pml_reflection: d.pml.target_reflection,
                min_cells_per_wavelength: d.min_cells_per_wavelength,
            },
            source: SourceSection {
                waveform: s.source.waveform.name().into(),
                frequency: d.frequency,
                amplitude: s.source.amplitude,
                ramp_cycles: s.source.ramp_cycles,
            },
            scene: SceneSection {
                width: g.width,
                height: g.height,
                source_x: g.source_line.x,
                source_y0: g.source_line.y0,
                source_y1: g.source_line.y1,
                wall_front_x: g.wall_front_x,
                receivers: g.receivers.iter().map(|&(x, y)| [x, y]).collect(),
                min_clearance: g.min_clearance,
                wall_eps_min: r.wall_eps.min,
                wall_eps_max: r.wall_eps.max,
                wall_thickness_min: r.wall_thickness.min,
                wall_thickness_max: r.wall_thickness.max,
                target_eps_min: r.target_eps.min,
                target_eps_max: r.target_eps.max,
                region_x0: r.target_region.x0,
                region_x1: r.target_region.x1,
                region_y0: r.target_region.y0,
                region_y1: r.target_region.y1,
            },
            features: FeatureSection {
                n_time_samples: s.features.n_time_samples,
                downsample: s.features.downsample.name().into(),
            },
            model: ModelSection { hidden: DEFAULT_HIDDEN.to_vec(), dropout: DEFAULT_DROPOUT.to_vec() },
            train: TrainSection {
                batch_size: t.batch_size,
                learning_rate: t.learning_rate,
                epochs: t.epochs,
                shuffle: t.shuffle,
                tolerance_fraction: t.tolerance_fraction,
                split_train: DEFAULT_FRACTIONS.0,
                split_val: DEFAULT_FRACTIONS.1,
                split_test: DEFAULT_FRACTIONS.2,
            },
        }
    }

    /// Call only after [`RunConfig::validate`] succeeded.
    pub fn mode(&self) -> Mode {
        Mode::parse(&self.run.mode).expect("validated mode")
    }

    pub fn ranges(&self) -> ParameterRanges {
        let s = &self.scene;
        ParameterRanges {
            wall_eps: Interval::new(s.wall_eps_min, s.wall_eps_max),
            wall_thickness: Interval::new(s.wall_thickness_min, s.wall_thickness_max),
            target_eps: Interval::new(s.target_eps_min, s.target_eps_max),
            target_region: Rect { x0: s.region_x0, x1: s.region_x1, y0: s.region_y0, y1: s.region_y1 },
        }
    }

    /// Call only after [`RunConfig::validate`] succeeded.
    pub fn setup(&self) -> SimulationSetup {
        let (g, s, sc) = (&self.grid, &self.source, &self.scene);
        SimulationSetup {
            geometry: SceneGeometry {
                width: sc.width,
                height: sc.height,
                source_line: SourceLine { x: sc.source_x, y0: sc.source_y0, y1: sc.source_y1 },
                wall_front_x: sc.wall_front_x,
                receivers: sc.receivers.iter().map(|p| (p[0], p[1])).collect(),
                min_clearance: sc.min_clearance,
            },
            ranges: self.ranges(),
            discretization: Discretization {
                cell_size: g.cell_size,
                pml: PmlConfig {
                    depth_cells: g.pml_depth,
                    grading_order: g.pml_order,
                    target_reflection: g.pml_reflection,
                },
                n_steps: g.n_steps,
                frequency: s.frequency,
                min_cells_per_wavelength: g.min_cells_per_wavelength,
            },
            source: SourceSettings {
                waveform: Waveform::parse(&s.waveform).expect("validated waveform"),
                amplitude: s.amplitude,
                ramp_cycles: s.ramp_cycles,
            },
            features: FeatureConfig {
                n_time_samples: self.features.n_time_samples,
                downsample: Downsample::parse(&self.features.downsample).expect("validated downsample"),
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            seed: self.run.seed,
            shuffle: t.shuffle,
            tolerance_fraction: t.tolerance_fraction,
        }
    }

    pub fn split_fractions(&self) -> (f64, f64, f64) {
        (self.train.split_train, self.train.split_val, self.train.split_test)
    }

    /// Every problem with the configuration, or `Ok` when none.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut p: Vec<String> = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                p.push(msg);
            }
        };
        let positive = |v: f64| v > 0.0 && v.is_finite();

        need(PRESETS.contains(&self.run.preset.as_str()), format!("run.preset must be one of {PRESETS:?}, got '{}'", self.run.preset));
        need(Mode::parse(&self.run.mode).is_some(), format!("run.mode must be 'single' or 'two', got '{}'", self.run.mode));
        need(self.run.count >= 1, "run.count must be at least 1".into());

        let g = &self.grid;
        need(positive(g.cell_size), format!("grid.cell_size must be positive, got {}", g.cell_size));
        need(g.n_steps >= 1, "grid.n_steps must be at least 1".into());
        need(
            g.pml_depth == 0 || g.pml_depth >= 8,
            format!("grid.pml_depth must be 0 or at least 8, got {}", g.pml_depth),
        );
        need(
            (2.0..=4.0).contains(&g.pml_order),
            format!("grid.pml_order must lie in [2, 4], got {}", g.pml_order),
        );
        need(
            g.pml_reflection > 0.0 && g.pml_reflection <= 1e-3,
            format!("grid.pml_reflection must lie in (0, 1e-3], got {}", g.pml_reflection),
        );
        need(
            positive(g.min_cells_per_wavelength),
            format!("grid.min_cells_per_wavelength must be positive, got {}", g.min_cells_per_wavelength),
        );

        let s = &self.source;
        need(
            Waveform::parse(&s.waveform).is_some(),
            format!("source.waveform must be 'ramped-cw' or 'gaussian-pulse', got '{}'", s.waveform),
        );
        need(positive(s.frequency), format!("source.frequency must be positive, got {}", s.frequency));
        need(
            s.amplitude.is_finite() && s.amplitude >= 0.0,
            format!("source.amplitude must be finite and non-negative, got {}", s.amplitude),
        );
        need(positive(s.ramp_cycles), format!("source.ramp_cycles must be positive, got {}", s.ramp_cycles));

        let sc = &self.scene;
        need(positive(sc.width), format!("scene.width must be positive, got {}", sc.width));
        need(positive(sc.height), format!("scene.height must be positive, got {}", sc.height));
        need(
            sc.min_clearance >= 0.0 && sc.min_clearance.is_finite(),
            format!("scene.min_clearance must be non-negative, got {}", sc.min_clearance),
        );
        let inside = |x: f64, y: f64| x > 0.0 && x < sc.width && y > 0.0 && y < sc.height;
        need(
            inside(sc.source_x, sc.source_y0) && inside(sc.source_x, sc.source_y1) && sc.source_y0 < sc.source_y1,
            format!(
                "scene source line x={} y=[{}, {}] must be a non-empty segment inside the domain",
                sc.source_x, sc.source_y0, sc.source_y1
            ),
        );
        need(!sc.receivers.is_empty(), "scene.receivers must list at least one receiver".into());
        for (k, r) in sc.receivers.iter().enumerate() {
            need(inside(r[0], r[1]), format!("scene.receivers[{k}] = ({}, {}) lies outside the domain", r[0], r[1]));
        }
        need(
            sc.wall_front_x > sc.source_x && sc.wall_front_x + sc.wall_thickness_max < sc.width,
            format!(
                "scene.wall_front_x = {} must lie between the source line and the far edge",
                sc.wall_front_x
            ),
        );
        for (name, lo, hi, b) in [
            ("wall_eps", sc.wall_eps_min, sc.wall_eps_max, WALL_EPS_BOUNDS),
            ("wall_thickness", sc.wall_thickness_min, sc.wall_thickness_max, WALL_THICKNESS_BOUNDS),
            ("target_eps", sc.target_eps_min, sc.target_eps_max, TARGET_EPS_BOUNDS),
        ] {
            need(lo <= hi, format!("scene.{name}_min = {lo} exceeds scene.{name}_max = {hi}"));
            need(
                lo >= b.min && lo <= b.max,
                format!("scene.{name}_min = {lo} outside [{}, {}]", b.min, b.max),
            );
            need(
                hi >= b.min && hi <= b.max,
                format!("scene.{name}_max = {hi} outside [{}, {}]", b.min, b.max),
            );
        }
        if let Err(e) = self.ranges().validate() {
            let msg = e.to_string();
            if msg.contains("target region") {
                need(false, format!("scene.region_*: {msg}"));
            }
        }
        let region = self.ranges().target_region;
        need(
            region.x0 >= sc.wall_front_x + sc.wall_thickness_max && region.x1 <= sc.width && region.y0 >= 0.0
                && region.y1 <= sc.height,
            format!("scene target region {region:?} must lie behind the thickest wall and inside the domain"),
        );

        let f = &self.features;
        need(
            Downsample::parse(&f.downsample).is_some(),
            format!("features.downsample must be 'stride' or 'block-mean', got '{}'", f.downsample),
        );
        need(
            f.n_time_samples >= 16 && f.n_time_samples <= g.n_steps,
            format!("features.n_time_samples must lie in [16, grid.n_steps = {}], got {}", g.n_steps, f.n_time_samples),
        );

        if positive(g.cell_size) && positive(s.frequency) {
            let eps = sc.target_eps_max.max(sc.wall_eps_max).max(1.0);
            let wavelength = C0 / (s.frequency * eps.sqrt());
            let cells = wavelength / g.cell_size;
            need(
                cells + 1e-9 >= g.min_cells_per_wavelength,
                format!(
                    "grid.cell_size = {} resolves the shortest wavelength ({wavelength:.4e} m at eps_r = {eps}) with \
                     {cells:.2} cells, need grid.min_cells_per_wavelength = {}",
                    g.cell_size, g.min_cells_per_wavelength
                ),
            );
            if let Ok(dt) = courant_dt(g.cell_size, g.cell_size) {
                let n = |len: f64| (len / g.cell_size).round() as usize + 2 * g.pml_depth;
                if let Err(e) = GridSpec::new(n(sc.width), n(sc.height), g.cell_size, g.cell_size, dt, g.n_steps.max(1)) {
                    need(false, format!("grid: {e}"));
                }
            }
        }

        let m = &self.model;
        need(!m.hidden.is_empty(), "model.hidden must list at least one layer".into());
        need(m.hidden.iter().all(|&w| w >= 1), "model.hidden widths must be at least 1".into());
        need(
            m.hidden.len() == m.dropout.len(),
            format!("model.dropout has {} rates for {} hidden layers", m.dropout.len(), m.hidden.len()),
        );
        for (k, &d) in m.dropout.iter().enumerate() {
            need((0.0..1.0).contains(&d), format!("model.dropout[{k}] = {d} must lie in [0, 1)"));
        }

        let t = &self.train;
        need(t.batch_size >= 1, "train.batch_size must be at least 1".into());
        need(t.epochs >= 1, "train.epochs must be at least 1".into());
        need(positive(t.learning_rate), format!("train.learning_rate must be positive, got {}", t.learning_rate));
        need(
            t.tolerance_fraction > 0.0 && t.tolerance_fraction < 1.0,
            format!("train.tolerance_fraction must lie in (0, 1), got {}", t.tolerance_fraction),
        );
        if let Err(e) = split(&[0, 1, 2], self.split_fractions(), 0) {
            need(false, format!("train.split_*: {e}"));
        }

        if p.is_empty() {
            Ok(())
        } else {
            Err(p)
        }
    }

    /// The configuration as `section.key = value` lines, loadable with `--config`.
    pub fn to_dotted(&self) -> String {
        let table = Table::try_from(self).expect("config serializes");
        let mut out = String::new();
        for (section, body) in &table {
            if let Value::Table(t) = body {
                for (k, v) in t {
                    out.push_str(&format!("{section}.{k} = {v}\n"));
                }
            }
        }
        out
    }
}

/// Parses a `--set key=value` argument. The value is read as a TOML value,
/// falling back to a bare string.
pub fn parse_assignment(arg: &str) -> Result<(String, Value), String> {
    let (k, v) = arg.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got '{arg}'"))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(format!("empty key in '{arg}'"));
    }
    let raw = v.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields one part");
    let mut t = table;
    for p in parts {
        let entry = t.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = entry.as_table_mut().ok_or_else(|| format!("'{key}': '{p}' is not a section"))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// Overlays `over` onto `base`. Integers landing on float fields become floats.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (Some(Value::Float(_)), Value::Integer(i)) => {
                base.insert(k, Value::Float(i as f64));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn preset_of(t: &Table) -> Option<String> {
    t.get("run")?.get("preset")?.as_str().map(str::to_string)
}

/// Resolves defaults < file < flags and validates the result.
pub fn resolve(file: Option<&Path>, flags: &[(String, Value)]) -> Result<RunConfig, CliError> {
    let file_table = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::invalid(format!("config {}: {e}", path.display())))?
        }
        None => Table::new(),
    };
    let mut flag_table = Table::new();
    let mut problems = Vec::new();
    for (k, v) in flags {
        if let Err(e) = set_path(&mut flag_table, k, v.clone()) {
            problems.push(e);
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Validation(problems));
    }

    let preset = preset_of(&flag_table).or_else(|| preset_of(&file_table)).unwrap_or_else(|| DEFAULT_PRESET.into());
    let base = RunConfig::preset(&preset)
        .ok_or_else(|| CliError::invalid(format!("run.preset must be one of {PRESETS:?}, got '{preset}'")))?;
    let mut table = Table::try_from(&base).expect("config serializes");
    merge(&mut table, file_table);
    merge(&mut table, flag_table);
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::invalid(e.message().trim().to_string()))?;
    cfg.validate().map_err(CliError::Validation)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(list: &[&str]) -> Vec<(String, Value)> {
        list.iter().map(|a| parse_assignment(a).unwrap()).collect()
    }

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            assert_eq!(RunConfig::preset(p).unwrap().validate(), Ok(()), "{p}");
        }
    }

    #[test]
    fn dotted_output_reloads() {
        let cfg = resolve(None, &flags(&["run.preset=desk", "train.epochs=7"])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, cfg.to_dotted()).unwrap();
        assert_eq!(resolve(Some(&path), &[]).unwrap(), cfg);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "run.preset = \"desk\"\ntrain.epochs = 5\ntrain.batch_size = 4\n").unwrap();
        let cfg = resolve(Some(&path), &flags(&["train.epochs=9"])).unwrap();
        assert_eq!(cfg.train.epochs, 9);
        assert_eq!(cfg.train.batch_size, 4);
        assert_eq!(cfg.grid.cell_size, SimulationSetup::desk_scale().discretization.cell_size);
    }

    #[test]
    fn integer_accepted_for_float() {
        let cfg = resolve(None, &flags(&["scene.wall_eps_max=8"])).unwrap();
        assert_eq!(cfg.scene.wall_eps_max, 8.0);
    }

    #[test]
    fn all_problems_listed() {
        let err = resolve(None, &flags(&["scene.wall_eps_max=12", "train.epochs=0", "run.mode=three"])).unwrap_err();
        match err {
            CliError::Validation(list) => {
                assert!(list.len() >= 3, "{list:?}");
                assert!(list.iter().any(|m| m.contains("wall_eps_max") && m.contains("[3, 9]")));
                assert!(list.iter().any(|m| m.contains("train.epochs")));
                assert!(list.iter().any(|m| m.contains("run.mode")));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = resolve(None, &flags(&["grid.cellsize=0.1"])).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("cellsize"), "{err}");
    }
}
