use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use twr::dataset::{
    extract_features, generate_dataset, load_dataset, save_dataset, scene_seed, split, Dataset, DatasetError,
    Sample, MAGIC,
};
use twr::fdtd::{run_simulation_with, SourceSpec, YBoundary};
use twr::io::write_atomic;
use twr::nn::{load_model, predict as nn_predict, save_model, Matrix};
use twr::par::Executor;
use twr::scene::{
    canonical_order, label_names, rasterize, sample_scene, validate_scene, Interval, Mode, SceneGrid, TargetSpec,
    TARGET_SIDE,
};
use twr::trainer::{
    emit_curves, evaluate, init_model, mean_predictor_baseline, prepare_splits, train as run_training,
    EpochRecord, LabeledSet,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::{pgm, probe_csv, EvalArgs, GenArgs, PredictArgs, SimulateArgs, TrainArgs};

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn check_override(problems: &mut Vec<String>, flag: &str, value: Option<f64>, range: Interval) {
    if let Some(v) = value {
        if !(v >= range.min && v <= range.max) {
            problems.push(format!("--{flag} = {v} outside [{}, {}]", range.min, range.max));
        }
    }
}

pub fn simulate(cfg: &RunConfig, a: &SimulateArgs) -> Result<(), CliError> {
    let setup = cfg.setup();
    let ranges = setup.ranges;
    let mode = cfg.mode();
    let mut problems = Vec::new();
    check_override(&mut problems, "wall-eps", a.wall_eps, ranges.wall_eps);
    check_override(&mut problems, "wall-thickness", a.wall_thickness, ranges.wall_thickness);
    for (tag, x, y, eps) in [
        ("target", a.target_x, a.target_y, a.target_eps),
        ("target2", a.target2_x, a.target2_y, a.target2_eps),
    ] {
        check_override(&mut problems, &format!("{tag}-x"), x, ranges.center_x());
        check_override(&mut problems, &format!("{tag}-y"), y, ranges.center_y());
        check_override(&mut problems, &format!("{tag}-eps"), eps, ranges.target_eps);
    }
    if mode == Mode::Single && (a.target2_x.is_some() || a.target2_y.is_some() || a.target2_eps.is_some()) {
        problems.push("--target2-* needs run.mode = two".into());
    }
    if a.snapshot_every == Some(0) {
        problems.push("--snapshot-every must be at least 1".into());
    }
    if !problems.is_empty() {
        return Err(CliError::Validation(problems));
    }

    let mut scene = sample_scene(scene_seed(cfg.run.seed, a.scene_id), mode, &ranges, &setup.geometry)?;
    if let Some(v) = a.wall_eps {
        scene.wall.eps_r = v;
    }
    if let Some(v) = a.wall_thickness {
        scene.wall.thickness = v;
    }
    let overrides = [(a.target_x, a.target_y, a.target_eps), (a.target2_x, a.target2_y, a.target2_eps)];
    for (t, (x, y, eps)) in scene.targets.iter_mut().zip(overrides) {
        *t = TargetSpec {
            center_x: x.unwrap_or(t.center_x),
            center_y: y.unwrap_or(t.center_y),
            side: TARGET_SIDE,
            eps_r: eps.unwrap_or(t.eps_r),
        };
    }
    scene.targets = canonical_order(&scene.targets);
    validate_scene(&scene).map_err(|v| CliError::Validation(v.iter().map(|x| x.to_string()).collect()))?;

    let disc = &setup.discretization;
    let sg = SceneGrid::for_scene(&scene, disc)?;
    let materials = rasterize(&scene, &sg)?;
    let source = SourceSpec {
        cells: sg.source_cells(&scene),
        frequency: disc.frequency,
        waveform: setup.source.waveform,
        amplitude: setup.source.amplitude,
        ramp_cycles: setup.source.ramp_cycles,
    };
    let probes = sg.receiver_nodes(&scene);

    if a.snapshot_every.is_some() {
        std::fs::create_dir_all(&a.snapshot_dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", a.snapshot_dir.display())))?;
    }
    let mut snap_err: Option<std::io::Error> = None;
    let mut snaps = 0;
    let record = run_simulation_with(&materials, &sg.grid, &source, &probes, &disc.pml, YBoundary::Absorbing, |f| {
        if let Some(n) = a.snapshot_every {
            if f.q % n == 0 && snap_err.is_none() {
                let path = a.snapshot_dir.join(format!("ez_{:06}.pgm", f.q));
                match write_atomic(&path, &pgm::encode_ez(f, sg.pml_depth)) {
                    Ok(()) => snaps += 1,
                    Err(e) => snap_err = Some(e),
                }
            }
        }
    })?;
    if let Some(e) = snap_err {
        return Err(CliError::Io(format!("writing snapshots: {e}")));
    }
    write_atomic(&a.out, probe_csv::encode(&record).as_bytes())?;

    println!(
        "scene: wall eps {:.4} thickness {:.4} m; {}",
        scene.wall.eps_r,
        scene.wall.thickness,
        scene
            .targets
            .iter()
            .map(|t| format!("target ({:.4}, {:.4}) m eps {:.4}", t.center_x, t.center_y, t.eps_r))
            .collect::<Vec<_>>()
            .join("; ")
    );
    println!(
        "grid {}x{} cells, {} steps of {:.4e} s; {} receivers -> {}",
        sg.grid.nx,
        sg.grid.ny,
        sg.grid.n_steps,
        sg.grid.dt,
        probes.len(),
        a.out.display()
    );
    if snaps > 0 {
        println!("{snaps} snapshots -> {}", a.snapshot_dir.display());
    }
    Ok(())
}

pub fn gen_dataset(cfg: &RunConfig, a: &GenArgs) -> Result<(), CliError> {
    let setup = cfg.setup();
    let mode = cfg.mode();
    let count = cfg.run.count;
    let seed = cfg.run.seed;
    let exec = Executor::new(cfg.run.workers);
    eprintln!(
        "generating {count} {}-target scenes on {} worker(s), {} features each",
        mode.name(),
        exec.workers(),
        setup.feature_len()
    );
    let every = (count / 20).max(1);
    let progress = |done: usize, total: usize| {
        if done % every == 0 || done == total {
            eprintln!("  {done}/{total}");
        }
    };
    let (mut ds, report) = match generate_dataset(mode, count, &setup, seed, &exec, Some(&progress)) {
        Ok(r) => r,
        Err(DatasetError::GenerationFailed { failed, total, report, .. }) => {
            for f in &report.failures {
                eprintln!("  scene {}: {}", f.scene_id, f.message);
            }
            return Err(CliError::Runtime(format!("{failed} of {total} simulations failed")));
        }
        Err(e) => return Err(e.into()),
    };
    if !report.failures.is_empty() {
        eprintln!("{} scene(s) failed and were skipped:", report.failures.len());
        for f in &report.failures {
            eprintln!("  scene {}: {}", f.scene_id, f.message);
        }
    }
    if ds.len() >= 3 {
        ds.meta.split = Some(split(&ds.ids(), cfg.split_fractions(), seed)?);
    }
    ds.meta.settings.insert("run.seed".into(), seed.to_string());
    save_dataset(&ds, &a.out)?;
    let sidecar = with_suffix(&a.out, ".meta.txt");
    write_atomic(&sidecar, describe_dataset(&ds, report.failures.len()).as_bytes())?;
    println!("{} samples ({} labels each) -> {}", ds.len(), ds.meta.label_len, a.out.display());
    Ok(())
}

fn describe_dataset(ds: &Dataset, failures: usize) -> String {
    let m = &ds.meta;
    let mut s = String::new();
    let _ = writeln!(s, "mode = {}", m.mode.name());
    let _ = writeln!(s, "samples = {}", ds.len());
    let _ = writeln!(s, "failed = {failures}");
    let _ = writeln!(s, "feature_len = {}", m.feature_len);
    let _ = writeln!(s, "label_len = {}", m.label_len);
    if let Some(seed) = m.master_seed {
        let _ = writeln!(s, "master_seed = {seed}");
    }
    let _ = writeln!(s, "normalized = {}", m.normalization.is_some());
    if let Some(sp) = &m.split {
        let (a, b, c) = sp.counts();
        let _ = writeln!(s, "split = {a} train / {b} val / {c} test");
    }
    for ((name, unit), iv) in label_names(m.mode).iter().zip(m.label_ranges()) {
        let unit = if unit.is_empty() { String::new() } else { format!(" {unit}") };
        let _ = writeln!(s, "range.{name} = [{}, {}]{unit}", iv.min, iv.max);
    }
    for (k, v) in &m.settings {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

fn check_mode(cfg: &RunConfig, ds: &Dataset) -> Result<(), CliError> {
    if ds.meta.mode != cfg.mode() {
        return Err(CliError::invalid(format!(
            "dataset holds {}-target samples but run.mode = {} (set --set run.mode={})",
            ds.meta.mode.name(),
            cfg.run.mode,
            ds.meta.mode.name()
        )));
    }
    Ok(())
}

pub fn train(cfg: &RunConfig, a: &TrainArgs) -> Result<(), CliError> {
    let mut ds = load_dataset(&a.dataset)?;
    check_mode(cfg, &ds)?;
    let seed = cfg.run.seed;
    if ds.meta.split.is_none() {
        ds.meta.split = Some(split(&ds.ids(), cfg.split_fractions(), seed)?);
    }
    let prep = prepare_splits(&ds)?;
    let ranges = ds.meta.label_ranges();
    let net = init_model(ds.meta.feature_len, &cfg.model.hidden, &cfg.model.dropout, &ranges, seed)?;
    let exec = Executor::new(cfg.run.workers);
    let tc = cfg.train_config();
    eprintln!(
        "training {} parameters on {} samples ({} validation), {} epochs",
        net.param_count(),
        prep.train.len(),
        prep.val.len(),
        tc.epochs
    );
    let quiet = a.quiet;
    let mut progress = |r: &EpochRecord| {
        if !quiet {
            eprintln!(
                "epoch {:>4}  train {:.5e}  val {:.5e}  acc {:.4}  {:.1}s",
                r.epoch, r.train_loss, r.val_loss, r.val_accuracy, r.seconds
            );
        }
    };
    let (net, history) = run_training(net, &prep.train, &prep.val, &ranges, &tc, &exec, Some(&mut progress))?;
    save_model(&net, &prep.normalizer, &a.out)?;
    let stem = a.curves.clone().unwrap_or_else(|| with_suffix(&a.out, ".curves"));
    let (csv, svg) = emit_curves(&history, &stem)?;

    let report = evaluate(&net, &prep.val, &ds.meta, tc.tolerance_fraction, &exec)?;
    let baseline = mean_predictor_baseline(&prep.train.y, &prep.val.y)?;
    print!("{}", report.table());
    println!("baseline   {baseline:.6e} (mean predictor)");
    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.out, ".eval.txt"));
    let text = format!("split = val\n{}baseline_msle = {baseline:?}\n", report.key_values());
    write_atomic(&report_path, text.as_bytes())?;
    println!(
        "model -> {}; curves -> {}, {}; report -> {}",
        a.out.display(),
        csv.display(),
        svg.display(),
        report_path.display()
    );
    Ok(())
}

/// Network inputs for `samples`: stored features when the dataset is
/// normalized, otherwise raw features mapped with the checkpoint statistics.
fn network_inputs(ds: &Dataset, samples: &[&Sample], norm: &twr::dataset::Normalizer) -> Result<LabeledSet, CliError> {
    let stats = if ds.meta.normalization.is_some() { None } else { Some(norm) };
    Ok(LabeledSet::from_samples(samples, stats)?)
}

pub fn eval(cfg: &RunConfig, a: &EvalArgs) -> Result<(), CliError> {
    let (net, norm) = load_model(&a.model)?;
    let ds = load_dataset(&a.dataset)?;
    if net.output_len() != ds.meta.label_len {
        return Err(CliError::invalid(format!(
            "model head predicts {} labels but the dataset is {}-target with {} labels",
            net.output_len(),
            ds.meta.mode.name(),
            ds.meta.label_len
        )));
    }
    let samples = ds.split_samples(&a.split)?;
    if samples.is_empty() {
        return Err(CliError::invalid(format!("split '{}' is empty", a.split)));
    }
    let set = network_inputs(&ds, &samples, &norm)?;
    let exec = Executor::new(cfg.run.workers);
    let report = evaluate(&net, &set, &ds.meta, cfg.train.tolerance_fraction, &exec)?;
    println!("split      {}", a.split);
    print!("{}", report.table());
    if let Some(path) = &a.report {
        write_atomic(path, format!("split = {}\n{}", a.split, report.key_values()).as_bytes())?;
    }
    Ok(())
}

pub fn predict(cfg: &RunConfig, a: &PredictArgs) -> Result<(), CliError> {
    let (net, norm) = load_model(&a.model)?;
    let mode = Mode::from_label_len(net.output_len())
        .ok_or_else(|| CliError::Io(format!("model head has {} outputs", net.output_len())))?;
    let bytes = std::fs::read(&a.input).map_err(|e| CliError::Io(format!("cannot read {}: {e}", a.input.display())))?;

    let (x, labels) = if bytes.starts_with(MAGIC) {
        let ds = twr::dataset::decode_dataset(&bytes)?;
        let id = a.scene_id.or_else(|| ds.samples.first().map(|s| s.scene_id));
        let id = id.ok_or_else(|| CliError::invalid("dataset holds no samples"))?;
        let sample = ds.select(&[id])?[0];
        let set = network_inputs(&ds, &[sample], &norm)?;
        println!("input: {} scene {id}", a.input.display());
        (set.x.row(0).to_vec(), Some(set.y.row(0).to_vec()))
    } else {
        if a.scene_id.is_some() {
            return Err(CliError::invalid("--scene-id applies only to dataset input"));
        }
        let text = std::str::from_utf8(&bytes).map_err(|e| {
            CliError::invalid(format!("parse error at byte {}: input is not UTF-8 text", e.valid_up_to()))
        })?;
        let record = probe_csv::decode(text).map_err(|e| CliError::invalid(e.to_string()))?;
        let feats = extract_features(&record, &cfg.setup().features)?;
        if feats.len() != norm.len() {
            return Err(CliError::invalid(format!(
                "probe file yields {} features but the model takes {}",
                feats.len(),
                norm.len()
            )));
        }
        let raw: Vec<f32> = feats.iter().map(|&v| v as f32).collect();
        println!("input: {} ({} receivers, {} steps)", a.input.display(), record.ez.len(), record.n_steps());
        (norm.apply(&raw), None)
    };
    if x.len() != net.input_len() {
        return Err(CliError::invalid(format!(
            "input has {} features but the model takes {}",
            x.len(),
            net.input_len()
        )));
    }
    let out = nn_predict(&net, &Matrix { rows: 1, cols: x.len(), data: x }, &Executor::sequential())?;
    for (k, (name, unit)) in label_names(mode).iter().enumerate() {
        let est = format!("{:.5} {unit}", out.data[k]);
        match &labels {
            Some(y) => println!("{name:<16} {est:>14}   (label {:.5})", y[k]),
            None => println!("{name:<16} {est:>14}"),
        }
    }
    if mode == Mode::Two {
        println!("targets are listed in canonical order: ascending x, ties by ascending y");
    }
    Ok(())
}
