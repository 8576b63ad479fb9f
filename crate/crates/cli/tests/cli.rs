use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

/// Small desk-scale settings that keep every command under a few seconds.
const FAST: &[&str] = &[
    "--preset",
    "desk",
    "--set",
    "grid.n_steps=512",
    "--set",
    "features.n_time_samples=32",
    "--set",
    "model.hidden=[32, 16]",
    "--set",
    "model.dropout=[0.0, 0.0]",
];

fn twr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twr")).args(args).output().expect("binary runs")
}

fn fast(args: &[&str]) -> Output {
    let mut all: Vec<&str> = FAST.to_vec();
    all.extend_from_slice(args);
    twr(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stdout:\n{}\nstderr:\n{}", stdout(&o), stderr(&o));
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: TempDir,
    single: PathBuf,
    two: PathBuf,
    model: PathBuf,
    model_two: PathBuf,
}

/// Datasets and models shared by the tests in this file.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let single = dir.path().join("single.twrd");
        let two = dir.path().join("two.twrd");
        let model = dir.path().join("single.twrm");
        let model_two = dir.path().join("two.twrm");
        ok(fast(&["--seed", "3", "gen-dataset", "--count", "30", "--out", s(&single)]));
        ok(fast(&["--seed", "3", "gen-dataset", "--mode", "two", "--count", "12", "--out", s(&two)]));
        ok(fast(&["--seed", "3", "train", "--dataset", s(&single), "--out", s(&model), "--epochs", "5", "--quiet"]));
        ok(fast(&[
            "--seed", "3", "--set", "run.mode=two", "train", "--dataset", s(&two), "--out", s(&model_two), "--epochs",
            "2", "--quiet",
        ]));
        Fixture { _dir: dir, single, two, model, model_two }
    })
}

fn dataset_header(path: &Path) -> (u32, u64, u32, u32) {
    let b = std::fs::read(path).unwrap();
    assert_eq!(&b[..4], b"TWRD");
    let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
    let n = u64::from_le_bytes(b[12..20].try_into().unwrap());
    (u32_at(8), n, u32_at(20), u32_at(24))
}

#[test]
fn print_config_layers_defaults_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "run.preset = \"desk\"\ntrain.epochs = 17\ntrain.batch_size = 8\n").unwrap();
    let o = ok(twr(&["--config", s(&cfg), "--set", "train.batch_size=4", "--seed", "11", "--print-config"]));
    let out = stdout(&o);
    assert!(out.contains("train.epochs = 17\n"), "{out}");
    assert!(out.contains("train.batch_size = 4\n"), "{out}");
    assert!(out.contains("run.seed = 11\n"), "{out}");
    assert!(out.contains("grid.cell_size = 0.015\n"), "{out}");
    assert!(out.contains("train.learning_rate = 0.001\n"), "{out}");

    let dflt = stdout(&ok(twr(&["--print-config"])));
    assert!(dflt.contains("run.preset = \"full\""), "{dflt}");
    assert!(dflt.contains("train.epochs = 200\n"));
}

#[test]
fn validation_errors_are_exhaustive() {
    let o = twr(&["--set", "grid.cell_size=-1", "--set", "train.epochs=0", "--set", "model.dropout=[0.5]", "--print-config"]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    for needle in ["grid.cell_size", "train.epochs", "model.dropout"] {
        assert!(err.contains(needle), "missing {needle} in {err}");
    }
}

#[test]
fn unknown_command_and_key_exit_1() {
    assert_eq!(code(&twr(&["frobnicate"])), 1);
    assert_eq!(code(&twr(&["--set", "grid.bogus=1", "--print-config"])), 1);
    assert_eq!(code(&twr(&[])), 1);
}

#[test]
fn simulate_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    ok(fast(&["simulate", "--out", s(&out)]));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 512);
    assert_eq!(lines[0], "step,time_s,r0_ez,r0_hx,r0_hy,r1_ez,r1_hx,r1_hy,r2_ez,r2_hx,r2_hy");
    assert!(lines[1..].iter().any(|l| l.split(',').skip(2).any(|v| v.parse::<f64>().unwrap() != 0.0)));
}

#[test]
fn simulate_rejects_out_of_range_wall() {
    let o = fast(&["simulate", "--wall-eps", "12", "--out", "/nonexistent/never.csv"]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("wall-eps") && err.contains("[3, 9]"), "{err}");
}

#[test]
fn zero_amplitude_gives_zero_probes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z.csv");
    ok(fast(&["simulate", "--amplitude", "0", "--out", s(&out)]));
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines().skip(1) {
        assert!(line.split(',').skip(2).all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
    }
}

#[test]
fn snapshots_are_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let snaps = dir.path().join("snaps");
    ok(fast(&[
        "simulate",
        "--out",
        s(&dir.path().join("p.csv")),
        "--snapshot-every",
        "128",
        "--snapshot-dir",
        s(&snaps),
    ]));
    let mut names: Vec<String> =
        std::fs::read_dir(&snaps).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["ez_000128.pgm", "ez_000256.pgm", "ez_000384.pgm", "ez_000512.pgm"]);
    let img = std::fs::read(snaps.join("ez_000512.pgm")).unwrap();
    let head = b"P5\n133 133\n255\n";
    assert_eq!(&img[..head.len()], head);
    assert_eq!(img.len(), head.len() + 133 * 133);
}

#[test]
fn simulate_with_fixed_scene_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let o = ok(fast(&[
        "simulate", "--out", s(&out), "--wall-eps", "4", "--wall-thickness", "0.12", "--target-x", "1.2",
        "--target-y", "1.0", "--target-eps", "40",
    ]));
    let text = stdout(&o);
    assert!(text.contains("wall eps 4.0000 thickness 0.1200"), "{text}");
    assert!(text.contains("target (1.2000, 1.0000) m eps 40.0000"), "{text}");
}

#[test]
fn gen_dataset_label_lengths_and_sidecar() {
    let f = fixture();
    let (mode, n, feat, labels) = dataset_header(&f.single);
    assert_eq!((mode, n, feat, labels), (1, 30, 3 * 3 * 32, 5));
    let (mode, n, _, labels) = dataset_header(&f.two);
    assert_eq!((mode, n, labels), (2, 12, 8));
    let side = std::fs::read_to_string(format!("{}.meta.txt", f.single.display())).unwrap();
    assert!(side.contains("samples = 30"), "{side}");
    assert!(side.contains("split = 21 train / 4 val / 5 test") || side.contains("split = 21 train / 5 val / 4 test"), "{side}");
}

#[test]
fn gen_dataset_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.twrd");
    let b = dir.path().join("b.twrd");
    ok(fast(&["--workers", "1", "gen-dataset", "--count", "6", "--out", s(&a)]));
    ok(fast(&["--workers", "3", "gen-dataset", "--count", "6", "--out", s(&b)]));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn train_writes_artifacts_and_is_deterministic() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let m1 = dir.path().join("m1.twrm");
    let m2 = dir.path().join("m2.twrm");
    ok(fast(&["--seed", "3", "train", "--dataset", s(&f.single), "--out", s(&m1), "--epochs", "1", "--quiet"]));
    ok(fast(&["--seed", "3", "train", "--dataset", s(&f.single), "--out", s(&m2), "--epochs", "1", "--quiet"]));
    assert_eq!(std::fs::read(&m1).unwrap(), std::fs::read(&m2).unwrap());
    let curves = std::fs::read_to_string(dir.path().join("m1.twrm.curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 2);
    let svg = std::fs::read_to_string(dir.path().join("m1.twrm.curves.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    let report = std::fs::read_to_string(dir.path().join("m1.twrm.eval.txt")).unwrap();
    assert!(report.contains("split = val") && report.contains("baseline_msle = "), "{report}");
}

#[test]
fn train_default_epochs_write_full_curves() {
    let f = fixture();
    let curves = std::fs::read_to_string(format!("{}.curves.csv", f.model.display())).unwrap();
    assert_eq!(curves.lines().count(), 1 + 5);
    assert!(curves.starts_with("epoch,train_loss,val_loss,val_accuracy,seconds\n"));
}

#[test]
fn train_rejects_mode_mismatch() {
    let f = fixture();
    let o = fast(&["train", "--dataset", s(&f.two), "--out", "/tmp/never.twrm", "--epochs", "1"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("run.mode"), "{}", stderr(&o));
}

#[test]
fn eval_reports_every_parameter() {
    let f = fixture();
    let o = ok(fast(&["eval", "--model", s(&f.model), "--dataset", s(&f.single), "--split", "test"]));
    let out = stdout(&o);
    for name in ["target_x", "target_y", "target_eps", "wall_eps", "wall_thickness"] {
        assert!(out.contains(name), "{out}");
    }
    assert!(out.contains("accuracy"));

    let o = ok(fast(&["eval", "--model", s(&f.model_two), "--dataset", s(&f.two), "--split", "val"]));
    for name in ["target1_x", "target2_eps", "wall_thickness"] {
        assert!(stdout(&o).contains(name), "{}", stdout(&o));
    }
}

#[test]
fn eval_rejects_head_mismatch_and_missing_split() {
    let f = fixture();
    let o = fast(&["eval", "--model", s(&f.model), "--dataset", s(&f.two)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("head"), "{}", stderr(&o));
    let o = fast(&["eval", "--model", s(&f.model), "--dataset", s(&f.single), "--split", "holdout"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_files_exit_3() {
    let f = fixture();
    assert_eq!(code(&fast(&["eval", "--model", "/nonexistent.twrm", "--dataset", s(&f.single)])), 3);
    assert_eq!(code(&fast(&["train", "--dataset", "/nonexistent.twrd"])), 3);
    assert_eq!(code(&twr(&["--config", "/nonexistent.conf", "--print-config"])), 3);
}

#[test]
fn corrupt_model_exit_3() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.twrm");
    let mut bytes = std::fs::read(&f.model).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&bad, bytes).unwrap();
    let o = fast(&["eval", "--model", s(&bad), "--dataset", s(&f.single)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));
}

#[test]
fn predict_from_dataset_and_probe_file() {
    let f = fixture();
    let o = ok(fast(&["predict", "--model", s(&f.model), "--input", s(&f.single), "--scene-id", "4"]));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains("(label ")).count(), 5, "{out}");
    assert!(out.contains("target_x") && out.contains(" m "), "{out}");

    let dir = tempfile::tempdir().unwrap();
    let probes = dir.path().join("p.csv");
    ok(fast(&["simulate", "--out", s(&probes)]));
    let o = ok(fast(&["predict", "--model", s(&f.model), "--input", s(&probes)]));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("target_") || l.starts_with("wall_")).count(), 5);

    let o = ok(fast(&["predict", "--model", s(&f.model_two), "--input", s(&f.two)]));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains("(label ")).count(), 8, "{out}");
    assert!(out.contains("canonical order"), "{out}");
}

#[test]
fn predict_rejects_malformed_and_mismatched_input() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "step,time_s,r0_ez,r0_hx,r0_hy\n0,1e-9,0,0,0\n1,2e-9,0,oops,0\n").unwrap();
    let o = fast(&["predict", "--model", s(&f.model), "--input", s(&bad)]);
    assert_eq!(code(&o), 1);
    let offset = "step,time_s,r0_ez,r0_hx,r0_hy\n0,1e-9,0,0,0\n1,2e-9,0,".len();
    assert!(stderr(&o).contains(&format!("byte {offset}")), "{}", stderr(&o));

    let probes = dir.path().join("p.csv");
    ok(fast(&["simulate", "--out", s(&probes)]));
    let o = fast(&["--set", "features.n_time_samples=64", "predict", "--model", s(&f.model), "--input", s(&probes)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("features"), "{}", stderr(&o));
}
