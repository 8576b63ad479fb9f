//! `twr`: simulate scenes, build datasets, train and apply the regression network.

mod commands;
mod config;
mod error;
mod pgm;
mod probe_csv;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::Value;

use config::{parse_assignment, resolve, RunConfig};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "twr", version, about = "Through-the-wall radar simulation and parameter regression")]
struct Cli {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed for scene sampling, splitting, initialisation and training.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for simulations and batch math (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Settings preset: full or desk.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Override any configuration key, e.g. `--set grid.n_steps=2048`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_assignment)]
    set: Vec<(String, Value)>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write the probe series.
    Simulate(SimulateArgs),
    /// Generate a labelled dataset.
    GenDataset(GenArgs),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Evaluate a trained network on one split of a dataset.
    Eval(EvalArgs),
    /// Estimate scene parameters from a probe CSV or a dataset sample.
    Predict(PredictArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Probe CSV output.
    #[arg(long, default_value = "probes.csv")]
    pub out: PathBuf,
    #[arg(long, value_name = "MODE")]
    pub mode: Option<String>,
    /// Write an E_z snapshot every N steps.
    #[arg(long, value_name = "N")]
    pub snapshot_every: Option<usize>,
    #[arg(long, default_value = "snapshots")]
    pub snapshot_dir: PathBuf,
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Scene to sample when no overrides are given.
    #[arg(long, default_value_t = 0)]
    pub scene_id: u64,
    #[arg(long)]
    pub wall_eps: Option<f64>,
    #[arg(long)]
    pub wall_thickness: Option<f64>,
    #[arg(long)]
    pub target_x: Option<f64>,
    #[arg(long)]
    pub target_y: Option<f64>,
    #[arg(long)]
    pub target_eps: Option<f64>,
    #[arg(long)]
    pub target2_x: Option<f64>,
    #[arg(long)]
    pub target2_y: Option<f64>,
    #[arg(long)]
    pub target2_eps: Option<f64>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value = "dataset.twrd")]
    pub out: PathBuf,
    #[arg(long, value_name = "MODE")]
    pub mode: Option<String>,
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "model.twrm")]
    pub out: PathBuf,
    /// Stem for `<stem>.csv` and `<stem>.svg`; defaults to `<out>.curves`.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Validation report; defaults to `<out>.eval.txt`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Also write the report as `key = value` lines.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Probe CSV from `simulate`, or a dataset file.
    #[arg(long)]
    pub input: PathBuf,
    /// Sample to use when the input is a dataset (default: first sample).
    #[arg(long)]
    pub scene_id: Option<u64>,
}

impl Cli {
    fn overrides(&self) -> Vec<(String, Value)> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: Value| out.push((k.to_string(), v));
        if let Some(p) = &self.preset {
            put("run.preset", Value::String(p.clone()));
        }
        if let Some(s) = self.seed {
            match i64::try_from(s) {
                Ok(v) => put("run.seed", Value::Integer(v)),
                Err(_) => put("run.seed", Value::String(s.to_string())),
            }
        }
        if let Some(w) = self.workers {
            put("run.workers", Value::Integer(w as i64));
        }
        let int = |v: usize| Value::Integer(v as i64);
        match &self.command {
            Some(Command::Simulate(a)) => {
                if let Some(m) = &a.mode {
                    put("run.mode", Value::String(m.clone()));
                }
                if let Some(v) = a.amplitude {
                    put("source.amplitude", Value::Float(v));
                }
            }
            Some(Command::GenDataset(a)) => {
                if let Some(m) = &a.mode {
                    put("run.mode", Value::String(m.clone()));
                }
                if let Some(c) = a.count {
                    put("run.count", int(c));
                }
            }
            Some(Command::Train(a)) => {
                if let Some(v) = a.epochs {
                    put("train.epochs", int(v));
                }
                if let Some(v) = a.batch_size {
                    put("train.batch_size", int(v));
                }
                if let Some(v) = a.learning_rate {
                    put("train.learning_rate", Value::Float(v));
                }
                if let Some(v) = a.tolerance {
                    put("train.tolerance_fraction", Value::Float(v));
                }
            }
            Some(Command::Eval(a)) => {
                if let Some(v) = a.tolerance {
                    put("train.tolerance_fraction", Value::Float(v));
                }
            }
            _ => {}
        }
        out.extend(self.set.iter().cloned());
        out
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg: RunConfig = resolve(cli.config.as_deref(), &cli.overrides())?;
    if cli.print_config {
        print!("{}", cfg.to_dotted());
        return Ok(());
    }
    match cli.command {
        Some(Command::Simulate(a)) => commands::simulate(&cfg, &a),
        Some(Command::GenDataset(a)) => commands::gen_dataset(&cfg, &a),
        Some(Command::Train(a)) => commands::train(&cfg, &a),
        Some(Command::Eval(a)) => commands::eval(&cfg, &a),
        Some(Command::Predict(a)) => commands::predict(&cfg, &a),
        None => Err(CliError::invalid("no command given (try --help)")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
