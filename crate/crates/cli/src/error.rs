use std::fmt;

use twr::dataset::DatasetError;
use twr::fdtd::FdtdError;
use twr::nn::NnError;
use twr::scene::SceneError;
use twr::trainer::TrainError;

/// Failure classes, one per exit code.
#[derive(Debug)]
pub enum CliError {
    /// Every problem found with the configuration or arguments.
    Validation(Vec<String>),
    Runtime(String),
    Io(String),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(vec![msg.into()])
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(list) if list.len() == 1 => write!(f, "invalid configuration: {}", list[0]),
            CliError::Validation(list) => {
                write!(f, "invalid configuration ({} problems):", list.len())?;
                for m in list {
                    write!(f, "\n  - {m}")?;
                }
                Ok(())
            }
            CliError::Runtime(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<FdtdError> for CliError {
    fn from(e: FdtdError) -> Self {
        match e {
            FdtdError::InvalidArgument(m) => CliError::invalid(m),
            e @ FdtdError::Unstable { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::InvalidArgument(m) => CliError::invalid(m),
            SceneError::Invalid(v) => CliError::Validation(v.iter().map(|x| x.to_string()).collect()),
            e @ SceneError::SamplingFailed { .. } => CliError::Runtime(e.to_string()),
            SceneError::Fdtd(e) => e.into(),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidArgument(m) => CliError::invalid(m),
            DatasetError::Scene(e) => e.into(),
            DatasetError::Fdtd(e) => e.into(),
            e @ DatasetError::GenerationFailed { .. } => CliError::Runtime(e.to_string()),
            DatasetError::Io(e) => e.into(),
            e => CliError::Io(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::InvalidArgument(m) => CliError::invalid(m),
            e => CliError::Io(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidArgument(m) => CliError::invalid(m),
            e @ TrainError::NonFiniteLoss { .. } => CliError::Runtime(e.to_string()),
            TrainError::Nn(e) => e.into(),
            TrainError::Dataset(e) => e.into(),
            TrainError::Io(e) => e.into(),
        }
    }
}
