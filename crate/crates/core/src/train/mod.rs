//! Pre-training, alternating adversarial optimisation and run persistence.
//!
//! Each adversarial batch runs one discriminator step, one classifier step
//! and one generator step, in that order. The generator is evaluated once per
//! batch; its output is a constant for the critic steps and the live graph for
//! its own step, where the critic is frozen.

mod config;
mod engine;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};

pub use config::TrainingConfig;
pub use engine::{
    epoch_seed, mean_l1, run, Batch, RunSummary, TrainOptions, Trainer, CHECKPOINT_FILE, CONFIG_FILE, REPORT_FILE,
    STEPS_FILE,
};
pub use report::{read_csv, write_csv, CsvStream, StepReport, CSV_HEADER};

use crate::config::ConfigError;
use crate::dataset::DatasetError;
use crate::models::ModelError;
use crate::tensor::TensorError;

#[derive(Debug)]
pub enum TrainError {
    Config(ConfigError),
    Dataset(DatasetError),
    Model(ModelError),
    Tensor(TensorError),
    EmptyDataset,
    /// A loss came out NaN or infinite; no parameter was updated.
    NonFiniteLoss {
        step: u64,
        loss: &'static str,
    },
    Resume(String),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl TrainError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "{e}"),
            Self::Dataset(e) => write!(f, "{e}"),
            Self::Model(e) => write!(f, "{e}"),
            Self::Tensor(e) => write!(f, "{e}"),
            Self::EmptyDataset => write!(f, "the training set is empty"),
            Self::NonFiniteLoss { step, loss } => {
                write!(f, "{loss} is not finite at step {step}; the step was refused")
            }
            Self::Resume(d) => write!(f, "cannot resume: {d}"),
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for TrainError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Config(e) => Some(e),
            Self::Dataset(e) => Some(e),
            Self::Model(e) => Some(e),
            Self::Tensor(e) => Some(e),
            Self::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<ConfigError> for TrainError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<DatasetError> for TrainError {
    fn from(e: DatasetError) -> Self {
        Self::Dataset(e)
    }
}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        Self::Model(e)
    }
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        Self::Tensor(e)
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;
