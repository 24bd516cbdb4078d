//! Fidelity, seam and font-identity metrics, and the recurrent-versus-baseline
//! comparison report.

mod compare;
mod metrics;

use std::fmt;
use std::path::{Path, PathBuf};

pub use compare::{
    compare_models, evaluate, render_grid, Aggregate, EvalReport, MeanStd, PairedRow, SampleMetrics, Translations,
    GRID_FILE, GRID_GAP, GRID_GAP_VALUE, PAIRED_FILE, REPORT_FILE,
};
pub use metrics::{classifier_accuracy, l1_and_psnr, predict_fonts, seam_score, SeamScore, PSNR_PEAK, SEAM_EPSILON};

use crate::dataset::DatasetError;
use crate::models::ModelError;
use crate::tensor::TensorError;

#[derive(Debug)]
pub enum EvalError {
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    NoBoundary {
        width: usize,
    },
    EmptySamples,
    FontCount {
        expected: usize,
        found: usize,
    },
    Model(ModelError),
    Dataset(DatasetError),
    Tensor(TensorError),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch { left, right } => {
                write!(
                    f,
                    "image sizes differ: {}×{} vs {}×{}",
                    left.0, left.1, right.0, right.1
                )
            }
            Self::NoBoundary { width } => write!(f, "an image {width} px wide has no patch boundary"),
            Self::EmptySamples => write!(f, "no samples to evaluate"),
            Self::FontCount { expected, found } => {
                write!(f, "font count mismatch: expected K = {expected}, found K = {found}")
            }
            Self::Model(e) => write!(f, "{e}"),
            Self::Dataset(e) => write!(f, "{e}"),
            Self::Tensor(e) => write!(f, "{e}"),
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for EvalError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Model(e) => Some(e),
            Self::Dataset(e) => Some(e),
            Self::Tensor(e) => Some(e),
            Self::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<ModelError> for EvalError {
    fn from(e: ModelError) -> Self {
        Self::Model(e)
    }
}

impl From<DatasetError> for EvalError {
    fn from(e: DatasetError) -> Self {
        Self::Dataset(e)
    }
}

impl From<TensorError> for EvalError {
    fn from(e: TensorError) -> Self {
        Self::Tensor(e)
    }
}

pub type Result<T> = std::result::Result<T, EvalError>;
