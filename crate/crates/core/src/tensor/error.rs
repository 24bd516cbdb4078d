use std::fmt;

/// Errors raised by tensor construction, differentiable ops and the optimizer.
#[derive(Clone, Debug, PartialEq)]
pub enum TensorError {
    /// A shape contained a zero extent.
    InvalidShape { shape: Vec<usize> },
    /// Data length does not match the product of the extents.
    DataLength { expected: usize, got: usize },
    /// Two operands cannot be combined by `op`.
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// An operand has the wrong rank or layout for `op`.
    BadRank {
        op: &'static str,
        expected: &'static str,
        got: Vec<usize>,
    },
    /// Batch statistics need at least two samples per channel.
    DegenerateStatistics { samples_per_channel: usize },
    /// `backward` was called on something other than a scalar.
    NonScalarLoss { shape: Vec<usize> },
    /// A class label exceeds the number of logits.
    LabelOutOfRange { label: usize, classes: usize },
    /// The optimizer refused a step because a gradient is not finite.
    NonFiniteGradient { param: String },
    /// Optimizer state does not line up with the parameter list.
    OptimizerMismatch { detail: String },
    /// Generic contract violation with a short description.
    Contract(String),
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::InvalidShape { shape } => {
                write!(f, "invalid shape {shape:?}: every extent must be positive")
            }
            TensorError::DataLength { expected, got } => {
                write!(f, "data length mismatch: expected {expected}, got {got}")
            }
            TensorError::ShapeMismatch { op, left, right } => {
                write!(f, "{op}: incompatible shapes {left:?} and {right:?}")
            }
            TensorError::BadRank { op, expected, got } => {
                write!(f, "{op}: expected {expected}, got shape {got:?}")
            }
            TensorError::DegenerateStatistics { samples_per_channel } => write!(
                f,
                "batch norm in train mode needs at least 2 samples per channel, got {samples_per_channel}"
            ),
            TensorError::NonScalarLoss { shape } => {
                write!(f, "backward requires a scalar loss, got shape {shape:?}")
            }
            TensorError::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            TensorError::NonFiniteGradient { param } => {
                write!(f, "refusing optimizer step: gradient of `{param}` is not finite")
            }
            TensorError::OptimizerMismatch { detail } => {
                write!(f, "optimizer state mismatch: {detail}")
            }
            TensorError::Contract(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for TensorError {}
