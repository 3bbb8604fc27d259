use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MraiError>;

#[derive(Debug, Error)]
pub enum MraiError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported field strength {0} T (relaxation table covers 1.5 T and 3.0 T)")]
    UnsupportedField(f64),

    #[error("tissue {tissue} has {available} valid patch centers, {requested} requested")]
    InsufficientTissue {
        tissue: String,
        available: usize,
        requested: usize,
    },

    #[error("manual center ({x}, {y}) is labelled {found}, declared {declared}")]
    LabelMismatch {
        x: usize,
        y: usize,
        declared: String,
        found: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite activations in layer `{layer}`")]
    NumericOverflow { layer: &'static str },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("optimizer failed to descend: final objective {final_objective} > initial {initial}")]
    NonDescent { initial: f64, final_objective: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl MraiError {
    /// Whether the error stems from numerical breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            MraiError::NumericOverflow { .. }
                | MraiError::NonFiniteLoss { .. }
                | MraiError::NonDescent { .. }
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(
            self,
            MraiError::Config(_)
                | MraiError::InvalidArgument(_)
                | MraiError::UnsupportedField(_)
        )
    }
}
