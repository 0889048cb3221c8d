use alloc::string::String;

use crate::experiments::CalibrationStep;

/// Errors raised by the models and the tag-processing chain.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("spectrum normalization off by {relative_error:e} (relative)")]
    Normalization { relative_error: f64 },

    #[error("forward current {current_ma} mA outside the characterized range [{min_ma}, {max_ma}] mA")]
    CurrentOutOfRange {
        current_ma: f64,
        min_ma: f64,
        max_ma: f64,
    },

    #[error("invalid emitter table: {0}")]
    InvalidTable(&'static str),

    #[error("calibration step '{step}' infeasible for anchor {anchor}: {detail}")]
    InfeasibleCalibration {
        step: CalibrationStep,
        anchor: &'static str,
        detail: String,
    },

    #[error("insufficient statistics: {tags} tags, need at least {required}")]
    InsufficientStatistics { tags: usize, required: usize },

    #[error("frame synchronization failed: best score {best_score:.4} at offset {best_offset} is below {floor}")]
    SyncFailure {
        best_score: f64,
        best_offset: usize,
        floor: f64,
    },

    #[error("observed span of {symbols} symbols is shorter than one {frame_length}-symbol frame")]
    ShortObservation { symbols: u64, frame_length: usize },

    #[error("QBER undefined: no sifted clicks")]
    UndefinedQber,

    #[error("{which} crossing not covered by the sweep grid")]
    UncoveredRange { which: &'static str },

    #[error("invalid run configuration: {0}")]
    InvalidRunConfig(&'static str),
}
