//! Std-side support for `qkdlink-core`: configuration and file formats, plus
//! the parallel drivers and command implementations behind the `qkdlink`
//! binary.

pub mod commands;
pub mod config;
pub mod io;
pub mod parallel;
pub mod plot;

pub use qkdlink_core as core;

use qkdlink_core::experiments::{calibrate_all, closure_residuals, CalibrationSet, Residual};
use qkdlink_core::system::SystemModel;
use qkdlink_core::Error as ModelError;

use crate::config::{ConfigError, ExperimentConfig};
use crate::io::TagFileError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const PARSE: i32 = 4;
    pub const SYNC: i32 = 5;
    pub const CLOSURE: i32 = 6;
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    TagFile(#[from] TagFileError),
    #[error("{0}")]
    Model(ModelError),
    #[error("calibration closure failed for anchor `{anchor}`: achieved {achieved:e}, target {target:e}, tolerance {tolerance:e}")]
    Closure {
        anchor: &'static str,
        target: f64,
        achieved: f64,
        tolerance: f64,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl From<ModelError> for AppError {
    fn from(e: ModelError) -> Self {
        AppError::Model(e)
    }
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => exit::CONFIG,
            AppError::TagFile(TagFileError::Format { .. }) => exit::PARSE,
            AppError::TagFile(TagFileError::Io { .. }) | AppError::Io { .. } => exit::OTHER,
            AppError::Closure { .. } => exit::CLOSURE,
            AppError::Model(e) => match e {
                ModelError::InfeasibleCalibration { .. } => exit::INFEASIBLE,
                ModelError::SyncFailure { .. }
                | ModelError::ShortObservation { .. }
                | ModelError::InsufficientStatistics { .. }
                | ModelError::UndefinedQber => exit::SYNC,
                _ => exit::OTHER,
            },
        }
    }
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<(), AppError> {
    std::fs::write(path, contents).map_err(|source| AppError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// A configuration fitted to its anchors.
#[derive(Debug, Clone)]
pub struct Calibrated {
    pub config: ExperimentConfig,
    /// The fitted model with `fiber.raman_beta_scale` applied.
    pub model: SystemModel,
    pub set: CalibrationSet,
    /// Closure check of the fit, before any Raman scaling.
    pub residuals: Vec<Residual>,
}

impl Calibrated {
    pub fn first_failed_anchor(&self) -> Option<&Residual> {
        self.residuals.iter().find(|r| !r.passed())
    }
}

pub fn calibrate(config: &ExperimentConfig) -> Result<Calibrated, AppError> {
    let base = config.base_model()?;
    let anchors = config.anchors();
    let (mut model, set) = calibrate_all(&base, &anchors)?;
    let residuals = closure_residuals(&model, &anchors)?;
    model.raman.beta *= config.fiber.raman_beta_scale;
    Ok(Calibrated {
        config: config.clone(),
        model,
        set,
        residuals,
    })
}
