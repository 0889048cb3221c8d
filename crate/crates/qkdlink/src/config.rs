//! TOML experiment configuration.
//!
//! Every key carries its unit in its name. Unknown keys are rejected and the
//! error names the full key path, e.g. `spad.effciency`.

use std::path::Path;

use qkdlink_core::bb84::{DistillationModel, PolState, QBER_THRESHOLD};
use qkdlink_core::detection::{PinTiaSpec, ReceiverWindow, SpadSpec};
use qkdlink_core::emitter::{EmitterSpec, EmitterVli, TxBudget};
use qkdlink_core::experiments::{rop_grid, Anchors};
use qkdlink_core::link::{FiberSpec, RamanModel, WdmSpec};
use qkdlink_core::montecarlo::{balanced_frame, RunConfig, RunPhysics};
use qkdlink_core::spectrum::FlatTopFilter;
use qkdlink_core::system::{LinkConfig, SystemModel};
use qkdlink_core::tagproc::AnalysisParams;
use qkdlink_core::units::Wavelength;
use serde::{Deserialize, Serialize};

/// The configuration shipped in `config/default.toml`.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../../config/default.toml");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("config key `{path}`: {message}")]
    Key { path: String, message: String },
    #[error("config key `{path}`: {message}")]
    Invalid { path: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub emitter: EmitterSection,
    pub tx: TxSection,
    pub fiber: FiberSection,
    pub wdm: WdmSection,
    pub spad: SpadSection,
    pub classical_rx: ClassicalRxSection,
    pub protocol: ProtocolSection,
    pub calibration: CalibrationSection,
    pub montecarlo: MonteCarloSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitterSection {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub drive_current_ma: f64,
    /// Characterized forward currents, paired with `vli_power_uw`.
    pub vli_current_ma: Vec<f64>,
    /// Fiber-coupled output power at each `vli_current_ma` entry.
    pub vli_power_uw: Vec<f64>,
}

impl Default for EmitterSection {
    fn default() -> Self {
        EmitterSection {
            center_nm: 1548.0,
            fwhm_nm: 58.0,
            drive_current_ma: 20.0,
            vli_current_ma: vec![0.0, 20.0],
            vli_power_uw: vec![0.0, 32.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TxSection {
    pub quantum_wavelength_nm: f64,
    pub slicing_width_ghz: f64,
    pub slicing_insertion_loss_db: f64,
    pub slicing_isolation_db: f64,
    pub symbol_rate_hz: f64,
}

impl Default for TxSection {
    fn default() -> Self {
        TxSection {
            quantum_wavelength_nm: 1550.12,
            slicing_width_ghz: 200.0,
            slicing_insertion_loss_db: 0.0,
            slicing_isolation_db: 40.0,
            symbol_rate_hz: 1e8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberSection {
    pub length_km: f64,
    pub quantum_loss_db_per_km: f64,
    pub classical_loss_db_per_km: f64,
    /// Multiplies the calibrated Raman coefficient.
    pub raman_beta_scale: f64,
}

impl Default for FiberSection {
    fn default() -> Self {
        FiberSection {
            length_km: 1.0,
            quantum_loss_db_per_km: 0.21,
            classical_loss_db_per_km: 2.2,
            raman_beta_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WdmSection {
    pub quantum_insertion_loss_db: f64,
    pub classical_insertion_loss_db: f64,
    pub cleanup_width_ghz: f64,
    pub cleanup_insertion_loss_db: f64,
    pub cleanup_isolation_db: f64,
}

impl Default for WdmSection {
    fn default() -> Self {
        WdmSection {
            quantum_insertion_loss_db: 1.0,
            classical_insertion_loss_db: 1.0,
            cleanup_width_ghz: 200.0,
            cleanup_insertion_loss_db: 0.0,
            cleanup_isolation_db: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpadSection {
    pub efficiency: f64,
    pub dead_time_us: f64,
    pub dark_count_rate_cps: f64,
}

impl Default for SpadSection {
    fn default() -> Self {
        let s = SpadSpec::default();
        SpadSection {
            efficiency: s.efficiency,
            dead_time_us: s.dead_time * 1e6,
            dark_count_rate_cps: s.dark_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalRxSection {
    pub wavelength_nm: f64,
    pub responsivity_a_per_w: f64,
}

impl Default for ClassicalRxSection {
    fn default() -> Self {
        ClassicalRxSection {
            wavelength_nm: 852.0,
            responsivity_a_per_w: 0.56,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistillationKind {
    IdealAsymptotic,
    EcEfficiency,
    FixedFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub window_fraction: f64,
    pub signal_acceptance: f64,
    pub sift_factor: f64,
    pub depolarization_qber: f64,
    pub qber_threshold: f64,
    pub distillation: DistillationKind,
    /// Used when `distillation = "ec_efficiency"`.
    pub ec_efficiency: f64,
    /// Used when `distillation = "fixed_fraction"`.
    pub fixed_fraction: f64,
    pub phase_bins: usize,
    pub sync_floor: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let w = ReceiverWindow::default();
        ProtocolSection {
            window_fraction: w.window_fraction,
            signal_acceptance: w.signal_acceptance,
            sift_factor: w.sift_factor,
            depolarization_qber: 0.0,
            qber_threshold: QBER_THRESHOLD,
            distillation: DistillationKind::IdealAsymptotic,
            ec_efficiency: 1.16,
            fixed_fraction: DistillationModel::REPORTED_FRACTION,
            phase_bins: qkdlink_core::tagproc::DEFAULT_PHASE_BINS,
            sync_floor: qkdlink_core::tagproc::DEFAULT_SYNC_FLOOR,
        }
    }
}

/// Measured operating points the model is fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    pub mu: f64,
    pub raw_rate_cps: f64,
    pub qber: f64,
    pub sensitivity_dbm: f64,
    pub sensitivity_ber: f64,
    pub b2b_crossing_dbm: f64,
    pub fiber_crossing_dbm: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        let a = Anchors::default();
        CalibrationSection {
            mu: a.mu,
            raw_rate_cps: a.raw_rate,
            qber: a.qber,
            sensitivity_dbm: a.sensitivity_dbm,
            sensitivity_ber: a.sensitivity_ber,
            b2b_crossing_dbm: a.b2b_crossing_dbm,
            fiber_crossing_dbm: a.fiber_crossing_dbm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    B2b,
    Fiber,
}

impl From<Mode> for LinkConfig {
    fn from(m: Mode) -> Self {
        match m {
            Mode::B2b => LinkConfig::BackToBack,
            Mode::Fiber => LinkConfig::Fiber,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    pub seed: u64,
    pub symbols: u64,
    pub symbol_period_ps: u64,
    pub frame_length: usize,
    pub frame_seed: u64,
    /// Frame position of symbol 0; drawn from `seed` when absent.
    pub frame_offset: Option<usize>,
    pub clock_phase_offset_ps: u64,
    /// One of "R", "L", "D", "A".
    pub receiver_state: String,
    pub batch_symbols: u64,
    pub mode: Mode,
    /// Classical ROP during the run; no classical channel when absent.
    pub classical_rop_dbm: Option<f64>,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        MonteCarloSection {
            seed: 1,
            symbols: 10_000_000,
            symbol_period_ps: qkdlink_core::montecarlo::DEFAULT_SYMBOL_PERIOD_PS,
            frame_length: qkdlink_core::montecarlo::DEFAULT_FRAME_LENGTH,
            frame_seed: 1,
            frame_offset: None,
            clock_phase_offset_ps: 3_700,
            receiver_state: "R".into(),
            batch_symbols: qkdlink_core::montecarlo::DEFAULT_BATCH_SYMBOLS,
            mode: Mode::B2b,
            classical_rop_dbm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub start_dbm: f64,
    pub stop_dbm: f64,
    pub step_db: f64,
    pub ber_target: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            start_dbm: -40.0,
            stop_dbm: -15.0,
            step_db: 0.1,
            ber_target: 1e-10,
        }
    }
}

fn invalid(path: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path,
        message: message.into(),
    }
}

fn parse_state(s: &str) -> Option<PolState> {
    match s {
        "R" => Some(PolState::R),
        "L" => Some(PolState::L),
        "D" => Some(PolState::D),
        "A" => Some(PolState::A),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path.is_empty() || path == "." {
                ConfigError::Syntax(inner.to_string())
            } else {
                ConfigError::Key {
                    path,
                    message: inner.message().to_string(),
                }
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks the cross-field constraints that serde cannot.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let e = &self.emitter;
        if e.vli_current_ma.len() != e.vli_power_uw.len() {
            return Err(invalid(
                "emitter.vli_power_uw",
                format!(
                    "has {} entries but emitter.vli_current_ma has {}",
                    e.vli_power_uw.len(),
                    e.vli_current_ma.len()
                ),
            ));
        }
        if parse_state(&self.montecarlo.receiver_state).is_none() {
            return Err(invalid(
                "montecarlo.receiver_state",
                format!("`{}` is not one of R, L, D, A", self.montecarlo.receiver_state),
            ));
        }
        if self.montecarlo.frame_length == 0 {
            return Err(invalid("montecarlo.frame_length", "must be at least 1"));
        }
        if !(self.sweep.step_db > 0.0) || !(self.sweep.stop_dbm > self.sweep.start_dbm) {
            return Err(invalid(
                "sweep.step_db",
                "sweep needs step_db > 0 and stop_dbm > start_dbm",
            ));
        }
        if !(self.fiber.raman_beta_scale >= 0.0 && self.fiber.raman_beta_scale.is_finite()) {
            return Err(invalid("fiber.raman_beta_scale", "must be finite and non-negative"));
        }
        self.distillation().validate().map_err(|err| {
            invalid("protocol.distillation", err.to_string())
        })?;
        Ok(())
    }

    pub fn distillation(&self) -> DistillationModel {
        let p = &self.protocol;
        match p.distillation {
            DistillationKind::IdealAsymptotic => DistillationModel::IdealAsymptotic,
            DistillationKind::EcEfficiency => DistillationModel::EcEfficiency(p.ec_efficiency),
            DistillationKind::FixedFraction => DistillationModel::FixedFraction(p.fixed_fraction),
        }
    }

    pub fn anchors(&self) -> Anchors {
        let c = &self.calibration;
        Anchors {
            mu: c.mu,
            raw_rate: c.raw_rate_cps,
            qber: c.qber,
            sensitivity_dbm: c.sensitivity_dbm,
            sensitivity_ber: c.sensitivity_ber,
            qber_threshold: self.protocol.qber_threshold,
            b2b_crossing_dbm: c.b2b_crossing_dbm,
            fiber_crossing_dbm: c.fiber_crossing_dbm,
        }
    }

    /// The uncalibrated model: every fixed parameter set, every fitted one
    /// at a neutral value.
    pub fn base_model(&self) -> Result<SystemModel, ConfigError> {
        let e = &self.emitter;
        let knots = e
            .vli_current_ma
            .iter()
            .zip(&e.vli_power_uw)
            .map(|(&i, &p)| (i, p / 1e6))
            .collect();
        let vli = EmitterVli::new(knots).map_err(|err| invalid("emitter.vli_power_uw", err.to_string()))?;
        let lambda_q = Wavelength::from_nm(self.tx.quantum_wavelength_nm);
        let slicing = FlatTopFilter::from_frequency_width(
            lambda_q,
            self.tx.slicing_width_ghz * 1e9,
            self.tx.slicing_insertion_loss_db,
            self.tx.slicing_isolation_db,
        )
        .map_err(|err| invalid("tx.slicing_width_ghz", err.to_string()))?;
        let cleanup = FlatTopFilter::from_frequency_width(
            lambda_q,
            self.wdm.cleanup_width_ghz * 1e9,
            self.wdm.cleanup_insertion_loss_db,
            self.wdm.cleanup_isolation_db,
        )
        .map_err(|err| invalid("wdm.cleanup_width_ghz", err.to_string()))?;
        let fiber = FiberSpec {
            length_km: self.fiber.length_km,
            attenuation_quantum: self.fiber.quantum_loss_db_per_km,
            attenuation_classical: self.fiber.classical_loss_db_per_km,
        };
        fiber
            .validate()
            .map_err(|err| invalid("fiber", err.to_string()))?;
        let spad = SpadSpec {
            efficiency: self.spad.efficiency,
            dead_time: self.spad.dead_time_us / 1e6,
            dark_rate: self.spad.dark_count_rate_cps,
        };
        spad.validate().map_err(|err| invalid("spad", err.to_string()))?;
        let p = &self.protocol;
        Ok(SystemModel {
            emitter: EmitterSpec {
                vli,
                spectrum_center: Wavelength::from_nm(e.center_nm),
                spectrum_fwhm_nm: e.fwhm_nm,
            },
            drive_current_ma: e.drive_current_ma,
            tx: TxBudget {
                slicing_filter: slicing,
                modulator_insertion_loss_db: 0.0,
                symbol_rate: self.tx.symbol_rate_hz,
            },
            quantum_rx_loss_db: 0.0,
            fiber,
            wdm: WdmSpec {
                mux_insertion_loss_quantum: self.wdm.quantum_insertion_loss_db,
                mux_insertion_loss_classical: self.wdm.classical_insertion_loss_db,
                classical_to_quantum_isolation: WdmSpec::default().classical_to_quantum_isolation,
            },
            cleanup_filter: cleanup,
            classical_wavelength: Wavelength::from_nm(self.classical_rx.wavelength_nm),
            raman: RamanModel::default(),
            spad,
            window: ReceiverWindow {
                window_fraction: p.window_fraction,
                signal_acceptance: p.signal_acceptance,
                sift_factor: p.sift_factor,
            },
            e_opt: 0.0,
            depolarization_qber: p.depolarization_qber,
            classical_rx: PinTiaSpec {
                responsivity: self.classical_rx.responsivity_a_per_w,
                noise_current_rms: 1e-7,
            },
        })
    }

    pub fn rop_grid(&self) -> Vec<f64> {
        rop_grid(self.sweep.start_dbm, self.sweep.stop_dbm, self.sweep.step_db)
    }

    pub fn receiver(&self) -> PolState {
        parse_state(&self.montecarlo.receiver_state).expect("validated")
    }

    pub fn reference_frame(&self) -> Vec<PolState> {
        balanced_frame(self.montecarlo.frame_length, self.montecarlo.frame_seed)
    }

    /// Monte Carlo run for `physics`, with the seed and length from the
    /// config unless overridden.
    pub fn run_config(&self, physics: RunPhysics, seed: Option<u64>, symbols: Option<u64>) -> RunConfig {
        let m = &self.montecarlo;
        RunConfig {
            seed: seed.unwrap_or(m.seed),
            n_symbols: symbols.unwrap_or(m.symbols),
            symbol_period_ps: m.symbol_period_ps,
            frame: self.reference_frame(),
            frame_offset: m.frame_offset,
            receiver: self.receiver(),
            clock_phase_offset_ps: m.clock_phase_offset_ps,
            physics,
            batch_symbols: m.batch_symbols,
        }
    }

    /// Tag-processing parameters for a run spanning `duration_s`.
    pub fn analysis_params(&self, duration_s: f64) -> AnalysisParams {
        AnalysisParams {
            reference: self.reference_frame(),
            receiver: self.receiver(),
            n_bins: self.protocol.phase_bins,
            window_fraction: self.protocol.window_fraction,
            sync_floor: self.protocol.sync_floor,
            duration_s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_equals_defaults() {
        let cfg = ExperimentConfig::from_toml_str(DEFAULT_CONFIG_TOML).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn empty_document_is_default() {
        assert_eq!(
            ExperimentConfig::from_toml_str("").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml_str("[spad]\neffciency = 0.1\n").unwrap_err();
        match &err {
            ConfigError::Key { path, .. } => assert_eq!(path, "spad.effciency"),
            other => panic!("{other:?}"),
        }
        assert!(err.to_string().contains("spad.effciency"));
    }

    #[test]
    fn wrong_type_is_named() {
        let err = ExperimentConfig::from_toml_str("[sweep]\nstep_db = \"fine\"\n").unwrap_err();
        assert!(matches!(err, ConfigError::Key { ref path, .. } if path == "sweep.step_db"), "{err}");
    }

    #[test]
    fn base_model_matches_library_defaults() {
        let m = ExperimentConfig::default().base_model().unwrap();
        assert_eq!(m, SystemModel::default());
    }
}
