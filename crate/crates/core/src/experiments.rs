//! Calibration against measured operating points and the experiments built
//! on it. The co-existence ROP sweep feeds the safe operating area (SOAX).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::bb84::{aes256_secured_capacity, secure_key_rate, DistillationModel, QberReport, QBER_THRESHOLD};
use crate::detection::calibrate_rx_noise;
use crate::emitter::calibrate_tx_loss;
use crate::error::Error;
use crate::link::{calibrate_isolation, calibrate_raman};
use crate::math::{bisect, log10};
use crate::system::{LinkConfig, SystemModel};
use crate::units::{transmission_to_db, PowerLevel};

/// The five sequential calibration steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CalibrationStep {
    TxLoss,
    RxLinkLoss,
    RxNoise,
    Isolation,
    Raman,
}

impl CalibrationStep {
    pub fn name(self) -> &'static str {
        match self {
            CalibrationStep::TxLoss => "tx_loss",
            CalibrationStep::RxLinkLoss => "rx_link_loss",
            CalibrationStep::RxNoise => "rx_noise",
            CalibrationStep::Isolation => "wdm_isolation",
            CalibrationStep::Raman => "raman_beta",
        }
    }
}

impl fmt::Display for CalibrationStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Measured operating points the model is pinned to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchors {
    /// Photons/symbol at the modulator output.
    pub mu: f64,
    /// Back-to-back raw rate without the classical channel, counts/s.
    pub raw_rate: f64,
    /// Back-to-back QBER without the classical channel.
    pub qber: f64,
    pub sensitivity_dbm: f64,
    pub sensitivity_ber: f64,
    pub qber_threshold: f64,
    /// Classical ROP where back-to-back QBER reaches the threshold.
    pub b2b_crossing_dbm: f64,
    /// Classical ROP where the fiber-link QBER reaches the threshold.
    pub fiber_crossing_dbm: f64,
}

impl Default for Anchors {
    fn default() -> Self {
        Anchors {
            mu: 0.0148,
            raw_rate: 1330.0,
            qber: 0.088,
            sensitivity_dbm: -29.9,
            sensitivity_ber: 1e-10,
            qber_threshold: QBER_THRESHOLD,
            b2b_crossing_dbm: -23.5,
            fiber_crossing_dbm: -28.4,
        }
    }
}

/// Fitted constants, one per anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSet {
    pub tx_loss_db: f64,
    pub rx_link_loss_db: f64,
    pub e_opt: f64,
    pub wdm_isolation_db: f64,
    /// photons/s per (mW · km · nm)
    pub raman_beta: f64,
    /// A rms
    pub rx_noise_current: f64,
}

impl CalibrationSet {
    /// Writes the fitted constants into `model`.
    pub fn apply(&self, model: &mut SystemModel) {
        model.tx.modulator_insertion_loss_db = self.tx_loss_db;
        model.quantum_rx_loss_db = self.rx_link_loss_db;
        model.e_opt = self.e_opt;
        model.wdm.classical_to_quantum_isolation = self.wdm_isolation_db;
        model.raman.beta = self.raman_beta;
        model.classical_rx.noise_current_rms = self.rx_noise_current;
    }
}

/// Relative tolerance on the raw-rate fit.
const RAW_RATE_RTOL: f64 = 1e-10;

/// Runs the five calibration steps in order and returns the fitted model
/// along with the constants.
pub fn calibrate_all(
    base: &SystemModel,
    anchors: &Anchors,
) -> Result<(SystemModel, CalibrationSet), Error> {
    let mut model = base.clone();

    // (1) transmitter loss from μ
    let tx_loss = calibrate_tx_loss(&model.emitter, &model.tx, anchors.mu, model.drive_current_ma)?;
    model.tx.modulator_insertion_loss_db = tx_loss;

    // (2) quantum receive loss from the raw rate, then e_opt from the QBER
    model.e_opt = 0.0;
    let raw_at = |loss_db: f64| -> f64 {
        let mut m = model.clone();
        m.quantum_rx_loss_db = loss_db;
        match m.evaluate(LinkConfig::BackToBack, None) {
            Ok(e) => e.raw_rate,
            // no clicks at all
            Err(Error::UndefinedQber) => 0.0,
            Err(_) => f64::NAN,
        }
    };
    let floor_rate = raw_at(f64::INFINITY);
    let max_rate = raw_at(0.0);
    if !(anchors.raw_rate > floor_rate && anchors.raw_rate <= max_rate) {
        return Err(Error::InfeasibleCalibration {
            step: CalibrationStep::RxLinkLoss,
            anchor: "raw key rate",
            detail: format!(
                "{} counts/s is outside the reachable range ({floor_rate:.2}, {max_rate:.2}]",
                anchors.raw_rate
            ),
        });
    }
    let rx_loss = bisect(
        |l| (raw_at(l) - anchors.raw_rate) / anchors.raw_rate,
        0.0,
        transmission_to_db(1e-30),
        RAW_RATE_RTOL,
    )
    .ok_or_else(|| Error::InfeasibleCalibration {
        step: CalibrationStep::RxLinkLoss,
        anchor: "raw key rate",
        detail: String::from("bisection failed"),
    })?;
    model.quantum_rx_loss_db = rx_loss;

    let r = model.evaluate(LinkConfig::BackToBack, None)?.rates;
    if r.signal <= 0.0 {
        return Err(Error::InfeasibleCalibration {
            step: CalibrationStep::RxLinkLoss,
            anchor: "QBER",
            detail: String::from("no signal left to attribute optical errors to"),
        });
    }
    // QBER = (e·S + (D + N)/2) / (S + D + N), solved for e and floored at 0.
    let e_opt = (anchors.qber * r.total() - 0.5 * (r.dark + r.noise)) / r.signal;
    if e_opt > 0.5 {
        return Err(Error::InfeasibleCalibration {
            step: CalibrationStep::RxLinkLoss,
            anchor: "QBER",
            detail: format!("requires an optical error of {e_opt:.4} > 0.5"),
        });
    }
    model.e_opt = e_opt.max(0.0);

    // (3) classical receiver noise from the sensitivity
    let sens = PowerLevel::from_dbm(anchors.sensitivity_dbm);
    model.classical_rx.noise_current_rms =
        calibrate_rx_noise(model.classical_rx.responsivity, sens, anchors.sensitivity_ber).map_err(
            |e| Error::InfeasibleCalibration {
                step: CalibrationStep::RxNoise,
                anchor: "classical sensitivity",
                detail: format!("{e}"),
            },
        )?;

    // (4) WDM isolation from the back-to-back crossing
    model.raman.beta = 0.0;
    model.wdm.classical_to_quantum_isolation = calibrate_isolation(
        &model,
        PowerLevel::from_dbm(anchors.b2b_crossing_dbm),
        anchors.qber_threshold,
    )?;

    // (5) Raman coefficient from the fiber crossing
    model.raman = calibrate_raman(
        &model,
        PowerLevel::from_dbm(anchors.fiber_crossing_dbm),
        anchors.qber_threshold,
    )?;

    let set = CalibrationSet {
        tx_loss_db: tx_loss,
        rx_link_loss_db: rx_loss,
        e_opt: model.e_opt,
        wdm_isolation_db: model.wdm.classical_to_quantum_isolation,
        raman_beta: model.raman.beta,
        rx_noise_current: model.classical_rx.noise_current_rms,
    };
    Ok((model, set))
}

/// Re-evaluation of one anchor under the fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub anchor: &'static str,
    pub target: f64,
    pub achieved: f64,
    /// Absolute tolerance on `achieved - target`.
    pub tolerance: f64,
}

impl Residual {
    pub fn error(&self) -> f64 {
        self.achieved - self.target
    }

    pub fn passed(&self) -> bool {
        self.error().abs() <= self.tolerance
    }
}

/// Closure tolerances.
pub mod tolerance {
    /// Absolute, photons/symbol.
    pub const MU: f64 = 1e-6;
    /// Relative.
    pub const RAW_RATE: f64 = 0.01;
    /// Absolute (0.5 percentage points).
    pub const QBER: f64 = 0.005;
    /// Relative.
    pub const BER: f64 = 0.05;
    /// Absolute QBER at each crossing.
    pub const CROSSING: f64 = 0.002;
}

/// Re-evaluates every anchor under `model`.
pub fn closure_residuals(model: &SystemModel, anchors: &Anchors) -> Result<Vec<Residual>, Error> {
    let b2b = model.evaluate(LinkConfig::BackToBack, None)?;
    let sens = model.evaluate(
        LinkConfig::BackToBack,
        Some(PowerLevel::from_dbm(anchors.sensitivity_dbm)),
    )?;
    let b2b_x = model.evaluate(
        LinkConfig::BackToBack,
        Some(PowerLevel::from_dbm(anchors.b2b_crossing_dbm)),
    )?;
    let fiber_x = model.evaluate(
        LinkConfig::Fiber,
        Some(PowerLevel::from_dbm(anchors.fiber_crossing_dbm)),
    )?;
    Ok(alloc::vec![
        Residual {
            anchor: "mu",
            target: anchors.mu,
            achieved: b2b.mu,
            tolerance: tolerance::MU,
        },
        Residual {
            anchor: "raw_rate_cps",
            target: anchors.raw_rate,
            achieved: b2b.raw_rate,
            tolerance: tolerance::RAW_RATE * anchors.raw_rate,
        },
        Residual {
            anchor: "qber",
            target: anchors.qber,
            achieved: b2b.qber,
            tolerance: tolerance::QBER,
        },
        Residual {
            anchor: "classical_ber_at_sensitivity",
            target: anchors.sensitivity_ber,
            achieved: sens.classical_ber,
            tolerance: tolerance::BER * anchors.sensitivity_ber,
        },
        Residual {
            anchor: "qber_at_b2b_crossing",
            target: anchors.qber_threshold,
            achieved: b2b_x.qber,
            tolerance: tolerance::CROSSING,
        },
        Residual {
            anchor: "qber_at_fiber_crossing",
            target: anchors.qber_threshold,
            achieved: fiber_x.qber,
            tolerance: tolerance::CROSSING,
        },
    ])
}

/// Back-to-back key performance without the classical channel.
pub fn run_back_to_back(model: &SystemModel, distillation: DistillationModel) -> Result<QberReport, Error> {
    let e = model.evaluate(LinkConfig::BackToBack, None)?;
    QberReport::new(e.raw_rate, e.qber, distillation)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub rop_dbm: f64,
    pub qber: f64,
    /// counts/s
    pub raw_rate: f64,
    pub classical_ber: f64,
    pub config: LinkConfig,
}

/// `start + k·step` for k = 0.. while ≤ `stop` (with a small slack for
/// rounding). Values are rounded to 1e-9 dB so grids print cleanly.
pub fn rop_grid(start_dbm: f64, stop_dbm: f64, step_db: f64) -> Vec<f64> {
    let n = ((stop_dbm - start_dbm) / step_db + 1e-9) as usize;
    (0..=n)
        .map(|k| {
            let v = start_dbm + k as f64 * step_db;
            libm::round(v * 1e9) / 1e9
        })
        .collect()
}

/// Default sweep grid: 0.1-dB steps over [−40, −15] dBm.
pub fn default_rop_grid() -> Vec<f64> {
    rop_grid(-40.0, -15.0, 0.1)
}

pub fn sweep_row(model: &SystemModel, rop_dbm: f64, config: LinkConfig) -> Result<SweepRow, Error> {
    let e = model.evaluate(config, Some(PowerLevel::from_dbm(rop_dbm)))?;
    Ok(SweepRow {
        rop_dbm,
        qber: e.qber,
        raw_rate: e.raw_rate,
        classical_ber: e.classical_ber,
        config,
    })
}

/// One row per grid point, in grid order.
pub fn run_coexistence_sweep(
    model: &SystemModel,
    rop_grid_dbm: &[f64],
    config: LinkConfig,
) -> Result<Vec<SweepRow>, Error> {
    rop_grid_dbm
        .iter()
        .map(|&rop| sweep_row(model, rop, config))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoaxReport {
    /// Classical sensitivity: lowest ROP meeting the BER target, dBm.
    pub lower_bound_rop: f64,
    /// Highest ROP keeping QBER at or below the threshold, dBm. `None` when
    /// no grid point meets the threshold.
    pub upper_bound_rop: Option<f64>,
    /// upper − lower, or 0 when empty.
    pub width_db: f64,
    pub empty: bool,
    pub qber_at_lower_bound: f64,
    /// counts/s
    pub raw_rate_at_lower_bound: f64,
    /// bits/s
    pub secure_rate_at_lower_bound: f64,
    /// bits/s of classical traffic re-keyable with AES-256 per 64 GB
    pub secured_capacity_at_lower_bound: f64,
}

fn lerp(x0: f64, y0: f64, x1: f64, y1: f64, x: f64) -> f64 {
    if x1 == x0 {
        y0
    } else {
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

fn log_ber(b: f64) -> f64 {
    log10(b.max(1e-300))
}

/// Interpolated (qber, raw_rate) at `rop` from a sorted sweep.
fn interpolate_row(rows: &[SweepRow], rop: f64) -> (f64, f64) {
    let k = rows.partition_point(|r| r.rop_dbm < rop).clamp(1, rows.len() - 1);
    let (a, b) = (&rows[k - 1], &rows[k]);
    (
        lerp(a.rop_dbm, a.qber, b.rop_dbm, b.qber, rop),
        lerp(a.rop_dbm, a.raw_rate, b.rop_dbm, b.raw_rate, rop),
    )
}

/// Safe operating area of a sweep sorted by ascending ROP.
pub fn compute_soax(
    rows: &[SweepRow],
    qber_threshold: f64,
    ber_target: f64,
    distillation: DistillationModel,
) -> Result<SoaxReport, Error> {
    if rows.len() < 2 {
        return Err(Error::UncoveredRange {
            which: "sweep (fewer than two rows)",
        });
    }

    // lower: first crossing of the BER target, log-linear in BER
    let first_ok = rows
        .iter()
        .position(|r| r.classical_ber <= ber_target)
        .ok_or(Error::UncoveredRange {
            which: "classical sensitivity",
        })?;
    if first_ok == 0 {
        return Err(Error::UncoveredRange {
            which: "classical sensitivity",
        });
    }
    let (a, b) = (&rows[first_ok - 1], &rows[first_ok]);
    let (la, lb, lt) = (log_ber(a.classical_ber), log_ber(b.classical_ber), log_ber(ber_target));
    let lower = if la == lb {
        b.rop_dbm
    } else {
        lerp(la, a.rop_dbm, lb, b.rop_dbm, lt)
    };

    // upper: last point at or under the QBER threshold, linear in QBER
    let upper = match rows.iter().rposition(|r| r.qber <= qber_threshold) {
        None => None,
        Some(k) if k == rows.len() - 1 => {
            return Err(Error::UncoveredRange {
                which: "QBER threshold",
            })
        }
        Some(k) => {
            let (a, b) = (&rows[k], &rows[k + 1]);
            Some(if a.qber == b.qber {
                a.rop_dbm
            } else {
                lerp(a.qber, a.rop_dbm, b.qber, b.rop_dbm, qber_threshold)
            })
        }
    };

    let (qber_lo, raw_lo) = interpolate_row(rows, lower);
    let secure = secure_key_rate(raw_lo, qber_lo.clamp(0.0, 0.5), distillation)?;
    let (empty, width) = match upper {
        Some(u) if u > lower => (false, u - lower),
        _ => (true, 0.0),
    };
    Ok(SoaxReport {
        lower_bound_rop: lower,
        upper_bound_rop: upper,
        width_db: width,
        empty,
        qber_at_lower_bound: qber_lo,
        raw_rate_at_lower_bound: raw_lo,
        secure_rate_at_lower_bound: secure,
        secured_capacity_at_lower_bound: aes256_secured_capacity(secure),
    })
}
