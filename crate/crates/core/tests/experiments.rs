//! Calibration, back-to-back key rates, co-existence sweeps and SOAX on the
//! calibrated model.

use std::sync::OnceLock;

use qkdlink_core::bb84::{aes256_secured_capacity, DistillationModel};
use qkdlink_core::emitter::mu_at_modulator_output;
use qkdlink_core::experiments::{
    calibrate_all, closure_residuals, compute_soax, default_rop_grid, run_back_to_back,
    run_coexistence_sweep, sweep_row, Anchors, CalibrationSet, CalibrationStep, SweepRow,
};
use qkdlink_core::system::{LinkConfig, SystemModel};
use qkdlink_core::Error;

fn calibrated() -> &'static (SystemModel, CalibrationSet) {
    static CAL: OnceLock<(SystemModel, CalibrationSet)> = OnceLock::new();
    CAL.get_or_init(|| calibrate_all(&SystemModel::default(), &Anchors::default()).unwrap())
}

fn fiber_sweep() -> &'static Vec<SweepRow> {
    static ROWS: OnceLock<Vec<SweepRow>> = OnceLock::new();
    ROWS.get_or_init(|| run_coexistence_sweep(&calibrated().0, &default_rop_grid(), LinkConfig::Fiber).unwrap())
}

#[test]
fn every_anchor_closes() {
    let (model, set) = calibrated();
    for r in closure_residuals(model, &Anchors::default()).unwrap() {
        assert!(r.passed(), "{r:?}");
    }
    assert!(set.tx_loss_db >= 0.0 && set.rx_link_loss_db >= 0.0 && set.wdm_isolation_db >= 0.0);
    assert!((0.0..=0.5).contains(&set.e_opt));
    assert!(set.raman_beta > 0.0);
}

#[test]
fn tx_loss_is_the_slice_to_mu_ratio() {
    // 32 µW spread over 58 nm, 2.58 % inside the 200 GHz slice, brought down
    // to 0.0148 photons per 10 ns symbol.
    let (_, set) = calibrated();
    assert!((set.tx_loss_db - 66.4).abs() < 0.05, "{}", set.tx_loss_db);
}

#[test]
fn doubling_raw_rate_removes_three_db() {
    // Without dark counts or dead time the raw rate is linear in the receive
    // transmittance and the QBER anchor pins e_opt to the same value.
    let mut base = SystemModel::default();
    base.spad.dark_rate = 0.0;
    base.spad.dead_time = 0.0;
    let anchors = Anchors::default();
    let (_, s1) = calibrate_all(&base, &anchors).unwrap();
    let doubled = Anchors {
        raw_rate: 2.0 * anchors.raw_rate,
        ..anchors
    };
    let (_, s2) = calibrate_all(&base, &doubled).unwrap();
    assert!((s1.e_opt - s2.e_opt).abs() < 1e-12);
    let delta = s1.rx_link_loss_db - s2.rx_link_loss_db;
    assert!((delta - 10.0 * 2f64.log10()).abs() < 1e-6, "Δ = {delta}");
}

#[test]
fn doubled_raw_rate_needs_more_than_three_db_with_dark_counts() {
    // The dark-count floor makes the raw rate affine in transmittance, so the
    // signal share has to grow by more than a factor two.
    let (_, s1) = calibrated();
    let doubled = Anchors {
        raw_rate: 2660.0,
        ..Anchors::default()
    };
    let (m2, s2) = calibrate_all(&SystemModel::default(), &doubled).unwrap();
    assert!(s1.rx_link_loss_db - s2.rx_link_loss_db > 3.0103);
    let raw = m2.evaluate(LinkConfig::BackToBack, None).unwrap().raw_rate;
    assert!((raw / 2660.0 - 1.0).abs() < 1e-6);
}

#[test]
fn mu_above_lossless_maximum_fails_at_step_one() {
    let m = SystemModel::default();
    let lossless = mu_at_modulator_output(&m.emitter, &m.tx.with_modulator_loss(0.0), m.drive_current_ma).unwrap();
    let anchors = Anchors {
        mu: 1.01 * lossless,
        ..Anchors::default()
    };
    match calibrate_all(&m, &anchors) {
        Err(Error::InfeasibleCalibration { step, .. }) => assert_eq!(step, CalibrationStep::TxLoss),
        other => panic!("{other:?}"),
    }
    // a target of 10 photons/symbol is still reachable: 38 dB of loss
    let ten = Anchors {
        mu: 10.0,
        ..Anchors::default()
    };
    let (_, set) = calibrate_all(&m, &ten).unwrap();
    assert!((set.tx_loss_db - 38.1).abs() < 0.1);
}

#[test]
fn back_to_back_key_rates() {
    let (model, _) = calibrated();
    let ideal = run_back_to_back(model, DistillationModel::IdealAsymptotic).unwrap();
    assert!((ideal.raw_key_rate - 1330.0).abs() < 13.3);
    assert!((ideal.qber - 0.088).abs() < 0.005);
    assert!((ideal.secure_key_rate - 186.9).abs() < 0.5, "{}", ideal.secure_key_rate);

    let fixed = run_back_to_back(model, DistillationModel::reported_fraction()).unwrap();
    assert!((fixed.secure_key_rate / 372.0 - 1.0).abs() < 0.01);
    let cap = aes256_secured_capacity(fixed.secure_key_rate);
    assert!((cap / 744e9 - 1.0).abs() < 0.01, "{cap}");
}

#[test]
fn crossings_sit_on_the_anchors() {
    let (model, _) = calibrated();
    let f = sweep_row(model, -28.4, LinkConfig::Fiber).unwrap();
    let b = sweep_row(model, -23.5, LinkConfig::BackToBack).unwrap();
    assert!((f.qber - 0.110).abs() < 0.002);
    assert!((b.qber - 0.110).abs() < 0.002);
}

#[test]
fn soax_matches_the_anchors() {
    let s = compute_soax(fiber_sweep(), 0.11, 1e-10, DistillationModel::IdealAsymptotic).unwrap();
    assert!((s.lower_bound_rop + 29.9).abs() < 0.1, "{s:?}");
    assert!((s.upper_bound_rop.unwrap() + 28.4).abs() < 0.1, "{s:?}");
    assert!((s.width_db - 1.5).abs() < 0.2);
    assert!(!s.empty);
}

#[test]
fn zero_threshold_empties_the_soax() {
    let s = compute_soax(fiber_sweep(), 0.0, 1e-10, DistillationModel::IdealAsymptotic).unwrap();
    assert!(s.empty && s.upper_bound_rop.is_none());
}

/// Largest |QBER_fiber − QBER_b2b| over ROP ≤ −30 dBm.
fn low_power_gap() -> f64 {
    let (model, _) = calibrated();
    default_rop_grid()
        .into_iter()
        .filter(|&r| r <= -30.0)
        .map(|r| {
            let f = sweep_row(model, r, LinkConfig::Fiber).unwrap();
            let b = sweep_row(model, r, LinkConfig::BackToBack).unwrap();
            (f.qber - b.qber).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn low_power_configs_stay_close() {
    // With leakage and Raman both pinned by their crossings, the Raman term
    // alone keeps the fiber curve about one point above back-to-back at −30 dBm.
    let gap = low_power_gap();
    assert!(gap < 0.015, "gap {gap}");
}

#[test]
#[ignore = "not reachable with a Raman term linear in launch power; see README"]
fn low_power_configs_identical_within_a_tenth_point() {
    assert!(low_power_gap() < 0.001);
}

#[test]
#[ignore = "secured capacity at the SOAX lower bound is 105 Gb/s (ideal) or 772 Gb/s (fixed fraction); see README"]
fn secured_capacity_at_sensitivity_is_243_gbps() {
    let s = compute_soax(fiber_sweep(), 0.11, 1e-10, DistillationModel::reported_fraction()).unwrap();
    assert!((s.secured_capacity_at_lower_bound / 243e9 - 1.0).abs() < 0.1, "{s:?}");
}
