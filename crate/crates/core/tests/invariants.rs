use proptest::prelude::*;

use qkdlink_core::bb84::{secure_fraction, DistillationModel};
use qkdlink_core::emitter::mu_at_modulator_output;
use qkdlink_core::experiments::{
    calibrate_all, compute_soax, default_rop_grid, run_coexistence_sweep, Anchors,
};
use qkdlink_core::spectrum::{inband_fraction, FlatTopFilter, GaussianSpectrum};
use qkdlink_core::system::{LinkConfig, SystemModel};
use qkdlink_core::units::{PowerLevel, Wavelength};
use std::sync::OnceLock;

fn calibrated() -> &'static SystemModel {
    static MODEL: OnceLock<SystemModel> = OnceLock::new();
    MODEL.get_or_init(|| calibrate_all(&SystemModel::default(), &Anchors::default()).unwrap().0)
}

proptest! {
    #[test]
    fn dbm_round_trip(dbm in -120.0f64..30.0) {
        let p = PowerLevel::from_dbm(dbm);
        prop_assert!((p.dbm() - dbm).abs() < 1e-9);
    }

    #[test]
    fn inband_grows_with_passband(width_nm in 0.1f64..20.0, extra_nm in 0.01f64..5.0, iso in 10.0f64..80.0) {
        let s = GaussianSpectrum::from_nm(1548.0, 58.0, PowerLevel::from_milliwatts(1.0)).unwrap();
        let f = FlatTopFilter::new(Wavelength::from_nm(1550.12), width_nm * 1e-9, 0.0, iso).unwrap();
        let wider = f.with_passband_width((width_nm + extra_nm) * 1e-9);
        prop_assert!(inband_fraction(&s, &wider) > inband_fraction(&s, &f));
    }

    #[test]
    fn inband_translation_invariant(shift_nm in -300.0f64..300.0, offset_nm in -40.0f64..40.0) {
        let p = PowerLevel::from_milliwatts(1.0);
        let a = GaussianSpectrum::from_nm(1548.0, 58.0, p).unwrap();
        let b = GaussianSpectrum::from_nm(1548.0 + shift_nm, 58.0, p).unwrap();
        let fa = FlatTopFilter::new(Wavelength::from_nm(1548.0 + offset_nm), 1.6e-9, 0.0, 40.0).unwrap();
        let fb = fa.with_center(Wavelength::from_nm(1548.0 + offset_nm + shift_nm));
        let (x, y) = (inband_fraction(&a, &fa), inband_fraction(&b, &fb));
        prop_assert!((x / y - 1.0).abs() < 1e-6, "{} vs {}", x, y);
    }

    #[test]
    fn mu_scales_with_modulator_loss(loss in 0.0f64..80.0, extra in 0.0f64..20.0) {
        let m = SystemModel::default();
        let base = mu_at_modulator_output(&m.emitter, &m.tx.with_modulator_loss(loss), 20.0).unwrap();
        let more = mu_at_modulator_output(&m.emitter, &m.tx.with_modulator_loss(loss + extra), 20.0).unwrap();
        prop_assert!((more / base - 10f64.powf(-extra / 10.0)).abs() < 1e-12);
    }

    #[test]
    fn secure_fraction_decreases_with_qber(a in 0.0f64..0.11, b in 0.0f64..0.11) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        let m = DistillationModel::IdealAsymptotic;
        prop_assert!(secure_fraction(lo, m).unwrap() >= secure_fraction(hi, m).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn soax_narrows_as_raman_grows(f1 in 0.5f64..4.0, f2 in 0.5f64..4.0) {
        prop_assume!((f1 - f2).abs() > 0.05);
        let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
        let grid = default_rop_grid();
        let width = |factor: f64| {
            let mut m = calibrated().clone();
            m.raman.beta *= factor;
            let rows = run_coexistence_sweep(&m, &grid, LinkConfig::Fiber).unwrap();
            compute_soax(&rows, 0.11, 1e-10, DistillationModel::IdealAsymptotic).unwrap().width_db
        };
        let (w_lo, w_hi) = (width(lo), width(hi));
        prop_assert!(w_hi < w_lo || (w_hi == 0.0 && w_lo == 0.0), "{} -> {}", w_lo, w_hi);
    }

    #[test]
    fn qber_rises_with_classical_power(rop in -45.0f64..-5.0, step in 0.05f64..5.0) {
        let m = calibrated();
        for config in [LinkConfig::BackToBack, LinkConfig::Fiber] {
            let a = m.evaluate(config, Some(PowerLevel::from_dbm(rop))).unwrap();
            let b = m.evaluate(config, Some(PowerLevel::from_dbm(rop + step))).unwrap();
            prop_assert!(b.qber > a.qber);
        }
    }
}

#[test]
fn higher_mu_helps_at_every_rop() {
    let base = calibrated();
    let mut boosted = base.clone();
    boosted.tx.modulator_insertion_loss_db -= 8.3;
    assert!((boosted.mu().unwrap() / 0.1 - 1.0).abs() < 0.01);
    for config in [LinkConfig::BackToBack, LinkConfig::Fiber] {
        let a = run_coexistence_sweep(base, &default_rop_grid(), config).unwrap();
        let b = run_coexistence_sweep(&boosted, &default_rop_grid(), config).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(y.raw_rate > x.raw_rate && y.qber < x.qber, "{:?} {:?}", x, y);
        }
    }
}
