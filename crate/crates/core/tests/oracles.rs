//! Cross-checks against independently computed reference values.

use qkdlink_core::bb84::{measure, Basis, PolState};
use qkdlink_core::detection::dead_time_observed_rate;
use qkdlink_core::experiments::{calibrate_all, Anchors};
use qkdlink_core::montecarlo::{
    balanced_frame, simulate_quantum_run, RunConfig, RunPhysics, DEFAULT_BATCH_SYMBOLS,
};
use qkdlink_core::spectrum::{inband_fraction, FlatTopFilter, GaussianSpectrum};
use qkdlink_core::system::{LinkConfig, SystemModel};
use qkdlink_core::tagproc::{analyze, AnalysisParams};
use qkdlink_core::units::{PowerLevel, Wavelength};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Midpoint sum of the normalized Gaussian times the filter shape, taken
/// over ±12σ on a 2 pm grid, written without the library's helpers.
fn brute_force_inband(center_nm: f64, fwhm_nm: f64, f_center_nm: f64, width_nm: f64, iso_db: f64) -> f64 {
    let sigma = fwhm_nm / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let floor = 10f64.powf(-iso_db / 10.0);
    let step = 0.002;
    let n = (24.0 * sigma / step) as usize;
    let start = center_nm - 12.0 * sigma;
    let mut acc = 0.0;
    for i in 0..n {
        let x = start + (i as f64 + 0.5) * step;
        let g = (-0.5 * ((x - center_nm) / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let t = if (x - f_center_nm).abs() <= 0.5 * width_nm { 1.0 } else { floor };
        acc += g * t * step;
    }
    acc
}

#[test]
fn inband_fraction_matches_brute_force() {
    let center = Wavelength::from_nm(1550.12);
    let filter = FlatTopFilter::from_frequency_width(center, 200e9, 0.0, 40.0).unwrap();
    let spectrum = GaussianSpectrum::from_nm(1548.0, 58.0, PowerLevel::from_milliwatts(0.032)).unwrap();
    let got = inband_fraction(&spectrum, &filter);
    let reference = brute_force_inband(1548.0, 58.0, 1550.12, filter.passband_width() * 1e9, 40.0);
    assert!((got / reference - 1.0).abs() < 1e-3, "{got} vs {reference}");
    assert!((got / 0.0258 - 1.0).abs() < 0.01, "{got}");
}

#[test]
fn conjugate_basis_is_uniform() {
    // χ² with one degree of freedom; critical value at α = 0.001 is 10.828.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 200_000u64;
    let mut ones = 0u64;
    for i in 0..n {
        let state = PolState::ALL[(i % 4) as usize];
        let basis = state.basis().conjugate();
        ones += measure(state, basis, 0.02, rng.random::<f64>()) as u64;
    }
    let expected = n as f64 / 2.0;
    let zeros = n - ones;
    let chi2 = ((ones as f64 - expected).powi(2) + (zeros as f64 - expected).powi(2)) / expected;
    assert!(chi2 < 10.828, "chi2 = {chi2}");
}

#[test]
fn matching_basis_error_rate_is_e_opt() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 400_000;
    let e = 0.05;
    let errors = (0..n)
        .filter(|_| measure(PolState::D, Basis::Diagonal, e, rng.random::<f64>()) != PolState::D.bit())
        .count() as f64;
    let sigma = (e * (1.0 - e) / n as f64).sqrt();
    assert!((errors / n as f64 - e).abs() < 4.0 * sigma);
}

fn noise_run(rate: f64, dead_time: f64, n_symbols: u64) -> RunConfig {
    RunConfig {
        seed: 99,
        n_symbols,
        symbol_period_ps: 10_000,
        frame: balanced_frame(64, 3),
        frame_offset: Some(0),
        receiver: PolState::R,
        clock_phase_offset_ps: 0,
        physics: RunPhysics {
            mu_arrival: 0.0,
            efficiency: 0.1,
            e_opt: 0.0,
            dark_rate: rate,
            raman_rate: 0.0,
            leakage_rate: 0.0,
            dead_time,
            window_fraction: 0.5,
            signal_acceptance: 1.0,
        },
        batch_symbols: DEFAULT_BATCH_SYMBOLS,
    }
}

#[test]
fn simulated_dead_time_follows_nonparalyzable_law() {
    let tau = 1e-6;
    for rt in [0.05, 0.5, 2.0] {
        let rate = rt / tau;
        let cfg = noise_run(rate, tau, 200_000_000);
        let (stream, _) = simulate_quantum_run(&cfg).unwrap();
        let observed = stream.len() as f64 / cfg.duration_s();
        let expected = dead_time_observed_rate(rate, tau);
        assert!((observed / expected - 1.0).abs() < 0.01, "Rτ={rt}: {observed} vs {expected}");
    }
}

#[test]
fn monte_carlo_agrees_with_analytic_back_to_back() {
    let (model, _) = calibrate_all(&SystemModel::default(), &Anchors::default()).unwrap();
    let eval = model.evaluate(LinkConfig::BackToBack, None).unwrap();
    let cfg = RunConfig {
        seed: 11,
        n_symbols: 20_000_000,
        symbol_period_ps: 10_000,
        frame: balanced_frame(1024, 8),
        frame_offset: None,
        receiver: PolState::D,
        clock_phase_offset_ps: 1234,
        physics: RunPhysics::from_evaluation(&model, &eval),
        batch_symbols: 1 << 22,
    };
    let (stream, truth) = simulate_quantum_run(&cfg).unwrap();
    let params = AnalysisParams {
        reference: cfg.frame.clone(),
        receiver: cfg.receiver,
        n_bins: 64,
        window_fraction: 0.5,
        sync_floor: 0.6,
        duration_s: cfg.duration_s(),
    };
    let a = analyze(&stream, &params).unwrap();
    assert_eq!(a.sync.frame_offset, truth.frame_offset);

    let expected_clicks = eval.raw_rate * cfg.duration_s();
    let clicks = a.report.clicks as f64;
    assert!((clicks - expected_clicks).abs() < 4.0 * expected_clicks.sqrt());

    let n = a.report.sifted_bits as f64;
    let sigma_q = (eval.qber * (1.0 - eval.qber) / n).sqrt();
    assert!((a.report.qber - eval.qber).abs() < 4.0 * sigma_q, "{} vs {}", a.report.qber, eval.qber);
}
