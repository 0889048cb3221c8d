//! Single-photon detector and classical PIN+TIA receiver models.

use crate::error::Error;
use crate::math::{bisect, erfc};
use crate::units::PowerLevel;

const SQRT_2: f64 = core::f64::consts::SQRT_2;

/// Gated/free-running InGaAs SPAD parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpadSpec {
    pub efficiency: f64,
    /// Seconds.
    pub dead_time: f64,
    /// Counts per second, over the full time axis.
    pub dark_rate: f64,
}

impl Default for SpadSpec {
    fn default() -> Self {
        SpadSpec {
            efficiency: 0.10,
            dead_time: 25e-6,
            dark_rate: 485.0,
        }
    }
}

impl SpadSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidParameter {
                name: "SPAD efficiency",
                value: self.efficiency,
            });
        }
        if !(self.dead_time.is_finite() && self.dead_time >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "SPAD dead time",
                value: self.dead_time,
            });
        }
        if !(self.dark_rate.is_finite() && self.dark_rate >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "SPAD dark count rate",
                value: self.dark_rate,
            });
        }
        Ok(())
    }
}

/// PIN photodiode with transimpedance amplifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinTiaSpec {
    /// A/W.
    pub responsivity: f64,
    /// Input-referred RMS noise current, A.
    pub noise_current_rms: f64,
}

/// Non-paralyzable dead time: every registered event blinds the detector for
/// exactly `dead_time` seconds.
pub fn dead_time_observed_rate(true_rate: f64, dead_time: f64) -> f64 {
    true_rate / (1.0 + true_rate * dead_time)
}

/// ½·erfc(Q/√2).
pub fn ber_from_q(q: f64) -> f64 {
    0.5 * erfc(q / SQRT_2)
}

/// Inverse of [`ber_from_q`] for `ber` in (0, 0.5).
pub fn q_from_ber(ber: f64) -> Result<f64, Error> {
    if !(ber > 0.0 && ber < 0.5) {
        return Err(Error::InvalidParameter {
            name: "target BER",
            value: ber,
        });
    }
    // Bisect in log-BER so tiny targets keep full relative precision.
    let target = crate::math::ln(ber);
    bisect(|q| crate::math::ln(ber_from_q(q)) - target, 0.0, 38.0, 1e-13).ok_or(
        Error::InvalidParameter {
            name: "target BER",
            value: ber,
        },
    )
}

/// OOK bit error ratio with infinite extinction and equal noise on both rails.
pub fn classical_ber(spec: &PinTiaSpec, rop: PowerLevel) -> f64 {
    let q = spec.responsivity * rop.watts() / spec.noise_current_rms;
    ber_from_q(q)
}

/// RMS noise current that places the BER at `target_ber` for a received
/// power of `sensitivity`.
pub fn calibrate_rx_noise(
    responsivity: f64,
    sensitivity: PowerLevel,
    target_ber: f64,
) -> Result<f64, Error> {
    if !(responsivity.is_finite() && responsivity > 0.0) {
        return Err(Error::InvalidParameter {
            name: "responsivity",
            value: responsivity,
        });
    }
    let q = q_from_ber(target_ber)?;
    Ok(responsivity * sensitivity.watts() / q)
}

/// Receiver-side timing and projection settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverWindow {
    /// Accepted fraction of each symbol period.
    pub window_fraction: f64,
    /// Fraction of signal photons that land inside the accepted window.
    pub signal_acceptance: f64,
    /// Probability that a signal photon is projected onto the single
    /// monitored detector, averaged over the four transmitted states.
    pub sift_factor: f64,
}

impl Default for ReceiverWindow {
    fn default() -> Self {
        ReceiverWindow {
            window_fraction: 0.5,
            signal_acceptance: 1.0,
            sift_factor: 0.5,
        }
    }
}

/// Expected detection rates inside the temporal window, before and after
/// dead time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRates {
    /// Signal clicks in the window, counts/s.
    pub signal: f64,
    /// Dark counts in the window, counts/s.
    pub dark: f64,
    /// Raman + leakage clicks in the window, counts/s.
    pub noise: f64,
    /// All clicks the detector sees, inside the window or not, counts/s.
    pub total_unfiltered: f64,
    /// Observed/true ratio from non-paralyzable dead time.
    pub dead_time_factor: f64,
}

impl WindowRates {
    /// True in-window rate.
    pub fn total(&self) -> f64 {
        self.signal + self.dark + self.noise
    }

    /// In-window rate after dead time; this is the raw-key rate.
    pub fn observed_total(&self) -> f64 {
        self.total() * self.dead_time_factor
    }
}

/// `noise_rate` is a click rate (detector efficiency already applied) from
/// temporally uniform sources such as Raman scattering and channel leakage.
pub fn expected_window_rates(
    mu_arrival: f64,
    spad: &SpadSpec,
    symbol_rate: f64,
    window: &ReceiverWindow,
    noise_rate: f64,
) -> Result<WindowRates, Error> {
    spad.validate()?;
    if !(window.window_fraction > 0.0 && window.window_fraction <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "window fraction",
            value: window.window_fraction,
        });
    }
    for (name, v) in [
        ("arrival mu", mu_arrival),
        ("symbol rate", symbol_rate),
        ("noise rate", noise_rate),
        ("sift factor", window.sift_factor),
        ("signal acceptance", window.signal_acceptance),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter { name, value: v });
        }
    }
    let signal_all = mu_arrival * symbol_rate * spad.efficiency * window.sift_factor;
    let signal = signal_all * window.signal_acceptance;
    let dark = spad.dark_rate * window.window_fraction;
    let noise = noise_rate * window.window_fraction;
    let total_unfiltered = signal_all + spad.dark_rate + noise_rate;
    let dead_time_factor = 1.0 / (1.0 + total_unfiltered * spad.dead_time);
    Ok(WindowRates {
        signal,
        dark,
        noise,
        total_unfiltered,
        dead_time_factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dead_time_examples() {
        assert!((dead_time_observed_rate(1330.0, 25e-6) - 1287.200_580_692_0).abs() < 1e-6);
        assert_eq!(dead_time_observed_rate(1234.5, 0.0), 1234.5);
        assert!((dead_time_observed_rate(1e15, 25e-6) - 40_000.0).abs() < 1e-3);
    }

    #[test]
    fn dead_time_monotone_and_bounded() {
        let mut prev = 0.0;
        for k in 1..200 {
            let r = dead_time_observed_rate(k as f64 * 1e3, 25e-6);
            assert!(r > prev && r < 40_000.0);
            prev = r;
        }
    }

    #[test]
    fn q_for_1e_minus_10() {
        let q = q_from_ber(1e-10).unwrap();
        assert!((q - 6.361_340_902_404).abs() < 1e-6);
        assert!(q_from_ber(0.5).is_err());
        assert!(q_from_ber(0.0).is_err());
    }

    #[test]
    fn receiver_noise_calibration() {
        let sens = PowerLevel::from_dbm(-29.9);
        let sigma = calibrate_rx_noise(0.56, sens, 1e-10).unwrap();
        assert!(((sigma - 9.008e-8) / 9.008e-8).abs() < 1e-3);
        let spec = PinTiaSpec {
            responsivity: 0.56,
            noise_current_rms: sigma,
        };
        let ber = classical_ber(&spec, sens);
        assert!(((ber - 1e-10) / 1e-10).abs() < 0.05);
        // 1.1 dB below sensitivity: Q = 6.3613·10^(-0.11) = 4.942
        let ber31 = classical_ber(&spec, PowerLevel::from_dbm(-31.0));
        assert!(ber31 > 3.5e-7 && ber31 < 4.5e-7, "{ber31}");
        assert!(calibrate_rx_noise(0.56, sens, 0.5).is_err());
    }

    #[test]
    fn ber_dark_receiver_is_coin_flip() {
        let spec = PinTiaSpec {
            responsivity: 0.56,
            noise_current_rms: 1e-7,
        };
        assert_eq!(classical_ber(&spec, PowerLevel::ZERO), 0.5);
    }

    #[test]
    fn window_rates() {
        let spad = SpadSpec::default();
        let w = ReceiverWindow::default();
        let r = expected_window_rates(0.0, &spad, 1e8, &w, 0.0).unwrap();
        assert_eq!(r.dark, 242.5);

        let ideal = SpadSpec {
            dead_time: 0.0,
            ..SpadSpec::default()
        };
        let unity = ReceiverWindow {
            window_fraction: 1.0,
            signal_acceptance: 1.0,
            sift_factor: 1.0,
        };
        let r = expected_window_rates(2e-4, &ideal, 1e8, &unity, 0.0).unwrap();
        assert_eq!(r.signal, 2e-4 * 1e8 * 0.1);
        assert_eq!(r.dead_time_factor, 1.0);

        let bad = ReceiverWindow {
            window_fraction: 0.0,
            ..w
        };
        assert!(expected_window_rates(1e-4, &spad, 1e8, &bad, 0.0).is_err());
    }
}
