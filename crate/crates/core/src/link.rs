//! Fiber and WDM losses plus the two in-band noise mechanisms that couple
//! the classical channel into the quantum receiver: Raman scattering in the
//! fiber and finite isolation of the demultiplexer.
//!
//! Noise rates here are photon rates at the quantum detector input. Both are
//! modeled as temporally uniform Poisson processes.

use alloc::format;

use crate::error::Error;
use crate::experiments::CalibrationStep;
use crate::math::bisect;
use crate::spectrum::FlatTopFilter;
use crate::system::{LinkConfig, SystemModel};
use crate::units::{db_to_transmission, photon_energy, PowerLevel, Wavelength};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    pub length_km: f64,
    /// dB/km at the quantum wavelength.
    pub attenuation_quantum: f64,
    /// dB/km at the classical wavelength.
    pub attenuation_classical: f64,
}

impl Default for FiberSpec {
    /// 1 km of standard SMF: 0.21 dB/km at 1550 nm, 2.2 dB/km at 852 nm.
    fn default() -> Self {
        FiberSpec {
            length_km: 1.0,
            attenuation_quantum: 0.21,
            attenuation_classical: 2.2,
        }
    }
}

impl FiberSpec {
    pub fn with_length(mut self, length_km: f64) -> Self {
        self.length_km = length_km;
        self
    }

    pub fn loss_db(&self, band: Band) -> f64 {
        self.length_km
            * match band {
                Band::Quantum => self.attenuation_quantum,
                Band::Classical => self.attenuation_classical,
            }
    }

    pub fn validate(&self) -> Result<(), Error> {
        for (name, v) in [
            ("fiber length", self.length_km),
            ("quantum-band attenuation", self.attenuation_quantum),
            ("classical-band attenuation", self.attenuation_classical),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter { name, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WdmSpec {
    /// Mux + demux insertion loss on the quantum path, dB.
    pub mux_insertion_loss_quantum: f64,
    /// Mux + demux insertion loss on the classical path, dB.
    pub mux_insertion_loss_classical: f64,
    /// Suppression of classical-band power on its way into the quantum
    /// receiver path, not counting the cleanup filter's own isolation, dB.
    pub classical_to_quantum_isolation: f64,
}

impl Default for WdmSpec {
    fn default() -> Self {
        WdmSpec {
            mux_insertion_loss_quantum: 1.0,
            mux_insertion_loss_classical: 1.0,
            classical_to_quantum_isolation: 60.0,
        }
    }
}

impl WdmSpec {
    pub fn with_isolation(mut self, isolation_db: f64) -> Self {
        self.classical_to_quantum_isolation = isolation_db;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    Quantum,
    Classical,
}

/// Lumped spontaneous-Raman coefficient: noise photons/s at the fiber output
/// near the quantum wavelength, per mW of classical launch power, per km, per
/// nm of collection bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RamanModel {
    pub beta: f64,
}

/// End-to-end transmittance. The cleanup filter sits only on the quantum path.
pub fn link_transmittance(
    fiber: &FiberSpec,
    wdm: &WdmSpec,
    cleanup: &FlatTopFilter,
    band: Band,
) -> f64 {
    db_to_transmission(path_loss_db(fiber, wdm, cleanup, band))
}

pub fn path_loss_db(fiber: &FiberSpec, wdm: &WdmSpec, cleanup: &FlatTopFilter, band: Band) -> f64 {
    match band {
        Band::Quantum => {
            fiber.loss_db(band) + wdm.mux_insertion_loss_quantum + cleanup.insertion_loss_db()
        }
        Band::Classical => fiber.loss_db(band) + wdm.mux_insertion_loss_classical,
    }
}

/// Raman noise photons/s, linear in launch power, length and bandwidth.
pub fn raman_noise_rate(
    raman: &RamanModel,
    launch: PowerLevel,
    fiber: &FiberSpec,
    collection_bandwidth_nm: f64,
) -> f64 {
    raman.beta * launch.milliwatts() * fiber.length_km * collection_bandwidth_nm
}

/// Classical photons/s that leak through demultiplexer and cleanup filter.
pub fn leakage_noise_rate(
    wdm: &WdmSpec,
    classical_at_demux: PowerLevel,
    cleanup: &FlatTopFilter,
    classical_wavelength: Wavelength,
) -> f64 {
    let suppression = db_to_transmission(wdm.classical_to_quantum_isolation + cleanup.isolation_db());
    classical_at_demux.watts() * suppression / photon_energy(classical_wavelength)
}

/// Bisection tolerance on QBER for the crossing calibrations.
pub const CROSSING_QBER_TOL: f64 = 1e-9;

/// WDM isolation (dB) that puts the back-to-back QBER at `target_qber` when
/// the classical ROP is `target_rop`. The Raman coefficient is irrelevant
/// here since back-to-back has no fiber.
pub fn calibrate_isolation(
    model: &SystemModel,
    target_rop: PowerLevel,
    target_qber: f64,
) -> Result<f64, Error> {
    let baseline = model.evaluate(LinkConfig::BackToBack, None)?.qber;
    if baseline >= target_qber {
        return Err(Error::InfeasibleCalibration {
            step: CalibrationStep::Isolation,
            anchor: "back-to-back QBER crossing",
            detail: format!(
                "QBER without classical channel is already {baseline:.5} >= {target_qber}"
            ),
        });
    }
    let qber_at = |iso: f64| -> f64 {
        let mut m = model.clone();
        m.wdm.classical_to_quantum_isolation = iso;
        m.evaluate(LinkConfig::BackToBack, Some(target_rop))
            .map(|e| e.qber)
            .unwrap_or(f64::NAN)
            - target_qber
    };
    let lo = 0.0;
    let hi = 400.0;
    bisect(qber_at, lo, hi, CROSSING_QBER_TOL).ok_or_else(|| Error::InfeasibleCalibration {
        step: CalibrationStep::Isolation,
        anchor: "back-to-back QBER crossing",
        detail: format!("no isolation in [{lo}, {hi}] dB brackets the crossing"),
    })
}

/// Raman coefficient that puts the fiber-link QBER at `target_qber` when the
/// classical ROP is `target_rop`, with the model's isolation held fixed.
pub fn calibrate_raman(
    model: &SystemModel,
    target_rop: PowerLevel,
    target_qber: f64,
) -> Result<RamanModel, Error> {
    let qber_at = |beta: f64| -> f64 {
        let mut m = model.clone();
        m.raman.beta = beta;
        m.evaluate(LinkConfig::Fiber, Some(target_rop))
            .map(|e| e.qber)
            .unwrap_or(f64::NAN)
            - target_qber
    };
    let leak_only = qber_at(0.0);
    if leak_only >= 0.0 {
        return Err(Error::InfeasibleCalibration {
            step: CalibrationStep::Raman,
            anchor: "fiber QBER crossing",
            detail: format!(
                "leakage alone gives QBER {:.5} >= {target_qber} at {:.2} dBm",
                leak_only + target_qber,
                target_rop.dbm()
            ),
        });
    }
    if model.fiber.length_km == 0.0 {
        return Err(Error::InfeasibleCalibration {
            step: CalibrationStep::Raman,
            anchor: "fiber QBER crossing",
            detail: format!("fiber length is zero, Raman noise cannot build up"),
        });
    }
    let mut hi = 1.0;
    while qber_at(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e30 {
            return Err(Error::InfeasibleCalibration {
                step: CalibrationStep::Raman,
                anchor: "fiber QBER crossing",
                detail: format!("no Raman coefficient reaches QBER {target_qber}"),
            });
        }
    }
    let beta = bisect(qber_at, 0.0, hi, CROSSING_QBER_TOL).ok_or(Error::InfeasibleCalibration {
        step: CalibrationStep::Raman,
        anchor: "fiber QBER crossing",
        detail: format!("bisection failed to bracket"),
    })?;
    Ok(RamanModel { beta })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cleanup(il: f64) -> FlatTopFilter {
        FlatTopFilter::from_frequency_width(Wavelength::from_nm(1550.12), 200e9, il, 40.0).unwrap()
    }

    #[test]
    fn lossless_identity() {
        let f = FiberSpec::default().with_length(0.0);
        let w = WdmSpec {
            mux_insertion_loss_quantum: 0.0,
            mux_insertion_loss_classical: 0.0,
            classical_to_quantum_isolation: 50.0,
        };
        assert_eq!(link_transmittance(&f, &w, &cleanup(0.0), Band::Quantum), 1.0);
        assert_eq!(link_transmittance(&f, &w, &cleanup(0.0), Band::Classical), 1.0);
    }

    #[test]
    fn one_km_with_one_db_of_components() {
        let f = FiberSpec::default();
        let w = WdmSpec {
            mux_insertion_loss_quantum: 0.6,
            ..WdmSpec::default()
        };
        let t = link_transmittance(&f, &w, &cleanup(0.4), Band::Quantum);
        assert!((t - 0.756_832_895_020_974_4).abs() < 1e-9, "{t}");
    }

    #[test]
    fn fiber_loss_scales_with_length() {
        let f = FiberSpec::default();
        assert!((f.with_length(2.0).loss_db(Band::Classical) - 2.0 * f.loss_db(Band::Classical)).abs() < 1e-15);
    }

    #[test]
    fn raman_linearity() {
        let r = RamanModel { beta: 3.0e4 };
        let f = FiberSpec::default();
        let p = PowerLevel::from_dbm(-20.0);
        assert_eq!(raman_noise_rate(&r, p, &f.with_length(0.0), 1.6), 0.0);
        let base = raman_noise_rate(&r, p, &f, 1.6);
        assert!((raman_noise_rate(&r, p.scale(2.0), &f, 1.6) - 2.0 * base).abs() < 1e-9 * base);
        assert!((raman_noise_rate(&r, p, &f.with_length(0.5), 1.6) - 0.5 * base).abs() < 1e-9 * base);
    }

    #[test]
    fn leakage_scaling() {
        let w = WdmSpec::default();
        let c = cleanup(0.0);
        let p = PowerLevel::from_dbm(-23.5);
        let lk = Wavelength::from_nm(852.0);
        let base = leakage_noise_rate(&w, p, &c, lk);
        let more = leakage_noise_rate(&w.with_isolation(70.0), p, &c, lk);
        assert!((more / base - 0.1).abs() < 1e-12);
        assert_eq!(leakage_noise_rate(&w.with_isolation(f64::INFINITY), p, &c, lk), 0.0);
    }
}
