//! Broadband emitter and the transmitter budget that slices it down to a
//! mean photon number at the modulator output.
//!
//! μ is referenced to the modulator output. Every loss after that plane is a
//! channel loss and lives in [`crate::link`] or the calibrated receive budget.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::experiments::CalibrationStep;
use crate::math::log10;
use crate::spectrum::{inband_fraction, FlatTopFilter, GaussianSpectrum};
use crate::units::{db_to_transmission, photon_energy, PowerLevel, Wavelength};

/// Sampled forward-current / fiber-coupled-power characteristic.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterVli {
    /// (forward current in mA, fiber-coupled power in W), currents strictly increasing.
    knots: Vec<(f64, f64)>,
    /// Optional (forward current in mA, voltage in V) samples.
    voltage: Vec<(f64, f64)>,
}

impl EmitterVli {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, Error> {
        if knots.len() < 2 {
            return Err(Error::InvalidTable("need at least two knots"));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidTable("currents must be strictly increasing"));
            }
        }
        if knots
            .iter()
            .any(|&(i, p)| !i.is_finite() || !p.is_finite() || p < 0.0)
        {
            return Err(Error::InvalidTable("powers must be finite and non-negative"));
        }
        Ok(EmitterVli {
            knots,
            voltage: Vec::new(),
        })
    }

    pub fn with_voltage(mut self, voltage: Vec<(f64, f64)>) -> Self {
        self.voltage = voltage;
        self
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn voltage(&self) -> &[(f64, f64)] {
        &self.voltage
    }

    pub fn range_ma(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    /// Piecewise-linear interpolation. No extrapolation: the emitter
    /// saturates early, so points beyond the table are unknown.
    pub fn power_at(&self, current_ma: f64) -> Result<PowerLevel, Error> {
        let (min_ma, max_ma) = self.range_ma();
        if !(current_ma >= min_ma && current_ma <= max_ma) {
            return Err(Error::CurrentOutOfRange {
                current_ma,
                min_ma,
                max_ma,
            });
        }
        let k = self
            .knots
            .partition_point(|&(i, _)| i <= current_ma)
            .clamp(1, self.knots.len() - 1);
        let (i0, p0) = self.knots[k - 1];
        let (i1, p1) = self.knots[k];
        if current_ma == i0 {
            return Ok(PowerLevel::from_watts(p0));
        }
        if current_ma == i1 {
            return Ok(PowerLevel::from_watts(p1));
        }
        let t = (current_ma - i0) / (i1 - i0);
        Ok(PowerLevel::from_watts(p0 + t * (p1 - p0)))
    }
}

impl Default for EmitterVli {
    /// The only characterized operating point: 32 µW at 20 mA, plus the origin.
    fn default() -> Self {
        EmitterVli::new(vec![(0.0, 0.0), (20.0, 32e-6)]).expect("default table is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmitterSpec {
    pub vli: EmitterVli,
    pub spectrum_center: Wavelength,
    /// Emission FWHM, nm.
    pub spectrum_fwhm_nm: f64,
}

impl Default for EmitterSpec {
    fn default() -> Self {
        EmitterSpec {
            vli: EmitterVli::default(),
            spectrum_center: Wavelength::from_nm(1548.0),
            spectrum_fwhm_nm: 58.0,
        }
    }
}

impl EmitterSpec {
    pub fn output_power(&self, current_ma: f64) -> Result<PowerLevel, Error> {
        self.vli.power_at(current_ma)
    }

    pub fn spectrum(&self, current_ma: f64) -> Result<GaussianSpectrum, Error> {
        GaussianSpectrum::from_nm(
            self.spectrum_center.nm(),
            self.spectrum_fwhm_nm,
            self.output_power(current_ma)?,
        )
    }
}

/// Transmitter-side budget from emitter output to the modulator output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxBudget {
    pub slicing_filter: FlatTopFilter,
    /// Lumped loss of modulator, patch cords and anything else not itemized, dB.
    pub modulator_insertion_loss_db: f64,
    /// Symbols per second.
    pub symbol_rate: f64,
}

impl TxBudget {
    /// Quantum-channel wavelength, i.e. the slicing filter center.
    pub fn quantum_wavelength(&self) -> Wavelength {
        self.slicing_filter.center()
    }

    pub fn with_modulator_loss(mut self, loss_db: f64) -> Self {
        self.modulator_insertion_loss_db = loss_db;
        self
    }

    fn validate(&self) -> Result<(), Error> {
        if !(self.symbol_rate.is_finite() && self.symbol_rate > 0.0) {
            return Err(Error::InvalidParameter {
                name: "symbol rate",
                value: self.symbol_rate,
            });
        }
        if !(self.modulator_insertion_loss_db.is_finite() && self.modulator_insertion_loss_db >= 0.0)
        {
            return Err(Error::InvalidParameter {
                name: "modulator insertion loss",
                value: self.modulator_insertion_loss_db,
            });
        }
        Ok(())
    }
}

/// Optical power that carries `mu` photons per symbol at `symbol_rate`.
pub fn power_for_mu(mu: f64, wavelength: Wavelength, symbol_rate: f64) -> PowerLevel {
    PowerLevel::from_watts(mu * photon_energy(wavelength) * symbol_rate)
}

/// Photons per symbol leaving the modulator when the emitter sits at `current_ma`.
pub fn mu_at_modulator_output(
    emitter: &EmitterSpec,
    budget: &TxBudget,
    current_ma: f64,
) -> Result<f64, Error> {
    budget.validate()?;
    let sliced = sliced_power(emitter, budget, current_ma)?;
    let p = sliced * db_to_transmission(budget.modulator_insertion_loss_db);
    Ok(p / (photon_energy(budget.quantum_wavelength()) * budget.symbol_rate))
}

/// Power after the slicing filter (shape and insertion loss), before the modulator.
fn sliced_power(emitter: &EmitterSpec, budget: &TxBudget, current_ma: f64) -> Result<f64, Error> {
    let spectrum = emitter.spectrum(current_ma)?;
    let frac = inband_fraction(&spectrum, &budget.slicing_filter);
    Ok(spectrum.total_power().watts()
        * frac
        * db_to_transmission(budget.slicing_filter.insertion_loss_db()))
}

/// Modulator loss (dB) that puts exactly `target_mu` at the modulator output.
/// The budget's own modulator loss is ignored.
pub fn calibrate_tx_loss(
    emitter: &EmitterSpec,
    budget: &TxBudget,
    target_mu: f64,
    current_ma: f64,
) -> Result<f64, Error> {
    if !(target_mu.is_finite() && target_mu > 0.0) {
        return Err(Error::InvalidParameter {
            name: "target mu",
            value: target_mu,
        });
    }
    let lossless = mu_at_modulator_output(emitter, &budget.with_modulator_loss(0.0), current_ma)?;
    let loss = 10.0 * log10(lossless / target_mu);
    if loss < 0.0 {
        return Err(Error::InfeasibleCalibration {
            step: CalibrationStep::TxLoss,
            anchor: "mean photon number",
            detail: format!(
                "target mu {target_mu} exceeds the {lossless:.6} photons/symbol available with zero modulator loss ({:.2} dB short)",
                -loss
            ),
        });
    }
    Ok(loss)
}

/// Extra transmit level (dB) needed to go from `mu_actual` to `mu_target`.
pub fn mu_headroom_db(mu_actual: f64, mu_target: f64) -> f64 {
    10.0 * log10(mu_target / mu_actual)
}
