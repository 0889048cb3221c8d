//! Optical power and wavelength carriers.
//!
//! Everything is stored in SI units (watts, meters). dBm and nanometers only
//! show up at the edges, through the constructors and accessors below.

use crate::math::{log10, pow10};

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Planck constant, J·s (exact since the 2019 SI redefinition).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Converts a dBm level to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * pow10(dbm / 10.0)
}

/// Converts watts to dBm. Zero power maps to negative infinity.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * log10(watts / 1e-3)
}

/// Linear transmission factor for a loss given in dB.
pub fn db_to_transmission(loss_db: f64) -> f64 {
    pow10(-loss_db / 10.0)
}

/// Loss in dB for a linear transmission factor.
pub fn transmission_to_db(t: f64) -> f64 {
    -10.0 * log10(t)
}

/// Optical power, stored in watts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PowerLevel(f64);

impl PowerLevel {
    pub const ZERO: PowerLevel = PowerLevel(0.0);

    /// Panics on negative or non-finite input.
    pub fn from_watts(watts: f64) -> Self {
        assert!(
            watts.is_finite() && watts >= 0.0,
            "optical power must be finite and non-negative, got {watts} W"
        );
        PowerLevel(watts)
    }

    pub fn from_milliwatts(mw: f64) -> Self {
        Self::from_watts(mw * 1e-3)
    }

    pub fn from_dbm(dbm: f64) -> Self {
        Self::from_watts(dbm_to_watts(dbm))
    }

    pub fn watts(self) -> f64 {
        self.0
    }

    pub fn milliwatts(self) -> f64 {
        self.0 * 1e3
    }

    pub fn dbm(self) -> f64 {
        watts_to_dbm(self.0)
    }

    /// Power after a loss of `loss_db` dB (negative values are gain).
    pub fn attenuate_db(self, loss_db: f64) -> Self {
        PowerLevel(self.0 * db_to_transmission(loss_db))
    }

    pub fn scale(self, factor: f64) -> Self {
        Self::from_watts(self.0 * factor)
    }
}

/// Vacuum wavelength, stored in meters.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Wavelength(f64);

impl Wavelength {
    /// Panics unless `meters` is finite and positive.
    pub fn from_meters(meters: f64) -> Self {
        assert!(
            meters.is_finite() && meters > 0.0,
            "wavelength must be finite and positive, got {meters} m"
        );
        Wavelength(meters)
    }

    pub fn from_nm(nm: f64) -> Self {
        Self::from_meters(nm * 1e-9)
    }

    pub fn from_frequency(hz: f64) -> Self {
        Self::from_meters(SPEED_OF_LIGHT / hz)
    }

    pub fn meters(self) -> f64 {
        self.0
    }

    pub fn nm(self) -> f64 {
        self.0 * 1e9
    }

    pub fn frequency(self) -> f64 {
        SPEED_OF_LIGHT / self.0
    }

    /// Single-photon energy h·c/λ in joules.
    pub fn photon_energy(self) -> f64 {
        photon_energy(self)
    }

    /// Wavelength width spanned by a frequency width `delta_hz` around this
    /// wavelength, using the first-order relation Δλ = λ²·Δν/c.
    pub fn width_for_frequency(self, delta_hz: f64) -> f64 {
        self.0 * self.0 * delta_hz / SPEED_OF_LIGHT
    }
}

/// h·c/λ in joules.
pub fn photon_energy(wavelength: Wavelength) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength.meters()
}

/// Photon flux (photons/s) carried by `power`.
pub fn photon_rate(power: PowerLevel, wavelength: Wavelength) -> f64 {
    power.watts() / photon_energy(wavelength)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn zero_dbm_is_one_milliwatt() {
        assert_eq!(dbm_to_watts(0.0), 1e-3);
    }

    #[test]
    fn classical_sensitivity_level() {
        // 10^(-2.99) mW
        assert!(rel(dbm_to_watts(-29.9), 1.023_292_992_280_754e-6) < 1e-12);
    }

    #[test]
    fn emitter_output_level() {
        // 32 µW is -14.949 dBm; the other direction within 0.1 %
        assert!(rel(dbm_to_watts(-14.95), 32.0e-6) < 1e-3);
        assert!((PowerLevel::from_watts(32e-6).dbm() + 14.948_500_216_800_94).abs() < 1e-9);
    }

    #[test]
    fn photon_energies() {
        assert!(rel(photon_energy(Wavelength::from_nm(1550.12)), 1.2815e-19) < 1e-4);
        assert!(rel(photon_energy(Wavelength::from_nm(852.0)), 2.3316e-19) < 1e-4);
        let e1 = photon_energy(Wavelength::from_nm(800.0));
        let e2 = photon_energy(Wavelength::from_nm(1600.0));
        assert!(rel(e1, 2.0 * e2) < 1e-15);
    }

    #[test]
    fn frequency_width_conversion() {
        let w = Wavelength::from_nm(1550.12).width_for_frequency(200e9);
        assert!((w * 1e9 - 1.603).abs() < 1e-3);
    }

    #[test]
    #[should_panic]
    fn negative_power_rejected() {
        PowerLevel::from_watts(-1.0);
    }

    #[test]
    #[should_panic]
    fn zero_wavelength_rejected() {
        Wavelength::from_meters(0.0);
    }
}
