//! Gaussian emission spectra and flat-top bandpass filters.

use crate::error::Error;
use crate::math::{exp, ln, pow10, sqrt};
use crate::units::{PowerLevel, Wavelength};

/// Grid points per integration segment.
pub const GRID_POINTS: usize = 4096;

/// Half-width of the integration domain in standard deviations. The tails
/// beyond 8σ carry less than 1e-15 of the power.
const DOMAIN_SIGMAS: f64 = 8.0;

/// Composite trapezoid rule on `n` uniform points over `[a, b]`.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    debug_assert!(n >= 2);
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / (n - 1) as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for i in 1..n - 1 {
        acc += f(a + h * i as f64);
    }
    acc * h
}

/// Spectral power density with a Gaussian line shape in wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpectrum {
    center: Wavelength,
    fwhm: f64,
    total_power: PowerLevel,
}

impl GaussianSpectrum {
    /// `fwhm` is in meters. The density is integrated numerically on
    /// construction and rejected if it does not reproduce `total_power`.
    pub fn new(center: Wavelength, fwhm: f64, total_power: PowerLevel) -> Result<Self, Error> {
        if !(fwhm.is_finite() && fwhm > 0.0) {
            return Err(Error::InvalidParameter {
                name: "spectrum fwhm",
                value: fwhm,
            });
        }
        let s = GaussianSpectrum {
            center,
            fwhm,
            total_power,
        };
        if total_power.watts() > 0.0 {
            let (a, b) = s.domain();
            let integral = trapezoid(|l| s.density(l), a, b, GRID_POINTS);
            let err = ((integral - total_power.watts()) / total_power.watts()).abs();
            if err >= 1e-6 {
                return Err(Error::Normalization { relative_error: err });
            }
        }
        Ok(s)
    }

    pub fn from_nm(center_nm: f64, fwhm_nm: f64, total_power: PowerLevel) -> Result<Self, Error> {
        Self::new(Wavelength::from_nm(center_nm), fwhm_nm * 1e-9, total_power)
    }

    pub fn center(&self) -> Wavelength {
        self.center
    }

    pub fn fwhm(&self) -> f64 {
        self.fwhm
    }

    pub fn total_power(&self) -> PowerLevel {
        self.total_power
    }

    pub fn sigma(&self) -> f64 {
        self.fwhm / (2.0 * sqrt(2.0 * ln(2.0)))
    }

    /// Power per unit wavelength, W/m, at `lambda` (meters).
    pub fn density(&self, lambda: f64) -> f64 {
        self.total_power.watts() * self.shape(lambda)
    }

    /// Unit-area line shape, 1/m.
    pub fn shape(&self, lambda: f64) -> f64 {
        let sigma = self.sigma();
        let x = (lambda - self.center.meters()) / sigma;
        exp(-0.5 * x * x) / (sigma * sqrt(2.0 * core::f64::consts::PI))
    }

    fn domain(&self) -> (f64, f64) {
        let half = DOMAIN_SIGMAS * self.sigma();
        (self.center.meters() - half, self.center.meters() + half)
    }
}

/// Bandpass with uniform in-band transmission and a finite out-of-band floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatTopFilter {
    center: Wavelength,
    passband_width: f64,
    insertion_loss_db: f64,
    isolation_db: f64,
}

impl FlatTopFilter {
    /// `passband_width` in meters. `isolation_db` may be infinite for an
    /// ideal filter.
    pub fn new(
        center: Wavelength,
        passband_width: f64,
        insertion_loss_db: f64,
        isolation_db: f64,
    ) -> Result<Self, Error> {
        if !(passband_width.is_finite() && passband_width >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "filter passband width",
                value: passband_width,
            });
        }
        if !(insertion_loss_db.is_finite() && insertion_loss_db >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "filter insertion loss",
                value: insertion_loss_db,
            });
        }
        if isolation_db.is_nan() || isolation_db <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "filter out-of-band isolation",
                value: isolation_db,
            });
        }
        Ok(FlatTopFilter {
            center,
            passband_width,
            insertion_loss_db,
            isolation_db,
        })
    }

    /// Filter specified by its frequency width, e.g. a 200-GHz DWDM slice.
    pub fn from_frequency_width(
        center: Wavelength,
        width_hz: f64,
        insertion_loss_db: f64,
        isolation_db: f64,
    ) -> Result<Self, Error> {
        Self::new(
            center,
            center.width_for_frequency(width_hz),
            insertion_loss_db,
            isolation_db,
        )
    }

    pub fn center(&self) -> Wavelength {
        self.center
    }

    /// Passband width in meters.
    pub fn passband_width(&self) -> f64 {
        self.passband_width
    }

    pub fn insertion_loss_db(&self) -> f64 {
        self.insertion_loss_db
    }

    pub fn isolation_db(&self) -> f64 {
        self.isolation_db
    }

    pub fn with_center(mut self, center: Wavelength) -> Self {
        self.center = center;
        self
    }

    pub fn with_passband_width(mut self, width: f64) -> Self {
        self.passband_width = width;
        self
    }

    /// Passband edges in meters.
    pub fn edges(&self) -> (f64, f64) {
        let c = self.center.meters();
        (c - 0.5 * self.passband_width, c + 0.5 * self.passband_width)
    }

    pub fn in_passband(&self, lambda: f64) -> bool {
        let (lo, hi) = self.edges();
        lo <= lambda && lambda <= hi
    }

    /// Linear out-of-band floor relative to the passband.
    pub fn floor(&self) -> f64 {
        pow10(-self.isolation_db / 10.0)
    }

    /// Transmission relative to the passband level, in (0, 1].
    pub fn shape(&self, lambda: f64) -> f64 {
        if self.in_passband(lambda) {
            1.0
        } else {
            self.floor()
        }
    }

    /// Absolute transmission, insertion loss included.
    pub fn transmission(&self, lambda: f64) -> f64 {
        pow10(-self.insertion_loss_db / 10.0) * self.shape(lambda)
    }
}

/// Fraction of the spectrum's power passed by the filter shape, excluding
/// the filter's insertion loss. A spectrum lying entirely outside the
/// passband still leaks through at the isolation floor.
pub fn inband_fraction(spectrum: &GaussianSpectrum, filter: &FlatTopFilter) -> f64 {
    let (a, b) = spectrum.domain();
    let (lo, hi) = filter.edges();
    let shape = |l: f64| spectrum.shape(l);

    // Integrate piecewise so the passband edges fall on grid boundaries.
    let p_lo = lo.clamp(a, b);
    let p_hi = hi.clamp(a, b);
    let below = trapezoid(shape, a, p_lo, GRID_POINTS);
    let inside = trapezoid(shape, p_lo, p_hi, GRID_POINTS);
    let above = trapezoid(shape, p_hi, b, GRID_POINTS);
    let total = below + inside + above;

    (inside + filter.floor() * (below + above)) / total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal_slice() -> FlatTopFilter {
        FlatTopFilter::from_frequency_width(Wavelength::from_nm(1550.12), 200e9, 0.0, f64::INFINITY)
            .unwrap()
    }

    fn emitter() -> GaussianSpectrum {
        GaussianSpectrum::from_nm(1548.0, 58.0, PowerLevel::from_watts(32e-6)).unwrap()
    }

    #[test]
    fn rejects_nonpositive_fwhm() {
        assert!(GaussianSpectrum::from_nm(1548.0, 0.0, PowerLevel::from_watts(1.0)).is_err());
        assert!(GaussianSpectrum::from_nm(1548.0, -3.0, PowerLevel::from_watts(1.0)).is_err());
    }

    #[test]
    fn filter_levels() {
        let f = FlatTopFilter::new(Wavelength::from_nm(1550.0), 1e-9, 3.0, 30.0).unwrap();
        let inside = f.transmission(1550e-9);
        let outside = f.transmission(1560e-9);
        assert!((inside - pow10(-0.3)).abs() < 1e-15);
        assert!((outside - pow10(-3.3)).abs() < 1e-15);
        assert!(FlatTopFilter::new(Wavelength::from_nm(1550.0), 1e-9, -1.0, 30.0).is_err());
        assert!(FlatTopFilter::new(Wavelength::from_nm(1550.0), 1e-9, 1.0, 0.0).is_err());
    }

    #[test]
    fn wide_filter_passes_everything() {
        let s = emitter();
        let f = ideal_slice().with_center(s.center()).with_passband_width(10.0 * s.fwhm());
        assert!(inband_fraction(&s, &f) > 0.999);
    }

    #[test]
    fn disjoint_filter_returns_floor() {
        let s = emitter();
        let f = FlatTopFilter::new(Wavelength::from_nm(852.0), 7e-9, 0.0, 40.0).unwrap();
        let frac = inband_fraction(&s, &f);
        assert!((frac - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn narrow_filter_limit_is_linear_in_width() {
        let s = emitter();
        let c = ideal_slice().center().meters();
        for w in [1e-12, 2e-12, 4e-12] {
            let f = ideal_slice().with_passband_width(w);
            let expected = s.shape(c) * w;
            assert!(((inband_fraction(&s, &f) - expected) / expected).abs() < 1e-6);
        }
    }
}
