//! BB84 states and QBER arithmetic. Distillation models turn raw key into
//! secure key, which in turn bounds the AES key-renewal capacity.
//!
//! Bit convention: R and D carry 0, L and A carry 1.

use crate::error::Error;
use crate::math::log2;

/// QBER above which one-way asymptotic distillation yields no key.
pub const QBER_THRESHOLD: f64 = 0.11;

/// AES-256 key length in bits.
pub const AES_KEY_BITS: f64 = 256.0;

/// Data volume protected by one key: 64 GB, decimal.
pub const AES_CHUNK_BYTES: f64 = 64e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Circular,
    Diagonal,
}

impl Basis {
    pub fn conjugate(self) -> Basis {
        match self {
            Basis::Circular => Basis::Diagonal,
            Basis::Diagonal => Basis::Circular,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolState {
    R,
    L,
    D,
    A,
}

impl PolState {
    pub const ALL: [PolState; 4] = [PolState::R, PolState::L, PolState::D, PolState::A];

    pub fn new(basis: Basis, bit: u8) -> PolState {
        match (basis, bit & 1) {
            (Basis::Circular, 0) => PolState::R,
            (Basis::Circular, _) => PolState::L,
            (Basis::Diagonal, 0) => PolState::D,
            (Basis::Diagonal, _) => PolState::A,
        }
    }

    pub fn basis(self) -> Basis {
        match self {
            PolState::R | PolState::L => Basis::Circular,
            PolState::D | PolState::A => Basis::Diagonal,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            PolState::R | PolState::D => 0,
            PolState::L | PolState::A => 1,
        }
    }

    /// Index in [`PolState::ALL`].
    pub fn index(self) -> usize {
        match self {
            PolState::R => 0,
            PolState::L => 1,
            PolState::D => 2,
            PolState::A => 3,
        }
    }
}

/// Measures `state` in `basis` given a uniform draw `u` in [0, 1).
///
/// Matching basis: the encoded bit with probability 1 − e_opt. Conjugate
/// basis: either bit with probability ½.
pub fn measure(state: PolState, basis: Basis, e_opt: f64, u: f64) -> u8 {
    if state.basis() == basis {
        if u < e_opt {
            state.bit() ^ 1
        } else {
            state.bit()
        }
    } else if u < 0.5 {
        0
    } else {
        1
    }
}

/// Probability that a photon in `state` lands on a detector that registers
/// outcome `detector` (a basis together with a bit value).
pub fn projection_probability(state: PolState, detector: PolState, e_opt: f64) -> f64 {
    if state.basis() != detector.basis() {
        0.5
    } else if state == detector {
        1.0 - e_opt
    } else {
        e_opt
    }
}

/// h₂(p) in bits.
pub fn binary_entropy(p: f64) -> Result<f64, Error> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter {
            name: "probability",
            value: p,
        });
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * log2(p) - (1.0 - p) * log2(1.0 - p))
}

/// How the raw key is turned into secure key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistillationModel {
    /// 1 − 2·h₂(q).
    IdealAsymptotic,
    /// 1 − (1 + f)·h₂(q), with error-correction inefficiency f ≥ 1.
    EcEfficiency(f64),
    /// A constant fraction r below the threshold, zero at or above it.
    FixedFraction(f64),
}

impl DistillationModel {
    /// The secure/raw ratio that turns 1.33 kb/s raw into 0.372 kb/s secure.
    pub const REPORTED_FRACTION: f64 = 0.2797;

    pub fn reported_fraction() -> Self {
        DistillationModel::FixedFraction(Self::REPORTED_FRACTION)
    }

    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            DistillationModel::IdealAsymptotic => Ok(()),
            DistillationModel::EcEfficiency(f) if f.is_finite() && f >= 1.0 => Ok(()),
            DistillationModel::EcEfficiency(f) => Err(Error::InvalidParameter {
                name: "error-correction efficiency",
                value: f,
            }),
            DistillationModel::FixedFraction(r) if (0.0..=1.0).contains(&r) => Ok(()),
            DistillationModel::FixedFraction(r) => Err(Error::InvalidParameter {
                name: "fixed secure fraction",
                value: r,
            }),
        }
    }
}

impl Default for DistillationModel {
    fn default() -> Self {
        DistillationModel::IdealAsymptotic
    }
}

/// Fraction of raw key that survives distillation, in [0, 1].
pub fn secure_fraction(qber: f64, model: DistillationModel) -> Result<f64, Error> {
    if !(0.0..=0.5).contains(&qber) {
        return Err(Error::InvalidParameter {
            name: "QBER",
            value: qber,
        });
    }
    model.validate()?;
    let h = binary_entropy(qber)?;
    Ok(match model {
        DistillationModel::IdealAsymptotic => (1.0 - 2.0 * h).max(0.0),
        DistillationModel::EcEfficiency(f) => (1.0 - (1.0 + f) * h).max(0.0),
        DistillationModel::FixedFraction(r) => {
            if qber < QBER_THRESHOLD {
                r
            } else {
                0.0
            }
        }
    })
}

/// Secure key rate in bits/s from a raw rate in counts/s.
pub fn secure_key_rate(raw_rate: f64, qber: f64, model: DistillationModel) -> Result<f64, Error> {
    if !(raw_rate.is_finite() && raw_rate >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "raw key rate",
            value: raw_rate,
        });
    }
    Ok(raw_rate * secure_fraction(qber, model)?)
}

/// Classical capacity (bits/s) that can be re-keyed with one `key_bits` key
/// per `chunk_bytes` of data.
pub fn aes_secured_capacity(secure_rate: f64, key_bits: f64, chunk_bytes: f64) -> f64 {
    secure_rate / key_bits * chunk_bytes * 8.0
}

/// [`aes_secured_capacity`] with a 256-bit key per 64 GB.
pub fn aes256_secured_capacity(secure_rate: f64) -> f64 {
    aes_secured_capacity(secure_rate, AES_KEY_BITS, AES_CHUNK_BYTES)
}

/// QBER from in-window rates. Uniform noise lands on the wrong bit half the time.
pub fn qber_analytic(signal: f64, dark: f64, noise: f64, e_opt: f64) -> Result<f64, Error> {
    for (name, v) in [
        ("signal rate", signal),
        ("dark rate", dark),
        ("noise rate", noise),
    ] {
        if !(v >= 0.0) {
            return Err(Error::InvalidParameter { name, value: v });
        }
    }
    if !(0.0..=0.5).contains(&e_opt) {
        return Err(Error::InvalidParameter {
            name: "intrinsic optical error",
            value: e_opt,
        });
    }
    let total = signal + dark + noise;
    if !(total > 0.0) {
        return Err(Error::UndefinedQber);
    }
    if total.is_infinite() {
        return Ok(if signal.is_infinite() && noise.is_finite() && dark.is_finite() {
            e_opt
        } else {
            0.5
        });
    }
    Ok((e_opt * signal + 0.5 * (dark + noise)) / total)
}

/// Key metrics for one operating point or Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberReport {
    /// counts/s
    pub raw_key_rate: f64,
    pub qber: f64,
    pub counts_total: Option<u64>,
    pub counts_error: Option<u64>,
    /// bits/s
    pub secure_key_rate: f64,
}

impl QberReport {
    pub fn new(raw_key_rate: f64, qber: f64, model: DistillationModel) -> Result<Self, Error> {
        Ok(QberReport {
            raw_key_rate,
            qber,
            counts_total: None,
            counts_error: None,
            secure_key_rate: secure_key_rate(raw_key_rate, qber.min(0.5), model)?,
        })
    }

    pub fn with_counts(mut self, total: u64, errors: u64) -> Self {
        self.counts_total = Some(total);
        self.counts_error = Some(errors);
        self
    }

    pub fn aes_capacity(&self) -> f64 {
        aes256_secured_capacity(self.secure_key_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_algebra() {
        for s in PolState::ALL {
            assert_eq!(PolState::new(s.basis(), s.bit()), s);
            assert_eq!(PolState::ALL[s.index()], s);
        }
        assert_eq!(PolState::R.bit(), 0);
        assert_eq!(PolState::A.bit(), 1);
        assert_eq!(PolState::D.basis(), Basis::Diagonal);
    }

    #[test]
    fn entropy_points() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.11).unwrap() - 0.499_915_958_164_528_1).abs() < 1e-12);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn distillation_examples() {
        let f = secure_fraction(0.088, DistillationModel::IdealAsymptotic).unwrap();
        assert!((f - 0.1405).abs() < 1e-4, "{f}");
        assert!(secure_fraction(0.11, DistillationModel::IdealAsymptotic).unwrap() < 1e-3);
        assert_eq!(secure_fraction(0.0, DistillationModel::IdealAsymptotic).unwrap(), 1.0);
        assert_eq!(secure_fraction(0.0, DistillationModel::EcEfficiency(1.16)).unwrap(), 1.0);
        assert_eq!(secure_fraction(0.0, DistillationModel::FixedFraction(0.3)).unwrap(), 0.3);
        assert_eq!(secure_fraction(0.11, DistillationModel::FixedFraction(0.3)).unwrap(), 0.0);
        assert!(secure_fraction(0.6, DistillationModel::IdealAsymptotic).is_err());
        assert!(DistillationModel::EcEfficiency(0.9).validate().is_err());
    }

    #[test]
    fn key_rates() {
        let ideal = secure_key_rate(1330.0, 0.088, DistillationModel::IdealAsymptotic).unwrap();
        assert!((ideal - 186.9).abs() < 0.2, "{ideal}");
        let fixed = secure_key_rate(1330.0, 0.088, DistillationModel::reported_fraction()).unwrap();
        assert!((fixed - 372.0).abs() / 372.0 < 0.01, "{fixed}");
        assert_eq!(
            secure_key_rate(5000.0, 0.2, DistillationModel::IdealAsymptotic).unwrap(),
            0.0
        );
    }

    #[test]
    fn aes_capacity() {
        assert!((aes256_secured_capacity(372.5) - 745e9).abs() < 1.0);
        assert!((aes256_secured_capacity(121.5) - 243e9).abs() < 1.0);
        assert_eq!(aes256_secured_capacity(0.0), 0.0);
    }

    #[test]
    fn analytic_qber() {
        let q = qber_analytic(1088.0, 242.0, 0.0, 0.0).unwrap();
        assert!((q - 121.0 / 1330.0).abs() < 1e-12);
        assert_eq!(qber_analytic(500.0, 0.0, 0.0, 0.03).unwrap(), 0.03);
        assert!((qber_analytic(1.0, 1.0, 1e12, 0.0).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(qber_analytic(1.0, 1.0, f64::INFINITY, 0.0).unwrap(), 0.5);
        assert_eq!(qber_analytic(0.0, 0.0, 0.0, 0.0), Err(Error::UndefinedQber));
    }

    #[test]
    fn measurement_rules() {
        // matching basis, no optical error: deterministic
        for k in 0..100 {
            let u = k as f64 / 100.0;
            assert_eq!(measure(PolState::R, Basis::Circular, 0.0, u), 0);
        }
        assert_eq!(measure(PolState::L, Basis::Circular, 0.05, 0.04), 0);
        assert_eq!(measure(PolState::L, Basis::Circular, 0.05, 0.06), 1);
        assert_eq!(measure(PolState::D, Basis::Circular, 0.05, 0.49), 0);
        assert_eq!(measure(PolState::D, Basis::Circular, 0.05, 0.51), 1);
        assert_eq!(projection_probability(PolState::L, PolState::L, 0.05), 0.95);
        assert_eq!(projection_probability(PolState::D, PolState::R, 0.05), 0.5);
    }
}
