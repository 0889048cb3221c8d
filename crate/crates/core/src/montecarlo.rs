//! Event-level simulation of the quantum receiver, producing time-tag streams
//! with ground-truth labels.
//!
//! Symbols are split into fixed-size batches. Each batch draws from its own
//! ChaCha stream keyed by `(seed, batch index)` and owns the noise processes
//! for its slice of the time axis, so batches can be generated in any order
//! (or in parallel) and [`assemble`] always produces the same stream.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bb84::{projection_probability, Basis, PolState};
use crate::error::Error;
use crate::math::{exp_m1, floor, ln, ln_1p};
use crate::system::{LinkEvaluation, SystemModel};

/// Channel number of the quantum SPAD in tag streams.
pub const SPAD_CHANNEL: u8 = 0;

/// Default symbol period at 0.1 Gbaud.
pub const DEFAULT_SYMBOL_PERIOD_PS: u64 = 10_000;

pub const DEFAULT_FRAME_LENGTH: usize = 1024;

/// Symbols per batch unless overridden.
pub const DEFAULT_BATCH_SYMBOLS: u64 = 1 << 24;

/// Stream index reserved for run-level draws (frame offset).
const RUN_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TagRecord {
    /// Picoseconds since run start.
    pub timestamp: u64,
    pub channel: u8,
}

/// Time-ordered detection events from one run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TagStream {
    pub symbol_period_ps: u64,
    pub channel_count: u16,
    pub tags: Vec<TagRecord>,
}

impl TagStream {
    pub fn new(symbol_period_ps: u64, tags: Vec<TagRecord>) -> Self {
        TagStream {
            symbol_period_ps,
            channel_count: 1,
            tags,
        }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Signal,
    Dark,
    Raman,
    Leakage,
}

impl Origin {
    pub const ALL: [Origin; 4] = [Origin::Signal, Origin::Dark, Origin::Raman, Origin::Leakage];

    pub fn index(self) -> usize {
        match self {
            Origin::Signal => 0,
            Origin::Dark => 1,
            Origin::Raman => 2,
            Origin::Leakage => 3,
        }
    }
}

/// Detector-side rates and settings for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPhysics {
    /// Photons/symbol at the detector input.
    pub mu_arrival: f64,
    pub efficiency: f64,
    pub e_opt: f64,
    /// counts/s
    pub dark_rate: f64,
    /// Raman click rate, counts/s.
    pub raman_rate: f64,
    /// Leakage click rate, counts/s.
    pub leakage_rate: f64,
    /// Seconds.
    pub dead_time: f64,
    pub window_fraction: f64,
    pub signal_acceptance: f64,
}

impl RunPhysics {
    /// Rates matching an analytic evaluation of `model`.
    pub fn from_evaluation(model: &SystemModel, eval: &LinkEvaluation) -> Self {
        let eta = model.spad.efficiency;
        RunPhysics {
            mu_arrival: eval.mu_arrival,
            efficiency: eta,
            e_opt: model.e_opt,
            dark_rate: model.spad.dark_rate,
            raman_rate: eval.raman_clicks(eta),
            leakage_rate: eval.leakage_clicks(eta),
            dead_time: model.spad.dead_time,
            window_fraction: model.window.window_fraction,
            signal_acceptance: model.window.signal_acceptance,
        }
    }

    fn noise_rate(&self, origin: Origin) -> f64 {
        match origin {
            Origin::Signal => 0.0,
            Origin::Dark => self.dark_rate,
            Origin::Raman => self.raman_rate,
            Origin::Leakage => self.leakage_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub n_symbols: u64,
    pub symbol_period_ps: u64,
    /// Repeating transmitted frame.
    pub frame: Vec<PolState>,
    /// Position in the frame of symbol 0. Drawn from the seed when `None`.
    pub frame_offset: Option<usize>,
    /// Basis and bit of the single monitored detector.
    pub receiver: PolState,
    /// Start of symbol 0, ps.
    pub clock_phase_offset_ps: u64,
    pub physics: RunPhysics,
    pub batch_symbols: u64,
}

impl RunConfig {
    pub fn receiver_basis(&self) -> Basis {
        self.receiver.basis()
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.n_symbols == 0 {
            return Err(Error::InvalidRunConfig("n_symbols must be at least 1"));
        }
        if self.symbol_period_ps == 0 {
            return Err(Error::InvalidRunConfig("symbol period must be positive"));
        }
        if self.clock_phase_offset_ps >= self.symbol_period_ps {
            return Err(Error::InvalidRunConfig(
                "clock phase offset must be smaller than the symbol period",
            ));
        }
        if self.frame.is_empty() {
            return Err(Error::InvalidRunConfig("frame is empty"));
        }
        if matches!(self.frame_offset, Some(o) if o >= self.frame.len()) {
            return Err(Error::InvalidRunConfig("frame offset exceeds frame length"));
        }
        if self.batch_symbols == 0 {
            return Err(Error::InvalidRunConfig("batch size must be positive"));
        }
        let p = &self.physics;
        if !(p.window_fraction > 0.0 && p.window_fraction <= 1.0) {
            return Err(Error::InvalidRunConfig("window fraction must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&p.signal_acceptance) || !(0.0..=1.0).contains(&p.efficiency) {
            return Err(Error::InvalidRunConfig(
                "efficiency and signal acceptance must be in [0, 1]",
            ));
        }
        if !(0.0..=0.5).contains(&p.e_opt) {
            return Err(Error::InvalidRunConfig("optical error must be in [0, 0.5]"));
        }
        for v in [p.mu_arrival, p.dark_rate, p.raman_rate, p.leakage_rate, p.dead_time] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidRunConfig(
                    "rates, arrival mu and dead time must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }

    pub fn n_batches(&self) -> u64 {
        self.n_symbols.div_ceil(self.batch_symbols)
    }

    /// Simulated time span, seconds.
    pub fn duration_s(&self) -> f64 {
        (self.n_symbols as f64) * (self.symbol_period_ps as f64) * 1e-12
    }

    /// Frame position of symbol 0 for this run.
    pub fn resolved_frame_offset(&self) -> usize {
        match self.frame_offset {
            Some(o) => o,
            None => {
                let mut rng = stream_rng(self.seed, RUN_STREAM);
                rng.random_range(0..self.frame.len())
            }
        }
    }

    /// Transmitted state of symbol `k`.
    pub fn state_of(&self, k: u64, frame_offset: usize) -> PolState {
        let f = self.frame.len() as u64;
        self.frame[((k % f + frame_offset as u64) % f) as usize]
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A frame of `len` states with every state represented equally often (up to
/// the remainder when `len` is not a multiple of 4), shuffled by `seed`.
pub fn balanced_frame(len: usize, seed: u64) -> Vec<PolState> {
    use rand::seq::SliceRandom;
    let mut frame: Vec<PolState> = (0..len).map(|i| PolState::ALL[i % 4]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    frame.shuffle(&mut rng);
    frame
}

/// One generated detection before dead time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub timestamp: u64,
    pub origin: Origin,
}

/// Uniform draw in (0, 1].
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Generates the events of batch `batch` in time order. The run's resolved
/// frame offset is passed in to avoid re-deriving it per batch.
pub fn simulate_batch(cfg: &RunConfig, batch: u64, frame_offset: usize) -> Vec<Event> {
    let mut rng = stream_rng(cfg.seed, batch);
    let period = cfg.symbol_period_ps;
    let k0 = batch * cfg.batch_symbols;
    let k1 = (k0 + cfg.batch_symbols).min(cfg.n_symbols);
    let p = &cfg.physics;
    let mut events = Vec::new();

    // Signal: each symbol clicks when its Poisson photon count is ≥ 1. The
    // per-symbol probability is tiny, so candidates are drawn by geometric
    // skipping at the largest per-state probability and thinned to the
    // state's own probability, which leaves the per-symbol law unchanged.
    let m = p.mu_arrival * p.efficiency;
    let click_prob = |s: PolState| -exp_m1(-m * projection_probability(s, cfg.receiver, p.e_opt));
    let p_max = PolState::ALL.iter().map(|&s| click_prob(s)).fold(0.0, f64::max);
    let window_lo = 0.5 * (1.0 - p.window_fraction) * period as f64;
    let window_len = p.window_fraction * period as f64;
    if p_max > 0.0 {
        let log_miss = ln_1p(-p_max);
        let mut k = k0;
        loop {
            let gap = if p_max >= 1.0 {
                0.0
            } else {
                floor(ln(open_unit(&mut rng)) / log_miss)
            };
            if gap >= (k1 - k) as f64 {
                break;
            }
            k += gap as u64;
            let state = cfg.state_of(k, frame_offset);
            let accept = rng.random::<f64>() * p_max < click_prob(state);
            if accept {
                let u = rng.random::<f64>();
                let offset = if rng.random::<f64>() < p.signal_acceptance {
                    window_lo + u * window_len
                } else {
                    // transition region outside the accepted window
                    let x = u * (period as f64 - window_len);
                    if x < window_lo {
                        x
                    } else {
                        x + window_len
                    }
                };
                let start = cfg.clock_phase_offset_ps + k * period;
                let offset = (floor(offset) as u64).min(period - 1);
                events.push(Event {
                    timestamp: start + offset,
                    origin: Origin::Signal,
                });
            }
            k += 1;
            if k >= k1 {
                break;
            }
        }
    }

    // Noise: homogeneous Poisson processes over this batch's time slice. The
    // last batch also covers the trailing clock-phase offset.
    let t_start = (k0 * period) as f64;
    let mut t_end = (k1 * period) as f64;
    if k1 == cfg.n_symbols {
        t_end += cfg.clock_phase_offset_ps as f64;
    }
    for origin in [Origin::Dark, Origin::Raman, Origin::Leakage] {
        let rate_per_ps = p.noise_rate(origin) * 1e-12;
        if rate_per_ps <= 0.0 {
            continue;
        }
        let mut t = t_start;
        loop {
            t += -ln(open_unit(&mut rng)) / rate_per_ps;
            if t >= t_end {
                break;
            }
            events.push(Event {
                timestamp: floor(t) as u64,
                origin,
            });
        }
    }

    events.sort_by_key(|e| e.timestamp);
    events
}

/// A generated event and whether it survived dead time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruthEvent {
    pub timestamp: u64,
    pub origin: Origin,
    pub kept: bool,
}

/// Ground truth for validating the tag-processing chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTruth {
    pub frame: Vec<PolState>,
    pub frame_offset: usize,
    pub clock_phase_ps: u64,
    /// Every generated event in time order, before dead time.
    pub events: Vec<TruthEvent>,
}

impl RunTruth {
    /// (generated, kept) counts per origin, indexed by [`Origin::index`].
    pub fn counts(&self) -> [(u64, u64); 4] {
        let mut c = [(0u64, 0u64); 4];
        for e in &self.events {
            let slot = &mut c[e.origin.index()];
            slot.0 += 1;
            slot.1 += e.kept as u64;
        }
        c
    }
}

/// Non-paralyzable dead time over a time-sorted list. Returns keep flags.
/// Coincident events (same picosecond) are always merged into one.
pub fn apply_dead_time(timestamps: &[u64], dead_time_ps: u64) -> Vec<bool> {
    let mut keep = Vec::with_capacity(timestamps.len());
    let mut last: Option<u64> = None;
    for &t in timestamps {
        let ok = match last {
            None => true,
            Some(l) => t > l && t - l >= dead_time_ps,
        };
        if ok {
            last = Some(t);
        }
        keep.push(ok);
    }
    keep
}

/// Merges per-batch events (in batch order) into the final tag stream.
pub fn assemble(cfg: &RunConfig, frame_offset: usize, batches: Vec<Vec<Event>>) -> (TagStream, RunTruth) {
    let mut events: Vec<Event> = batches.into_iter().flatten().collect();
    // Signal tags of the last symbols in a batch can sit past the next
    // batch's first noise events, so a global sort is still needed.
    events.sort_by_key(|e| e.timestamp);
    let times: Vec<u64> = events.iter().map(|e| e.timestamp).collect();
    let dead_ps = floor(cfg.physics.dead_time * 1e12 + 0.5) as u64;
    let keep = apply_dead_time(&times, dead_ps);
    let tags = events
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(e, _)| TagRecord {
            timestamp: e.timestamp,
            channel: SPAD_CHANNEL,
        })
        .collect();
    let truth = RunTruth {
        frame: cfg.frame.clone(),
        frame_offset,
        clock_phase_ps: cfg.clock_phase_offset_ps,
        events: events
            .iter()
            .zip(keep)
            .map(|(e, kept)| TruthEvent {
                timestamp: e.timestamp,
                origin: e.origin,
                kept,
            })
            .collect(),
    };
    (TagStream::new(cfg.symbol_period_ps, tags), truth)
}

/// Runs every batch sequentially. Output is identical to any parallel
/// schedule that feeds [`assemble`] the batches in index order.
pub fn simulate_quantum_run(cfg: &RunConfig) -> Result<(TagStream, RunTruth), Error> {
    cfg.validate()?;
    let offset = cfg.resolved_frame_offset();
    let batches = (0..cfg.n_batches())
        .map(|b| simulate_batch(cfg, b, offset))
        .collect();
    Ok(assemble(cfg, offset, batches))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn noise_only(dark: f64, dead_time: f64) -> RunPhysics {
        RunPhysics {
            mu_arrival: 0.0,
            efficiency: 0.1,
            e_opt: 0.0,
            dark_rate: dark,
            raman_rate: 0.0,
            leakage_rate: 0.0,
            dead_time,
            window_fraction: 0.5,
            signal_acceptance: 1.0,
        }
    }

    fn config(n: u64, physics: RunPhysics) -> RunConfig {
        RunConfig {
            seed: 7,
            n_symbols: n,
            symbol_period_ps: DEFAULT_SYMBOL_PERIOD_PS,
            frame: balanced_frame(DEFAULT_FRAME_LENGTH, 1),
            frame_offset: None,
            receiver: PolState::R,
            clock_phase_offset_ps: 0,
            physics,
            batch_symbols: DEFAULT_BATCH_SYMBOLS,
        }
    }

    #[test]
    fn balanced_frame_counts() {
        let f = balanced_frame(1024, 3);
        for s in PolState::ALL {
            assert_eq!(f.iter().filter(|&&x| x == s).count(), 256);
        }
        assert_eq!(f, balanced_frame(1024, 3));
        assert_ne!(f, balanced_frame(1024, 4));
    }

    #[test]
    fn dead_time_suppresses_close_followers() {
        // 25 µs dead time, second event 10 µs after the first
        let keep = apply_dead_time(&[1_000, 10_001_000, 40_000_000], 25_000_000);
        assert_eq!(keep, vec![true, false, true]);
        // non-paralyzable: the suppressed event does not extend the dead time
        let keep = apply_dead_time(&[0, 20_000_000, 25_000_000], 25_000_000);
        assert_eq!(keep, vec![true, false, true]);
        let keep = apply_dead_time(&[5, 5, 6], 0);
        assert_eq!(keep, vec![true, false, true]);
    }

    #[test]
    fn dark_only_ten_seconds() {
        // Poisson(4850): [4500, 5200] is about ±5σ
        let cfg = config(1_000_000_000, noise_only(485.0, 25e-6));
        let (stream, truth) = simulate_quantum_run(&cfg).unwrap();
        let generated = truth.counts()[Origin::Dark.index()].0;
        assert!((4500..=5200).contains(&generated), "{generated}");
        assert!(stream.tags.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        assert!(truth.events.iter().all(|e| e.origin == Origin::Dark));
    }

    #[test]
    fn deterministic_and_batch_invariant_in_signal() {
        let mut p = noise_only(485.0, 25e-6);
        p.mu_arrival = 2.3e-4;
        let mut cfg = config(20_000_000, p);
        let (a, ta) = simulate_quantum_run(&cfg).unwrap();
        let (b, tb) = simulate_quantum_run(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        cfg.seed += 1;
        let (c, _) = simulate_quantum_run(&cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = config(10, noise_only(1.0, 0.0));
        cfg.clock_phase_offset_ps = cfg.symbol_period_ps;
        assert!(simulate_quantum_run(&cfg).is_err());
        let mut cfg = config(0, noise_only(1.0, 0.0));
        assert!(cfg.validate().is_err());
        cfg.n_symbols = 5;
        cfg.frame_offset = Some(5000);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn signal_tags_sit_inside_the_window() {
        let mut p = noise_only(0.0, 0.0);
        p.mu_arrival = 1e-2;
        let mut cfg = config(200_000, p);
        cfg.clock_phase_offset_ps = 1234;
        let (stream, _) = simulate_quantum_run(&cfg).unwrap();
        assert!(!stream.is_empty());
        for t in &stream.tags {
            let r = (t.timestamp - 1234) % 10_000;
            assert!((2500..7500).contains(&r), "{r}");
        }
    }
}
