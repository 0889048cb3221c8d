//! Offline processing of detector time tags, from clock-phase recovery
//! through temporal filtering and frame alignment to raw-rate and QBER
//! estimation.
//!
//! Clock phase is the start time of symbol 0 modulo the symbol period. The
//! accepted window is centered in each symbol and is closed at its lower
//! edge, open at its upper edge.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::bb84::PolState;
use crate::error::Error;
use crate::math::{atan2, sin_cos};
use crate::montecarlo::{TagRecord, TagStream};

/// Fewest tags [`recover_clock_phase`] will work with.
pub const MIN_PHASE_TAGS: usize = 100;

pub const DEFAULT_PHASE_BINS: usize = 64;

pub const DEFAULT_SYNC_FLOOR: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEstimate {
    /// Start of symbol 0 modulo the period, ps.
    pub phase_ps: u64,
    /// Center of the dominant histogram lobe, ps in [0, period).
    pub lobe_center_ps: f64,
    /// Excess of the lobe over a flat histogram: 0 for uniform tags, 1 when
    /// every tag falls inside the lobe.
    pub contrast: f64,
}

/// Finds the signal lobe in the timestamps folded modulo `period_ps`.
///
/// The lobe is the circular run of `lobe_fraction · n_bins` bins with the
/// largest count; its center is the circular mean of the tags inside it.
pub fn recover_clock_phase(
    tags: &[TagRecord],
    period_ps: u64,
    n_bins: usize,
    lobe_fraction: f64,
) -> Result<PhaseEstimate, Error> {
    if tags.len() < MIN_PHASE_TAGS {
        return Err(Error::InsufficientStatistics {
            tags: tags.len(),
            required: MIN_PHASE_TAGS,
        });
    }
    if n_bins == 0 || period_ps == 0 {
        return Err(Error::InvalidParameter {
            name: "phase histogram bins/period",
            value: 0.0,
        });
    }
    let p = period_ps as u128;
    let bin_of = |t: u64| ((t as u128 % p) * n_bins as u128 / p) as usize;
    let mut hist = vec![0u64; n_bins];
    for t in tags {
        hist[bin_of(t.timestamp)] += 1;
    }

    let width = (libm::round(lobe_fraction * n_bins as f64) as usize).clamp(1, n_bins);
    let mut sum: u64 = hist[..width].iter().sum();
    let (mut best_start, mut best_sum) = (0, sum);
    for s in 1..n_bins {
        sum = sum + hist[(s + width - 1) % n_bins] - hist[s - 1];
        if sum > best_sum {
            best_sum = sum;
            best_start = s;
        }
    }

    let in_lobe = |b: usize| (b + n_bins - best_start) % n_bins < width;
    let (mut sx, mut sy) = (0.0, 0.0);
    for t in tags {
        let r = t.timestamp % period_ps;
        if in_lobe(bin_of(t.timestamp)) {
            let (s, c) = sin_cos(TAU * r as f64 / period_ps as f64);
            sx += c;
            sy += s;
        }
    }
    let mut center = atan2(sy, sx) / TAU * period_ps as f64;
    if center < 0.0 {
        center += period_ps as f64;
    }
    let half = period_ps as f64 / 2.0;
    let mut phase = center - half;
    if phase < 0.0 {
        phase += period_ps as f64;
    }
    let phase_ps = (libm::round(phase) as u64) % period_ps;

    let flat = width as f64 / n_bins as f64;
    let contrast = if width < n_bins {
        (best_sum as f64 / tags.len() as f64 - flat) / (1.0 - flat)
    } else {
        0.0
    };
    Ok(PhaseEstimate {
        phase_ps,
        lobe_center_ps: center,
        contrast,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcceptedTag {
    pub tag: TagRecord,
    /// floor((t − phase) / period); negative before the first symbol start.
    pub symbol: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FilteredTags {
    pub accepted: Vec<AcceptedTag>,
    pub rejected: usize,
}

impl FilteredTags {
    pub fn tags(&self) -> Vec<TagRecord> {
        self.accepted.iter().map(|a| a.tag).collect()
    }
}

/// Keeps tags whose position inside their symbol lies in the centered window
/// of width `window_fraction · period`.
pub fn temporal_filter(
    tags: &[TagRecord],
    phase_ps: u64,
    window_fraction: f64,
    period_ps: u64,
) -> FilteredTags {
    let p = period_ps as i128;
    let lo = 0.5 * (1.0 - window_fraction) * period_ps as f64;
    let hi = 0.5 * (1.0 + window_fraction) * period_ps as f64;
    let mut out = FilteredTags::default();
    for &tag in tags {
        let d = tag.timestamp as i128 - phase_ps as i128;
        let r = d.rem_euclid(p) as f64;
        if lo <= r && r < hi {
            out.accepted.push(AcceptedTag {
                tag,
                symbol: d.div_euclid(p) as i64,
            });
        } else {
            out.rejected += 1;
        }
    }
    out
}

/// A detection attributed to one symbol, with the outcome the detector
/// stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Click {
    pub symbol: i64,
    pub outcome: PolState,
}

/// One click per symbol and channel, first tag wins. `outcome_of` maps a tag
/// channel to the detector outcome; channels mapping to `None` are dropped.
pub fn clicks_from<F: Fn(u8) -> Option<PolState>>(accepted: &[AcceptedTag], outcome_of: F) -> Vec<Click> {
    let mut clicks = Vec::with_capacity(accepted.len());
    let mut last: Vec<(u8, i64)> = Vec::new();
    for a in accepted {
        let Some(outcome) = outcome_of(a.tag.channel) else {
            continue;
        };
        match last.iter_mut().find(|(c, _)| *c == a.tag.channel) {
            Some((_, s)) if *s == a.symbol => continue,
            Some((_, s)) => *s = a.symbol,
            None => last.push((a.tag.channel, a.symbol)),
        }
        clicks.push(Click {
            symbol: a.symbol,
            outcome,
        });
    }
    clicks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    pub clock_phase_ps: u64,
    /// Frame position of symbol index 0.
    pub frame_offset: usize,
    /// Fraction of sifted clicks that agree with the reference at the chosen
    /// offset.
    pub correlation_score: f64,
}

fn frame_pos(symbol: i64, len: usize) -> usize {
    symbol.rem_euclid(len as i64) as usize
}

/// Agreement of the clicks with `reference` at every cyclic shift.
/// Entry `s` is `None` when no click is sifted at shift `s`.
pub fn alignment_scores(clicks: &[Click], reference: &[PolState]) -> Vec<Option<f64>> {
    let f = reference.len();
    let mut counts = vec![[0u64; 4]; f];
    for c in clicks {
        counts[frame_pos(c.symbol, f)][c.outcome.index()] += 1;
    }
    (0..f)
        .map(|s| {
            let (mut agree, mut sifted) = (0u64, 0u64);
            for (pos, row) in counts.iter().enumerate() {
                let r = reference[(pos + s) % f];
                for o in PolState::ALL {
                    let n = row[o.index()];
                    if n > 0 && o.basis() == r.basis() {
                        sifted += n;
                        if o == r {
                            agree += n;
                        }
                    }
                }
            }
            (sifted > 0).then(|| agree as f64 / sifted as f64)
        })
        .collect()
}

/// Cyclic shift of `reference` that best explains the clicks. Ties go to the
/// smallest shift.
pub fn frame_align(
    clicks: &[Click],
    reference: &[PolState],
    clock_phase_ps: u64,
    floor_score: f64,
) -> Result<SyncResult, Error> {
    let f = reference.len();
    if f == 0 {
        return Err(Error::InvalidParameter {
            name: "reference frame length",
            value: 0.0,
        });
    }
    let span = match (clicks.first(), clicks.last()) {
        (Some(a), Some(b)) => {
            let (lo, hi) = clicks
                .iter()
                .fold((a.symbol, b.symbol), |(lo, hi), c| (lo.min(c.symbol), hi.max(c.symbol)));
            (hi - lo + 1) as u64
        }
        _ => 0,
    };
    if span < f as u64 {
        return Err(Error::ShortObservation {
            symbols: span,
            frame_length: f,
        });
    }
    let scores = alignment_scores(clicks, reference);
    let (mut best, mut best_score) = (0usize, f64::NEG_INFINITY);
    for (s, v) in scores.iter().enumerate() {
        let v = v.unwrap_or(0.0);
        if v > best_score {
            best = s;
            best_score = v;
        }
    }
    if best_score < floor_score {
        return Err(Error::SyncFailure {
            best_score,
            best_offset: best,
            floor: floor_score,
        });
    }
    Ok(SyncResult {
        clock_phase_ps,
        frame_offset: best,
        correlation_score: best_score,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationReport {
    pub accepted_tags: u64,
    pub rejected_tags: u64,
    /// Accepted tags dropped because their symbol already had a click.
    pub duplicate_tags: u64,
    /// Symbols with a click, all bases.
    pub clicks: u64,
    pub sifted_bits: u64,
    pub errors: u64,
    pub qber: f64,
    /// clicks / duration, counts/s
    pub raw_rate: f64,
    pub duration_s: f64,
}

/// Sifts the clicks against the aligned reference and counts errors.
pub fn estimate_qber(
    filtered: &FilteredTags,
    sync: &SyncResult,
    reference: &[PolState],
    receiver: PolState,
    duration_s: f64,
) -> Result<EstimationReport, Error> {
    let clicks = clicks_from(&filtered.accepted, |_| Some(receiver));
    let f = reference.len();
    let (mut sifted, mut errors) = (0u64, 0u64);
    for c in &clicks {
        let r = reference[(frame_pos(c.symbol, f) + sync.frame_offset) % f];
        if r.basis() == c.outcome.basis() {
            sifted += 1;
            if r.bit() != c.outcome.bit() {
                errors += 1;
            }
        }
    }
    if sifted == 0 {
        return Err(Error::UndefinedQber);
    }
    let accepted = filtered.accepted.len() as u64;
    Ok(EstimationReport {
        accepted_tags: accepted,
        rejected_tags: filtered.rejected as u64,
        duplicate_tags: accepted - clicks.len() as u64,
        clicks: clicks.len() as u64,
        sifted_bits: sifted,
        errors,
        qber: errors as f64 / sifted as f64,
        raw_rate: clicks.len() as f64 / duration_s,
        duration_s,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisParams {
    pub reference: Vec<PolState>,
    pub receiver: PolState,
    pub n_bins: usize,
    pub window_fraction: f64,
    pub sync_floor: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub phase: PhaseEstimate,
    pub sync: SyncResult,
    pub report: EstimationReport,
}

/// Runs the whole chain on a tag stream.
pub fn analyze(stream: &TagStream, params: &AnalysisParams) -> Result<Analysis, Error> {
    let phase = recover_clock_phase(
        &stream.tags,
        stream.symbol_period_ps,
        params.n_bins,
        params.window_fraction,
    )?;
    let (sync, report) = analyze_with_phase(stream, params, phase.phase_ps)?;
    Ok(Analysis {
        phase,
        sync,
        report,
    })
}

/// As [`analyze`] with a known clock phase.
pub fn analyze_with_phase(
    stream: &TagStream,
    params: &AnalysisParams,
    phase_ps: u64,
) -> Result<(SyncResult, EstimationReport), Error> {
    let filtered = temporal_filter(
        &stream.tags,
        phase_ps,
        params.window_fraction,
        stream.symbol_period_ps,
    );
    let clicks = clicks_from(&filtered.accepted, |_| Some(params.receiver));
    let sync = frame_align(&clicks, &params.reference, phase_ps, params.sync_floor)?;
    let report = estimate_qber(
        &filtered,
        &sync,
        &params.reference,
        params.receiver,
        params.duration_s,
    )?;
    Ok((sync, report))
}
