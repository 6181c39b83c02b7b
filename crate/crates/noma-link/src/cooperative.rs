//! Two-phase cooperative NOMA: direct broadcast plus decode-and-forward
//! relaying from the strong user, with maximal-ratio combining at the weak
//! user.
//!
//! Both phases take half the block, so per-phase rate targets are doubled
//! and the cooperative and non-cooperative modes are compared at equal
//! delivered BPCU. Relaying happens only when the strong user's SIC stage
//! decoded the weak user's message, and then at full transmit power over
//! the inter-user channel.

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{
    draw_scalar_channel, ChannelRealization, PathLossModel, Position, StreamFactory,
    LINK_BS_TO_STRONG, LINK_BS_TO_WEAK, LINK_STRONG_TO_WEAK,
};
use crate::rates::{noma_outage_flags, LinkBudget, PowerAllocation, TargetRates};
use crate::stats::linear_fit;

/// Trials per work item; fixed so accumulation order never depends on the
/// worker count.
const TRIAL_CHUNK: u64 = 8192;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoopError {
    #[error("outage map needs a non-empty grid")]
    EmptyGrid,
    #[error("at least one trial is required")]
    ZeroTrials,
    #[error("SNR grid must span at least 15 dB, got {span} dB")]
    SnrSpanTooNarrow { span: f64 },
    #[error(
        "outage estimate {probability} at {snr_db} dB is outside the fit-validity \
         window ({lo}, {hi})"
    )]
    OutsideFitWindow {
        snr_db: f64,
        probability: f64,
        lo: f64,
        hi: f64,
    },
    #[error("slope fit failed (degenerate grid)")]
    FitFailed,
    #[error("grid has {0} points, at most 2^20 units are addressable")]
    TooManyUnits(usize),
}

/// Channel draws for one Monte Carlo trial of the two-user pair.
#[derive(Debug, Clone, Copy)]
pub struct CooperativeTrial {
    pub bs_to_weak: ChannelRealization,
    pub bs_to_strong: ChannelRealization,
    pub strong_to_weak: ChannelRealization,
    pub rho: f64,
}

/// Outage flags for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub weak_outage: bool,
    pub strong_outage: bool,
    pub pair_outage: bool,
}

/// Monte Carlo outage probability with a 95% normal-approximation
/// confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    pub probability: f64,
    pub trials: u64,
    pub half_width: f64,
}

impl OutageEstimate {
    pub fn from_counts(outages: u64, trials: u64) -> Self {
        assert!(trials > 0, "estimate needs at least one trial");
        assert!(outages <= trials);
        let n = trials as f64;
        let p = outages as f64 / n;
        // rule of three for an estimate of exactly zero
        let half_width = if outages == 0 {
            3.0 / n
        } else {
            1.96 * (p * (1.0 - p) / n).sqrt()
        };
        Self {
            probability: p,
            trials,
            half_width,
        }
    }
}

/// Transmission mode for outage metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Cooperative,
    NonCooperative,
}

/// Which outage event an estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Pair,
    WeakUser,
}

/// One-shot NOMA transmission; the dashed cooperative phase never happens.
pub fn noncooperative_outcome(
    trial: &CooperativeTrial,
    alloc: &PowerAllocation,
    targets: &TargetRates,
) -> TrialOutcome {
    let budget = LinkBudget {
        rho: trial.rho,
        h_weak_sq: trial.bs_to_weak.gain_sq(),
        h_strong_sq: trial.bs_to_strong.gain_sq(),
    };
    let flags = noma_outage_flags(&budget, alloc, targets);
    TrialOutcome {
        weak_outage: flags.weak,
        strong_outage: flags.strong,
        pair_outage: flags.weak || flags.strong,
    }
}

/// Two equal-duration phases with per-phase targets doubled.
///
/// Phase 1: the BS broadcasts the superposition; the strong user attempts
/// SIC against `2 r_weak`. Phase 2: on SIC success the strong user
/// re-transmits the weak user's message at full power over the inter-user
/// channel and the weak user adds the relayed SNR to its direct SINR
/// (maximal-ratio combining).
pub fn cooperative_outcome(
    trial: &CooperativeTrial,
    alloc: &PowerAllocation,
    targets: &TargetRates,
) -> TrialOutcome {
    let eps_weak = (2.0 * targets.r_weak).exp2() - 1.0;
    let eps_strong = (2.0 * targets.r_strong).exp2() - 1.0;
    let rho = trial.rho;
    let (a_w, a_s) = (alloc.a_weak(), alloc.a_strong());

    let sinr_of = |h_sq: f64| {
        let x = rho * h_sq;
        if x == 0.0 {
            0.0
        } else {
            a_w * x / (1.0 + a_s * x)
        }
    };

    let sic_ok = sinr_of(trial.bs_to_strong.gain_sq()) >= eps_weak;
    let relayed = if sic_ok {
        rho * trial.strong_to_weak.gain_sq()
    } else {
        0.0
    };
    let combined = sinr_of(trial.bs_to_weak.gain_sq()) + relayed;
    let weak_outage = combined < eps_weak;
    let strong_outage = !sic_ok || rho * a_s * trial.bs_to_strong.gain_sq() < eps_strong;
    TrialOutcome {
        weak_outage,
        strong_outage,
        pair_outage: weak_outage || strong_outage,
    }
}

/// Geometry, link budget and Monte Carlo bookkeeping for the two-user
/// pair experiments.
#[derive(Debug, Clone, Copy)]
pub struct CoopScenario {
    pub bs: Position,
    pub pos_weak: Position,
    pub pos_strong: Position,
    pub pathloss: PathLossModel,
    pub rho: f64,
    pub alloc: PowerAllocation,
    pub targets: TargetRates,
    pub trials: u64,
    pub seed: u64,
}

/// Outage counts for both modes over the same seeded trials of one unit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairedOutageCounts {
    pub trials: u64,
    pub weak_coop: u64,
    pub weak_noncoop: u64,
    pub strong_coop: u64,
    pub strong_noncoop: u64,
    pub pair_coop: u64,
    pub pair_noncoop: u64,
}

impl PairedOutageCounts {
    fn merge(mut self, other: Self) -> Self {
        self.trials += other.trials;
        self.weak_coop += other.weak_coop;
        self.weak_noncoop += other.weak_noncoop;
        self.strong_coop += other.strong_coop;
        self.strong_noncoop += other.strong_noncoop;
        self.pair_coop += other.pair_coop;
        self.pair_noncoop += other.pair_noncoop;
        self
    }

    pub fn estimate(&self, mode: Mode, metric: Metric) -> OutageEstimate {
        let count = match (mode, metric) {
            (Mode::Cooperative, Metric::Pair) => self.pair_coop,
            (Mode::Cooperative, Metric::WeakUser) => self.weak_coop,
            (Mode::NonCooperative, Metric::Pair) => self.pair_noncoop,
            (Mode::NonCooperative, Metric::WeakUser) => self.weak_noncoop,
        };
        OutageEstimate::from_counts(count, self.trials)
    }
}

/// Draw the three links of one trial from their `(unit, trial, link)`
/// substreams.
pub fn draw_trial(scn: &CoopScenario, unit: u32, trial: u64) -> CooperativeTrial {
    let factory = StreamFactory::new(scn.seed);
    let mut rng_w = factory.stream(unit, trial, LINK_BS_TO_WEAK);
    let mut rng_s = factory.stream(unit, trial, LINK_BS_TO_STRONG);
    let mut rng_r = factory.stream(unit, trial, LINK_STRONG_TO_WEAK);
    CooperativeTrial {
        bs_to_weak: draw_scalar_channel(&mut rng_w, &scn.pathloss, scn.pos_weak, scn.bs),
        bs_to_strong: draw_scalar_channel(&mut rng_s, &scn.pathloss, scn.pos_strong, scn.bs),
        strong_to_weak: draw_scalar_channel(&mut rng_r, &scn.pathloss, scn.pos_weak, scn.pos_strong),
        rho: scn.rho,
    }
}

/// Evaluate both modes on the same seeded trials of one unit, sharded
/// across the rayon pool in fixed chunks.
pub fn paired_outage_counts(scn: &CoopScenario, unit: u32) -> Result<PairedOutageCounts, CoopError> {
    if scn.trials == 0 {
        return Err(CoopError::ZeroTrials);
    }
    let chunks = scn.trials.div_ceil(TRIAL_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * TRIAL_CHUNK;
            let hi = (lo + TRIAL_CHUNK).min(scn.trials);
            let mut acc = PairedOutageCounts::default();
            for trial in lo..hi {
                let t = draw_trial(scn, unit, trial);
                let coop = cooperative_outcome(&t, &scn.alloc, &scn.targets);
                let noncoop = noncooperative_outcome(&t, &scn.alloc, &scn.targets);
                acc.trials += 1;
                acc.weak_coop += coop.weak_outage as u64;
                acc.strong_coop += coop.strong_outage as u64;
                acc.pair_coop += coop.pair_outage as u64;
                acc.weak_noncoop += noncoop.weak_outage as u64;
                acc.strong_noncoop += noncoop.strong_outage as u64;
                acc.pair_noncoop += noncoop.pair_outage as u64;
            }
            acc
        })
        .reduce(PairedOutageCounts::default, PairedOutageCounts::merge);
    Ok(counts)
}

/// One outage estimate per strong-user grid position, each from an
/// independent seeded substream (unit = grid index).
pub fn outage_map(
    scn: &CoopScenario,
    grid: &[Position],
    mode: Mode,
    metric: Metric,
) -> Result<Vec<(Position, OutageEstimate)>, CoopError> {
    if grid.is_empty() {
        return Err(CoopError::EmptyGrid);
    }
    if grid.len() >= 1 << 20 {
        return Err(CoopError::TooManyUnits(grid.len()));
    }
    grid.iter()
        .enumerate()
        .map(|(unit, &pos)| {
            let point = CoopScenario {
                pos_strong: pos,
                ..*scn
            };
            let counts = paired_outage_counts(&point, unit as u32)?;
            Ok((pos, counts.estimate(mode, metric)))
        })
        .collect()
}

/// Per-point paired counts over an SNR sweep (unit = sweep index);
/// `scn.rho` is ignored in favour of the grid values.
pub fn paired_outage_sweep(
    scn: &CoopScenario,
    snr_grid_db: &[f64],
) -> Result<Vec<PairedOutageCounts>, CoopError> {
    if snr_grid_db.len() >= 1 << 20 {
        return Err(CoopError::TooManyUnits(snr_grid_db.len()));
    }
    snr_grid_db
        .iter()
        .enumerate()
        .map(|(unit, &db)| {
            let point = CoopScenario {
                rho: 10f64.powf(db / 10.0),
                ..*scn
            };
            paired_outage_counts(&point, unit as u32)
        })
        .collect()
}

/// Validity window for the diversity fit: every per-point estimate must
/// have at least `min_count` outage events and probability at most
/// `max_p`, otherwise the asymptotic slope is not identifiable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub min_count: u64,
    pub max_p: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self {
            min_count: 10,
            max_p: 0.1,
        }
    }
}

/// Least-squares slope of `log10(outage)` against `log10(rho)`, negated
/// so a diversity order is reported positive.
pub fn fit_diversity_order(
    points: &[(f64, OutageEstimate)],
    window: FitWindow,
) -> Result<f64, CoopError> {
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(rho, est) in points {
        let lo = window.min_count as f64 / est.trials as f64;
        if est.probability <= lo || est.probability > window.max_p {
            return Err(CoopError::OutsideFitWindow {
                snr_db: 10.0 * rho.log10(),
                probability: est.probability,
                lo,
                hi: window.max_p,
            });
        }
        xs.push(rho.log10());
        ys.push(est.probability.log10());
    }
    let fit = linear_fit(&xs, &ys).ok_or(CoopError::FitFailed)?;
    Ok(-fit.slope)
}

/// Fitted weak-user diversity order over an SNR grid spanning at least
/// 15 dB.
pub fn diversity_slope(
    scn: &CoopScenario,
    snr_grid_db: &[f64],
    mode: Mode,
    window: FitWindow,
) -> Result<f64, CoopError> {
    let (min_db, max_db) = snr_grid_db
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = max_db - min_db;
    if span.is_nan() || span < 15.0 {
        return Err(CoopError::SnrSpanTooNarrow { span });
    }
    let counts = paired_outage_sweep(scn, snr_grid_db)?;
    let points: Vec<(f64, OutageEstimate)> = snr_grid_db
        .iter()
        .zip(&counts)
        .map(|(&db, c)| (10f64.powf(db / 10.0), c.estimate(mode, Metric::WeakUser)))
        .collect();
    fit_diversity_order(&points, window)
}
