//! Two-user downlink rate calculus.
//!
//! Conventions: `rho` is the transmit SNR (linear) and power allocation
//! coefficients are power fractions with `a_weak + a_strong = 1`. The weak
//! user decodes its own message treating the strong user's as noise; the
//! strong user first decodes the weak user's message (the SIC stage), then
//! its own. Rates are in bits per channel use (BPCU).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `a_weak + a_strong = 1`.
pub const ALLOCATION_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatesError {
    #[error("power fractions must be non-negative, got ({a_weak}, {a_strong})")]
    NegativeFraction { a_weak: f64, a_strong: f64 },
    #[error("power fractions must sum to 1 within {ALLOCATION_SUM_TOL:e}, got {sum}")]
    FractionSum { sum: f64 },
    #[error("strict NOMA policy requires a_weak >= a_strong, got ({a_weak}, {a_strong})")]
    NotStrict { a_weak: f64, a_strong: f64 },
    #[error("link budget fields must be finite and non-negative")]
    InvalidBudget,
    #[error("target rates must be finite and non-negative")]
    InvalidTargets,
    #[error("high-SNR approximation needs rho*|h|^2 > 1 on both links")]
    HighSnrRegime,
}

/// Where a power split came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AllocationSource {
    Fixed,
    /// Solved from the weak user's QoS target. `primary_outage` marks
    /// realizations where even the full power budget cannot meet it.
    CognitiveRadio { primary_outage: bool },
}

/// Power fractions for the (weak, strong) user pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    a_weak: f64,
    a_strong: f64,
    source: AllocationSource,
}

impl PowerAllocation {
    /// Fixed allocation; validates non-negativity and the unit sum.
    pub fn fixed(a_weak: f64, a_strong: f64) -> Result<Self, RatesError> {
        if !(a_weak >= 0.0 && a_strong >= 0.0) {
            return Err(RatesError::NegativeFraction { a_weak, a_strong });
        }
        let sum = a_weak + a_strong;
        if (sum - 1.0).abs() > ALLOCATION_SUM_TOL {
            return Err(RatesError::FractionSum { sum });
        }
        Ok(Self {
            a_weak,
            a_strong,
            source: AllocationSource::Fixed,
        })
    }

    /// Fixed allocation under the strict NOMA policy (`a_weak >= a_strong`).
    pub fn fixed_strict(a_weak: f64, a_strong: f64) -> Result<Self, RatesError> {
        if a_weak < a_strong {
            return Err(RatesError::NotStrict { a_weak, a_strong });
        }
        Self::fixed(a_weak, a_strong)
    }

    pub fn a_weak(&self) -> f64 {
        self.a_weak
    }

    pub fn a_strong(&self) -> f64 {
        self.a_strong
    }

    pub fn source(&self) -> AllocationSource {
        self.source
    }

    /// True when a CR-derived allocation could not meet the weak user's
    /// target even with the whole power budget.
    pub fn primary_outage(&self) -> bool {
        matches!(
            self.source,
            AllocationSource::CognitiveRadio { primary_outage: true }
        )
    }
}

/// Transmit SNR and the two instantaneous channel powers.
///
/// Role assignment is by name, not enforced per realization: fixed-role
/// experiments keep `h_weak_sq > h_strong_sq` realizations as they are.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub rho: f64,
    pub h_weak_sq: f64,
    pub h_strong_sq: f64,
}

impl LinkBudget {
    pub fn new(rho: f64, h_weak_sq: f64, h_strong_sq: f64) -> Result<Self, RatesError> {
        if !(rho >= 0.0 && h_weak_sq >= 0.0 && h_strong_sq >= 0.0)
            || !(rho.is_finite() && h_weak_sq.is_finite() && h_strong_sq.is_finite())
        {
            return Err(RatesError::InvalidBudget);
        }
        Ok(Self {
            rho,
            h_weak_sq,
            h_strong_sq,
        })
    }

    /// Order two channel powers into weak/strong roles.
    pub fn assign_roles(rho: f64, h1_sq: f64, h2_sq: f64) -> Result<Self, RatesError> {
        let (w, s) = if h1_sq <= h2_sq { (h1_sq, h2_sq) } else { (h2_sq, h1_sq) };
        Self::new(rho, w, s)
    }
}

/// Achievable rates for the (weak, strong) pair in BPCU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    pub rate_weak: f64,
    pub rate_strong: f64,
}

/// Target rates in BPCU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRates {
    pub r_weak: f64,
    pub r_strong: f64,
}

impl TargetRates {
    pub fn new(r_weak: f64, r_strong: f64) -> Result<Self, RatesError> {
        if !(r_weak >= 0.0 && r_strong >= 0.0) || !(r_weak.is_finite() && r_strong.is_finite()) {
            return Err(RatesError::InvalidTargets);
        }
        Ok(Self { r_weak, r_strong })
    }
}

/// Outage flags for one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutageFlags {
    pub weak: bool,
    pub strong: bool,
}

/// OMA (TDMA, equal slots) rates: `1/2 log2(1 + rho |h|^2)` per user.
pub fn oma_rates(budget: &LinkBudget) -> RatePair {
    RatePair {
        rate_weak: 0.5 * (1.0 + budget.rho * budget.h_weak_sq).log2(),
        rate_strong: 0.5 * (1.0 + budget.rho * budget.h_strong_sq).log2(),
    }
}

/// SINR of the weak user's message at a receiver with channel power `h_sq`.
#[inline]
fn weak_message_sinr(rho: f64, a_weak: f64, a_strong: f64, h_sq: f64) -> f64 {
    let x = rho * h_sq;
    if x == 0.0 {
        return 0.0;
    }
    a_weak * x / (1.0 + a_strong * x)
}

/// NOMA rates assuming the SIC stage succeeds at the strong user.
///
/// Weak: `log2(1 + rho a_w |h_w|^2 / (1 + rho a_s |h_w|^2))`.
/// Strong: `log2(1 + rho a_s |h_s|^2)` after subtracting the weak user's
/// message. SIC failure is handled by [`noma_outage_flags`], not here.
pub fn noma_rates(budget: &LinkBudget, alloc: &PowerAllocation) -> RatePair {
    let sinr_weak = weak_message_sinr(budget.rho, alloc.a_weak, alloc.a_strong, budget.h_weak_sq);
    RatePair {
        rate_weak: (1.0 + sinr_weak).log2(),
        rate_strong: (1.0 + budget.rho * alloc.a_strong * budget.h_strong_sq).log2(),
    }
}

/// Sum of the two rates.
pub fn sum_rate(pair: &RatePair) -> f64 {
    pair.rate_weak + pair.rate_strong
}

/// High-SNR sum-rate approximations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighSnrSumRates {
    /// `1/2 log2(rho |h_w|^2) + 1/2 log2(rho |h_s|^2)`
    pub oma: f64,
    /// `log2(rho |h_s|^2)`
    pub noma: f64,
}

/// High-SNR sum-rate approximations; valid only when `rho |h|^2 > 1` on
/// both links.
pub fn high_snr_sum_rates(budget: &LinkBudget) -> Result<HighSnrSumRates, RatesError> {
    let xw = budget.rho * budget.h_weak_sq;
    let xs = budget.rho * budget.h_strong_sq;
    if !(xw > 1.0 && xs > 1.0) {
        return Err(RatesError::HighSnrRegime);
    }
    Ok(HighSnrSumRates {
        oma: 0.5 * xw.log2() + 0.5 * xs.log2(),
        noma: xs.log2(),
    })
}

/// Outage events for one realization.
///
/// Weak user: its own message rate falls below `r_weak`. Strong user:
/// either the SIC stage fails (the weak user's message cannot be decoded
/// at `r_weak` from the strong user's observation) or, after SIC, its own
/// message rate falls below `r_strong`.
///
/// Comparisons are made in the linear SINR domain against `2^r - 1`,
/// which is equivalent to comparing `log2(1 + SINR)` with `r`.
pub fn noma_outage_flags(
    budget: &LinkBudget,
    alloc: &PowerAllocation,
    targets: &TargetRates,
) -> OutageFlags {
    let eps_weak = targets.r_weak.exp2() - 1.0;
    let eps_strong = targets.r_strong.exp2() - 1.0;
    let sinr_weak_own =
        weak_message_sinr(budget.rho, alloc.a_weak, alloc.a_strong, budget.h_weak_sq);
    let sinr_weak_at_strong =
        weak_message_sinr(budget.rho, alloc.a_weak, alloc.a_strong, budget.h_strong_sq);
    let snr_strong_own = budget.rho * alloc.a_strong * budget.h_strong_sq;
    OutageFlags {
        weak: sinr_weak_own < eps_weak,
        strong: sinr_weak_at_strong < eps_weak || snr_strong_own < eps_strong,
    }
}

/// Smallest `a_weak` meeting the weak (primary) user's target rate, the
/// cognitive-radio-inspired policy.
///
/// With `eps = 2^r_weak - 1` and `x = rho |h_w|^2` the closed form is
/// `a_weak = eps (x + 1) / (x (1 + eps))`, clamped to 1. When even the
/// full budget cannot meet the target the allocation carries a
/// primary-outage marker instead of an error so Monte Carlo sweeps keep
/// running through infeasible realizations.
pub fn cr_power_allocation(budget: &LinkBudget, r_weak: f64) -> PowerAllocation {
    debug_assert!(r_weak >= 0.0, "target rate must be non-negative");
    let eps = r_weak.exp2() - 1.0;
    if eps <= 0.0 {
        return PowerAllocation {
            a_weak: 0.0,
            a_strong: 1.0,
            source: AllocationSource::CognitiveRadio {
                primary_outage: false,
            },
        };
    }
    let x = budget.rho * budget.h_weak_sq;
    let a = if x > 0.0 {
        eps * (x + 1.0) / (x * (1.0 + eps))
    } else {
        f64::INFINITY
    };
    if a < 1.0 {
        PowerAllocation {
            a_weak: a,
            a_strong: 1.0 - a,
            source: AllocationSource::CognitiveRadio {
                primary_outage: false,
            },
        }
    } else {
        PowerAllocation {
            a_weak: 1.0,
            a_strong: 0.0,
            source: AllocationSource::CognitiveRadio {
                primary_outage: true,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig4_alloc() -> PowerAllocation {
        PowerAllocation::fixed_strict(0.8, 0.2).unwrap()
    }

    #[test]
    fn allocation_validation() {
        assert!(PowerAllocation::fixed(0.8, 0.2).is_ok());
        assert!(PowerAllocation::fixed(0.5, 0.6).is_err());
        assert!(PowerAllocation::fixed(-0.1, 1.1).is_err());
        assert!(PowerAllocation::fixed_strict(0.2, 0.8).is_err());
        // within tolerance of the unit sum
        assert!(PowerAllocation::fixed(0.8, 0.2 + 5e-13).is_ok());
    }

    #[test]
    fn oma_rate_examples() {
        // rho |h_w|^2 = 3 gives 1/2 log2(4) = 1 exactly
        let b = LinkBudget::new(3.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(oma_rates(&b).rate_weak, 1.0, max_relative = 1e-15);

        let zero = LinkBudget::new(0.0, 1.0, 2.0).unwrap();
        assert_eq!(oma_rates(&zero).rate_weak, 0.0);
        assert_eq!(oma_rates(&zero).rate_strong, 0.0);

        // direct numeric evaluation oracle
        let b = LinkBudget::new(1000.0, 0.008, 1.0).unwrap();
        let r = oma_rates(&b);
        assert_relative_eq!(r.rate_weak, 0.5 * 9.0f64.log2(), max_relative = 1e-14);
        assert_relative_eq!(r.rate_strong, 0.5 * 1001.0f64.log2(), max_relative = 1e-14);
        assert_relative_eq!(r.rate_weak, 1.5849625007211562, max_relative = 1e-12);
        assert_relative_eq!(r.rate_strong, 4.983613129417997, max_relative = 1e-12);
        assert_relative_eq!(sum_rate(&r), 6.568575630139153, max_relative = 1e-12);
    }

    #[test]
    fn noma_rate_examples() {
        // all power to the weak user
        let b = LinkBudget::new(10.0, 0.5, 1.0).unwrap();
        let all_weak = PowerAllocation::fixed(1.0, 0.0).unwrap();
        let r = noma_rates(&b, &all_weak);
        assert_eq!(r.rate_strong, 0.0);
        assert_relative_eq!(r.rate_weak, (1.0f64 + 5.0).log2(), max_relative = 1e-15);

        // dead weak link
        let b = LinkBudget::new(10.0, 0.0, 1.0).unwrap();
        assert_eq!(noma_rates(&b, &fig4_alloc()).rate_weak, 0.0);

        // numeric oracle at the fig4 allocation
        let b = LinkBudget::new(100.0, 0.2, 1.0).unwrap();
        let r = noma_rates(&b, &fig4_alloc());
        assert_relative_eq!(r.rate_weak, 4.2f64.log2(), max_relative = 1e-14);
        assert_relative_eq!(r.rate_strong, 21.0f64.log2(), max_relative = 1e-14);
    }

    #[test]
    fn high_snr_examples() {
        // equal gains make the two approximations coincide
        let b = LinkBudget::new(100.0, 0.3, 0.3).unwrap();
        let h = high_snr_sum_rates(&b).unwrap();
        assert_relative_eq!(h.oma, h.noma, max_relative = 1e-15);

        // gap is half the log-ratio of the channel powers
        let b = LinkBudget::new(1e6, 0.008, 1.0).unwrap();
        let h = high_snr_sum_rates(&b).unwrap();
        assert_relative_eq!(h.noma - h.oma, 0.5 * 125.0f64.log2(), max_relative = 1e-12);
        assert_relative_eq!(h.noma - h.oma, 3.482892142331043, max_relative = 1e-9);

        // exact NOMA sum approaches the approximation
        let exact = sum_rate(&noma_rates(&b, &fig4_alloc()));
        assert!((exact - h.noma).abs() < 0.1, "gap {}", exact - h.noma);

        // regime violation signalled
        let low = LinkBudget::new(1.0, 0.5, 2.0).unwrap();
        assert_eq!(high_snr_sum_rates(&low), Err(RatesError::HighSnrRegime));
    }

    #[test]
    fn outage_flag_edges() {
        let b = LinkBudget::new(100.0, 0.01, 0.1).unwrap();
        let none = TargetRates::new(0.0, 0.0).unwrap();
        let flags = noma_outage_flags(&b, &fig4_alloc(), &none);
        assert!(!flags.weak && !flags.strong);

        let dead = LinkBudget::new(0.0, 0.01, 0.1).unwrap();
        let half = TargetRates::new(0.5, 0.5).unwrap();
        let flags = noma_outage_flags(&dead, &fig4_alloc(), &half);
        assert!(flags.weak && flags.strong);
    }

    /// Closed-form Rayleigh outage for the weak user: with
    /// `eps = 2^r - 1`, outage happens iff `|h|^2 < eps / (rho (a_w - eps a_s))`,
    /// and `|h|^2` is exponential with mean `lambda`.
    fn rayleigh_weak_outage(rho: f64, a_w: f64, a_s: f64, r: f64, lambda: f64) -> f64 {
        let eps = r.exp2() - 1.0;
        let denom = a_w - eps * a_s;
        assert!(denom > 0.0, "target not achievable at any SNR");
        1.0 - (-eps / (denom * rho * lambda)).exp()
    }

    #[test]
    fn weak_outage_matches_rayleigh_closed_form() {
        use crate::channel::{
            draw_scalar_channel, PathLossModel, Position, StreamFactory, LINK_BS_TO_WEAK,
        };
        let model = PathLossModel::new(3.0, 1.0).unwrap();
        let bs = Position::new(0.0, 0.0);
        let rx = Position::new(5.0, 0.0);
        let lambda = model.loss(5.0);
        let rho = 1e3;
        let alloc = fig4_alloc();
        let targets = TargetRates::new(0.5, 0.5).unwrap();
        let factory = StreamFactory::new(0x0DDBA11);
        let n = 1_000_000u64;
        let mut outages = 0u64;
        for trial in 0..n {
            let mut rng = factory.stream(0, trial, LINK_BS_TO_WEAK);
            let h = draw_scalar_channel(&mut rng, &model, rx, bs);
            let budget = LinkBudget::new(rho, h.gain_sq(), 1.0).unwrap();
            if noma_outage_flags(&budget, &alloc, &targets).weak {
                outages += 1;
            }
        }
        let p_hat = outages as f64 / n as f64;
        let p = rayleigh_weak_outage(rho, 0.8, 0.2, 0.5, lambda);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (p_hat - p).abs() < 3.0 * se,
            "empirical {p_hat} vs closed form {p} (3 SE = {})",
            3.0 * se
        );
    }

    /// Bisection oracle: smallest a_weak in [0,1] whose achieved weak rate
    /// meets the target, independent of the closed form.
    fn cr_bisection(budget: &LinkBudget, r_weak: f64) -> Option<f64> {
        let achieved = |a: f64| {
            let x = budget.rho * budget.h_weak_sq;
            (1.0 + a * x / (1.0 + (1.0 - a) * x)).log2()
        };
        if achieved(1.0) < r_weak {
            return None;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if achieved(mid) >= r_weak {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    #[test]
    fn cr_allocation_examples() {
        let b = LinkBudget::new(100.0, 1.0, 1.0).unwrap();
        let a = cr_power_allocation(&b, 0.0);
        assert_eq!(a.a_weak(), 0.0);
        assert_eq!(a.a_strong(), 1.0);
        assert!(!a.primary_outage());

        // limit: a_weak -> eps / (1 + eps) as rho |h|^2 grows
        let eps = 0.5f64.exp2() - 1.0;
        let b = LinkBudget::new(1e12, 1.0, 1.0).unwrap();
        let a = cr_power_allocation(&b, 0.5);
        assert_relative_eq!(a.a_weak(), eps / (1.0 + eps), max_relative = 1e-9);

        // rho |h|^2 = 100: closed form against the bisection oracle
        let b = LinkBudget::new(100.0, 1.0, 1.0).unwrap();
        let a = cr_power_allocation(&b, 0.5);
        let expected = eps * 101.0 / (100.0 * (1.0 + eps));
        assert_relative_eq!(a.a_weak(), expected, max_relative = 1e-12);
        assert_relative_eq!(a.a_weak(), 0.29582215100158706, max_relative = 1e-9);
        let oracle = cr_bisection(&b, 0.5).unwrap();
        assert!((a.a_weak() - oracle).abs() < 1e-9);

        // infeasible: marker, not an error
        let b = LinkBudget::new(1.0, 0.001, 1.0).unwrap();
        let a = cr_power_allocation(&b, 2.0);
        assert_eq!(a.a_weak(), 1.0);
        assert!(a.primary_outage());
        assert!(cr_bisection(&b, 2.0).is_none());
    }

    #[test]
    fn cr_allocation_meets_target_exactly() {
        let b = LinkBudget::new(316.23, 0.008, 1.0).unwrap();
        let a = cr_power_allocation(&b, 0.5);
        assert!(!a.primary_outage());
        let achieved = noma_rates(&b, &a).rate_weak;
        assert!((achieved - 0.5).abs() < 1e-9, "achieved {achieved}");
    }

    #[test]
    fn assign_roles_orders_channel_powers() {
        let b = LinkBudget::assign_roles(10.0, 2.0, 0.5).unwrap();
        assert_eq!((b.h_weak_sq, b.h_strong_sq), (0.5, 2.0));
        let b = LinkBudget::assign_roles(10.0, 0.5, 2.0).unwrap();
        assert_eq!((b.h_weak_sq, b.h_strong_sq), (0.5, 2.0));
        assert!(LinkBudget::assign_roles(10.0, -1.0, 2.0).is_err());
    }

    #[test]
    fn full_weak_allocation_recovers_single_user_rate() {
        let b = LinkBudget::new(250.0, 0.03, 1.0).unwrap();
        let alloc = PowerAllocation::fixed(1.0, 0.0).unwrap();
        let r = noma_rates(&b, &alloc);
        assert_relative_eq!(
            r.rate_weak,
            (1.0 + b.rho * b.h_weak_sq).log2(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn noma_beats_oma_at_high_snr_when_gains_differ() {
        // gap tends to half the log-ratio; sign flips positive at finite
        // rho whenever a_strong * h_s/h_w > 1
        let alloc = fig4_alloc();
        let (hw, hs) = (0.008, 1.0);
        assert!(alloc.a_strong() * hs / hw > 1.0);
        let mut crossed = false;
        let mut last_gap = f64::NEG_INFINITY;
        for snr_db in (0..=80).step_by(5) {
            let rho = 10f64.powf(snr_db as f64 / 10.0);
            let b = LinkBudget::new(rho, hw, hs).unwrap();
            let gap = sum_rate(&noma_rates(&b, &alloc)) - sum_rate(&oma_rates(&b));
            if gap > 0.0 {
                crossed = true;
            }
            last_gap = gap;
        }
        assert!(crossed, "gap never became positive");
        assert_relative_eq!(last_gap, 0.5 * (hs / hw).log2(), max_relative = 1e-3);
    }

    #[test]
    fn weak_outage_ignores_strong_channel() {
        let alloc = fig4_alloc();
        let targets = TargetRates::new(0.5, 0.5).unwrap();
        for hs in [1e-6, 0.01, 1.0, 50.0] {
            let b = LinkBudget::new(1e3, 0.004, hs).unwrap();
            let flags = noma_outage_flags(&b, &alloc, &targets);
            let base = noma_outage_flags(
                &LinkBudget::new(1e3, 0.004, 1.0).unwrap(),
                &alloc,
                &targets,
            );
            assert_eq!(flags.weak, base.weak);
        }
    }

    proptest! {
        #[test]
        fn strong_rate_increases_weak_rate_decreases_in_a_strong(
            rho in 1.0f64..1e5,
            hw in 1e-4f64..1.0,
            hs in 1e-4f64..10.0,
            a1 in 0.01f64..0.49,
            a2 in 0.01f64..0.49,
        ) {
            prop_assume!((a1 - a2).abs() > 1e-6);
            let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
            let b = LinkBudget::new(rho, hw, hs).unwrap();
            let r_lo = noma_rates(&b, &PowerAllocation::fixed(1.0 - lo, lo).unwrap());
            let r_hi = noma_rates(&b, &PowerAllocation::fixed(1.0 - hi, hi).unwrap());
            prop_assert!(r_hi.rate_strong > r_lo.rate_strong);
            prop_assert!(r_hi.rate_weak < r_lo.rate_weak);
        }

        #[test]
        fn cr_feedback_meets_target(
            rho in 1.0f64..1e6,
            hw in 1e-5f64..10.0,
            r in 0.01f64..4.0,
        ) {
            let b = LinkBudget::new(rho, hw, 1.0).unwrap();
            let a = cr_power_allocation(&b, r);
            if !a.primary_outage() {
                let achieved = noma_rates(&b, &a).rate_weak;
                prop_assert!((achieved - r).abs() < 1e-9,
                    "achieved {} target {}", achieved, r);
            }
        }
    }
}
