//! MIMO-NOMA: zero-forcing cluster beamforming and spatial-multiplexing
//! log-det rates.
//!
//! Beamforming serves two clusters of two users each; the cluster channels
//! are aligned by construction (`h3 = c h1`, `h2 = c' h4`) and each beam is
//! nulled against the other cluster. Spatial multiplexing sends one
//! independent stream per antenna with a white input covariance.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::MimoChannel;
use crate::rates::{PowerAllocation, RatePair};

/// Relative residual below which cluster channels count as collinear and
/// zero-forcing is infeasible.
const COLLINEAR_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MimoError {
    #[error("cluster channels must share one length >= 2, got {0:?}")]
    BadClusterDims(Vec<usize>),
    #[error("cluster channels are numerically collinear; zero-forcing is infeasible")]
    CollinearClusters,
    #[error("beam length {beam} does not match channel length {channel}")]
    BeamDimMismatch { beam: usize, channel: usize },
    #[error("channel is {got} antennas, config says {expected}")]
    ChannelDimMismatch { expected: usize, got: usize },
    #[error("antenna count must be >= 1")]
    NoAntennas,
    #[error("powers must be positive and finite")]
    InvalidPower,
    #[error("weak gain scale must be in (0, 1]")]
    InvalidGainScale,
    #[error("matrix is not positive definite; log-det failed")]
    NotPositiveDefinite,
}

/// Four-user, two-cluster scenario with aligned intra-cluster channels.
///
/// Users are indexed 0..4; cluster A pairs users (0, 2) with
/// `h[2] = c * h[0]`, cluster B pairs users (1, 3) with `h[1] = c' * h[3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterScenario {
    channels: [DVector<Complex64>; 4],
    alignment: (Complex64, Complex64),
}

/// Cluster membership: `((0, 2), (1, 3))` by user index.
pub const CLUSTER_PAIRS: ((usize, usize), (usize, usize)) = ((0, 2), (1, 3));

impl ClusterScenario {
    /// Build the scenario from the two base channels; the partners are
    /// scaled copies, which makes the alignment exact by construction.
    pub fn aligned(
        h_base_a: DVector<Complex64>,
        h_base_b: DVector<Complex64>,
        c: Complex64,
        c_prime: Complex64,
    ) -> Result<Self, MimoError> {
        let m = h_base_a.len();
        if m < 2 || h_base_b.len() != m {
            return Err(MimoError::BadClusterDims(vec![m, h_base_b.len()]));
        }
        let h2 = &h_base_b * c_prime;
        let h3 = &h_base_a * c;
        Ok(Self {
            channels: [h_base_a, h2, h3, h_base_b],
            alignment: (c, c_prime),
        })
    }

    pub fn channels(&self) -> &[DVector<Complex64>; 4] {
        &self.channels
    }

    pub fn alignment(&self) -> (Complex64, Complex64) {
        self.alignment
    }

    pub fn antennas(&self) -> usize {
        self.channels[0].len()
    }
}

/// Unit-norm transmit beams, one per cluster, each orthogonal to the other
/// cluster's channels.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSet {
    beams: [DVector<Complex64>; 2],
}

impl BeamSet {
    pub fn beams(&self) -> &[DVector<Complex64>; 2] {
        &self.beams
    }
}

/// Project `target` onto the orthogonal complement of `span{off}` and
/// normalize. Projects twice to keep the residual at machine precision.
fn null_project(
    target: &DVector<Complex64>,
    off: &DVector<Complex64>,
) -> Result<DVector<Complex64>, MimoError> {
    let off_norm_sq = off.norm_squared();
    if off_norm_sq == 0.0 {
        return Err(MimoError::CollinearClusters);
    }
    let project = |v: &DVector<Complex64>| -> DVector<Complex64> {
        v - off * (off.dotc(v) / Complex64::from(off_norm_sq))
    };
    let once = project(target);
    if once.norm() <= COLLINEAR_TOL * target.norm() {
        return Err(MimoError::CollinearClusters);
    }
    let twice = project(&once);
    Ok(&twice / Complex64::from(twice.norm()))
}

/// Zero-forcing cluster beams: beam A is the unit-norm projection of the
/// cluster-A base channel onto the orthogonal complement of the cluster-B
/// base channel, and vice versa.
pub fn zf_cluster_beams(scenario: &ClusterScenario) -> Result<BeamSet, MimoError> {
    let h1 = &scenario.channels[0];
    let h4 = &scenario.channels[3];
    let w1 = null_project(h1, h4)?;
    let w2 = null_project(h4, h1)?;
    Ok(BeamSet { beams: [w1, w2] })
}

/// Per-user rates for the four-user cluster scenario.
///
/// The transmit power `rho` (relative to unit noise) splits equally across
/// the two beams; within a cluster the weaker effective channel takes
/// `a_weak`. Residual inter-cluster leakage enters the SINR exactly rather
/// than being assumed zero.
pub fn cluster_noma_rates(
    scenario: &ClusterScenario,
    beams: &BeamSet,
    alloc: &PowerAllocation,
    rho: f64,
) -> Result<[f64; 4], MimoError> {
    let m = scenario.antennas();
    for w in beams.beams() {
        if w.len() != m {
            return Err(MimoError::BeamDimMismatch {
                beam: w.len(),
                channel: m,
            });
        }
    }
    // effective power gains |w_m^H h_k|^2
    let mut gain = [[0.0f64; 4]; 2];
    for (mi, w) in beams.beams().iter().enumerate() {
        for (k, h) in scenario.channels().iter().enumerate() {
            gain[mi][k] = w.dotc(h).norm_sqr();
        }
    }
    let p_beam = rho / 2.0;
    let mut rates = [0.0f64; 4];
    let clusters = [CLUSTER_PAIRS.0, CLUSTER_PAIRS.1];
    for (mi, &(u, v)) in clusters.iter().enumerate() {
        let other = 1 - mi;
        let (far, near) = if gain[mi][u] <= gain[mi][v] { (u, v) } else { (v, u) };
        let leak_far = p_beam * gain[other][far];
        let leak_near = p_beam * gain[other][near];
        let g_far = gain[mi][far];
        let g_near = gain[mi][near];
        let sinr_far =
            p_beam * alloc.a_weak() * g_far / (1.0 + p_beam * alloc.a_strong() * g_far + leak_far);
        let sinr_near = p_beam * alloc.a_strong() * g_near / (1.0 + leak_near);
        rates[far] = (1.0 + sinr_far).log2();
        rates[near] = (1.0 + sinr_near).log2();
    }
    Ok(rates)
}

/// Spatial-multiplexing configuration: equal antenna counts at the BS and
/// each user, per-user total powers (linear, unit noise) and the weak
/// user's channel-power ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmConfig {
    pub antennas: usize,
    pub power_strong: f64,
    pub power_weak: f64,
    pub weak_gain_scale: f64,
}

impl SmConfig {
    pub fn new(
        antennas: usize,
        power_strong: f64,
        power_weak: f64,
        weak_gain_scale: f64,
    ) -> Result<Self, MimoError> {
        if antennas == 0 {
            return Err(MimoError::NoAntennas);
        }
        if !(power_strong > 0.0 && power_weak > 0.0)
            || !(power_strong.is_finite() && power_weak.is_finite())
        {
            return Err(MimoError::InvalidPower);
        }
        if !(weak_gain_scale > 0.0 && weak_gain_scale <= 1.0) {
            return Err(MimoError::InvalidGainScale);
        }
        Ok(Self {
            antennas,
            power_strong,
            power_weak,
            weak_gain_scale,
        })
    }
}

/// `log2 det(I + c * G)` for Hermitian positive semi-definite `G`, via
/// Cholesky factorization.
pub fn log2_det_i_plus(c: f64, gram: &DMatrix<Complex64>) -> Result<f64, MimoError> {
    let n = gram.nrows();
    let mut a = gram * Complex64::from(c);
    for i in 0..n {
        a[(i, i)] += Complex64::from(1.0);
    }
    let chol = a.cholesky().ok_or(MimoError::NotPositiveDefinite)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.re.log2()).sum::<f64>())
}

/// NOMA and OMA (TDMA, equal slots) achievable rates under spatial
/// multiplexing with a white input covariance (power / M per antenna).
///
/// NOMA strong: `log2 det(I + (P_s/M) H_s H_s^H)` after SIC.
/// NOMA weak: the strong user's streams stay as noise, evaluated as
/// `log2 det(I + ((P_s+P_w)/M) G_w) - log2 det(I + (P_s/M) G_w)`.
/// OMA halves each user's single-user log-det rate.
pub fn sm_rates(
    config: &SmConfig,
    h_strong: &MimoChannel,
    h_weak: &MimoChannel,
) -> Result<SmRates, MimoError> {
    let m = config.antennas;
    for h in [h_strong, h_weak] {
        if h.antennas() != m {
            return Err(MimoError::ChannelDimMismatch {
                expected: m,
                got: h.antennas(),
            });
        }
    }
    let c_s = config.power_strong / m as f64;
    let c_w = config.power_weak / m as f64;
    let gram_s = h_strong.matrix() * h_strong.matrix().adjoint();
    let gram_w = h_weak.matrix() * h_weak.matrix().adjoint();

    let strong = log2_det_i_plus(c_s, &gram_s)?;
    let weak = log2_det_i_plus(c_s + c_w, &gram_w)? - log2_det_i_plus(c_s, &gram_w)?;
    let oma_strong = 0.5 * strong;
    let oma_weak = 0.5 * log2_det_i_plus(c_w, &gram_w)?;
    Ok(SmRates {
        noma: RatePair {
            rate_weak: weak,
            rate_strong: strong,
        },
        oma: RatePair {
            rate_weak: oma_weak,
            rate_strong: oma_strong,
        },
    })
}

/// Rates for both schemes on one channel draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmRates {
    pub noma: RatePair,
    pub oma: RatePair,
}
