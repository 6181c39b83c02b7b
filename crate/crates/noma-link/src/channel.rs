//! Seeded channel generation under a bounded path-loss geometry.
//!
//! All randomness flows through [`StreamFactory`]: one independent ChaCha
//! substream per `(seed, unit, trial, link)` key, where `unit` indexes a
//! grid point or sweep position and `link` one of the radio links of a
//! trial. Draws are therefore pure functions of the key and can be sharded
//! across any number of workers without changing the result.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Link index of the base-station to weak-user channel.
pub const LINK_BS_TO_WEAK: u8 = 0;
/// Link index of the base-station to strong-user channel.
pub const LINK_BS_TO_STRONG: u8 = 1;
/// Link index of the strong-user to weak-user relay channel.
pub const LINK_STRONG_TO_WEAK: u8 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("path loss exponent must be positive and finite, got {0}")]
    InvalidExponent(f64),
    #[error("path loss bound must be >= 1 and finite, got {0}")]
    InvalidBound(f64),
    #[error("MIMO power scale must be positive and finite, got {0}")]
    InvalidPowerScale(f64),
    #[error("MIMO channel needs at least one antenna")]
    NoAntennas,
}

/// Planar location in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Bounded path loss `max(bound, d)^-exponent`.
///
/// The clamp keeps the attenuation at or below one for every distance, so
/// a receiver can never see more power than was transmitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    exponent: f64,
    bound: f64,
}

impl PathLossModel {
    pub fn new(exponent: f64, bound: f64) -> Result<Self, ChannelError> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(ChannelError::InvalidExponent(exponent));
        }
        if !(bound.is_finite() && bound >= 1.0) {
            return Err(ChannelError::InvalidBound(bound));
        }
        Ok(Self { exponent, bound })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Attenuation at `distance` meters: `max(bound, distance)^-exponent`.
    pub fn loss(&self, distance: f64) -> f64 {
        debug_assert!(distance >= 0.0, "distance must be non-negative");
        distance.max(self.bound).powf(-self.exponent)
    }
}

/// One scalar channel draw: complex amplitude, cached power and receiver
/// location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    gain: Complex64,
    gain_sq: f64,
    geometry: Position,
}

impl ChannelRealization {
    pub fn new(gain: Complex64, geometry: Position) -> Self {
        Self {
            gain,
            gain_sq: gain.norm_sqr(),
            geometry,
        }
    }

    pub fn gain(&self) -> Complex64 {
        self.gain
    }

    /// `|h|^2`, cached at construction.
    pub fn gain_sq(&self) -> f64 {
        self.gain_sq
    }

    pub fn geometry(&self) -> Position {
        self.geometry
    }
}

/// Square complex channel matrix for spatial multiplexing.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoChannel {
    matrix: DMatrix<Complex64>,
    antennas: usize,
}

impl MimoChannel {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }
}

/// Deterministic substream factory keyed by `(seed, unit, trial, link)`.
///
/// Key layout inside the 64-bit ChaCha stream id: `unit` in the top 20
/// bits, `trial` in the next 40, `link` in the low 4. Distinct keys map to
/// distinct streams, so the sequences never overlap.
#[derive(Debug, Clone, Copy)]
pub struct StreamFactory {
    seed: u64,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Open the substream for `(unit, trial, link)`.
    ///
    /// Limits: `unit < 2^20`, `trial < 2^40`, `link < 16`.
    pub fn stream(&self, unit: u32, trial: u64, link: u8) -> ChaCha8Rng {
        assert!(unit < (1 << 20), "unit index {unit} out of range");
        assert!(trial < (1 << 40), "trial index {trial} out of range");
        assert!(link < 16, "link index {link} out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((unit as u64) << 44) | (trial << 4) | link as u64);
        rng
    }
}

/// Zero-mean circularly-symmetric complex Gaussian with total variance
/// `variance` (split evenly between real and imaginary parts).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Draw a Rayleigh-faded scalar channel from `bs` to a receiver at `rx`.
///
/// The amplitude is `g * sqrt(loss)` with `g ~ CN(0, 1)`, so the mean
/// channel power equals the path loss at the receiver distance.
pub fn draw_scalar_channel<R: Rng + ?Sized>(
    rng: &mut R,
    model: &PathLossModel,
    rx: Position,
    bs: Position,
) -> ChannelRealization {
    let loss = model.loss(rx.distance_to(&bs));
    let gain = complex_gaussian(rng, 1.0) * loss.sqrt();
    ChannelRealization::new(gain, rx)
}

/// Draw a rich-scattering `antennas x antennas` matrix with i.i.d.
/// `CN(0, power_scale)` entries.
///
/// Entries are drawn in column-major order so the sequence consumed from
/// `rng` is part of the determinism contract.
pub fn draw_mimo_channel<R: Rng + ?Sized>(
    rng: &mut R,
    antennas: usize,
    power_scale: f64,
) -> Result<MimoChannel, ChannelError> {
    if antennas == 0 {
        return Err(ChannelError::NoAntennas);
    }
    if !(power_scale.is_finite() && power_scale > 0.0) {
        return Err(ChannelError::InvalidPowerScale(power_scale));
    }
    let entries: Vec<Complex64> = (0..antennas * antennas)
        .map(|_| complex_gaussian(rng, power_scale))
        .collect();
    Ok(MimoChannel {
        matrix: DMatrix::from_vec(antennas, antennas, entries),
        antennas,
    })
}
