//! Link-level Monte Carlo toolkit for two-user downlink non-orthogonal
//! multiple access (NOMA).
//!
//! The crate is organised as a stack of pure numeric modules driven by a
//! config-based experiment harness:
//!
//! * [`channel`] — seeded, counter-keyed channel generation (bounded path
//!   loss, Rayleigh scalar links, rich-scattering MIMO matrices).
//! * [`rates`] — two-user OMA/NOMA rate calculus with successive
//!   interference cancellation (SIC), outage predicates, high-SNR
//!   approximations and the cognitive-radio-inspired power allocation
//!   solver.
//! * [`cooperative`] — the two-phase decode-and-forward cooperative NOMA
//!   protocol, outage maps over receiver geometry, and diversity-order
//!   fits.
//! * [`mimo`] — zero-forcing cluster beamforming for NOMA-BF and log-det
//!   achievable rates for NOMA with spatial multiplexing.
//! * [`must`] — multiuser superposition transmission (MUST) composite
//!   constellations (Categories 1-3), Gray-mapping verification, max-log
//!   demodulation and uncoded link experiments.
//! * [`harness`] — JSON experiment configs, the deterministic sharded
//!   Monte Carlo runner and CSV result tables.
//!
//! Every random draw is keyed by `(seed, unit, trial, link)` through
//! independent ChaCha substreams, so results are bit-identical for any
//! worker count.

pub mod channel;
pub mod cooperative;
pub mod harness;
pub mod mimo;
pub mod must;
pub mod rates;
pub mod stats;
