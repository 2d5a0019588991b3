//! Crowded massive-MIMO uplink over Rician fading.
//!
//! The crate simulates an uplink where far more users than orthogonal pilots
//! share a base station array. Each user owns a unique pilot-hopping pattern
//! across the subframes of a superframe. Active users are identified by
//! projecting the despread pilot observations onto the steering vectors of
//! the estimated line-of-sight angles and matching the resulting per-angle
//! argmax patterns against the codebook; no detection threshold is needed.
//! The recovered line-of-sight component then drives a LOS-only channel
//! estimator and an updated estimator that adds an MMSE estimate of the
//! scattered (NLOS) part obtained from decision-directed data.
//!
//! Modules map onto the processing chain:
//!
//! - [`channel`]: steering vectors and Rician channel draws
//! - [`airlink`]: pilots, hopping codebook, frame synthesis, despreading
//! - [`aoa`]: sample covariance, Hermitian eigendecomposition, MUSIC
//! - [`identify`]: pattern-matching identification and the threshold baseline
//! - [`estimate`]: LOS-only / updated channel estimators and NMSE
//! - [`harness`]: deterministic Monte Carlo sweeps and CSV output
//! - [`cli`]: command line front end

pub mod airlink;
pub mod aoa;
pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod identify;
pub mod linalg;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64;
