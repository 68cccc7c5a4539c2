//! Multi-cell massive MIMO uplink spectral-efficiency simulator.
//!
//! Maximum ratio combining with least-squares or MMSE channel estimates over
//! spatially correlated Rician channels with pilot contamination. The crate
//! provides the instantaneous SE of each user in a coherence block, closed
//! form approximations of its ergodic average, a mean-effective-channel
//! reference bound, and a seeded Monte Carlo driver that compares the three.
//!
//! Module map:
//!
//! - [`moments`]: complex-normal sampling and moment identities
//! - [`scenario`]: geometry, large-scale fading, powers and pilots
//! - [`estimation`]: pilot phase, LS/MMSE estimates and their statistics
//! - [`spectral_efficiency`]: instantaneous SE, closed forms, bound
//! - [`montecarlo`]: drops, realizations and sweeps
//! - [`validation`]: sampling checks of the moment identities

pub mod estimation;
pub mod linalg;
pub mod moments;
pub mod montecarlo;
pub mod rng;
pub mod scenario;
pub mod spectral_efficiency;
pub mod validation;

pub use linalg::{CMatrix, CVector, Hermitian};
pub use moments::ComplexNormal;
