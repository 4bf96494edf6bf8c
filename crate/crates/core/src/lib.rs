//! Pilot allocation and sparse channel estimation for comb-type OFDM.
//!
//! The crate is organised bottom-up:
//!
//! - [`measurement`]: partial DFT matrices, the distorting matrix and the
//!   small dense complex kernels shared by every estimator.
//! - [`pilot_alloc`]: pilot patterns, coherence, cyclic difference profiles,
//!   difference-set catalog and the greedy variance-minimising search.
//! - [`channel_model`]: sparse channel generation, Rayleigh tap evolution and AWGN.
//! - [`estimators`]: LS + linear interpolation, OMP, IMAT and the oracle LS estimator.
//! - [`metrics`]: MSE, Cramér-Rao bound, exact-recovery test and error counters.
//! - [`ofdm_link`]: the Monte-Carlo link and the three experiment drivers.

pub mod channel_model;
pub mod error;
pub mod estimators;
pub mod measurement;
pub mod metrics;
pub mod ofdm_link;
pub mod pilot_alloc;

pub use error::{Error, Result};
pub use num_complex::Complex64;
