//! Quenched spectral analysis of random compositions of piecewise-linear
//! expanding interval maps.
//!
//! The crate evolves densities on `[0,1)` under fiberwise transfer operators
//! driven by an ergodic base system, twists them by `exp(theta * g)` for an
//! observable `g`, and extracts the top Lyapunov exponent curve
//! `Lambda(theta)`, its derivatives at zero, and the variance `Sigma^2`.
//! On top of that sit Monte-Carlo experiments that test the large-deviation,
//! central-limit, and local central-limit behaviour of random Birkhoff sums
//! against the spectral predictions.
//!
//! The crate is `no_std`-compatible (with `alloc`); all floating-point
//! transcendentals route through `libm` when the `std` feature is off.
//! Everything is deterministic: randomness comes exclusively from explicit
//! seeds through a counter-based generator, so results are reproducible
//! across runs, platforms, and worker counts.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod bv;
pub mod error;
pub mod limits;
pub mod rds;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod transfer;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
