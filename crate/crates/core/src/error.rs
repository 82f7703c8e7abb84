//! Error type shared by all modules.

use core::fmt;

/// Errors surfaced by map construction, operator application, spectral
/// iteration, and the experiment layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The driving system emitted a symbol with no map attached.
    SymbolOutOfRange { symbol: usize, n_maps: usize },
    /// Family-level expansion constant is not > 1.
    NotExpanding { delta: f64 },
    /// Two grid functions (or a matrix and a grid function) have different
    /// resolutions.
    GridMismatch { left: usize, right: usize },
    /// A per-step normalizer fell below the collapse threshold; the twist is
    /// too large for the pull-back iteration.
    NormalizerCollapse { t: i64, modulus: f64 },
    /// The pull-back iteration did not meet its Cauchy tolerance before the
    /// horizon cap.
    NoConvergence { horizon: u32, residual: f64, tol: f64 },
    /// A density had a negative cell beyond round-off.
    InvalidDensity { cell: usize, value: f64 },
    /// The asymptotic variance is (numerically) zero; CLT/LCLT statistics
    /// are refused.
    DegenerateVariance { sigma2: f64 },
    /// No lattice structure was detected for a periodic-case experiment.
    NoLattice,
    /// The Lyapunov curve fed to the Legendre transform carries convexity
    /// violations.
    NonConvexCurve { violations: usize },
    /// An input is degenerate for the requested operation (e.g. projecting
    /// out the equivariant density left nothing to measure).
    DegenerateInput(&'static str),
    /// A fiber time fell outside the centering window of the observable.
    CenteringWindow { t: i64 },
    /// A construction-time invariant was violated.
    BadInput(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::SymbolOutOfRange { symbol, n_maps } => {
                write!(f, "driving emitted symbol {symbol} but family has {n_maps} maps")
            }
            Error::NotExpanding { delta } => {
                write!(f, "family expansion constant {delta} is not > 1")
            }
            Error::GridMismatch { left, right } => {
                write!(f, "grid mismatch: {left} vs {right} cells")
            }
            Error::NormalizerCollapse { t, modulus } => {
                write!(f, "normalizer collapsed to modulus {modulus:e} at fiber time {t}")
            }
            Error::NoConvergence { horizon, residual, tol } => {
                write!(
                    f,
                    "pull-back did not converge: residual {residual:e} > tol {tol:e} at horizon {horizon}"
                )
            }
            Error::InvalidDensity { cell, value } => {
                write!(f, "invalid density: cell {cell} has value {value}")
            }
            Error::DegenerateVariance { sigma2 } => {
                write!(f, "degenerate variance sigma^2 = {sigma2:e}")
            }
            Error::NoLattice => write!(f, "no lattice structure detected in the observable"),
            Error::NonConvexCurve { violations } => {
                write!(f, "Lyapunov curve has {violations} convexity violations")
            }
            Error::DegenerateInput(msg) => write!(f, "degenerate input: {msg}"),
            Error::CenteringWindow { t } => {
                write!(f, "fiber time {t} is outside the observable's centering window")
            }
            Error::BadInput(msg) => write!(f, "bad input: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
