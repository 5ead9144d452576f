//! Numerical tolerances used across the crate.
//!
//! Two tiers: 1e-12 for algebraic identities that only accumulate a handful
//! of f64 roundings (products of small unitaries, trace sums), and 1e-10 for
//! quantities that pass through an iterative eigensolver. 1e-13 is the
//! eigenvalue cutoff below which a state is treated as having no support.

/// Unitarity, trace, Hermiticity, probability normalization.
pub const ALGEBRAIC: f64 = 1e-12;

/// Residuals and overlaps involving numerically computed eigenvectors.
pub const EIGEN: f64 = 1e-10;

/// Eigenvalues below this carry no support (matrix logs skip them).
pub const SUPPORT_CUTOFF: f64 = 1e-13;

/// Weight of one state allowed outside another's support before
/// relative-entropy inputs are rejected.
pub const SUPPORT_WEIGHT: f64 = 1e-12;

/// Eigenvalue-phase gap below which a unitary spectrum counts as degenerate.
pub const PHASE_GAP: f64 = 1e-9;

/// Eigenvalues of a positive-semidefinite matrix may dip this far negative.
pub const PSD_FLOOR: f64 = -1e-10;

/// Induced per-basis error rates must reproduce Q this tightly.
pub const ERROR_RATE: f64 = 1e-10;

/// Residual of the cubic stationarity equation at the accepted root.
pub const CUBIC_RESIDUAL: f64 = 1e-10;

/// Bisection width for zero-rate thresholds.
pub const THRESHOLD: f64 = 1e-8;

/// Absolute accuracy of the standard-normal quantile.
pub const QUANTILE: f64 = 1e-9;
