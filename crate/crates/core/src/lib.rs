//! Secret-key rates for d-dimensional QKD protocols using 2 or 3 mutually
//! unbiased bases.
//!
//! The crate builds the qudit Pauli group and the three MUB eigenbases
//! ([`pauli`]), derives the Bell-diagonal adversarial channel at a given
//! error rate ([`channel`]), evaluates the entropic quantities H(X|E) and
//! V(X|E) from an explicit purification ([`entropy`]), and turns them into
//! asymptotic rates and thresholds ([`asymptotic`]) as well as three
//! finite-key bounds with optimization over the sacrificed sample size
//! ([`finite_key`]). A Monte-Carlo protocol simulator ([`simulator`]) and a
//! renderer of the transverse-mode profiles of the three bases ([`render`])
//! round out the toolkit.
//!
//! All entropies and rates are in bits (base-2 logarithms); rates are per
//! detected, sifted symbol ("bits per channel").
//!
//! Sweeps and rendering parallelize with rayon when the default `parallel`
//! feature is enabled; disabling it yields a fully sequential build with the
//! same API.

pub mod asymptotic;
pub mod channel;
pub mod entropy;
pub mod error;
mod exec;
pub mod finite_key;
pub mod linalg;
pub mod pauli;
pub mod render;
pub mod simulator;
pub mod tol;

pub use error::{QkdError, Result};

/// Configure the global thread pool used by parallel sweeps.
///
/// `threads = 0` keeps the default (one thread per logical core). Calling
/// this more than once, or after any parallel work ran, has no effect.
/// Without the `parallel` feature this is a no-op.
pub fn init_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}
