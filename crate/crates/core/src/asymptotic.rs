//! Closed-form asymptotic secret-key rates and zero-rate thresholds.
//!
//! Both protocol families share the structure rate = log₂ d − S({λ_αβ}):
//! the 2-basis family additionally collapses to the closed form
//! log₂ d + 2[Q log₂ Q + (1−Q) log₂(1−Q) − Q log₂(d−1)], which equals
//! log₂ d − 2·leak_EC(d, Q). Thresholds are the smallest positive zero of
//! the rate, found by bisection.

use serde::Serialize;

use crate::channel;
use crate::entropy;
use crate::error::{QkdError, Result};
use crate::exec;
use crate::tol;

/// One row of an asymptotic rate sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RatePoint {
    pub d: usize,
    pub mubs: u8,
    pub q: f64,
    /// Bits per channel, clipped at zero for plotting parity.
    pub rate: f64,
    /// The λ_? value the adversarial channel used.
    pub lambda_q: f64,
}

/// Asymptotic rate of the 2-basis protocol:
/// log₂ d + 2[Q log₂ Q + (1−Q) log₂(1−Q) − Q log₂(d−1)].
pub fn rate_2mub(d: usize, q: f64) -> Result<f64> {
    // Domain check shared with the channel construction.
    channel::solve_2mub(d, q)?;
    Ok((d as f64).log2() - 2.0 * entropy::d_ary_leak(d, q))
}

/// Asymptotic rate of the 3-basis protocol: log₂ d − S({λ_αβ}) at the
/// minimizing λ_?; for d = 2 this is 1 − S({1−3Q/2, Q/2, Q/2, Q/2}).
pub fn rate_3mub(d: usize, q: f64) -> Result<f64> {
    let c = channel::solve_3mub(d, q)?;
    Ok(rate_from_coefficients(&c))
}

/// log₂ d − S({λ}) for an already-solved channel.
pub fn rate_from_coefficients(c: &channel::ChannelCoefficients) -> f64 {
    (c.dim() as f64).log2() - crate::entropy::shannon_raw(c.probabilities())
}

/// Asymptotic rate for `mubs` ∈ {2, 3}.
pub fn rate(d: usize, mubs: u8, q: f64) -> Result<f64> {
    match mubs {
        2 => rate_2mub(d, q),
        3 => rate_3mub(d, q),
        _ => Err(QkdError::InvalidParameter(format!(
            "mubs must be 2 or 3, got {mubs}"
        ))),
    }
}

/// Smallest positive zero of the asymptotic rate, by bisection on
/// [1e-6, 0.5] to width [`tol::THRESHOLD`].
pub fn threshold(d: usize, mubs: u8) -> Result<f64> {
    let mut lo = 1e-6;
    let mut hi = 0.5;
    let f_lo = rate(d, mubs, lo)?;
    let f_hi = rate(d, mubs, hi)?;
    if f_lo <= 0.0 || f_hi >= 0.0 {
        return Err(QkdError::InvalidParameter(format!(
            "rate does not change sign on [{lo}, {hi}] for d={d}, mubs={mubs}"
        )));
    }
    while hi - lo > tol::THRESHOLD {
        let mid = 0.5 * (lo + hi);
        if rate(d, mubs, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rate table over a Q grid for several dimensions; rates are clipped at
/// zero, mirroring how the curves are plotted.
pub fn sweep_asymptotic(d_list: &[usize], mubs: u8, q_grid: &[f64]) -> Result<Vec<RatePoint>> {
    let mut jobs = Vec::with_capacity(d_list.len() * q_grid.len());
    for &d in d_list {
        for &q in q_grid {
            jobs.push((d, q));
        }
    }
    let rows = exec::map_vec(jobs, |(d, q)| {
        let c = channel::solve(d, mubs, q)?;
        Ok(RatePoint {
            d,
            mubs,
            q,
            rate: rate_from_coefficients(&c).max(0.0),
            lambda_q: c.lambda_q(),
        })
    });
    rows.into_iter().collect()
}

/// Evenly spaced Q grid [0, qmax] with the given step, inclusive.
pub fn q_grid(qmax: f64, step: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut i = 0u64;
    loop {
        let q = i as f64 * step;
        if q > qmax + 1e-12 {
            break;
        }
        grid.push(q.min(qmax));
        i += 1;
    }
    grid
}
