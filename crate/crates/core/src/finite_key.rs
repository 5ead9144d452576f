//! Finite-key secret-key rates for the 2- and 3-basis protocols.
//!
//! Out of a sifted string of length N, k symbols are sacrificed to estimate
//! the error rate; sampling without replacement inflates the estimate by the
//! Serfling penalty ν = √(N(k+1)ln(2/ε) / (k²(N−k))). Three bounds on the
//! extractable rate are implemented, each maximized over k with the
//! (N−k)/N prefactor:
//!
//! * `Uncertainty` (2 bases only): log₂d − h(Q+ν) − (Q+ν)log₂(d−1) − leak,
//!   from the entropic uncertainty relation plus a support-counting bound on
//!   the max-entropy (valid while Q+ν ≤ 1/2).
//! * `Renner`: H̃(X|E) − leak − (2log₂d + 3)·√(log₂(2/ε)/(N−k)).
//! * `SecondOrder`: H̃(X|E) − leak + Φ⁻¹(ε²)·√(V(X|E)/(N−k)), using the
//!   conditional entropy variance; Φ⁻¹(ε²) < 0 makes this a penalty.
//!
//! H̃ and V are evaluated at the shifted error rate Q+ν by re-solving the
//! adversarial channel there; leak_EC stays at the measured Q (reconciliation
//! sees the actual statistics). A per-sweep memo deduplicates the
//! (d, mubs, Q+ν) → (H, V) evaluations inside the k search.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;

use crate::entropy;
use crate::error::{QkdError, Result};
use crate::exec;
use crate::tol;

/// Inputs of a finite-key evaluation. `n_sifted` is the total sifted length
/// N = n + k; the sacrificed size k is chosen by the optimizer.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FiniteKeyParams {
    pub d: usize,
    pub mubs: u8,
    pub q: f64,
    pub eps: f64,
    pub n_sifted: u64,
    /// Error-correction efficiency multiplier on leak_EC (1.0 = Shannon limit).
    pub f_ec: f64,
}

impl FiniteKeyParams {
    pub fn new(d: usize, mubs: u8, q: f64, eps: f64, n_sifted: u64) -> Result<Self> {
        let p = FiniteKeyParams {
            d,
            mubs,
            q,
            eps,
            n_sifted,
            f_ec: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_f_ec(mut self, f_ec: f64) -> Result<Self> {
        if !f_ec.is_finite() || f_ec < 1.0 {
            return Err(QkdError::InvalidParameter(format!(
                "f_ec must be at least 1.0, got {f_ec}"
            )));
        }
        self.f_ec = f_ec;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(QkdError::InvalidDimension(self.d));
        }
        if self.mubs != 2 && self.mubs != 3 {
            return Err(QkdError::InvalidParameter(format!(
                "mubs must be 2 or 3, got {}",
                self.mubs
            )));
        }
        if self.n_sifted < 2 {
            return Err(QkdError::InvalidParameter(format!(
                "sifted length {} must be at least 2",
                self.n_sifted
            )));
        }
        if !(0.0..1.0).contains(&self.q) {
            return Err(QkdError::InvalidParameter(format!(
                "error rate {} outside [0, 1)",
                self.q
            )));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(QkdError::InvalidParameter(format!(
                "epsilon {} outside (0, 1)",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Which finite-key estimate to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiniteBound {
    Uncertainty,
    Renner,
    SecondOrder,
}

impl FiniteBound {
    pub const ALL: [FiniteBound; 3] = [
        FiniteBound::Uncertainty,
        FiniteBound::Renner,
        FiniteBound::SecondOrder,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FiniteBound::Uncertainty => "uncertainty",
            FiniteBound::Renner => "renner",
            FiniteBound::SecondOrder => "second-order",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uncertainty" => Ok(FiniteBound::Uncertainty),
            "renner" => Ok(FiniteBound::Renner),
            "second-order" | "second_order" | "secondorder" => Ok(FiniteBound::SecondOrder),
            other => Err(QkdError::InvalidParameter(format!(
                "unknown bound '{other}' (expected uncertainty, renner or second-order)"
            ))),
        }
    }

    /// The uncertainty-relation route only covers the 2-basis protocol.
    pub fn supports_mubs(self, mubs: u8) -> bool {
        match self {
            FiniteBound::Uncertainty => mubs == 2,
            _ => mubs == 2 || mubs == 3,
        }
    }
}

impl std::fmt::Display for FiniteBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Optimized finite-key rate at one (params, bound) point.
#[derive(Debug, Clone, Serialize)]
pub struct FiniteRateResult {
    pub params: FiniteKeyParams,
    pub bound: FiniteBound,
    /// Bits per channel, clipped at zero.
    pub rate: f64,
    /// Unclipped optimizer value; zero when no k was feasible.
    pub rate_raw: f64,
    /// Optimizing k; zero means no feasible sacrifice size existed.
    pub k_opt: u64,
    /// Serfling penalty at k_opt (zero when k_opt = 0).
    pub nu: f64,
    /// (N − k_opt) · rate.
    pub secret_bits: f64,
}

/// Serfling penalty ν = √( N(k+1) ln(2/ε) / (k²(N−k)) ).
pub fn serfling_nu(n_sifted: u64, k: u64, eps: f64) -> Result<f64> {
    if n_sifted < 2 || k < 1 || k > n_sifted - 1 {
        return Err(QkdError::InvalidParameter(format!(
            "need 1 <= k <= N-1, got k={k}, N={n_sifted}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(QkdError::InvalidParameter(format!(
            "epsilon {eps} outside (0, 1)"
        )));
    }
    let n = n_sifted as f64;
    let kf = k as f64;
    let ln_term = (2.0 / eps).ln();
    Ok((n * (kf + 1.0) * ln_term / (kf * kf * (n - kf))).sqrt())
}

/// Number of differing positions, computed as Σ ⌈((x_i ⊖ y_i) mod d)/d⌉ with
/// modulo-d subtraction.
pub fn error_count(x: &[u8], y: &[u8], d: usize) -> Result<u64> {
    if x.len() != y.len() {
        return Err(QkdError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let d = d as u64;
    let mut count = 0u64;
    for (&a, &b) in x.iter().zip(y) {
        let diff = (a as u64 + d - b as u64) % d;
        count += diff.div_ceil(d);
    }
    Ok(count)
}

// ---------------------------------------------------------------------------
// Standard-normal quantile.
// ---------------------------------------------------------------------------

/// Complementary error function, accurate to ~1e-15 relative.
///
/// Series with all-positive terms for |x| < 3, Lentz continued fraction for
/// the tail; both avoid cancellation, so the Newton step in
/// [`normal_quantile`] can trust the digits.
fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 3.0 {
        // erf(x) = (2x/√π) e^{−x²} Σ (2x²)^n / (2n+1)!!
        let two_x2 = 2.0 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut n = 0u32;
        while term > 1e-18 * sum {
            n += 1;
            term *= two_x2 / (2 * n + 1) as f64;
            sum += term;
            if n > 200 {
                break;
            }
        }
        let erf = 2.0 * x * (-x * x).exp() / std::f64::consts::PI.sqrt() * sum;
        1.0 - erf
    } else {
        // erfc(x) = e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let mut f = x;
        let mut c = x;
        let mut dd = 0.0f64;
        let tiny = 1e-300;
        for i in 1..200 {
            let a = 0.5 * i as f64;
            dd = x + a * dd;
            if dd.abs() < tiny {
                dd = tiny;
            }
            c = x + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            dd = 1.0 / dd;
            let delta = c * dd;
            f *= delta;
            if (delta - 1.0).abs() < 1e-17 {
                break;
            }
        }
        (-x * x).exp() / (std::f64::consts::PI.sqrt() * f)
    }
}

/// Standard-normal CDF Φ(x) = erfc(−x/√2)/2.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard-normal quantile Φ⁻¹(p), accurate to 1e-9 absolute.
///
/// Rational initial guess (Acklam's approximation) refined by one Newton
/// step on Φ(x) − p with the exact density as derivative. Negative for
/// p < 1/2, which is what makes the second-order term a penalty.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(QkdError::InvalidParameter(format!(
            "quantile argument {p} outside (0, 1)"
        )));
    }

    const A: [f64; 6] = [
        -39.696_830_286_653_8,
        220.946_098_424_521,
        -275.928_510_446_969,
        138.357_751_867_269,
        -30.664_798_066_147_2,
        2.506_628_277_459_24,
    ];
    const B: [f64; 5] = [
        -54.476_098_798_224_1,
        161.585_836_858_041,
        -155.698_979_859_887,
        66.801_311_887_719_7,
        -13.280_681_552_885_7,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_29e-3,
        -0.322_396_458_041_136,
        -2.400_758_277_161_84,
        -2.549_732_539_343_73,
        4.374_664_141_464_97,
        2.938_163_982_698_78,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_46e-3,
        0.322_467_129_070_04,
        2.445_134_137_143,
        3.754_408_661_907_42,
    ];
    const P_LOW: f64 = 0.02425;

    let x0 = if p < P_LOW {
        let t = (-2.0 * p.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    } else if p <= 1.0 - P_LOW {
        let u = p - 0.5;
        let r = u * u;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * u
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let t = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    };

    let density = (-0.5 * x0 * x0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density == 0.0 {
        return Ok(x0);
    }
    Ok(x0 - (normal_cdf(x0) - p) / density)
}

// ---------------------------------------------------------------------------
// Shifted-rate memo and per-k evaluation.
// ---------------------------------------------------------------------------

/// Memo for (d, mubs, Q+ν) → (H(X|E), V(X|E)), keyed on Q rounded to 1e-12.
/// Scoped to one sweep; concurrent readers share it behind a mutex.
#[derive(Default)]
pub struct HvCache {
    map: Mutex<HashMap<(usize, u8, i64), (f64, f64)>>,
}

impl HvCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn quantize(q: f64) -> i64 {
        (q * 1e12).round() as i64
    }

    /// (H, V) at the shifted error rate, or None when the channel has no
    /// valid coefficient vector there.
    fn hv(&self, d: usize, mubs: u8, q: f64) -> Option<(f64, f64)> {
        let key = (d, mubs, Self::quantize(q));
        if let Some(&hit) = self.map.lock().unwrap().get(&key) {
            return Some(hit);
        }
        let value = entropy::channel_hv(d, mubs, q).ok()?;
        self.map.lock().unwrap().insert(key, value);
        Some(value)
    }
}

/// Rate evaluation at one explicit sacrifice size k.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PerKRate {
    pub k: u64,
    pub nu: f64,
    /// (N−k)/N · bracket; zero and infeasible when the bound's validity
    /// conditions fail at this k.
    pub rate_raw: f64,
    pub feasible: bool,
}

/// Evaluate one bound at a fixed k (no optimization); used by the protocol
/// simulator where k is a session outcome.
pub fn rate_at_k(
    bound: FiniteBound,
    params: &FiniteKeyParams,
    k: u64,
    cache: &HvCache,
) -> Result<PerKRate> {
    params.validate()?;
    if !bound.supports_mubs(params.mubs) {
        return Err(QkdError::InvalidParameter(format!(
            "bound '{bound}' does not apply to the {}-basis protocol",
            params.mubs
        )));
    }
    let nu = serfling_nu(params.n_sifted, k, params.eps)?;
    match bracket_at(bound, params, k, nu, cache) {
        Some(bracket) => {
            let prefactor = (params.n_sifted - k) as f64 / params.n_sifted as f64;
            Ok(PerKRate {
                k,
                nu,
                rate_raw: prefactor * bracket,
                feasible: true,
            })
        }
        None => Ok(PerKRate {
            k,
            nu,
            rate_raw: 0.0,
            feasible: false,
        }),
    }
}

/// The bracketed per-symbol expression before the (N−k)/N prefactor;
/// None when the bound's validity conditions fail at this k.
fn bracket_at(
    bound: FiniteBound,
    params: &FiniteKeyParams,
    k: u64,
    nu: f64,
    cache: &HvCache,
) -> Option<f64> {
    let d = params.d;
    let leak = params.f_ec * entropy::d_ary_leak(d, params.q);
    let q_shift = params.q + nu;
    let n_key = (params.n_sifted - k) as f64;
    match bound {
        FiniteBound::Uncertainty => {
            // Counting bound on the max-entropy needs Q+ν ≤ 1/2.
            if q_shift > 0.5 {
                return None;
            }
            let log_d = (d as f64).log2();
            Some(
                log_d
                    - entropy::binary_entropy(q_shift)
                    - q_shift * ((d - 1) as f64).log2()
                    - leak,
            )
        }
        FiniteBound::Renner => {
            let (h_shift, _) = cache.hv(d, params.mubs, q_shift)?;
            let correction =
                (2.0 * (d as f64).log2() + 3.0) * ((2.0 / params.eps).log2() / n_key).sqrt();
            Some(h_shift - leak - correction)
        }
        FiniteBound::SecondOrder => {
            let (h_shift, v_shift) = cache.hv(d, params.mubs, q_shift)?;
            let quantile = normal_quantile(params.eps * params.eps)
                .expect("eps in (0,1) makes eps^2 a valid quantile argument");
            Some(h_shift - leak + quantile * (v_shift / n_key).sqrt())
        }
    }
}

// ---------------------------------------------------------------------------
// Optimization over the sacrificed size k.
// ---------------------------------------------------------------------------

/// Cap on exhaustive scans when the coarse scan suggests multimodality.
const FULL_SCAN_LIMIT: u64 = 1 << 20;

fn log_spaced(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    let mut out: Vec<u64> = (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            let v = (lo as f64).ln() + t * ((hi as f64).ln() - (lo as f64).ln());
            (v.exp().round() as u64).clamp(lo, hi)
        })
        .collect();
    out.dedup();
    out
}

struct MemoizedObjective<'a> {
    bound: FiniteBound,
    params: &'a FiniteKeyParams,
    cache: &'a HvCache,
    seen: HashMap<u64, f64>,
}

impl<'a> MemoizedObjective<'a> {
    fn eval(&mut self, k: u64) -> f64 {
        if let Some(&v) = self.seen.get(&k) {
            return v;
        }
        let nu = serfling_nu(self.params.n_sifted, k, self.params.eps)
            .expect("k kept within [1, N-1] by the optimizer");
        let v = match bracket_at(self.bound, self.params, k, nu, self.cache) {
            Some(bracket) => {
                (self.params.n_sifted - k) as f64 / self.params.n_sifted as f64 * bracket
            }
            None => f64::NEG_INFINITY,
        };
        self.seen.insert(k, v);
        v
    }
}

/// Golden-section search over the integers of [a, b]; assumes unimodality
/// (infeasible −∞ plateaus at the edges are fine). Ties resolve to smaller k.
fn golden_int(mut a: u64, mut b: u64, obj: &mut MemoizedObjective) -> (u64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    while b - a > 3 {
        let span = (b - a) as f64;
        let mut c = a + (span * (1.0 - INV_PHI)).round() as u64;
        let mut d = a + (span * INV_PHI).round() as u64;
        if c <= a {
            c = a + 1;
        }
        if d >= b {
            d = b - 1;
        }
        if c >= d {
            c = a + (b - a) / 3;
            d = b - (b - a) / 3;
        }
        if obj.eval(c) >= obj.eval(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let mut best = (a, obj.eval(a));
    for k in (a + 1)..=b {
        let v = obj.eval(k);
        if v > best.1 {
            best = (k, v);
        }
    }
    best
}

/// Maximize (N−k)/N · bracket over k ∈ [1, N−1].
///
/// A 21-point logarithmic scan brackets the maximum; golden-section search
/// refines it. When the coarse scan sees several strict local maxima the
/// whole range is scanned instead, provided it is small enough to afford.
pub fn optimize_rate(
    bound: FiniteBound,
    params: &FiniteKeyParams,
    cache: &HvCache,
) -> Result<FiniteRateResult> {
    params.validate()?;
    if !bound.supports_mubs(params.mubs) {
        return Err(QkdError::InvalidParameter(format!(
            "bound '{bound}' does not apply to the {}-basis protocol",
            params.mubs
        )));
    }
    let lo = 1u64;
    let hi = params.n_sifted - 1;
    let mut obj = MemoizedObjective {
        bound,
        params,
        cache,
        seen: HashMap::new(),
    };

    let candidates = log_spaced(lo, hi, 21);
    let scores: Vec<f64> = candidates.iter().map(|&k| obj.eval(k)).collect();

    let finite_maxima = (0..candidates.len())
        .filter(|&i| {
            if !scores[i].is_finite() {
                return false;
            }
            let left = if i == 0 { f64::NEG_INFINITY } else { scores[i - 1] };
            let right = if i + 1 == scores.len() {
                f64::NEG_INFINITY
            } else {
                scores[i + 1]
            };
            scores[i] > left && scores[i] > right
        })
        .count();

    let (k_best, raw_best) = if scores.iter().all(|s| !s.is_finite()) {
        (0u64, f64::NEG_INFINITY)
    } else if finite_maxima > 1 && hi - lo < FULL_SCAN_LIMIT {
        let mut best = (0u64, f64::NEG_INFINITY);
        for k in lo..=hi {
            let v = obj.eval(k);
            if v > best.1 {
                best = (k, v);
            }
        }
        best
    } else {
        let i_best = (0..scores.len())
            .max_by(|&i, &j| scores[i].total_cmp(&scores[j]))
            .unwrap();
        let a = if i_best == 0 { lo } else { candidates[i_best - 1] };
        let b = if i_best + 1 == candidates.len() {
            hi
        } else {
            candidates[i_best + 1]
        };
        golden_int(a, b, &mut obj)
    };

    let (k_opt, rate_raw, nu) = if k_best == 0 || !raw_best.is_finite() {
        (0u64, 0.0, 0.0)
    } else {
        (
            k_best,
            raw_best,
            serfling_nu(params.n_sifted, k_best, params.eps)?,
        )
    };
    let rate = rate_raw.max(0.0);
    Ok(FiniteRateResult {
        params: *params,
        bound,
        rate,
        rate_raw,
        k_opt,
        nu,
        secret_bits: (params.n_sifted - k_opt) as f64 * rate,
    })
}

/// Logarithmically spaced sifted-length grid, inclusive of both endpoints.
pub fn n_grid(n_min: u64, n_max: u64, points: usize) -> Result<Vec<u64>> {
    if n_min < 2 || n_max < n_min || points < 1 {
        return Err(QkdError::InvalidParameter(format!(
            "bad N grid: n_min={n_min}, n_max={n_max}, points={points}"
        )));
    }
    if points == 1 {
        return Ok(vec![n_min]);
    }
    let mut grid = log_spaced(n_min, n_max, points);
    grid.dedup();
    Ok(grid)
}

/// Evaluate every requested bound over a (d, N) grid; rows are ordered by
/// (d, N, bound) and computed in parallel when the `parallel` feature is on.
pub fn sweep_finite(
    d_list: &[usize],
    mubs: u8,
    q: f64,
    eps: f64,
    n_list: &[u64],
    bounds: &[FiniteBound],
    f_ec: f64,
) -> Result<Vec<FiniteRateResult>> {
    for &b in bounds {
        if !b.supports_mubs(mubs) {
            return Err(QkdError::InvalidParameter(format!(
                "bound '{b}' does not apply to the {mubs}-basis protocol"
            )));
        }
    }
    let mut jobs = Vec::new();
    for &d in d_list {
        for &n in n_list {
            for &b in bounds {
                jobs.push((d, n, b));
            }
        }
    }
    let cache = HvCache::new();
    let rows = exec::map_vec(jobs, |(d, n, bound)| {
        let params = FiniteKeyParams::new(d, mubs, q, eps, n)?.with_f_ec(f_ec)?;
        optimize_rate(bound, &params, &cache)
    });
    rows.into_iter().collect()
}
