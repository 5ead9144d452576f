//! Bell-diagonal adversarial Pauli channels for the 2- and 3-basis protocols.
//!
//! A collective attack at symbol error rate Q is represented by a probability
//! vector {λ_αβ} over Pauli errors X^α Z^β. The monitored-basis error rates
//! pin down all coefficients except one free parameter λ_?, which the
//! adversary chooses to minimize the coherent information (the legitimate
//! parties must assume the worst case). For the 2-basis family the minimizer
//! is the closed form λ_? = Q²/(d−1)²; for the 3-basis family it is the root
//! of a cubic stationarity equation, solved here by bracketed bisection with
//! Newton refinement. The d = 2 3-basis case is the depolarizing channel and
//! needs no optimization.
//!
//! An error X^α Z^β flips the measured symbol in the Z basis iff α ≠ 0, in
//! the X basis iff β ≠ 0, and in the XZ basis iff α ≠ β: powers of XZ act on
//! its eigenvectors as pure phases, which is also why exactly
//! d² − 1 − 3(d−1) = (d−2)(d−1) cross operators harm that basis.

use num_complex::Complex64;

use crate::error::{QkdError, Result};
use crate::linalg::{self, CMat};
use crate::pauli::{pauli_operator, BasisId, PauliIndex};
use crate::tol;

/// Bell-diagonal coefficient table {λ_αβ} for one protocol family.
#[derive(Debug, Clone)]
pub struct ChannelCoefficients {
    dim: usize,
    mubs: u8,
    q: f64,
    /// Free-parameter value λ_? the minimization settled on.
    lambda_q: f64,
    /// Row-major table, entry α·d + β.
    lambda: Vec<f64>,
}

impl ChannelCoefficients {
    fn validated(dim: usize, mubs: u8, q: f64, lambda_q: f64, mut lambda: Vec<f64>) -> Result<Self> {
        let min = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
        if !min.is_finite() || min < -tol::ALGEBRAIC {
            return Err(QkdError::InvalidErrorRate {
                d: dim,
                mubs,
                q,
                reason: format!("coefficient {min:.3e} is negative"),
            });
        }
        // Roundoff can leave entries a few ulps below zero at feasibility
        // edges; clamp so downstream square roots stay real.
        for v in &mut lambda {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let c = ChannelCoefficients {
            dim,
            mubs,
            q,
            lambda_q,
            lambda,
        };
        let sum: f64 = c.lambda.iter().sum();
        if (sum - 1.0).abs() > tol::ALGEBRAIC {
            return Err(QkdError::InvalidErrorRate {
                d: dim,
                mubs,
                q,
                reason: format!("coefficients sum to {sum}"),
            });
        }
        for (basis, rate) in c.monitored_bases().iter().zip(c.induced_error_rates()) {
            if (rate - q).abs() > tol::ERROR_RATE {
                return Err(QkdError::InvalidErrorRate {
                    d: dim,
                    mubs,
                    q,
                    reason: format!("induced {basis}-basis rate {rate} differs from Q"),
                });
            }
        }
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mubs(&self) -> u8 {
        self.mubs
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// The value of the free parameter λ_? selected by the minimization.
    pub fn lambda_q(&self) -> f64 {
        self.lambda_q
    }

    pub fn lambda(&self, idx: PauliIndex) -> f64 {
        self.lambda[idx.alpha * self.dim + idx.beta]
    }

    /// All (index, λ) pairs in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (PauliIndex, f64)> + '_ {
        let d = self.dim;
        self.lambda.iter().enumerate().map(move |(i, &v)| {
            (
                PauliIndex {
                    alpha: i / d,
                    beta: i % d,
                },
                v,
            )
        })
    }

    /// The coefficient table as a probability vector (row-major).
    pub fn probabilities(&self) -> &[f64] {
        &self.lambda
    }

    /// Bases whose error rate the protocol monitors.
    pub fn monitored_bases(&self) -> &'static [BasisId] {
        if self.mubs == 2 {
            &[BasisId::Z, BasisId::X]
        } else {
            &[BasisId::Z, BasisId::X, BasisId::XZ]
        }
    }

    /// Symbol error rate this table induces in each monitored basis.
    pub fn induced_error_rates(&self) -> Vec<f64> {
        self.monitored_bases()
            .iter()
            .map(|&basis| {
                self.entries()
                    .filter(|(idx, _)| error_flips_basis(*idx, basis))
                    .map(|(_, v)| v)
                    .sum()
            })
            .collect()
    }
}

/// Whether the error X^α Z^β changes the measured symbol in `basis`.
pub fn error_flips_basis(idx: PauliIndex, basis: BasisId) -> bool {
    match basis {
        BasisId::Z => idx.alpha != 0,
        BasisId::X => idx.beta != 0,
        BasisId::XZ => idx.alpha != idx.beta,
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(QkdError::InvalidDimension(d))
    } else {
        Ok(())
    }
}

/// Adversarial channel for the 2-basis protocol at error rate Q.
///
/// λ_00 = (1−Q)², λ_α0 = λ_0β = Q(1−Q)/(d−1), λ_αβ = Q²/(d−1)² for
/// α,β > 0; Q must lie in [0, (d−1)/d).
pub fn solve_2mub(d: usize, q: f64) -> Result<ChannelCoefficients> {
    check_dim(d)?;
    let qmax = (d - 1) as f64 / d as f64;
    if !q.is_finite() || !(0.0..qmax).contains(&q) {
        return Err(QkdError::InvalidErrorRate {
            d,
            mubs: 2,
            q,
            reason: format!("must satisfy 0 <= Q < (d-1)/d = {qmax}"),
        });
    }
    let dm1 = (d - 1) as f64;
    let l_unknown = q * q / (dm1 * dm1);
    let l_edge = q * (1.0 - q) / dm1;
    let l_id = (1.0 - q) * (1.0 - q);
    let mut lambda = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            lambda[a * d + b] = match (a, b) {
                (0, 0) => l_id,
                (0, _) | (_, 0) => l_edge,
                _ => l_unknown,
            };
        }
    }
    ChannelCoefficients::validated(d, 2, q, l_unknown, lambda)
}

/// Coherent-information objective shared by both families:
/// log₂ d − S({λ}) evaluated on a coefficient table.
fn coherent_information(d: usize, lambda: &[f64]) -> f64 {
    let s: f64 = lambda
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    (d as f64).log2() - s
}

/// The 3-basis coefficient table for a candidate λ_? value (d > 2).
fn lambda_table_3mub(d: usize, q: f64, l: f64) -> Vec<f64> {
    let dm1 = (d - 1) as f64;
    let cross = (q - 2.0 * dm1 * l) / ((d - 2) as f64 * dm1);
    let id = 1.0 - q - dm1 * l;
    let mut lambda = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            lambda[a * d + b] = match (a, b) {
                (0, 0) => id,
                (0, _) | (_, 0) => l,
                _ if a == b => l,
                _ => cross,
            };
        }
    }
    lambda
}

/// Stationarity residual g(λ) = λ³ − λ_00·λ_cross²; g is strictly increasing
/// on the feasible interval, so its sign brackets the unique root.
fn cubic_residual(d: usize, q: f64, l: f64) -> f64 {
    let dm1 = (d - 1) as f64;
    let cross = (q - 2.0 * dm1 * l) / ((d - 2) as f64 * dm1);
    let id = 1.0 - q - dm1 * l;
    l * l * l - id * cross * cross
}

/// Adversarial channel for the 3-basis protocol at error rate Q.
///
/// For d > 2 the free parameter solves the cubic stationarity condition
/// λ³ = λ_00·λ_cross² on [0, Q/(2(d−1))]; bisection brackets the root and a
/// few Newton steps polish it. For d = 2 the channel is depolarizing with
/// λ_00 = 1 − 3Q/2 and the three error coefficients equal to Q/2.
pub fn solve_3mub(d: usize, q: f64) -> Result<ChannelCoefficients> {
    check_dim(d)?;
    if !q.is_finite() || q < 0.0 {
        return Err(QkdError::InvalidErrorRate {
            d,
            mubs: 3,
            q,
            reason: "must be nonnegative".into(),
        });
    }
    if d == 2 {
        let lambda = vec![1.0 - 1.5 * q, 0.5 * q, 0.5 * q, 0.5 * q];
        if lambda[0] < 0.0 {
            return Err(QkdError::InvalidErrorRate {
                d,
                mubs: 3,
                q,
                reason: "1 - 3Q/2 is negative".into(),
            });
        }
        return ChannelCoefficients::validated(2, 3, q, 0.5 * q, lambda);
    }

    if q == 0.0 {
        let mut lambda = vec![0.0; d * d];
        lambda[0] = 1.0;
        return ChannelCoefficients::validated(d, 3, q, 0.0, lambda);
    }

    let dm1 = (d - 1) as f64;
    let hi = q / (2.0 * dm1);
    // g(0) < 0 and g(hi) > 0 for 0 < Q < 1; bisect then refine.
    let (mut lo, mut hi_b) = (0.0f64, hi);
    if cubic_residual(d, q, lo) > 0.0 || cubic_residual(d, q, hi_b) < 0.0 {
        return Err(QkdError::InvalidErrorRate {
            d,
            mubs: 3,
            q,
            reason: "stationarity equation has no bracketed root".into(),
        });
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi_b);
        if cubic_residual(d, q, mid) <= 0.0 {
            lo = mid;
        } else {
            hi_b = mid;
        }
    }
    let mut root = 0.5 * (lo + hi_b);
    for _ in 0..4 {
        let g = cubic_residual(d, q, root);
        let h = 1e-9 * hi.max(1e-12);
        let dg = (cubic_residual(d, q, root + h) - cubic_residual(d, q, root - h)) / (2.0 * h);
        if dg.abs() < f64::MIN_POSITIVE {
            break;
        }
        let next = root - g / dg;
        if next.is_finite() {
            root = next.clamp(0.0, hi);
        }
    }

    let lambda = lambda_table_3mub(d, q, root);
    ChannelCoefficients::validated(d, 3, q, root, lambda)
}

/// Solve the channel for `mubs` ∈ {2, 3}.
pub fn solve(d: usize, mubs: u8, q: f64) -> Result<ChannelCoefficients> {
    match mubs {
        2 => solve_2mub(d, q),
        3 => solve_3mub(d, q),
        _ => Err(QkdError::InvalidParameter(format!(
            "mubs must be 2 or 3, got {mubs}"
        ))),
    }
}

/// Coherent information of a 3-basis table at an arbitrary feasible λ_?;
/// exposed so independent grid searches can scan the objective.
pub fn objective_3mub(d: usize, q: f64, l: f64) -> f64 {
    coherent_information(d, &lambda_table_3mub(d, q, l))
}

/// Coherent information of a 2-basis table at an arbitrary feasible λ_?.
pub fn objective_2mub(d: usize, q: f64, l: f64) -> f64 {
    let dm1 = (d - 1) as f64;
    let edge = (q - dm1 * dm1 * l) / dm1;
    let id = 1.0 - 2.0 * q + dm1 * dm1 * l;
    let mut lambda = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            lambda[a * d + b] = match (a, b) {
                (0, 0) => id,
                (0, _) | (_, 0) => edge,
                _ => l,
            };
        }
    }
    coherent_information(d, &lambda)
}

/// Residual of the cubic stationarity equation at the returned root.
pub fn stationarity_residual(c: &ChannelCoefficients) -> f64 {
    if c.mubs == 3 && c.dim > 2 {
        cubic_residual(c.dim, c.q, c.lambda_q).abs()
    } else {
        0.0
    }
}

/// Hermitian positive-semidefinite matrix with unit trace.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    dim: usize,
    m: CMat,
}

impl DensityMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        let dim = m.nrows();
        if dim != m.ncols() || dim == 0 {
            return Err(QkdError::DimensionMismatch {
                expected: dim,
                found: m.ncols(),
            });
        }
        if linalg::hermiticity_deviation(&m) > tol::ALGEBRAIC {
            return Err(QkdError::InvalidParameter(
                "density matrix is not Hermitian".into(),
            ));
        }
        let tr = linalg::trace_re(&m);
        if (tr - 1.0).abs() > tol::ALGEBRAIC {
            return Err(QkdError::InvalidParameter(format!(
                "density matrix trace {tr} is not 1"
            )));
        }
        let (vals, _) = linalg::eig_hermitian(&m);
        if vals.first().copied().unwrap_or(0.0) < tol::PSD_FLOOR {
            return Err(QkdError::InvalidParameter(format!(
                "density matrix has negative eigenvalue {:.3e}",
                vals[0]
            )));
        }
        Ok(DensityMatrix { dim, m })
    }

    pub fn pure(v: &crate::linalg::CVec) -> Result<Self> {
        let n = v.norm();
        let v = v.map(|z| z / Complex64::new(n, 0.0));
        Self::new(CMat::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj()))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix {
            dim: d,
            m: linalg::identity(d).map(|z| z / d as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }
}

/// Choi state of a channel: d²-dimensional, PSD, unit trace, and with both
/// partial traces equal to id/d for the unital trace-preserving families
/// built here.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    dim: usize,
    m: CMat,
}

impl ChoiMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }
}

/// Choi state R̃ = Σ λ_αβ |Φ_αβ⟩⟨Φ_αβ| with |Φ_αβ⟩ = (id ⊗ X^αZ^β)|Φ̃⟩.
pub fn choi_matrix(coeffs: &ChannelCoefficients) -> Result<ChoiMatrix> {
    let d = coeffs.dim;
    let mut m = CMat::zeros(d * d, d * d);
    for (idx, lam) in coeffs.entries() {
        if lam == 0.0 {
            continue;
        }
        let u = pauli_operator(d, idx)?;
        // (id ⊗ U)|Φ̃⟩ has amplitude U[b,i]/√d on |i⟩|b⟩.
        let mut v = crate::linalg::CVec::zeros(d * d);
        for i in 0..d {
            for b in 0..d {
                v[i * d + b] = u.matrix()[(b, i)] / Complex64::new((d as f64).sqrt(), 0.0);
            }
        }
        for r in 0..d * d {
            for c in 0..d * d {
                m[(r, c)] += v[r] * v[c].conj() * lam;
            }
        }
    }
    let choi = ChoiMatrix { dim: d, m };
    debug_assert!({
        let ta = linalg::partial_trace_a(&choi.m, d, d);
        let tb = linalg::partial_trace_b(&choi.m, d, d);
        let target = linalg::identity(d).map(|z| z / d as f64);
        linalg::max_abs_diff(&ta, &target) < tol::ALGEBRAIC
            && linalg::max_abs_diff(&tb, &target) < tol::ALGEBRAIC
    });
    Ok(choi)
}

/// Apply the channel as a Kraus sum Σ λ_αβ (X^αZ^β) ρ (X^αZ^β)†.
pub fn apply_channel(coeffs: &ChannelCoefficients, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let d = coeffs.dim;
    if rho.dim() != d {
        return Err(QkdError::DimensionMismatch {
            expected: d,
            found: rho.dim(),
        });
    }
    let mut out = CMat::zeros(d, d);
    for (idx, lam) in coeffs.entries() {
        if lam == 0.0 {
            continue;
        }
        let u = pauli_operator(d, idx)?;
        out += (u.matrix() * rho.matrix() * u.matrix().adjoint()).map(|z| z * lam);
    }
    DensityMatrix::new(out)
}

/// Apply the channel through the Choi contraction
/// N(ρ) = Tr_A[(ρ^⊤ ⊗ id)·d·R̃]; an independent route used to validate the
/// Kraus sum.
pub fn apply_channel_choi(
    coeffs: &ChannelCoefficients,
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    let d = coeffs.dim;
    if rho.dim() != d {
        return Err(QkdError::DimensionMismatch {
            expected: d,
            found: rho.dim(),
        });
    }
    let choi = choi_matrix(coeffs)?;
    let big = linalg::kron(&rho.matrix().transpose(), &linalg::identity(d));
    let prod = (big * choi.matrix()).map(|z| z * d as f64);
    DensityMatrix::new(linalg::partial_trace_a(&prod, d, d))
}
