//! Entropy primitives: Shannon and binary entropy, von Neumann entropy,
//! quantum relative entropy and its variance, and the classical-quantum
//! state σ_XE obtained by purifying the adversarial channel.
//!
//! Everything is in bits. Matrix functions act on the numerical support:
//! eigenvalues at or below [`tol::SUPPORT_CUTOFF`] are treated as exact
//! zeros, which the channel purification produces at Q = 0.
//!
//! The conditional pair (H(X|E), V(X|E)) is what the finite-key bounds
//! consume: H(X|E) = −D(ρ_XE‖id_X⊗ρ_E) and V(X|E) = V(ρ_XE‖id_X⊗ρ_E).
//! Both reduce to double sums over eigenpairs of the two states weighted by
//! squared eigenvector overlaps, which is how they are computed here.

use num_complex::Complex64;

use crate::channel::{ChannelCoefficients, DensityMatrix};
use crate::error::{QkdError, Result};
use crate::linalg::{self, CMat, CVec};
use crate::pauli::{self, BasisId};
use crate::tol;

/// Nonnegative weights summing to one.
#[derive(Debug, Clone)]
pub struct ProbVector {
    weights: Vec<f64>,
}

impl ProbVector {
    /// Validate and clip: entries in [−1e-15, 0) are rounded up to zero.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let mut w = weights;
        for v in &mut w {
            if *v < 0.0 {
                if *v < -1e-15 {
                    return Err(QkdError::InvalidParameter(format!(
                        "probability {v} is negative"
                    )));
                }
                *v = 0.0;
            }
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > tol::ALGEBRAIC {
            return Err(QkdError::InvalidParameter(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(ProbVector { weights: w })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Shannon entropy −Σ p log₂ p with 0·log 0 = 0.
pub fn shannon(p: &ProbVector) -> f64 {
    shannon_raw(p.weights())
}

pub(crate) fn shannon_raw(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.log2())
        .sum()
}

/// Binary entropy h(Q) = −(1−Q)log₂(1−Q) − Q log₂ Q.
pub fn binary_entropy(q: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&q));
    let mut h = 0.0;
    if q > 0.0 {
        h -= q * q.log2();
    }
    if q < 1.0 {
        h -= (1.0 - q) * (1.0 - q).log2();
    }
    h
}

/// Error-correction leakage at the Shannon limit for a d-ary alphabet:
/// leak_EC = H(X|Y) = h(Q) + Q·log₂(d−1).
pub fn d_ary_leak(d: usize, q: f64) -> f64 {
    binary_entropy(q) + q * ((d - 1) as f64).log2()
}

/// Von Neumann entropy −Tr ρ log₂ ρ via Hermitian eigendecomposition.
pub fn von_neumann(rho: &DensityMatrix) -> f64 {
    let (vals, _) = linalg::eig_hermitian(rho.matrix());
    vals.iter()
        .filter(|&&v| v > tol::SUPPORT_CUTOFF)
        .map(|&v| -v * v.log2())
        .sum()
}

/// Eigenpairs of a Hermitian matrix, keeping vectors as columns.
struct EigPairs {
    vals: Vec<f64>,
    vecs: CMat,
}

fn eig_pairs(m: &CMat) -> EigPairs {
    let (vals, vecs) = linalg::eig_hermitian(m);
    EigPairs { vals, vecs }
}

/// Sum of squared overlap weights of `rho`'s eigenvectors with the kernel of
/// `sigma`; this is the ρ-weight outside σ's support.
fn support_leak(rho: &EigPairs, sigma: &EigPairs) -> f64 {
    let mut leak = 0.0;
    for (j, &qv) in sigma.vals.iter().enumerate() {
        if qv > tol::SUPPORT_CUTOFF {
            continue;
        }
        let vj = sigma.vecs.column(j);
        for (i, &pv) in rho.vals.iter().enumerate() {
            if pv <= tol::SUPPORT_CUTOFF {
                continue;
            }
            leak += pv * rho.vecs.column(i).dotc(&vj).norm_sqr();
        }
    }
    leak
}

/// First and second moments of log₂ρ − log₂σ under ρ, computed from two
/// eigensystems; D = first moment, V = second − D².
fn relative_moments(rho: &EigPairs, sigma: &EigPairs) -> Result<(f64, f64)> {
    let leak = support_leak(rho, sigma);
    if leak > tol::SUPPORT_WEIGHT {
        return Err(QkdError::SupportViolation { weight: leak });
    }
    let mut mean = 0.0;
    let mut second = 0.0;
    for (i, &pv) in rho.vals.iter().enumerate() {
        if pv <= tol::SUPPORT_CUTOFF {
            continue;
        }
        let ui = rho.vecs.column(i);
        for (j, &qv) in sigma.vals.iter().enumerate() {
            if qv <= tol::SUPPORT_CUTOFF {
                continue;
            }
            let w = ui.dotc(&sigma.vecs.column(j)).norm_sqr();
            if w == 0.0 {
                continue;
            }
            let g = pv.log2() - qv.log2();
            mean += pv * w * g;
            second += pv * w * g * g;
        }
    }
    Ok((mean, second - mean * mean))
}

/// Quantum relative entropy D(ρ‖σ) = Tr[ρ(log₂ρ − log₂σ)].
///
/// Requires supp ρ ⊆ supp σ; violations beyond [`tol::SUPPORT_WEIGHT`]
/// are rejected.
pub fn rel_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(QkdError::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let (d, _) = relative_moments(&eig_pairs(rho.matrix()), &eig_pairs(sigma.matrix()))?;
    Ok(d)
}

/// Relative entropy variance V(ρ‖σ) = Tr[ρ(log₂ρ − log₂σ − D)²].
pub fn rel_entropy_variance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(QkdError::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let (_, v) = relative_moments(&eig_pairs(rho.matrix()), &eig_pairs(sigma.matrix()))?;
    Ok(v)
}

/// Block-diagonal classical-quantum state σ_XE: one environment block per
/// classical symbol.
///
/// Blocks are kept in factored form σ_x = G·G† (the purification makes every
/// block rank ≤ d with environment dimension d²), which lets the entropy
/// computation eigendecompose a d×d Gram matrix instead of a d²×d² block.
#[derive(Debug, Clone)]
pub struct CqState {
    env_dim: usize,
    blocks: Vec<CqBlock>,
}

#[derive(Debug, Clone)]
struct CqBlock {
    weight: f64,
    /// σ_x = factor · factor†, factor is env_dim × r.
    factor: CMat,
}

impl CqState {
    /// Assemble from explicit (weight, block) pairs. Each block must be a
    /// unit-trace density matrix; weights must sum to one.
    pub fn new(blocks: Vec<(f64, DensityMatrix)>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(QkdError::InvalidParameter("empty cq state".into()));
        }
        let env_dim = blocks[0].1.dim();
        let wsum: f64 = blocks.iter().map(|(w, _)| w).sum();
        if (wsum - 1.0).abs() > tol::ALGEBRAIC {
            return Err(QkdError::InvalidParameter(format!(
                "cq weights sum to {wsum}"
            )));
        }
        let blocks = blocks
            .into_iter()
            .map(|(weight, dm)| {
                if dm.dim() != env_dim {
                    return Err(QkdError::DimensionMismatch {
                        expected: env_dim,
                        found: dm.dim(),
                    });
                }
                // Factor via eigendecomposition: σ = Σ s vv† = (v√s)(v√s)†.
                let (vals, vecs) = linalg::eig_hermitian(dm.matrix());
                let cols: Vec<CVec> = vals
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s > tol::SUPPORT_CUTOFF)
                    .map(|(i, &s)| vecs.column(i).map(|z| z * s.sqrt()))
                    .collect();
                let factor = if cols.is_empty() {
                    CMat::zeros(env_dim, 1)
                } else {
                    CMat::from_columns(&cols)
                };
                Ok(CqBlock { weight, factor })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CqState { env_dim, blocks })
    }

    pub fn num_symbols(&self) -> usize {
        self.blocks.len()
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    pub fn block_weight(&self, x: usize) -> f64 {
        self.blocks[x].weight
    }

    /// Materialize the x-th block as a density matrix.
    pub fn block_density(&self, x: usize) -> DensityMatrix {
        let f = &self.blocks[x].factor;
        DensityMatrix::new(f * f.adjoint()).expect("cq block is PSD with unit trace by construction")
    }

    fn from_factors(factors: Vec<(f64, CMat)>, env_dim: usize) -> Self {
        CqState {
            env_dim,
            blocks: factors
                .into_iter()
                .map(|(weight, factor)| CqBlock { weight, factor })
                .collect(),
        }
    }
}

/// Purify the channel's Choi state and measure the sender side in the key
/// basis (the X eigenbasis), returning σ_XE with p_x = 1/d.
///
/// |ψ⟩_ABE = Σ_αβ √λ_αβ |Φ_αβ⟩_AB |αβ⟩_E with E of dimension d²; the block
/// for symbol x is σ_x,E = d·Tr_B[⟨x|ψ⟩⟨ψ|x⟩].
pub fn build_cq_state(coeffs: &ChannelCoefficients) -> Result<CqState> {
    build_cq_state_in_basis(coeffs, BasisId::X)
}

/// Same construction with an arbitrary measurement basis; the channel
/// families are symmetric enough that Z gives the same (H, V) as X, which is
/// asserted in tests rather than assumed.
pub fn build_cq_state_in_basis(coeffs: &ChannelCoefficients, basis: BasisId) -> Result<CqState> {
    let d = coeffs.dim();
    let de = d * d;
    // Amplitudes ψ[a-index i][b-index b][env e]; |Φ_αβ⟩ has amplitude
    // U_αβ[b,i]/√d on |i⟩|b⟩ and the purification tags each error with |αβ⟩.
    let mut psi = vec![Complex64::new(0.0, 0.0); d * d * de];
    let sqrt_d = (d as f64).sqrt();
    for (idx, lam) in coeffs.entries() {
        if lam <= 0.0 {
            continue;
        }
        let u = pauli::pauli_operator(d, idx)?;
        let e = idx.alpha * d + idx.beta;
        let amp = lam.sqrt() / sqrt_d;
        for i in 0..d {
            for b in 0..d {
                psi[(i * d + b) * de + e] = u.matrix()[(b, i)] * amp;
            }
        }
    }

    let key_basis = pauli::mub_eigenbasis(d, basis)?;
    let mut factors = Vec::with_capacity(d);
    for x in 0..d {
        let v = key_basis.vector(x);
        // G[b, e] = Σ_i conj(v_i) ψ[i, b, e]; block factor columns are the
        // √d-scaled rows g_b, giving σ_x = d Σ_b g_b g_b†.
        let mut g = CMat::zeros(de, d);
        for b in 0..d {
            for e in 0..de {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..d {
                    acc += v[i].conj() * psi[(i * d + b) * de + e];
                }
                g[(e, b)] = acc * sqrt_d;
            }
        }
        factors.push((1.0 / d as f64, g));
    }
    Ok(CqState::from_factors(factors, de))
}

/// Conditional entropy and variance of a cq state:
/// (H(X|E), V(X|E)) with H = −D(ρ_XE‖id_X⊗ρ_E), V = V(ρ_XE‖id_X⊗ρ_E).
///
/// The reference state id_X⊗ρ_E is block-diagonal with every block ρ_E, so
/// the double sum runs block by block against a single eigensystem of ρ_E.
pub fn cond_entropy_and_variance(state: &CqState) -> Result<(f64, f64)> {
    let de = state.env_dim;
    let mut rho_e = CMat::zeros(de, de);
    for b in &state.blocks {
        rho_e += (&b.factor * b.factor.adjoint()).map(|z| z * b.weight);
    }
    let env = eig_pairs(&rho_e);

    let mut mean = 0.0;
    let mut second = 0.0;
    for block in &state.blocks {
        if block.weight == 0.0 {
            continue;
        }
        // Eigenpairs of σ_x via the Gram matrix of its factor.
        let gram = block.factor.adjoint() * &block.factor;
        let (svals, svecs) = linalg::eig_hermitian(&gram);
        for (i, &s) in svals.iter().enumerate() {
            if s <= tol::SUPPORT_CUTOFF {
                continue;
            }
            let u = (&block.factor * svecs.column(i)).map(|z| z / Complex64::new(s.sqrt(), 0.0));
            let p = block.weight * s;
            let logp = p.log2();
            let mut outside = 0.0;
            for (j, &qv) in env.vals.iter().enumerate() {
                let w = u.dotc(&env.vecs.column(j)).norm_sqr();
                if qv <= tol::SUPPORT_CUTOFF {
                    outside += p * w;
                    continue;
                }
                let g = logp - qv.log2();
                mean += p * w * g;
                second += p * w * g * g;
            }
            if outside > tol::SUPPORT_WEIGHT {
                return Err(QkdError::SupportViolation { weight: outside });
            }
        }
    }
    let h = -mean;
    let v = (second - mean * mean).max(0.0);
    Ok((h, v))
}

/// Convenience: H(X|E) and V(X|E) for the channel family (d, mubs) at Q.
pub fn channel_hv(d: usize, mubs: u8, q: f64) -> Result<(f64, f64)> {
    let coeffs = crate::channel::solve(d, mubs, q)?;
    cond_entropy_and_variance(&build_cq_state(&coeffs)?)
}
