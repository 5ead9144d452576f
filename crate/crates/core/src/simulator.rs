//! Monte-Carlo simulation of the 2- and 3-basis qudit protocols over the
//! derived Pauli channels.
//!
//! Basis choice is asymmetric: the X eigenbasis carries the key with
//! probability `key_basis_prob`, the remaining mass is split evenly over the
//! estimation bases (Z for 2 bases; Z and XZ for 3). The channel is
//! Pauli-diagonal, so error sampling is classical: an index (α, β) drawn
//! from {λ_αβ} shifts the sifted symbol by a basis-dependent amount. That
//! shift table is not hard-coded — it is derived once per session by
//! conjugating each basis through every error operator, so the symbol
//! arithmetic stays honest against the matrix algebra (Z shifts by α, X by
//! β, XZ by α−β).
//!
//! Sessions are reproducible bit for bit: a single ChaCha12 stream seeded
//! from the config drives every draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::channel::{self, ChannelCoefficients};
use crate::error::{QkdError, Result};
use crate::finite_key::{self, FiniteBound, FiniteKeyParams, HvCache};
use crate::pauli::{self, BasisId, PauliIndex};

/// Configuration of one simulated session.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProtocolConfig {
    pub d: usize,
    pub mubs: u8,
    /// Channel error rate the Pauli errors are sampled from.
    pub q: f64,
    pub eps: f64,
    /// Total transmissions before sifting.
    pub rounds: u64,
    /// Probability of choosing the key basis; the estimation bases share the
    /// rest evenly.
    pub key_basis_prob: f64,
    pub seed: u64,
    /// Bound used to size the secret output.
    pub bound: FiniteBound,
}

impl ProtocolConfig {
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
        if self.rounds < 1 {
            return Err(QkdError::InvalidParameter("rounds must be positive".into()));
        }
        if !(self.key_basis_prob > 0.0 && self.key_basis_prob < 1.0) {
            return Err(QkdError::InvalidParameter(format!(
                "key_basis_prob {} outside (0, 1)",
                self.key_basis_prob
            )));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(QkdError::InvalidParameter(format!(
                "epsilon {} outside (0, 1)",
                self.eps
            )));
        }
        if !self.bound.supports_mubs(self.mubs) {
            return Err(QkdError::InvalidParameter(format!(
                "bound '{}' does not apply to the {}-basis protocol",
                self.bound, self.mubs
            )));
        }
        Ok(())
    }

    fn bases(&self) -> Vec<(BasisId, f64)> {
        let rest = 1.0 - self.key_basis_prob;
        if self.mubs == 2 {
            vec![(BasisId::X, self.key_basis_prob), (BasisId::Z, rest)]
        } else {
            vec![
                (BasisId::X, self.key_basis_prob),
                (BasisId::Z, rest / 2.0),
                (BasisId::XZ, rest / 2.0),
            ]
        }
    }
}

/// Per-basis sift and error tallies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BasisTally {
    pub basis: BasisId,
    pub sifted: u64,
    pub errors: u64,
}

/// Outcome of one simulated session.
#[derive(Debug, Clone, Serialize)]
pub struct SessionReport {
    pub config: ProtocolConfig,
    /// Sifted length N = key symbols + estimation symbols.
    pub n_sifted: u64,
    /// Estimation symbols consumed by parameter estimation.
    pub k_used: u64,
    /// Pooled error fraction over the estimation bases.
    pub empirical_q: f64,
    /// Serfling penalty at the realized (N, k).
    pub nu: f64,
    pub bound: FiniteBound,
    /// Finite rate of the configured bound at the realized k and empirical Q.
    pub rate: f64,
    /// (N − k) · rate.
    pub secret_bits: f64,
    pub per_basis: Vec<BasisTally>,
}

/// Symbol-shift table per basis, derived from operator conjugation.
#[derive(Debug, Clone)]
pub struct ShiftTable {
    d: usize,
    /// shifts[basis_index][α·d + β]
    shifts: [Vec<usize>; 3],
}

impl ShiftTable {
    /// Derive the table for dimension d by expressing every Pauli error in
    /// every basis: U maps basis vector m to basis vector m+s (times a
    /// phase), with s constant over m for Pauli operators.
    pub fn derive(d: usize) -> Result<Self> {
        let mut shifts: [Vec<usize>; 3] = [vec![0; d * d], vec![0; d * d], vec![0; d * d]];
        for (bi, &basis) in BasisId::ALL.iter().enumerate() {
            let b = pauli::mub_eigenbasis(d, basis)?;
            for alpha in 0..d {
                for beta in 0..d {
                    let u = pauli::pauli_operator(d, PauliIndex::new(alpha, beta, d))?;
                    let c = b.vectors().adjoint() * u.matrix() * b.vectors();
                    let mut shift = None;
                    for m in 0..d {
                        let mut j_best = 0;
                        let mut mag_best = 0.0;
                        for j in 0..d {
                            let mag = c[(j, m)].norm();
                            if mag > mag_best {
                                mag_best = mag;
                                j_best = j;
                            }
                        }
                        if (mag_best - 1.0).abs() > 1e-8 {
                            return Err(QkdError::InvalidParameter(format!(
                                "error ({alpha},{beta}) does not permute the {basis} basis"
                            )));
                        }
                        let s = (j_best + d - m) % d;
                        match shift {
                            None => shift = Some(s),
                            Some(prev) if prev != s => {
                                return Err(QkdError::InvalidParameter(format!(
                                    "error ({alpha},{beta}) shifts the {basis} basis unevenly"
                                )));
                            }
                            _ => {}
                        }
                    }
                    shifts[bi][alpha * d + beta] = shift.unwrap();
                }
            }
        }
        Ok(ShiftTable { d, shifts })
    }

    fn basis_index(basis: BasisId) -> usize {
        match basis {
            BasisId::Z => 0,
            BasisId::X => 1,
            BasisId::XZ => 2,
        }
    }

    /// Symbol shift the error (α, β) causes in `basis`.
    pub fn shift(&self, basis: BasisId, idx: PauliIndex) -> usize {
        self.shifts[Self::basis_index(basis)][idx.alpha * self.d + idx.beta]
    }

    /// Number of non-identity errors that disturb `basis`.
    pub fn harmful_count(&self, basis: BasisId) -> usize {
        let tbl = &self.shifts[Self::basis_index(basis)];
        (0..self.d * self.d)
            .filter(|&i| i != 0 && tbl[i] != 0)
            .count()
    }
}

/// Draw an error index from the coefficient table by CDF inversion.
struct ErrorSampler {
    d: usize,
    cdf: Vec<f64>,
}

impl ErrorSampler {
    fn new(coeffs: &ChannelCoefficients) -> Self {
        let mut cdf = Vec::with_capacity(coeffs.probabilities().len());
        let mut acc = 0.0;
        for &p in coeffs.probabilities() {
            acc += p;
            cdf.push(acc);
        }
        ErrorSampler {
            d: coeffs.dim(),
            cdf,
        }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> PauliIndex {
        let u: f64 = rng.gen();
        let pos = self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1);
        PauliIndex {
            alpha: pos / self.d,
            beta: pos % self.d,
        }
    }
}

fn draw_basis(rng: &mut ChaCha12Rng, bases: &[(BasisId, f64)]) -> BasisId {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(basis, p) in bases {
        acc += p;
        if u < acc {
            return basis;
        }
    }
    bases[bases.len() - 1].0
}

/// Run one session: transmit, sift, estimate, and size the secret output
/// with the configured bound at the realized sacrifice size.
pub fn run_session(cfg: &ProtocolConfig) -> Result<SessionReport> {
    cfg.validate()?;
    let coeffs = channel::solve(cfg.d, cfg.mubs, cfg.q)?;
    let table = ShiftTable::derive(cfg.d)?;
    let sampler = ErrorSampler::new(&coeffs);
    let bases = cfg.bases();
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    let d = cfg.d;
    let mut tallies: Vec<BasisTally> = bases
        .iter()
        .map(|&(basis, _)| BasisTally {
            basis,
            sifted: 0,
            errors: 0,
        })
        .collect();
    let mut est_x: Vec<u8> = Vec::new();
    let mut est_y: Vec<u8> = Vec::new();
    let mut key_count = 0u64;

    for _ in 0..cfg.rounds {
        let a_basis = draw_basis(&mut rng, &bases);
        let b_basis = draw_basis(&mut rng, &bases);
        if a_basis != b_basis {
            continue;
        }
        let x = rng.gen_range(0..d);
        let err = sampler.sample(&mut rng);
        let y = (x + table.shift(a_basis, err)) % d;

        let tally = tallies.iter_mut().find(|t| t.basis == a_basis).unwrap();
        tally.sifted += 1;
        if x != y {
            tally.errors += 1;
        }
        if a_basis == BasisId::X {
            key_count += 1;
        } else {
            est_x.push(x as u8);
            est_y.push(y as u8);
        }
    }

    let k_used = est_x.len() as u64;
    if k_used < 2 {
        return Err(QkdError::InsufficientSamples {
            needed: 2,
            got: k_used as usize,
        });
    }
    if key_count == 0 {
        return Err(QkdError::InsufficientSamples { needed: 1, got: 0 });
    }
    let n_sifted = key_count + k_used;
    let est_errors = finite_key::error_count(&est_x, &est_y, d)?;
    let empirical_q = est_errors as f64 / k_used as f64;

    let nu = finite_key::serfling_nu(n_sifted, k_used, cfg.eps)?;
    let params = FiniteKeyParams::new(d, cfg.mubs, empirical_q, cfg.eps, n_sifted)?;
    let cache = HvCache::new();
    let eval = finite_key::rate_at_k(cfg.bound, &params, k_used, &cache)?;
    let rate = eval.rate_raw.max(0.0);

    Ok(SessionReport {
        config: *cfg,
        n_sifted,
        k_used,
        empirical_q,
        nu,
        bound: cfg.bound,
        rate,
        secret_bits: (n_sifted - k_used) as f64 * rate,
        per_basis: tallies,
    })
}

/// Monte-Carlo estimate of the per-basis error rates, sampling `rounds`
/// channel errors per monitored basis from the coefficient table.
pub fn empirical_error_rates(cfg: &ProtocolConfig, rounds: u64) -> Result<Vec<(BasisId, f64)>> {
    cfg.validate()?;
    let coeffs = channel::solve(cfg.d, cfg.mubs, cfg.q)?;
    let table = ShiftTable::derive(cfg.d)?;
    let sampler = ErrorSampler::new(&coeffs);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    let mut counts = vec![0u64; coeffs.monitored_bases().len()];
    for _ in 0..rounds {
        let err = sampler.sample(&mut rng);
        for (i, &basis) in coeffs.monitored_bases().iter().enumerate() {
            if table.shift(basis, err) != 0 {
                counts[i] += 1;
            }
        }
    }
    Ok(coeffs
        .monitored_bases()
        .iter()
        .zip(counts)
        .map(|(&basis, c)| (basis, c as f64 / rounds as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::error_flips_basis;

    fn config(d: usize, mubs: u8, q: f64, rounds: u64, seed: u64) -> ProtocolConfig {
        ProtocolConfig {
            d,
            mubs,
            q,
            eps: 1e-10,
            rounds,
            key_basis_prob: 0.9,
            seed,
            bound: if mubs == 2 {
                FiniteBound::Uncertainty
            } else {
                FiniteBound::SecondOrder
            },
        }
    }

    #[test]
    fn shift_table_matches_the_algebraic_rule() {
        // Conjugation-derived shifts must equal α (Z basis), β (X basis) and
        // α−β mod d (XZ basis).
        for d in 2..=7usize {
            let t = ShiftTable::derive(d).unwrap();
            for alpha in 0..d {
                for beta in 0..d {
                    let idx = PauliIndex::new(alpha, beta, d);
                    assert_eq!(t.shift(BasisId::Z, idx), alpha, "Z shift at d={d}");
                    assert_eq!(t.shift(BasisId::X, idx), beta, "X shift at d={d}");
                    assert_eq!(
                        t.shift(BasisId::XZ, idx),
                        (alpha + d - beta) % d,
                        "XZ shift at d={d} ({alpha},{beta})"
                    );
                }
            }
        }
    }

    #[test]
    fn harm_table_matches_counting_identity() {
        // d² − 1 − 3(d−1) = (d−2)(d−1) cross errors plus 2(d−1) generator
        // errors disturb the XZ basis.
        for d in 2..=7usize {
            let t = ShiftTable::derive(d).unwrap();
            let expect = (d - 2) * (d - 1) + 2 * (d - 1);
            assert_eq!(t.harmful_count(BasisId::XZ), expect, "d={d}");
            assert_eq!(t.harmful_count(BasisId::Z), d * (d - 1));
            assert_eq!(t.harmful_count(BasisId::X), d * (d - 1));
        }
    }

    #[test]
    fn shift_table_agrees_with_flip_predicate() {
        for d in 2..=7usize {
            let t = ShiftTable::derive(d).unwrap();
            for basis in BasisId::ALL {
                for alpha in 0..d {
                    for beta in 0..d {
                        let idx = PauliIndex::new(alpha, beta, d);
                        assert_eq!(
                            t.shift(basis, idx) != 0,
                            error_flips_basis(idx, basis),
                            "flip predicate mismatch at d={d} basis={basis}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let cfg = config(3, 3, 0.05, 20_000, 42);
        let a = run_session(&cfg).unwrap();
        let b = run_session(&cfg).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn different_seeds_differ() {
        let a = run_session(&config(3, 3, 0.05, 20_000, 1)).unwrap();
        let b = run_session(&config(3, 3, 0.05, 20_000, 2)).unwrap();
        assert_ne!(a.empirical_q.to_bits(), b.empirical_q.to_bits());
    }

    #[test]
    fn noiseless_channel_yields_zero_empirical_error() {
        let report = run_session(&config(2, 2, 0.0, 50_000, 7)).unwrap();
        assert_eq!(report.empirical_q, 0.0);
        assert!(report.rate > 0.0);
        assert_eq!(
            report.secret_bits,
            (report.n_sifted - report.k_used) as f64 * report.rate
        );
    }

    #[test]
    fn empirical_rates_within_three_sigma() {
        for (d, mubs) in [(2usize, 2u8), (3, 3), (7, 3)] {
            let cfg = config(d, mubs, 0.05, 1, 11);
            let rounds = 200_000u64;
            let rates = empirical_error_rates(&cfg, rounds).unwrap();
            let sigma = (0.05f64 * 0.95 / rounds as f64).sqrt();
            for (basis, rate) in rates {
                assert!(
                    (rate - 0.05).abs() < 3.0 * sigma,
                    "basis {basis} rate {rate} at d={d} mubs={mubs}"
                );
            }
        }
    }

    #[test]
    fn identity_channel_has_no_errors_in_any_basis() {
        let cfg = config(5, 3, 0.0, 1, 3);
        for (_, rate) in empirical_error_rates(&cfg, 10_000).unwrap() {
            assert_eq!(rate, 0.0);
        }
    }

    #[test]
    fn session_error_tallies_track_q() {
        let cfg = ProtocolConfig {
            key_basis_prob: 0.5,
            ..config(3, 3, 0.05, 400_000, 19)
        };
        let report = run_session(&cfg).unwrap();
        for tally in &report.per_basis {
            let rate = tally.errors as f64 / tally.sifted as f64;
            let sigma = (0.05f64 * 0.95 / tally.sifted as f64).sqrt();
            assert!(
                (rate - 0.05).abs() < 3.0 * sigma,
                "basis {} rate {rate} over {} sifted",
                tally.basis,
                tally.sifted
            );
        }
    }

    #[test]
    fn sifting_fraction_converges() {
        let cfg = config(2, 3, 0.02, 300_000, 5);
        let report = run_session(&cfg).unwrap();
        let p_key = cfg.key_basis_prob;
        let p_est = (1.0 - p_key) / 2.0;
        let expect = p_key * p_key + 2.0 * p_est * p_est;
        let got = report.n_sifted as f64 / cfg.rounds as f64;
        let sigma = (expect * (1.0 - expect) / cfg.rounds as f64).sqrt();
        assert!(
            (got - expect).abs() < 3.0 * sigma,
            "sift fraction {got} vs {expect}"
        );
    }

    #[test]
    fn starved_estimation_aborts_distinguishably() {
        let cfg = ProtocolConfig {
            rounds: 3,
            ..config(2, 2, 0.05, 3, 23)
        };
        match run_session(&cfg) {
            Err(QkdError::InsufficientSamples { .. }) => {}
            other => panic!("expected InsufficientSamples, got {other:?}"),
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = config(3, 3, 0.05, 1_000, 1);
        cfg.key_basis_prob = 1.0;
        assert!(run_session(&cfg).is_err());
        let mut cfg = config(3, 3, 0.05, 1_000, 1);
        cfg.bound = FiniteBound::Uncertainty;
        assert!(run_session(&cfg).is_err());
        let cfg = config(3, 4, 0.05, 1_000, 1);
        assert!(run_session(&cfg).is_err());
    }
}
