//! Qudit Pauli group generators and the three mutually unbiased bases.
//!
//! The generalized Pauli group on a d-level system is generated by the cyclic
//! shift X = Σ|k⊕1⟩⟨k| and the phase operator Z = Σ ω^k|k⟩⟨k| with
//! ω = exp(2πi/d). The eigenbases of Z, X and XZ form three mutually unbiased
//! bases for every d ≥ 2: every cross-basis overlap satisfies |⟨u|v⟩|² = 1/d.
//!
//! The Z and X eigenbases are analytic (computational and discrete-Fourier
//! vectors); the XZ eigenbasis is computed by a numerical eigendecomposition
//! of the unitary XZ, with eigenvectors ordered by eigenvalue phase and the
//! global phase of each vector fixed deterministically.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{QkdError, Result};
use crate::linalg::{self, CMat, CVec};
use crate::tol;

/// Exponent pair (α, β) labeling the Pauli operator X^α Z^β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliIndex {
    pub alpha: usize,
    pub beta: usize,
}

impl PauliIndex {
    /// Build an index with both exponents reduced modulo d.
    pub fn new(alpha: usize, beta: usize, d: usize) -> Self {
        PauliIndex {
            alpha: alpha % d,
            beta: beta % d,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.alpha == 0 && self.beta == 0
    }
}

/// A square complex matrix validated to be unitary.
#[derive(Debug, Clone)]
pub struct UnitaryMatrix {
    dim: usize,
    m: CMat,
}

impl UnitaryMatrix {
    /// Wrap a matrix, checking U·U† = I to within [`tol::ALGEBRAIC`].
    pub fn new(m: CMat) -> Result<Self> {
        let dim = m.nrows();
        if dim != m.ncols() || dim == 0 {
            return Err(QkdError::DimensionMismatch {
                expected: dim,
                found: m.ncols(),
            });
        }
        let dev = linalg::unitarity_deviation(&m);
        if dev > tol::ALGEBRAIC {
            return Err(QkdError::InvalidParameter(format!(
                "matrix is not unitary: deviation {dev:.3e}"
            )));
        }
        Ok(UnitaryMatrix { dim, m })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }
}

/// Identifier of one of the three bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BasisId {
    /// Computational basis (eigenvectors of Z).
    Z,
    /// Fourier basis (eigenvectors of X).
    X,
    /// Eigenvectors of the product XZ.
    XZ,
}

impl BasisId {
    pub const ALL: [BasisId; 3] = [BasisId::Z, BasisId::X, BasisId::XZ];

    pub fn label(self) -> &'static str {
        match self {
            BasisId::Z => "Z",
            BasisId::X => "X",
            BasisId::XZ => "XZ",
        }
    }
}

impl std::fmt::Display for BasisId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One orthonormal eigenbasis of a Pauli generator.
#[derive(Debug, Clone)]
pub struct MubBasis {
    dim: usize,
    basis_id: BasisId,
    /// Basis vectors as matrix columns, in the Z-basis representation.
    vectors: CMat,
}

impl MubBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis_id(&self) -> BasisId {
        self.basis_id
    }

    /// Matrix whose j-th column is the j-th basis vector.
    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    pub fn vector(&self, j: usize) -> CVec {
        self.vectors.column(j).into_owned()
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(QkdError::InvalidDimension(d))
    } else {
        Ok(())
    }
}

/// The primitive d-th root of unity exp(2πi/d).
pub fn omega(d: usize) -> Complex64 {
    Complex64::from_polar(1.0, TAU / d as f64)
}

/// Build the generators (X_d, Z_d): the cyclic shift and the phase operator.
pub fn make_generators(d: usize) -> Result<(UnitaryMatrix, UnitaryMatrix)> {
    check_dim(d)?;
    let mut x = CMat::zeros(d, d);
    for k in 0..d {
        x[((k + 1) % d, k)] = Complex64::new(1.0, 0.0);
    }
    let z = CMat::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, TAU * i as f64 / d as f64)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok((UnitaryMatrix::new(x)?, UnitaryMatrix::new(z)?))
}

/// The Pauli group element X^α Z^β, built by repeated multiplication.
pub fn pauli_operator(d: usize, idx: PauliIndex) -> Result<UnitaryMatrix> {
    check_dim(d)?;
    let idx = PauliIndex::new(idx.alpha, idx.beta, d);
    let (x, z) = make_generators(d)?;
    let mut m = linalg::identity(d);
    for _ in 0..idx.alpha {
        m = x.matrix() * m;
    }
    for _ in 0..idx.beta {
        m = m * z.matrix();
    }
    UnitaryMatrix::new(m)
}

/// Eigenbasis of the generator selected by `basis_id`.
///
/// Z: computational vectors |k⟩ (eigenvalue ω^k). X: Fourier columns
/// f_j = Σ_k ω^{jk}|k⟩/√d (eigenvalue ω^{−j}). XZ: numerical
/// eigendecomposition, vectors ordered by eigenvalue phase in [0, 2π).
pub fn mub_eigenbasis(d: usize, basis_id: BasisId) -> Result<MubBasis> {
    check_dim(d)?;
    let vectors = match basis_id {
        BasisId::Z => linalg::identity(d),
        BasisId::X => CMat::from_fn(d, d, |k, j| {
            Complex64::from_polar(1.0 / (d as f64).sqrt(), TAU * (j * k) as f64 / d as f64)
        }),
        BasisId::XZ => {
            let (x, z) = make_generators(d)?;
            let xz = x.matrix() * z.matrix();
            let (_phases, vecs) = linalg::eig_unitary(&xz)?;
            vecs
        }
    };
    Ok(MubBasis {
        dim: d,
        basis_id,
        vectors,
    })
}

/// Maximum deviation of two bases from mutual unbiasedness:
/// max over vector pairs of | |⟨u|v⟩|² − 1/d |.
pub fn check_unbiased(b1: &MubBasis, b2: &MubBasis) -> Result<f64> {
    if b1.dim != b2.dim {
        return Err(QkdError::DimensionMismatch {
            expected: b1.dim,
            found: b2.dim,
        });
    }
    let d = b1.dim;
    let overlaps = b1.vectors.adjoint() * &b2.vectors;
    let target = 1.0 / d as f64;
    Ok(overlaps
        .iter()
        .map(|z| (z.norm_sqr() - target).abs())
        .fold(0.0, f64::max))
}

/// The generator that each basis diagonalizes.
pub fn basis_generator(d: usize, basis_id: BasisId) -> Result<UnitaryMatrix> {
    let (x, z) = make_generators(d)?;
    Ok(match basis_id {
        BasisId::Z => z,
        BasisId::X => x,
        BasisId::XZ => UnitaryMatrix::new(x.matrix() * z.matrix())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn qubit_generators_are_the_standard_paulis() {
        let (x, z) = make_generators(2).unwrap();
        let x_expect = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let z_expect = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!(linalg::max_abs_diff(x.matrix(), &x_expect) < 1e-15);
        assert!(linalg::max_abs_diff(z.matrix(), &z_expect) < 1e-12);
    }

    #[test]
    fn qutrit_z_has_cube_roots_of_unity() {
        let (_, z) = make_generators(3).unwrap();
        for k in 0..3 {
            let expect = Complex64::from_polar(1.0, TAU * k as f64 / 3.0);
            assert!((z.matrix()[(k, k)] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_dimension_below_two() {
        assert!(matches!(make_generators(1), Err(QkdError::InvalidDimension(1))));
        assert!(matches!(make_generators(0), Err(QkdError::InvalidDimension(0))));
    }

    #[test]
    fn pauli_identity_and_qubit_xz() {
        let id = pauli_operator(3, PauliIndex::new(0, 0, 3)).unwrap();
        assert!(linalg::max_abs_diff(id.matrix(), &linalg::identity(3)) < 1e-15);

        let xz = pauli_operator(2, PauliIndex::new(1, 1, 2)).unwrap();
        let expect =
            CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(linalg::max_abs_diff(xz.matrix(), &expect) < 1e-12);
    }

    #[test]
    fn weyl_relation_holds_for_all_dims() {
        // With X = Σ|k⊕1⟩⟨k| and Z = Σω^k|k⟩⟨k| the commutation reads
        // Z·X = ω·X·Z, i.e. X·Z = e^{-2πi/d}·Z·X.
        for d in 2..=7 {
            let (x, z) = make_generators(d).unwrap();
            let zx = z.matrix() * x.matrix();
            let xz_scaled = (x.matrix() * z.matrix()).map(|v| v * omega(d));
            assert!(
                linalg::max_abs_diff(&zx, &xz_scaled) < tol::ALGEBRAIC,
                "Weyl relation failed for d={d}"
            );
        }
    }

    #[test]
    fn diagonal_powers_match_xz_powers_up_to_kappa_phase() {
        // X^α Z^α = (XZ)^α e^{iκζ} with κ = (α²−α)/2 and ζ = −2π/d.
        for d in 2..=7usize {
            let (x, z) = make_generators(d).unwrap();
            let xz = x.matrix() * z.matrix();
            for alpha in 0..d {
                let lhs = pauli_operator(d, PauliIndex::new(alpha, alpha, d)).unwrap();
                let mut rhs = linalg::identity(d);
                for _ in 0..alpha {
                    rhs = &rhs * &xz;
                }
                let kappa = (alpha * alpha - alpha) / 2;
                let phase = Complex64::from_polar(1.0, -(TAU / d as f64) * kappa as f64);
                let rhs = rhs.map(|v| v * phase);
                assert!(
                    linalg::max_abs_diff(lhs.matrix(), &rhs) < tol::EIGEN,
                    "kappa identity failed for d={d}, alpha={alpha}"
                );
            }
        }
    }

    #[test]
    fn xz_to_fifth_power_is_identity_for_d5() {
        let xz = pauli_operator(5, PauliIndex::new(1, 1, 5)).unwrap();
        let mut m = linalg::identity(5);
        for _ in 0..5 {
            m = &m * xz.matrix();
        }
        assert!(linalg::max_abs_diff(&m, &linalg::identity(5)) < 1e-12);
    }

    #[test]
    fn x_basis_for_qubit_is_hadamard() {
        let b = mub_eigenbasis(2, BasisId::X).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        let expect = CMat::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]);
        assert!(linalg::max_abs_diff(b.vectors(), &expect) < 1e-12);
    }

    #[test]
    fn eigenbasis_vectors_satisfy_eigen_equation() {
        for d in 2..=7 {
            for basis in BasisId::ALL {
                let b = mub_eigenbasis(d, basis).unwrap();
                let g = basis_generator(d, basis).unwrap();
                for j in 0..d {
                    let v = b.vector(j);
                    let gv = g.matrix() * &v;
                    let lambda = v.dotc(&gv);
                    assert_abs_diff_eq!(lambda.norm(), 1.0, epsilon = 1e-10);
                    let residual = (&gv - v.map(|z| z * lambda)).norm();
                    assert!(
                        residual < tol::EIGEN,
                        "residual {residual:.2e} for d={d} basis={basis} j={j}"
                    );
                }
            }
        }
    }

    #[test]
    fn xz_basis_phases_are_sorted_and_vectors_orthonormal() {
        for d in 2..=7 {
            let b = mub_eigenbasis(d, BasisId::XZ).unwrap();
            assert!(linalg::unitarity_deviation(b.vectors()) < tol::EIGEN);
        }
    }

    #[test]
    fn composite_dims_are_not_degenerate() {
        // XZ has characteristic polynomial λ^d = ω^{d(d−1)/2}, so its spectrum
        // is nondegenerate even for d = 4, 6; both must take the Ok branch.
        assert!(mub_eigenbasis(4, BasisId::XZ).is_ok());
        assert!(mub_eigenbasis(6, BasisId::XZ).is_ok());
    }

    #[test]
    fn fourier_basis_is_exactly_unbiased_to_z() {
        let z = mub_eigenbasis(5, BasisId::Z).unwrap();
        let x = mub_eigenbasis(5, BasisId::X).unwrap();
        assert!(check_unbiased(&z, &x).unwrap() < tol::ALGEBRAIC);
    }

    #[test]
    fn same_basis_is_maximally_biased() {
        let z = mub_eigenbasis(3, BasisId::Z).unwrap();
        let dev = check_unbiased(&z, &z).unwrap();
        assert_abs_diff_eq!(dev, 1.0 - 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn xz_basis_is_unbiased_for_d7() {
        let z = mub_eigenbasis(7, BasisId::Z).unwrap();
        let xz = mub_eigenbasis(7, BasisId::XZ).unwrap();
        assert!(check_unbiased(&z, &xz).unwrap() < tol::EIGEN);
    }

    #[test]
    fn all_three_bases_pairwise_unbiased() {
        for d in 2..=7 {
            let bases: Vec<_> = BasisId::ALL
                .iter()
                .map(|&id| mub_eigenbasis(d, id).unwrap())
                .collect();
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let dev = check_unbiased(&bases[i], &bases[j]).unwrap();
                    assert!(
                        dev < tol::EIGEN,
                        "bases {} and {} biased by {dev:.2e} at d={d}",
                        bases[i].basis_id(),
                        bases[j].basis_id()
                    );
                }
            }
        }
    }

    #[test]
    fn generated_operators_are_unitary() {
        for d in 2..=7usize {
            for alpha in 0..d {
                for beta in 0..d {
                    let u = pauli_operator(d, PauliIndex::new(alpha, beta, d)).unwrap();
                    assert!(linalg::unitarity_deviation(u.matrix()) < tol::ALGEBRAIC);
                }
            }
        }
    }

    #[test]
    fn mismatched_dims_rejected_in_unbiased_check() {
        let a = mub_eigenbasis(2, BasisId::Z).unwrap();
        let b = mub_eigenbasis(3, BasisId::Z).unwrap();
        assert!(matches!(
            check_unbiased(&a, &b),
            Err(QkdError::DimensionMismatch { .. })
        ));
    }
}
