//! Complex dense linear algebra helpers: Hermitian eigendecomposition,
//! eigendecomposition of unitary (normal) matrices, Kronecker products and
//! partial traces over bipartite indices.
//!
//! Everything here works on `DMatrix<Complex64>` with the row-major tensor
//! convention `kron(A, B)[(iA*dB+iB), (jA*dB+jB)] = A[iA,jA] * B[iB,jB]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{QkdError, Result};
use crate::tol;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest entrywise absolute difference between two matrices.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Deviation of `u` from unitarity: max-abs entry of U·U† − I.
pub fn unitarity_deviation(u: &CMat) -> f64 {
    let n = u.nrows();
    max_abs_diff(&(u * u.adjoint()), &identity(n))
}

/// Deviation of `m` from Hermiticity: max-abs entry of M − M†.
pub fn hermiticity_deviation(m: &CMat) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Eigenvalues (ascending) and eigenvector columns of a Hermitian matrix.
pub fn eig_hermitian(m: &CMat) -> (Vec<f64>, CMat) {
    // A NaN entry sends the QL iteration into an endless loop; fail loudly.
    assert!(
        m.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        "non-finite entry passed to the eigensolver"
    );
    let se = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vecs = CMat::from_columns(
        &order
            .iter()
            .map(|&i| se.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (vals, vecs)
}

/// Eigendecomposition of a unitary matrix.
///
/// A unitary U is normal, so it is diagonalized by simultaneously
/// diagonalizing the commuting Hermitian pair H = (U+U†)/2 and
/// K = (U−U†)/2i: eigenvectors of H are grouped into eigenvalue clusters and
/// K is rediagonalized inside each cluster. Returns eigenphases θ ∈ [0, 2π)
/// sorted ascending with eigenvector columns aligned, each rotated so its
/// largest-magnitude component is real positive.
///
/// Fails with [`QkdError::DegenerateEigenvalues`] when two eigenphases are
/// closer than [`tol::PHASE_GAP`] (circularly), since the basis is then not
/// canonical.
pub fn eig_unitary(u: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = u.nrows();
    debug_assert!(unitarity_deviation(u) < tol::ALGEBRAIC * n as f64);
    let h = (u + u.adjoint()).map(|z| z * 0.5);
    let k = (u - u.adjoint()).map(|z| z * Complex64::new(0.0, -0.5));

    let (hvals, hvecs) = eig_hermitian(&h);

    // Split the spectrum of H into clusters; eigenvalues of H are cos θ, so
    // θ and 2π−θ collide and must be separated by K = sin θ.
    const CLUSTER_GAP: f64 = 1e-6;
    let mut columns: Vec<CVec> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (hvals[end] - hvals[end - 1]).abs() < CLUSTER_GAP {
            end += 1;
        }
        if end - start == 1 {
            columns.push(hvecs.column(start).into_owned());
        } else {
            let vc = hvecs.columns(start, end - start).into_owned();
            let kk = vc.adjoint() * &k * &vc;
            let (_, w) = eig_hermitian(&kk);
            let rotated = vc * w;
            for c in rotated.column_iter() {
                columns.push(c.into_owned());
            }
        }
        start = end;
    }

    // Rayleigh quotients give the unitary eigenvalues; verify the residual.
    let mut pairs: Vec<(f64, CVec)> = Vec::with_capacity(n);
    for v in columns {
        let uv = u * &v;
        let lambda = v.dotc(&uv);
        let residual = (&uv - v.map(|z| z * lambda)).norm();
        if residual > tol::EIGEN * (n as f64) {
            return Err(QkdError::InvalidParameter(format!(
                "unitary eigendecomposition residual {residual:.3e}; matrix may not be normal"
            )));
        }
        let mut theta = lambda.arg();
        if theta < 0.0 {
            theta += std::f64::consts::TAU;
        }
        pairs.push((theta % std::f64::consts::TAU, v));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let min_gap = (0..n)
        .map(|i| {
            let next = pairs[(i + 1) % n].0 + if i + 1 == n { std::f64::consts::TAU } else { 0.0 };
            next - pairs[i].0
        })
        .fold(f64::INFINITY, f64::min);
    if n > 1 && min_gap < tol::PHASE_GAP {
        return Err(QkdError::DegenerateEigenvalues { dim: n, gap: min_gap });
    }

    let phases: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let vecs = CMat::from_columns(
        &pairs
            .into_iter()
            .map(|(_, v)| fix_global_phase(v))
            .collect::<Vec<_>>(),
    );
    Ok((phases, vecs))
}

/// Rotate a vector so its largest-magnitude component (smallest index on
/// near-ties) becomes real positive; deterministic across runs.
pub fn fix_global_phase(v: CVec) -> CVec {
    let mut best = 0;
    let mut best_norm = 0.0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > best_norm + 1e-12 {
            best_norm = z.norm();
            best = i;
        }
    }
    if best_norm == 0.0 {
        return v;
    }
    let phase = v[best] / best_norm;
    v.map(|z| z / phase)
}

/// Kronecker product with the row-major block convention.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Partial trace over the second factor of a d_a⊗d_b bipartite matrix.
pub fn partial_trace_b(m: &CMat, da: usize, db: usize) -> CMat {
    assert_eq!(m.nrows(), da * db);
    CMat::from_fn(da, da, |ia, ja| {
        (0..db).map(|ib| m[(ia * db + ib, ja * db + ib)]).sum()
    })
}

/// Partial trace over the first factor of a d_a⊗d_b bipartite matrix.
pub fn partial_trace_a(m: &CMat, da: usize, db: usize) -> CMat {
    assert_eq!(m.nrows(), da * db);
    CMat::from_fn(db, db, |ib, jb| {
        (0..da).map(|ia| m[(ia * db + ib, ia * db + jb)]).sum()
    })
}

/// Real part of the trace (traces of Hermitian matrices are real).
pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hermitian_eigen_diagonalizes() {
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(2.0, 0.0)]);
        let (vals, vecs) = eig_hermitian(&m);
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-12);
        let recon = &vecs
            * CMat::from_diagonal(&CVec::from_iterator(2, vals.iter().map(|&x| c(x, 0.0))))
            * vecs.adjoint();
        assert!(max_abs_diff(&recon, &m) < 1e-12);
    }

    #[test]
    fn unitary_eigen_splits_conjugate_phases() {
        // Diagonal unitary with phases ±2π/5 has degenerate H = cos θ but
        // distinct eigenphases; the K pass must separate them.
        let th = std::f64::consts::TAU / 5.0;
        let u = CMat::from_diagonal(&CVec::from_vec(vec![
            Complex64::from_polar(1.0, th),
            Complex64::from_polar(1.0, -th),
        ]));
        let (phases, vecs) = eig_unitary(&u).unwrap();
        assert_abs_diff_eq!(phases[0], th, epsilon = 1e-10);
        assert_abs_diff_eq!(phases[1], std::f64::consts::TAU - th, epsilon = 1e-10);
        assert!(unitarity_deviation(&vecs) < 1e-10);
    }

    #[test]
    fn unitary_eigen_rejects_degenerate_spectrum() {
        let u = identity(3);
        match eig_unitary(&u) {
            Err(QkdError::DegenerateEigenvalues { dim: 3, .. }) => {}
            other => panic!("expected degeneracy error, got {other:?}"),
        }
    }

    #[test]
    fn partial_traces_of_kron_recover_factors() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.2), c(0.5, -0.2), c(2.0, 0.0)]);
        let b = CMat::from_row_slice(3, 3, &[
            c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0),
        ]);
        let k = kron(&a, &b);
        let ta = partial_trace_b(&k, 2, 3);
        assert!(max_abs_diff(&ta, &a.map(|z| z * 3.0)) < 1e-12);
        let tb = partial_trace_a(&k, 2, 3);
        assert!(max_abs_diff(&tb, &b.map(|z| z * 3.0)) < 1e-12);
    }
}
