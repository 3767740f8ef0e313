use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue cutoff below which spectra are clipped to zero.
pub const EIGEN_CLIP: f64 = 1e-12;

/// Symmetric positive-semidefinite square root via eigendecomposition.
///
/// Eigenvalues below `EIGEN_CLIP * max` are set to zero. Fails when an
/// eigenvalue is more negative than `-1e-8 * trace`.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let trace = sym.trace().abs();
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.max().max(0.0);
    let min = eig.eigenvalues.min();
    if min < -1e-8 * trace.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let roots = eig
        .eigenvalues
        .map(|l| if l > EIGEN_CLIP * max { l.sqrt() } else { 0.0 });
    let u = &eig.eigenvectors;
    Ok(u * DMatrix::from_diagonal(&roots) * u.transpose())
}

/// Inverse of a symmetric positive-definite matrix, or `None` when it is
/// numerically singular.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = m.clone().cholesky()?;
    let diag = chol.l_dirty().diagonal();
    let max = diag.max();
    let min = diag.min();
    // Condition number of the factor is the square root of that of `m`.
    if !(min > 0.0) || max / min > 1e7 {
        return None;
    }
    Some(chol.inverse())
}

/// Ordinary least squares of `y` on the columns of `x`.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let xtx = x.tr_mul(x);
    let inv = spd_inverse(&xtx)?;
    let beta = &inv * x.tr_mul(y);
    Some((beta, inv))
}

/// Row-normalized copy of `a`; zero rows stay zero.
pub fn normalize_rows(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}

/// Factor `B` with `B B' = A A'` and at most `rank(A)` columns.
///
/// Works through whichever Gram matrix is smaller and drops directions
/// whose eigenvalue falls below `rel_tol * max`. Column signs are fixed so
/// that the largest-magnitude entry of each column is positive, which makes
/// the factor a function of `A A'` alone: `A` and `-A` give the same `B`.
pub fn gram_factor(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (m, k) = a.shape();
    let mut b = if k <= m {
        let eig = SymmetricEigen::new(a.tr_mul(a));
        let max = eig.eigenvalues.max().max(0.0);
        let keep: Vec<usize> = (0..k).filter(|&j| eig.eigenvalues[j] > rel_tol * max).collect();
        let mut b = DMatrix::zeros(m, keep.len());
        for (c, &j) in keep.iter().enumerate() {
            b.set_column(c, &(a * eig.eigenvectors.column(j)));
        }
        b
    } else {
        let eig = SymmetricEigen::new(a * a.transpose());
        let max = eig.eigenvalues.max().max(0.0);
        let keep: Vec<usize> = (0..m).filter(|&j| eig.eigenvalues[j] > rel_tol * max).collect();
        let mut b = DMatrix::zeros(m, keep.len());
        for (c, &j) in keep.iter().enumerate() {
            b.set_column(c, &(eig.eigenvectors.column(j) * eig.eigenvalues[j].sqrt()));
        }
        b
    };
    for mut col in b.column_iter_mut() {
        let mut pivot = 0.0_f64;
        for &x in col.iter() {
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
    b
}
