//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use ndarray::ArrayView2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NotPositiveDefinite;

pub(crate) fn to_dmatrix(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Symmetric-definite generalized eigenproblem `A w = λ B w`.
///
/// Reduces to a standard symmetric problem through the Cholesky factor
/// `B = L Lᵀ`: eigenvectors of `L⁻¹ A L⁻ᵀ` are mapped back with `L⁻ᵀ`, so the
/// returned columns satisfy `Wᵀ B W = I`. Eigenvalues come back unsorted.
pub(crate) fn generalized_symmetric_eigen(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>), NotPositiveDefinite> {
    let n = a.nrows();
    let chol = Cholesky::new(b.clone()).ok_or(NotPositiveDefinite)?;
    let l = chol.l();
    // M = L⁻¹ A L⁻ᵀ, built with two triangular solves.
    let y = l.solve_lower_triangular(a).ok_or(NotPositiveDefinite)?;
    let m = l
        .solve_lower_triangular(&y.transpose())
        .ok_or(NotPositiveDefinite)?;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let vectors = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or(NotPositiveDefinite)?;
    debug_assert_eq!(vectors.ncols(), n);
    Ok((eig.eigenvalues, vectors))
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, NotPositiveDefinite> {
    let chol = Cholesky::new(a.clone()).ok_or(NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Flips `v` so its largest-magnitude entry is positive. Ties on magnitude go
/// to the lowest index.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
