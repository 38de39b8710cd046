//! Dense linear algebra kernels used by the rest of the crate.

mod assignment;
mod eig;
mod lyapunov;
mod qr;
mod tridiag;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub use assignment::{linear_assignment, Assignment};
pub(crate) use eig::to_complex;
pub use eig::{
    eigenvalues, eigenvalues_real, generalized_eigenvalues, pencil_pole_residue, singular_values,
    GeneralizedEigenvalue,
};
pub use lyapunov::solve_lyapunov;
pub use qr::{qr_pivoted, PivotedQr, RANK_TOL};
pub use tridiag::Tridiagonal;

/// Minimum over `x` of `[x; y]^H [[A, B], [B^H, C]] [x; y]`, which equals
/// `y^H (C - B^H A^{-1} B) y` for Hermitian positive definite `A`.
pub fn schur_complement_min(
    a: &DMatrix<C64>,
    b: &DMatrix<C64>,
    c: &DMatrix<C64>,
    y: &DVector<C64>,
) -> Result<f64> {
    let n = a.nrows();
    let m = c.nrows();
    if a.ncols() != n || b.shape() != (n, m) || c.ncols() != m || y.len() != m {
        return Err(Error::DimensionMismatch(
            "block sizes of the quadratic form".into(),
        ));
    }
    let l = cholesky_lower(a)?;
    let by = b * y;
    let z = cholesky_solve(&l, &by);
    let val = y.dotc(&(c * y)) - by.dotc(&z);
    Ok(val.re)
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky_lower(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(
            "Cholesky needs a square matrix".into(),
        ));
    }
    let mut l = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L L^H x = b` given the lower Cholesky factor.
pub fn cholesky_solve(l: &DMatrix<C64>, b: &DVector<C64>) -> DVector<C64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[(k, i)].conj() * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}
