use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Solves `A X + X A^T + Q = 0` for Hurwitz `A` (Bartels-Stewart on the complex Schur form).
///
/// The returned solution is symmetrized. For `Q = b b^T` it is the
/// controllability Gramian.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(
            "Lyapunov operands must be square and of equal size".into(),
        ));
    }
    if a.iter().chain(q.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let ac = a.map(|x| C64::new(x, 0.0));
    let schur = nalgebra::Schur::try_new(ac, f64::EPSILON, 100 * n.max(10))
        .ok_or(Error::NoConvergence("Schur"))?;
    let (u, t) = schur.unpack();
    if (0..n).any(|i| t[(i, i)].re >= 0.0) {
        return Err(Error::Unstable);
    }

    // T Y + Y T^H = -U^H Q U, solved one column at a time from the right.
    let c = -(u.adjoint() * q.map(|x| C64::new(x, 0.0)) * &u);
    let mut y = DMatrix::<C64>::zeros(n, n);
    for j in (0..n).rev() {
        let mut rhs: Vec<C64> = (0..n).map(|i| c[(i, j)]).collect();
        for k in j + 1..n {
            let tjk = t[(j, k)].conj();
            if tjk != C64::new(0.0, 0.0) {
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r -= tjk * y[(i, k)];
                }
            }
        }
        let shift = t[(j, j)].conj();
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in i + 1..n {
                s -= t[(i, k)] * y[(k, j)];
            }
            y[(i, j)] = s / (t[(i, i)] + shift);
        }
    }
    let x = &u * y * u.adjoint();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        0.5 * (x[(i, j)].re + x[(j, i)].re)
    }))
}
