use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Eigenvalue of a pencil `A - lambda E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneralizedEigenvalue {
    Finite(C64),
    Infinite,
}

impl GeneralizedEigenvalue {
    pub fn finite(self) -> Option<C64> {
        match self {
            GeneralizedEigenvalue::Finite(z) => Some(z),
            GeneralizedEigenvalue::Infinite => None,
        }
    }
}

fn check_square<T>(a: &DMatrix<T>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn all_finite(a: &DMatrix<C64>) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<C64> {
    a.map(|x| C64::new(x, 0.0))
}

/// Eigenvalues of a complex square matrix via the complex Schur form.
pub fn eigenvalues(a: &DMatrix<C64>) -> Result<Vec<C64>> {
    check_square(a)?;
    if !all_finite(a) {
        return Err(Error::NonFinite);
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 100 * n.max(10))
        .ok_or(Error::NoConvergence("Schur"))?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

pub fn eigenvalues_real(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    eigenvalues(&to_complex(a))
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DMatrix<C64>) -> Result<Vec<f64>> {
    if !all_finite(a) {
        return Err(Error::NonFinite);
    }
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let svd = nalgebra::SVD::try_new(a.clone(), false, false, f64::EPSILON, 0)
        .ok_or(Error::NoConvergence("SVD"))?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

const SHIFT_DIRECTIONS: [(f64, f64); 6] = [
    (0.618_033_988_7, std::f64::consts::FRAC_1_PI),
    (-0.414_213_562_4, 0.771_572_341_8),
    (1.324_717_957_2, -0.207_911_690_8),
    (-0.123_456_789, -std::f64::consts::SQRT_2),
    (std::f64::consts::E, 1.732_050_807_6),
    (0.05, std::f64::consts::PI),
];

/// Smallest-to-largest pivot ratio of an LU factorization, a cheap conditioning proxy.
fn pivot_ratio(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..n {
        let v = u[(i, i)].norm();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

fn frobenius(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Generalized eigenvalues of `A x = lambda E x`.
///
/// Uses a shift-and-invert reduction `(A - sigma E)^{-1} E` followed by a
/// two-sided Rayleigh quotient refinement of every finite eigenvalue.
/// Eigenvalues whose inverted counterpart is negligible are reported as
/// [`GeneralizedEigenvalue::Infinite`].
pub fn generalized_eigenvalues(
    a: &DMatrix<C64>,
    e: &DMatrix<C64>,
) -> Result<Vec<GeneralizedEigenvalue>> {
    Ok(generalized_eigen_triples(a, e)?
        .into_iter()
        .map(|t| t.value)
        .collect())
}

#[derive(Debug, Clone)]
pub(crate) struct EigenTriple {
    pub value: GeneralizedEigenvalue,
    pub right: Option<DVector<C64>>,
    pub left: Option<DVector<C64>>,
}

pub(crate) fn generalized_eigen_triples(
    a: &DMatrix<C64>,
    e: &DMatrix<C64>,
) -> Result<Vec<EigenTriple>> {
    check_square(a)?;
    check_square(e)?;
    if a.shape() != e.shape() {
        return Err(Error::DimensionMismatch(
            "pencil matrices differ in size".into(),
        ));
    }
    if !all_finite(a) || !all_finite(e) {
        return Err(Error::NonFinite);
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let na = frobenius(a);
    let ne = frobenius(e);
    if ne == 0.0 {
        let ok = a.clone().lu().solve(&DMatrix::identity(n, n)).is_some();
        if !ok || na == 0.0 {
            return Err(Error::SingularPencil);
        }
        return Ok(vec![
            EigenTriple {
                value: GeneralizedEigenvalue::Infinite,
                right: None,
                left: None
            };
            n
        ]);
    }
    let scale = if na > 0.0 { na / ne } else { 1.0 };

    let mut best: Option<(f64, C64)> = None;
    for (re, im) in SHIFT_DIRECTIONS {
        let sigma = C64::new(re, im) * scale;
        let m = a - e * sigma;
        let lu = m.lu();
        let ratio = pivot_ratio(&lu.u());
        if best.is_none_or(|(r, _)| ratio > r) {
            best = Some((ratio, sigma));
        }
        if ratio > 1e-6 {
            break;
        }
    }
    let (ratio, sigma) = best.expect("at least one shift tried");
    if ratio < 1e-14 {
        return Err(Error::SingularPencil);
    }
    let lu = (a - e * sigma).lu();
    let k = lu.solve(e).ok_or(Error::SingularPencil)?;
    let theta = eigenvalues(&k)?;
    let knorm = frobenius(&k);
    let inf_tol = 1e-10 * knorm;

    let mut out = Vec::with_capacity(n);
    for t in theta {
        if t.norm() <= inf_tol {
            out.push(EigenTriple {
                value: GeneralizedEigenvalue::Infinite,
                right: None,
                left: None,
            });
            continue;
        }
        let lambda0 = sigma + t.inv();
        out.push(refine(a, e, lambda0, scale));
    }
    Ok(out)
}

fn start_vector(n: usize) -> DVector<C64> {
    DVector::from_fn(n, |i, _| {
        C64::new(1.0 + 0.37 * i as f64, 0.5 - 0.11 * (i % 7) as f64)
    })
}

fn normalize(v: &mut DVector<C64>) -> bool {
    let nrm = v.norm();
    if !(nrm.is_finite() && nrm > 0.0) {
        return false;
    }
    *v /= C64::new(nrm, 0.0);
    true
}

/// Inverse iteration for right and left eigenvectors followed by a
/// two-sided Rayleigh quotient.
fn refine(a: &DMatrix<C64>, e: &DMatrix<C64>, lambda0: C64, scale: f64) -> EigenTriple {
    // An exact eigenvalue makes the shifted matrix singular to working
    // precision; nudge the shift until inverse iteration stays finite.
    let vectors = [0.0, 1e-14, 1e-12, 1e-10, 1e-8].iter().find_map(|&d| {
        inverse_iteration(a, e, lambda0 + C64::new(d * (lambda0.norm() + scale), 0.0))
    });
    let Some((x, y)) = vectors else {
        return EigenTriple {
            value: GeneralizedEigenvalue::Finite(lambda0),
            right: None,
            left: None,
        };
    };
    let num = y.dotc(&(a * &x));
    let den = y.dotc(&(e * &x));
    if den.norm() <= 1e-14 * frobenius(e) {
        return EigenTriple {
            value: GeneralizedEigenvalue::Finite(lambda0),
            right: Some(x),
            left: Some(y),
        };
    }
    let lambda1 = num / den;
    let value = if lambda1.re.is_finite()
        && lambda1.im.is_finite()
        && (lambda1 - lambda0).norm() <= 1e-6 * (lambda0.norm() + scale)
    {
        lambda1
    } else {
        lambda0
    };
    EigenTriple {
        value: GeneralizedEigenvalue::Finite(value),
        right: Some(x),
        left: Some(y),
    }
}

fn inverse_iteration(
    a: &DMatrix<C64>,
    e: &DMatrix<C64>,
    shift: C64,
) -> Option<(DVector<C64>, DVector<C64>)> {
    let n = a.nrows();
    let m = a - e * shift;
    let lu = m.clone().lu();
    let luh = m.adjoint().lu();
    let eh = e.adjoint();
    let mut x = start_vector(n);
    let mut y = start_vector(n);
    for _ in 0..3 {
        x = lu.solve(&(e * &x))?;
        y = luh.solve(&(&eh * &y))?;
        if !(normalize(&mut x) && normalize(&mut y)) {
            return None;
        }
    }
    Some((x, y))
}

/// Poles and residues of `c^T (z E - A)^{-1} b` (plain transpose, no conjugation).
///
/// Infinite eigenvalues of the pencil are dropped. Residues use the left and
/// right eigenvectors, `rho = (c^T x)(y^H b) / (y^H E x)`.
pub fn pencil_pole_residue(
    a: &DMatrix<C64>,
    e: &DMatrix<C64>,
    b: &DVector<C64>,
    c: &DVector<C64>,
) -> Result<(Vec<C64>, Vec<C64>)> {
    let n = a.nrows();
    if b.len() != n || c.len() != n {
        return Err(Error::DimensionMismatch(
            "input/output vectors do not match the pencil".into(),
        ));
    }
    let triples = generalized_eigen_triples(a, e)?;
    let mut poles = Vec::new();
    let mut residues = Vec::new();
    for t in triples {
        let GeneralizedEigenvalue::Finite(lambda) = t.value else {
            continue;
        };
        let (Some(x), Some(y)) = (t.right, t.left) else {
            return Err(Error::NoConvergence("eigenvector refinement"));
        };
        let den = y.dotc(&(e * &x));
        if den.norm() == 0.0 {
            return Err(Error::NoConvergence("eigenvector refinement"));
        }
        let cx: C64 = c.iter().zip(x.iter()).map(|(ci, xi)| ci * xi).sum();
        let yb = y.dotc(b);
        poles.push(lambda);
        residues.push(cx * yb / den);
    }
    Ok((poles, residues))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        v
    }

    #[test]
    fn companion_eigenvalues() {
        // z^2 + 2z + 2 has roots -1 +- i.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -2.0]);
        let ev = sorted(eigenvalues_real(&a).unwrap());
        assert!((ev[0] - c(-1.0, -1.0)).norm() < 1e-13);
        assert!((ev[1] - c(-1.0, 1.0)).norm() < 1e-13);
    }

    #[test]
    fn eigenvalues_reject_rectangular() {
        let a = DMatrix::<C64>::zeros(2, 3);
        assert!(matches!(eigenvalues(&a), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn pencil_with_identity_matches_standard() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0),
                c(2.0, 1.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(-3.0, 0.5),
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(2.0, -1.0),
            ],
        );
        let e = DMatrix::<C64>::identity(3, 3);
        let g: Vec<C64> = generalized_eigenvalues(&a, &e)
            .unwrap()
            .into_iter()
            .map(|v| v.finite().unwrap())
            .collect();
        let s = eigenvalues(&a).unwrap();
        for (x, y) in sorted(g).iter().zip(sorted(s).iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_e_gives_infinite_eigenvalue() {
        // A = I, E = diag(1, 0): one eigenvalue 1, one infinite.
        let a = DMatrix::<C64>::identity(2, 2);
        let mut e = DMatrix::<C64>::zeros(2, 2);
        e[(0, 0)] = c(1.0, 0.0);
        let ev = generalized_eigenvalues(&a, &e).unwrap();
        let finite: Vec<C64> = ev.iter().filter_map(|v| v.finite()).collect();
        assert_eq!(finite.len(), 1);
        assert!((finite[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(
            ev.iter()
                .filter(|v| matches!(v, GeneralizedEigenvalue::Infinite))
                .count(),
            1
        );
    }

    #[test]
    fn singular_pencil_is_reported() {
        let a =
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let e =
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(
            generalized_eigenvalues(&a, &e).unwrap_err(),
            Error::SingularPencil
        );
    }

    #[test]
    fn pole_residue_of_diagonal_pencil() {
        // c^T (zI - diag(-1, -2))^{-1} b with b = (1, 1), c = (2, 3): 2/(z+1) + 3/(z+2).
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(-1.0, 0.0), c(-2.0, 0.0)]));
        let e = DMatrix::<C64>::identity(2, 2);
        let b = DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let cc = DVector::from_vec(vec![c(2.0, 0.0), c(3.0, 0.0)]);
        let (p, r) = pencil_pole_residue(&a, &e, &b, &cc).unwrap();
        for (pk, rk) in p.iter().zip(r.iter()) {
            let expect = if (pk.re + 1.0).abs() < 1e-8 { 2.0 } else { 3.0 };
            assert!((rk - c(expect, 0.0)).norm() < 1e-12, "{pk} {rk}");
        }
    }

    #[test]
    fn singular_values_descending() {
        let a =
            DMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 4.0)]);
        let s = singular_values(&a).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-14 && (s[1] - 3.0).abs() < 1e-14);
    }
}
