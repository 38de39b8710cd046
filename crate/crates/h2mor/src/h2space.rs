//! Geometry of the H2 space through its reproducing kernel.
//!
//! The kernel at `mu` (in the open right half-plane) is `v[mu](z) = 1/(z + conj(mu))`
//! and satisfies `<v[mu], H> = H(mu)`. Sampling `H` at points `mu` therefore
//! gives the coefficients of its orthogonal projection onto
//! `span{v[mu_1], ..., v[mu_n]}`, whose Gram matrix is the Cauchy matrix
//! `M[j, k] = 1/(mu_j + conj(mu_k))`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numkit::{cholesky_lower, singular_values};
use crate::systems::{quadratic_roots, RationalRom};

/// Relative distance below which two sample points count as the same point.
pub const DISTINCT_TOL: f64 = 1e-12;

fn check_points(mu: &[C64]) -> Result<()> {
    for (i, z) in mu.iter().enumerate() {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        if z.re <= 0.0 {
            return Err(Error::NotInRightHalfPlane(*z));
        }
        for (j, w) in mu.iter().enumerate().take(i) {
            if (z - w).norm() <= DISTINCT_TOL * z.norm().max(w.norm()) {
                return Err(Error::DuplicatePoints(j, i));
            }
        }
    }
    Ok(())
}

/// Distinct sample points in the open right half-plane with the sampled values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    mu: Vec<C64>,
    h: Vec<C64>,
}

impl SampleSet {
    pub fn new(mu: Vec<C64>, h: Vec<C64>) -> Result<Self> {
        if mu.len() != h.len() {
            return Err(Error::DimensionMismatch(
                "points and values differ in length".into(),
            ));
        }
        check_points(&mu)?;
        Ok(SampleSet { mu, h })
    }

    pub fn points(&self) -> &[C64] {
        &self.mu
    }

    pub fn values(&self) -> &[C64] {
        &self.h
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Whether `z` is within [`DISTINCT_TOL`] of an existing point.
    pub fn contains(&self, z: C64) -> bool {
        self.mu
            .iter()
            .any(|w| (z - w).norm() <= DISTINCT_TOL * z.norm().max(w.norm()))
    }

    pub fn push(&mut self, z: C64, value: C64) -> Result<()> {
        if !(z.re.is_finite() && z.im.is_finite() && value.re.is_finite() && value.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        if z.re <= 0.0 {
            return Err(Error::NotInRightHalfPlane(z));
        }
        if let Some(j) = self
            .mu
            .iter()
            .position(|w| (z - w).norm() <= DISTINCT_TOL * z.norm().max(w.norm()))
        {
            return Err(Error::DuplicatePoints(j, self.mu.len()));
        }
        self.mu.push(z);
        self.h.push(value);
        Ok(())
    }

    /// Whether every point's conjugate is also present.
    pub fn closed_under_conjugation(&self) -> bool {
        self.mu
            .iter()
            .all(|z| z.im == 0.0 || self.contains(z.conj()))
    }
}

/// `M[j, k] = 1/(mu_j + conj(mu_k))`.
pub fn cauchy_gram(mu: &[C64]) -> DMatrix<C64> {
    let n = mu.len();
    DMatrix::from_fn(n, n, |j, k| (mu[j] + mu[k].conj()).inv())
}

/// Pivoted factorization `M[perm[i], perm[j]] = (L D L^H)[i, j]` of a Cauchy
/// Gram matrix, with unit lower-triangular `L` and positive diagonal `D`.
///
/// Computed from the displacement generators in `O(n^2)` operations; every
/// entry of `L` and `D` is obtained with high relative accuracy, regardless
/// of how clustered the points are.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyFactorization {
    mu: Vec<C64>,
    /// Unimodular factors aligning the Malmquist-Takenaka basis with `W`.
    phase: Vec<C64>,
    pub perm: Vec<usize>,
    pub lower: DMatrix<C64>,
    pub diag: Vec<f64>,
}

pub fn cauchy_cholesky(mu: &[C64]) -> Result<CauchyFactorization> {
    check_points(mu)?;
    let n = mu.len();
    let mut g = vec![C64::new(1.0, 0.0); n];
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut perm = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    // Columns of L indexed by original point.
    let mut l_orig = DMatrix::<C64>::zeros(n, n);

    for k in 0..n {
        let (pos, &p) = remaining
            .iter()
            .enumerate()
            .max_by(|(_, &i), (_, &j)| {
                let di = g[i].norm_sqr() / (2.0 * mu[i].re);
                let dj = g[j].norm_sqr() / (2.0 * mu[j].re);
                di.total_cmp(&dj).then(j.cmp(&i))
            })
            .expect("remaining is non-empty");
        remaining.swap_remove(pos);
        let two_re = 2.0 * mu[p].re;
        let dp = g[p].norm_sqr() / two_re;
        if !(dp > 0.0 && dp.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        perm.push(p);
        diag.push(dp);
        l_orig[(p, k)] = C64::new(1.0, 0.0);
        for &i in &remaining {
            let denom = mu[i] + mu[p].conj();
            l_orig[(i, k)] = g[i] * two_re / (denom * g[p]);
            g[i] *= (mu[i] - mu[p]) / denom;
        }
    }
    let lower = DMatrix::from_fn(n, n, |i, j| l_orig[(perm[i], j)]);
    let phase = (0..n)
        .map(|k| {
            let mk = mu[perm[k]];
            perm[..k].iter().fold(C64::new(1.0, 0.0), |acc, &j| {
                let num = mk.conj() + mu[j];
                let den = mk.conj() - mu[j].conj();
                acc * (num / num.norm()) * (den.norm() / den)
            })
        })
        .collect();
    Ok(CauchyFactorization {
        mu: mu.to_vec(),
        phase,
        perm,
        lower,
        diag,
    })
}

impl CauchyFactorization {
    pub fn points(&self) -> &[C64] {
        &self.mu
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// `P L D L^H P^T`, the reconstructed Gram matrix.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let n = self.len();
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            self.diag.iter().map(|&v| C64::new(v, 0.0)),
        ));
        let inner = &self.lower * d * self.lower.adjoint();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(self.perm[i], self.perm[j])] = inner[(i, j)];
            }
        }
        out
    }

    /// `D^{-1/2} L^{-1} P^T z`, so that `||whiten(z)||^2 = z^H M^{-1} z`.
    pub fn whiten(&self, z: &[C64]) -> Vec<C64> {
        let n = self.len();
        let mut x: Vec<C64> = self.perm.iter().map(|&p| z[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lower[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for (xi, d) in x.iter_mut().zip(&self.diag) {
            *xi /= d.sqrt();
        }
        x
    }

    /// Adjoint of [`whiten`](Self::whiten): `P L^{-H} D^{-1/2} r`.
    pub fn whiten_adjoint(&self, r: &[C64]) -> Vec<C64> {
        let n = self.len();
        let mut y: Vec<C64> = r
            .iter()
            .zip(&self.diag)
            .map(|(ri, d)| ri / d.sqrt())
            .collect();
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lower[(k, i)].conj() * y[k];
            }
            y[i] = s;
        }
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = y[i];
        }
        out
    }

    /// Divided-difference tables over `nodes` (left half-plane) of
    /// `t -> <u_k, 1/(z - t)>`, one per orthonormal basis function `u_k` of
    /// `V(mu)` in pivot order. Since `W f(mu) = (<u_k, f>)_k`, entry `[0][q]`
    /// of the table is the whitened sample vector of `1/prod_{i<=q}(z - nodes_i)`.
    ///
    /// `u_k` is the Malmquist-Takenaka function
    /// `sqrt(2 Re mu_k)/(z + conj mu_k) prod_{j<k} (z - mu_j)/(z + conj mu_j)`
    /// up to a unimodular factor, so every entry is a product of well-separated
    /// factors and keeps full relative accuracy however clustered `mu` is.
    fn kernel_tables(&self, nodes: &[C64; 4]) -> Vec<Table> {
        let mut prefix = table_identity();
        let mut out = Vec::with_capacity(self.len());
        for (k, &p) in self.perm.iter().enumerate() {
            let m = self.mu[p];
            let pole = pole_table(nodes, m);
            let scale = -self.phase[k] * (2.0 * m.re).sqrt();
            out.push(table_scale(&table_mul(&pole, &prefix), scale));
            // (t + conj m)/(t - m) = 1 + 2 Re m / (t - m)
            let factor = table_add_identity(&table_scale(&pole, C64::new(2.0 * m.re, 0.0)));
            prefix = table_mul(&prefix, &factor);
        }
        out
    }

    /// Whitened partial-fraction columns `W Theta(b)` (per pair `1/d`, `z/d`
    /// with `d = z^2 + b[2k+1] z + b[2k]`, then `1/(z + b[r-1])` for odd `r`)
    /// and their derivatives grouped per parameter as `(column, derivative)`.
    ///
    /// Each entry is a divided difference over the roots of `d` taken from
    /// [`Self::kernel_tables`], so clustered samples cost no accuracy.
    #[allow(clippy::type_complexity)]
    pub fn whiten_partial_fractions(
        &self,
        b: &[f64],
    ) -> (Vec<Vec<C64>>, Vec<Vec<(usize, Vec<C64>)>>) {
        let r = b.len();
        let n = self.len();
        let mut columns = vec![Vec::with_capacity(n); r];
        let mut derivatives = Vec::with_capacity(r);
        for k in 0..r / 2 {
            let (al, be) = quadratic_roots(b[2 * k + 1], b[2 * k]);
            let nodes = [al, be, al, be];
            let (t1, t2) = (monomial_table(&nodes, 1), monomial_table(&nodes, 2));
            let (mut d0, mut d1, mut d2) = (
                Vec::with_capacity(n),
                Vec::with_capacity(n),
                Vec::with_capacity(n),
            );
            for g in self.kernel_tables(&nodes) {
                let g1 = table_mul(&t1, &g);
                columns[2 * k].push(g[0][1]);
                columns[2 * k + 1].push(g1[0][1]);
                d0.push(-g[0][3]);
                d1.push(-g1[0][3]);
                d2.push(-table_mul(&t2, &g)[0][3]);
            }
            derivatives.push(vec![(2 * k, d0.clone()), (2 * k + 1, d1.clone())]);
            derivatives.push(vec![(2 * k, d1), (2 * k + 1, d2)]);
        }
        if r % 2 == 1 {
            let g = C64::new(-b[r - 1], 0.0);
            let mut d = Vec::with_capacity(n);
            for t in self.kernel_tables(&[g; 4]) {
                columns[r - 1].push(t[0][0]);
                d.push(-t[0][1]);
            }
            derivatives.push(vec![(r - 1, d)]);
        }
        (columns, derivatives)
    }

    /// Whitens every column of `c`.
    fn whiten_columns(&self, c: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(c.nrows(), c.ncols());
        for j in 0..c.ncols() {
            let col: Vec<C64> = c.column(j).iter().copied().collect();
            let w = self.whiten(&col);
            for (i, v) in w.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Divided-difference table `T[i][l] = f[x_i, ..., x_l]` over four nodes;
/// the table of a product is the product of the tables.
type Table = [[C64; 4]; 4];

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn table_identity() -> Table {
    let mut t = [[ZERO; 4]; 4];
    for (i, row) in t.iter_mut().enumerate() {
        row[i] = C64::new(1.0, 0.0);
    }
    t
}

fn table_mul(a: &Table, b: &Table) -> Table {
    let mut t = [[ZERO; 4]; 4];
    for i in 0..4 {
        for l in i..4 {
            t[i][l] = (i..=l).map(|s| a[i][s] * b[s][l]).sum();
        }
    }
    t
}

fn table_scale(a: &Table, s: C64) -> Table {
    a.map(|row| row.map(|v| v * s))
}

fn table_add_identity(a: &Table) -> Table {
    let mut t = *a;
    for (i, row) in t.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    t
}

/// Table of `t -> 1/(t - m)`: `(-1)^(l-i) / prod_{s=i..l} (x_s - m)`.
fn pole_table(x: &[C64; 4], m: C64) -> Table {
    let mut t = [[ZERO; 4]; 4];
    for i in 0..4 {
        let mut acc = C64::new(1.0, 0.0);
        for l in i..4 {
            acc /= x[l] - m;
            t[i][l] = if (l - i) % 2 == 0 { acc } else { -acc };
        }
    }
    t
}

/// Table of `t -> t^power` for `power <= 2`.
fn monomial_table(x: &[C64; 4], power: usize) -> Table {
    let mut t = [[ZERO; 4]; 4];
    for i in 0..4 {
        for l in i..4 {
            t[i][l] = match (power, l - i) {
                (0, 0) | (1, 1) | (2, 2) => C64::new(1.0, 0.0),
                (1, 0) => x[i],
                (2, 0) => x[i] * x[i],
                (2, 1) => x[i] + x[l],
                _ => ZERO,
            };
        }
    }
    t
}

/// `||P(mu) (H - H_r)||_{H2}` from samples `h = H(mu)`, i.e.
/// `||D^{-1/2} L^{-1} P^T (h - H_r(mu))||_2`, with the ROM part whitened
/// through [`CauchyFactorization::whiten_partial_fractions`].
pub fn projected_mismatch(fact: &CauchyFactorization, h: &[C64], rom: &RationalRom) -> Result<f64> {
    if h.len() != fact.len() {
        return Err(Error::DimensionMismatch(
            "sample values do not match the factorization".into(),
        ));
    }
    let (columns, _) = fact.whiten_partial_fractions(rom.b());
    let wh = fact.whiten(h);
    let sq: f64 = (0..wh.len())
        .map(|i| {
            let wr: C64 = columns.iter().zip(rom.a()).map(|(col, a)| col[i] * a).sum();
            (wh[i] - wr).norm_sqr()
        })
        .sum();
    Ok(sq.sqrt())
}

/// Sine of the angle between the kernel `v[z]` and `V(mu)`: the modulus of
/// the Blaschke product `prod_k (z - mu_k) / (z + conj(mu_k))`. Its square is
/// the pivot `z` would receive if appended to the factorization, relative to
/// `M[z, z]`.
pub fn kernel_sine(mu: &[C64], z: C64) -> f64 {
    mu.iter()
        .map(|&m| ((z - m) / (z + m.conj())).norm())
        .product()
}

/// Gram matrix of `[1/(z - lambda_1), ..., 1/(z - lambda_r), 1/(z - lambda_1)^2, ..., 1/(z - lambda_r)^2]`.
///
/// Blocks: `-(conj(l_j) + l_k)^{-1}`, `(conj(l_j) + l_k)^{-2}` (both off-diagonal
/// blocks) and `-2 (conj(l_j) + l_k)^{-3}`.
pub fn tangent_gram(lambda: &[C64]) -> Result<DMatrix<C64>> {
    let r = lambda.len();
    if lambda
        .iter()
        .any(|l| !(l.re.is_finite() && l.im.is_finite()))
    {
        return Err(Error::NonFinite);
    }
    if let Some(l) = lambda.iter().find(|l| l.re >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pole {l} is not in the open left half-plane"
        )));
    }
    Ok(DMatrix::from_fn(2 * r, 2 * r, |i, j| {
        let s = lambda[i % r].conj() + lambda[j % r];
        match (i < r, j < r) {
            (true, true) => -s.inv(),
            (false, false) => -2.0 * s.powi(-3),
            _ => s.powi(-2),
        }
    }))
}

/// Largest principal angle between `span(basis)` and `V(mu)`, given the
/// cross matrix `C[i, j] = <v[mu_i], t_j>` and the Gram matrix of the basis.
fn largest_angle(
    fact: &CauchyFactorization,
    cross: &DMatrix<C64>,
    gram: &DMatrix<C64>,
) -> Result<f64> {
    let m = gram.nrows();
    if fact.len() < m {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    let l = cholesky_lower(gram)?;
    let linv_h = l
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite)?
        .adjoint();
    let x = fact.whiten_columns(cross) * linv_h;
    let s = singular_values(&x)?;
    let smin = s.last().copied().unwrap_or(0.0).clamp(0.0, 1.0);
    Ok(smin.acos())
}

/// Largest principal angle between the tangent space
/// `T(lambda) = span{1/(z - lambda), 1/(z - lambda)^2}` and `V(mu)`.
pub fn subspace_angle_tangent(fact: &CauchyFactorization, lambda: C64) -> Result<f64> {
    subspace_angle_full(fact, &[lambda])
}

/// Largest principal angle between the full tangent space of a reduced model
/// with poles `lambda` and `V(mu)`.
pub fn subspace_angle_full(fact: &CauchyFactorization, lambda: &[C64]) -> Result<f64> {
    let gram = tangent_gram(lambda)?;
    let r = lambda.len();
    let mu = fact.points();
    let cross = DMatrix::from_fn(mu.len(), 2 * r, |i, j| {
        let d = mu[i] - lambda[j % r];
        if j < r {
            d.inv()
        } else {
            d.powi(-2)
        }
    });
    largest_angle(fact, &cross, &gram)
}

/// Largest principal angle between `V(a)` and `V(b)`.
pub fn kernel_subspace_angle(a: &CauchyFactorization, b: &[C64]) -> Result<f64> {
    check_points(b)?;
    let gram = cauchy_gram(b);
    let pa = a.points();
    let cross = DMatrix::from_fn(pa.len(), b.len(), |i, j| (pa[i] + b[j].conj()).inv());
    largest_angle(a, &cross, &gram)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gram_examples() {
        let m = cauchy_gram(&[c(1.0, 0.0)]);
        assert_eq!(m[(0, 0)], c(0.5, 0.0));
        let m = cauchy_gram(&[c(1.0, 0.0), c(2.0, 0.0)]);
        let expect = [0.5, 1.0 / 3.0, 1.0 / 3.0, 0.25];
        for (v, e) in m.iter().zip(expect) {
            assert!((v - c(e, 0.0)).norm() < 1e-16);
        }
    }

    #[test]
    fn factorization_reconstructs() {
        let mu = [
            c(1.0, 0.0),
            c(2.0, 1.0),
            c(2.0, -1.0),
            c(0.5, 3.0),
            c(0.5, -3.0),
        ];
        let f = cauchy_cholesky(&mu).unwrap();
        let m = cauchy_gram(&mu);
        assert!((f.reconstruct() - &m).norm() < 1e-14 * m.norm());
        for i in 0..mu.len() {
            assert_eq!(f.lower[(i, i)], c(1.0, 0.0));
        }
        assert!(f.diag.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn one_point() {
        let f = cauchy_cholesky(&[c(1.0, 0.0)]).unwrap();
        assert_eq!(f.diag, vec![0.5]);
        assert_eq!(f.lower[(0, 0)], c(1.0, 0.0));
    }

    #[test]
    fn rejects_bad_points() {
        assert!(matches!(
            cauchy_cholesky(&[c(1.0, 0.0), c(1.0, 0.0)]),
            Err(Error::DuplicatePoints(0, 1))
        ));
        assert!(matches!(
            cauchy_cholesky(&[c(-1.0, 0.0)]),
            Err(Error::NotInRightHalfPlane(_))
        ));
    }

    #[test]
    fn whitening_matches_inverse() {
        let mu = [c(1.0, 0.0), c(2.0, 1.0), c(2.0, -1.0), c(0.3, 0.1)];
        let f = cauchy_cholesky(&mu).unwrap();
        let z = [c(1.0, 2.0), c(-0.5, 0.1), c(0.3, 0.0), c(2.0, -1.0)];
        let w = f.whiten(&z);
        let q: f64 = w.iter().map(|v| v.norm_sqr()).sum();
        let m = cauchy_gram(&mu);
        let zv = DVector::from_column_slice(&z);
        let exact = zv.dotc(&m.lu().solve(&zv).unwrap()).re;
        assert!((q - exact).abs() < 1e-12 * exact);
        // <whiten(z), r> = <z, whiten_adjoint(r)>
        let r = [c(0.1, 0.2), c(1.0, -1.0), c(0.0, 0.5), c(2.0, 0.0)];
        let lhs: C64 = w.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
        let wa = f.whiten_adjoint(&r);
        let rhs: C64 = z.iter().zip(&wa).map(|(a, b)| a.conj() * b).sum();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn projected_mismatch_of_interpolant_is_zero() {
        let rom = RationalRom::new(vec![1.0, 0.0], vec![2.0, 2.0]).unwrap();
        let mu = [c(1.0, 0.0), c(1.0, 1.0), c(1.0, -1.0)];
        let h: Vec<C64> = mu.iter().map(|&z| rom.eval(z)).collect();
        let f = cauchy_cholesky(&mu).unwrap();
        assert!(projected_mismatch(&f, &h, &rom).unwrap() < 1e-15);
    }

    #[test]
    fn tangent_gram_examples() {
        let g = tangent_gram(&[c(-1.0, 0.0)]).unwrap();
        let e = [0.5, 0.25, 0.25, 0.25];
        for (v, x) in g.iter().zip(e) {
            assert!((v - c(x, 0.0)).norm() < 1e-16);
        }
        let g = tangent_gram(&[c(-2.0, 0.0)]).unwrap();
        let e = [0.25, 1.0 / 16.0, 1.0 / 16.0, 1.0 / 32.0];
        for (v, x) in g.iter().zip(e) {
            assert!((v - c(x, 0.0)).norm() < 1e-16);
        }
        assert!(tangent_gram(&[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn angle_examples() {
        // One sample cannot contain a two-dimensional tangent space.
        let f = cauchy_cholesky(&[c(1.0, 0.0)]).unwrap();
        let phi = subspace_angle_tangent(&f, c(-1.0, 0.0)).unwrap();
        assert!(phi.sin() > 0.0);
        // The shared kernel gives a zero first angle.
        let g = tangent_gram(&[c(-1.0, 0.0)]).unwrap();
        let cross = DMatrix::from_row_slice(1, 1, &[c(0.5, 0.0)]);
        let x = f.whiten_columns(&cross)[(0, 0)].norm() / g[(0, 0)].re.sqrt();
        assert!((x - 1.0).abs() < 1e-15);
        // A space with itself.
        let mu = [c(1.0, 0.0), c(2.0, 1.0), c(2.0, -1.0)];
        let f = cauchy_cholesky(&mu).unwrap();
        let a = kernel_subspace_angle(&f, &mu).unwrap();
        assert!(a < 1e-6, "{a}");
        // Samples far from the mirrored pole.
        let f = cauchy_cholesky(&[c(1e3, 0.0)]).unwrap();
        assert!(subspace_angle_tangent(&f, c(-1.0, 0.0)).unwrap().sin() >= 0.9);
    }

    #[test]
    fn samples_at_the_mirror_point_capture_the_tangent() {
        let mu = [c(1.0, 0.0), c(1.0 + 1e-8, 0.0), c(1.0, 1e-8)];
        let f = cauchy_cholesky(&mu).unwrap();
        let phi = subspace_angle_tangent(&f, c(-1.0, 0.0)).unwrap();
        assert!(phi.sin() <= 1e-6, "{}", phi.sin());
    }

    #[test]
    fn kernel_tables_match_whitening() {
        let mu = [
            c(1.0, 0.5),
            c(1.0, -0.5),
            c(2.0, 0.0),
            c(0.5, 3.0),
            c(0.7, -1.0),
        ];
        let f = cauchy_cholesky(&mu).unwrap();
        let (a, b) = (c(-0.5, 1.0), c(-1.5, -0.3));
        let nodes = [a, b, a, b];
        let tables = f.kernel_tables(&nodes);
        let t1 = monomial_table(&nodes, 1);
        type Case = (Box<dyn Fn(C64) -> C64>, usize, usize);
        let funcs: [Case; 4] = [
            (Box::new(move |z| (z - a).inv()), 0, 0),
            (Box::new(move |z| ((z - a) * (z - b)).inv()), 0, 1),
            (Box::new(move |z| z / ((z - a) * (z - b))), 1, 1),
            (
                Box::new(move |z| z / ((z - a) * (z - b) * (z - a) * (z - b))),
                1,
                3,
            ),
        ];
        for (g, power, q) in funcs.iter() {
            let vals: Vec<C64> = mu.iter().map(|&z| g(z)).collect();
            let w = f.whiten(&vals);
            for (k, t) in tables.iter().enumerate() {
                let t = if *power == 1 { table_mul(&t1, t) } else { *t };
                assert!(
                    (t[0][*q] - w[k]).norm() < 1e-12 * (1.0 + w[k].norm()),
                    "{k} {q}: {} vs {}",
                    t[0][*q],
                    w[k]
                );
            }
        }
    }

    #[test]
    fn kernel_sine_matches_projection() {
        let mu = [c(1.0, 0.5), c(1.0, -0.5), c(2.0, 0.0), c(0.5, 3.0)];
        let f = cauchy_cholesky(&mu).unwrap();
        for z in [c(1.5, 1.0), c(0.3, -2.0), c(1.0, 0.6)] {
            let m: Vec<C64> = mu.iter().map(|&u| (u + z.conj()).inv()).collect();
            let proj: f64 = f.whiten(&m).iter().map(|v| v.norm_sqr()).sum();
            let expected = (1.0 - proj * 2.0 * z.re).sqrt();
            assert!((kernel_sine(&mu, z) - expected).abs() < 1e-12, "{z}");
        }
        assert_eq!(kernel_sine(&mu, mu[2]), 0.0);
    }
}
