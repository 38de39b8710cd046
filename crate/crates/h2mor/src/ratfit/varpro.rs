use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::h2space::CauchyFactorization;
use crate::numkit::qr_pivoted;

/// A linear map applied to complex sample vectors before the least-squares
/// residual is measured.
#[allow(clippy::len_without_is_empty)]
pub trait Weighting {
    /// Number of samples the weighting acts on.
    fn len(&self) -> usize;
    fn apply(&self, z: &[C64]) -> Vec<C64>;

    /// Weighted `Theta(b)` columns at `mu` and their weighted partial
    /// derivatives, grouped per parameter as `(column, derivative)`.
    fn weighted_theta(&self, b: &[f64], mu: &[C64]) -> Result<WeightedTheta> {
        let theta = build_theta(b, mu)?;
        let columns = theta
            .column_iter()
            .map(|c| self.apply(c.as_slice()))
            .collect();
        let derivatives = theta_derivatives(b, mu)
            .into_iter()
            .map(|cols| cols.into_iter().map(|(c, d)| (c, self.apply(&d))).collect())
            .collect();
        Ok(WeightedTheta {
            columns,
            derivatives,
        })
    }
}

pub struct WeightedTheta {
    pub columns: Vec<Vec<C64>>,
    pub derivatives: Vec<Vec<(usize, Vec<C64>)>>,
}

impl Weighting for CauchyFactorization {
    fn len(&self) -> usize {
        CauchyFactorization::len(self)
    }

    fn apply(&self, z: &[C64]) -> Vec<C64> {
        self.whiten(z)
    }

    /// Evaluated in the orthonormal basis of `V(mu)`; see
    /// [`CauchyFactorization::whiten_partial_fractions`].
    fn weighted_theta(&self, b: &[f64], _mu: &[C64]) -> Result<WeightedTheta> {
        check_b(b)?;
        let (columns, derivatives) = self.whiten_partial_fractions(b);
        Ok(WeightedTheta {
            columns,
            derivatives,
        })
    }
}

/// `z -> sqrt(w) .* z`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalWeight {
    sqrt_w: Vec<f64>,
}

impl DiagonalWeight {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(DiagonalWeight {
            sqrt_w: weights.iter().map(|w| w.sqrt()).collect(),
        })
    }
}

impl Weighting for DiagonalWeight {
    fn len(&self) -> usize {
        self.sqrt_w.len()
    }

    fn apply(&self, z: &[C64]) -> Vec<C64> {
        z.iter().zip(&self.sqrt_w).map(|(z, w)| z * w).collect()
    }
}

/// Extra real row `sqrt(weight) * (target - lim z H_r(z))` matching the
/// moment at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    pub target: f64,
    pub weight: f64,
}

fn check_b(b: &[f64]) -> Result<()> {
    if b.is_empty() {
        return Err(Error::InvalidArgument("degree must be positive".into()));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if b.iter().any(|&v| v <= 0.0) {
        return Err(Error::Unstable);
    }
    Ok(())
}

/// Columns of `Theta(b)` evaluated at `mu`: per pair `[1/d, mu/d]` with
/// `d = mu^2 + b[2k+1] mu + b[2k]`, and `1/(mu + b[r-1])` when `r` is odd,
/// so that `H_r(mu) = Theta(b) a`.
pub fn build_theta(b: &[f64], mu: &[C64]) -> Result<DMatrix<C64>> {
    check_b(b)?;
    let r = b.len();
    let mut theta = DMatrix::zeros(mu.len(), r);
    for (i, &z) in mu.iter().enumerate() {
        for k in 0..r / 2 {
            let d = z * z + b[2 * k + 1] * z + b[2 * k];
            if d == C64::new(0.0, 0.0) {
                return Err(Error::PoleProximity(z));
            }
            let inv = d.inv();
            theta[(i, 2 * k)] = inv;
            theta[(i, 2 * k + 1)] = z * inv;
        }
        if r % 2 == 1 {
            let d = z + b[r - 1];
            if d == C64::new(0.0, 0.0) {
                return Err(Error::PoleProximity(z));
            }
            theta[(i, r - 1)] = d.inv();
        }
    }
    Ok(theta)
}

/// 1 for the columns that carry the `z`-coefficient of a term.
fn moment_pattern(r: usize) -> impl Iterator<Item = f64> {
    (0..r).map(move |j| {
        if j % 2 == 1 || (r % 2 == 1 && j == r - 1) {
            1.0
        } else {
            0.0
        }
    })
}

/// Partial derivatives of `Theta` columns: for each parameter, the list of
/// `(column, derivative vector)`.
fn theta_derivatives(b: &[f64], mu: &[C64]) -> Vec<Vec<(usize, Vec<C64>)>> {
    let r = b.len();
    let mut out = Vec::with_capacity(r);
    for k in 0..r / 2 {
        let (mut d0, mut d1, mut d2) = (Vec::new(), Vec::new(), Vec::new());
        for &z in mu {
            let d = z * z + b[2 * k + 1] * z + b[2 * k];
            let inv2 = -(d * d).inv();
            d0.push(inv2);
            d1.push(z * inv2);
            d2.push(z * z * inv2);
        }
        out.push(vec![(2 * k, d0.clone()), (2 * k + 1, d1.clone())]);
        out.push(vec![(2 * k, d1), (2 * k + 1, d2)]);
    }
    if r % 2 == 1 {
        let col = mu
            .iter()
            .map(|&z| -((z + b[r - 1]) * (z + b[r - 1])).inv())
            .collect();
        out.push(vec![(r - 1, col)]);
    }
    out
}

fn stack(z: &[C64], extra: Option<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = z
        .iter()
        .map(|c| c.re)
        .chain(z.iter().map(|c| c.im))
        .collect();
    if let Some(e) = extra {
        v.push(e);
    }
    v
}

/// Residual, Jacobian and optimal linear coefficients of the variable
/// projection functional at `b`.
#[derive(Debug, Clone)]
pub struct VarproEval {
    /// `[Re; Im]` of the weighted mismatch, followed by the moment row if any.
    pub residual: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    pub a: Vec<f64>,
    /// The weighted `Theta` lost rank: the best approximation has lower degree.
    pub rank_deficient: bool,
}

impl VarproEval {
    pub fn residual_norm(&self) -> f64 {
        self.residual.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Weighted least-squares data `min || W (h - H_r(mu)) ||` plus an optional moment row.
pub struct VarproProblem<'a, W: Weighting + ?Sized> {
    pub mu: &'a [C64],
    pub h: &'a [C64],
    pub weight: &'a W,
    pub moment: Option<MomentRow>,
}

impl<W: Weighting + ?Sized> VarproProblem<'_, W> {
    fn check(&self) -> Result<()> {
        if self.mu.len() != self.h.len() || self.weight.len() != self.mu.len() {
            return Err(Error::DimensionMismatch(
                "samples, values and weighting differ in length".into(),
            ));
        }
        Ok(())
    }

    /// Number of real residual rows.
    pub fn rows(&self) -> usize {
        2 * self.mu.len() + self.moment.is_some() as usize
    }

    pub fn evaluate(&self, b: &[f64]) -> Result<VarproEval> {
        self.check()?;
        let r = b.len();
        let wt = self.weight.weighted_theta(b, self.mu)?;
        let sw = self.moment.map(|m| m.weight.sqrt());
        let m_rows = self.rows();
        if m_rows < r {
            return Err(Error::InvalidArgument(format!(
                "{m_rows} real equations cannot determine {r} coefficients"
            )));
        }

        let mut a_mat = DMatrix::zeros(m_rows, r);
        for (j, w) in wt.columns.iter().enumerate() {
            let pattern = sw.map(|s| s * moment_pattern(r).nth(j).unwrap_or(0.0));
            for (i, v) in stack(w, pattern).into_iter().enumerate() {
                a_mat[(i, j)] = v;
            }
        }
        let y = stack(
            &self.weight.apply(self.h),
            self.moment.map(|m| m.weight.sqrt() * m.target),
        );
        if a_mat.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }

        let qr = qr_pivoted(&a_mat)?;
        let a = qr.solve_least_squares(&y);
        let k = qr.rank;
        let q = qr.q.columns(0, k);
        let r11 = qr.r.view((0, 0), (k, k));
        let project_out = |x: DVector<f64>| -> DVector<f64> {
            let c = q.tr_mul(&x);
            x - q * c
        };
        // Projecting with the orthonormal factor avoids the cancellation in y - A a.
        let res = project_out(DVector::from_column_slice(&y));
        // (A^+)^T v = Q R^{-T} v[perm] on the leading rank-k block.
        let pinv_t = |v: &DVector<f64>| -> DVector<f64> {
            let vp = DVector::from_iterator(k, qr.col_perm.iter().take(k).map(|&p| v[p]));
            let x = r11
                .transpose()
                .solve_lower_triangular(&vp)
                .unwrap_or_else(|| DVector::zeros(k));
            q * x
        };

        let mut jac = DMatrix::zeros(m_rows, r);
        for (j, cols) in wt.derivatives.into_iter().enumerate() {
            let mut da_a = DVector::zeros(m_rows);
            let mut dat_r = DVector::zeros(r);
            for (c, dcol) in cols {
                let w = DVector::from_vec(stack(&dcol, sw.map(|_| 0.0)));
                da_a.axpy(a[c], &w, 1.0);
                dat_r[c] += w.dot(&res);
            }
            let col = -(project_out(da_a) + pinv_t(&dat_r));
            jac.set_column(j, &col);
        }
        Ok(VarproEval {
            residual: res.as_slice().to_vec(),
            jacobian: jac,
            a,
            rank_deficient: qr.rank_deficient(),
        })
    }
}

/// Residual and Jacobian under the Cauchy whitening of `fact`.
pub fn varpro_residual_jacobian(
    b: &[f64],
    mu: &[C64],
    h: &[C64],
    fact: &CauchyFactorization,
) -> Result<VarproEval> {
    VarproProblem {
        mu,
        h,
        weight: fact,
        moment: None,
    }
    .evaluate(b)
}
