use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative threshold on `|R[k,k]| / |R[0,0]|` below which a column counts as dependent.
pub const RANK_TOL: f64 = 1e-14;

/// Householder QR with column pivoting, `A[:, col_perm] = Q R`.
///
/// Rows are sorted by decreasing infinity norm before factoring so that large
/// rows are eliminated first; `q` is returned in the caller's row order.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Thin orthonormal factor, `m x k` with `k = min(m, n)`.
    pub q: DMatrix<f64>,
    /// Upper-trapezoidal factor, `k x n`.
    pub r: DMatrix<f64>,
    pub col_perm: Vec<usize>,
    /// Number of diagonal entries of `r` above the rank threshold.
    pub rank: usize,
}

impl PivotedQr {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.r.nrows().min(self.r.ncols())
    }

    /// Basic least-squares solution `argmin ||A x - y||`, zeroing components
    /// beyond the numerical rank.
    pub fn solve_least_squares(&self, y: &[f64]) -> Vec<f64> {
        let qty = self.q.tr_mul(&nalgebra::DVector::from_column_slice(y));
        let k = self.rank;
        let mut z = vec![0.0; self.r.ncols()];
        for i in (0..k).rev() {
            let mut s = qty[i];
            for j in i + 1..k {
                s -= self.r[(i, j)] * z[j];
            }
            z[i] = s / self.r[(i, i)];
        }
        let mut x = vec![0.0; z.len()];
        for (j, &p) in self.col_perm.iter().enumerate() {
            x[p] = z[j];
        }
        x
    }
}

pub fn qr_pivoted(a: &DMatrix<f64>) -> Result<PivotedQr> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (m, n) = a.shape();
    let k = m.min(n);

    let mut row_order: Vec<usize> = (0..m).collect();
    let row_norm = |i: usize| a.row(i).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    row_order.sort_by(|&i, &j| row_norm(j).total_cmp(&row_norm(i)).then(i.cmp(&j)));

    let mut w = DMatrix::<f64>::from_fn(m, n, |i, j| a[(row_order[i], j)]);
    let mut col_perm: Vec<usize> = (0..n).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);

    for step in 0..k {
        let mut best = step;
        let mut best_norm = -1.0;
        for j in step..n {
            let nrm = w.view((step, j), (m - step, 1)).norm_squared();
            if nrm > best_norm {
                best_norm = nrm;
                best = j;
            }
        }
        if best != step {
            w.swap_columns(step, best);
            col_perm.swap(step, best);
        }

        let mut v: Vec<f64> = (step..m).map(|i| w[(i, step)]).collect();
        let norm_x = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm_x } else { norm_x };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= vnorm;
        }
        for j in step..n {
            let dot: f64 = (step..m).map(|i| v[i - step] * w[(i, j)]).sum();
            for i in step..m {
                w[(i, j)] -= 2.0 * v[i - step] * dot;
            }
        }
        for i in step + 1..m {
            w[(i, step)] = 0.0;
        }
        reflectors.push(v);
    }

    let r = DMatrix::<f64>::from_fn(k, n, |i, j| if j >= i { w[(i, j)] } else { 0.0 });

    let mut q_sorted = DMatrix::<f64>::zeros(m, k);
    for i in 0..k {
        q_sorted[(i, i)] = 1.0;
    }
    for step in (0..k).rev() {
        let v = &reflectors[step];
        if v.is_empty() {
            continue;
        }
        for j in 0..k {
            let dot: f64 = (step..m).map(|i| v[i - step] * q_sorted[(i, j)]).sum();
            for i in step..m {
                q_sorted[(i, j)] -= 2.0 * v[i - step] * dot;
            }
        }
    }
    let mut q = DMatrix::<f64>::zeros(m, k);
    for (sorted_i, &orig_i) in row_order.iter().enumerate() {
        q.row_mut(orig_i).copy_from(&q_sorted.row(sorted_i));
    }

    let r00 = if k > 0 { r[(0, 0)].abs() } else { 0.0 };
    let rank = if r00 == 0.0 {
        0
    } else {
        (0..k)
            .take_while(|&i| r[(i, i)].abs() > RANK_TOL * r00)
            .count()
    };

    Ok(PivotedQr {
        q,
        r,
        col_perm,
        rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(f: &PivotedQr) -> DMatrix<f64> {
        &f.q * &f.r
    }

    #[test]
    fn reconstructs_permuted_matrix() {
        let a = DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 2.0, 3.0, 4.0, 5.0, 6.5, 7.0, 8.0, 10.0, 1e-3, 2.0, -1.0,
            ],
        );
        let f = qr_pivoted(&a).unwrap();
        let ap = DMatrix::from_fn(4, 3, |i, j| a[(i, f.col_perm[j])]);
        assert!((reconstruct(&f) - ap).norm() < 1e-13);
        let qtq = f.q.tr_mul(&f.q);
        assert!((qtq - DMatrix::identity(3, 3)).norm() < 1e-14);
        assert!(!f.rank_deficient());
        for i in 1..3 {
            assert!(f.r[(i, i)].abs() <= f.r[(i - 1, i - 1)].abs() + 1e-14);
        }
    }

    #[test]
    fn flags_dependent_columns() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 1.0, 3.0, 6.0, 0.0]);
        let f = qr_pivoted(&a).unwrap();
        assert!(f.rank_deficient());
        assert_eq!(f.rank, 2);
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = [1.0, 2.0, 2.0, 4.0];
        let x = qr_pivoted(&a).unwrap().solve_least_squares(&y);
        let ata = a.tr_mul(&a);
        let aty = a.tr_mul(&nalgebra::DVector::from_column_slice(&y));
        let xn = ata.lu().solve(&aty).unwrap();
        assert!((x[0] - xn[0]).abs() < 1e-13 && (x[1] - xn[1]).abs() < 1e-13);
    }

    #[test]
    fn rejects_nan() {
        let a = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert_eq!(qr_pivoted(&a).unwrap_err(), Error::NonFinite);
    }
}
