use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Optimal assignment of rows to distinct columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `row_to_col[i]` is the column matched to row `i`.
    pub row_to_col: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost assignment (Kuhn-Munkres with potentials, `O(n^2 m)`).
///
/// Requires `rows <= cols`; every row is matched to a distinct column.
pub fn linear_assignment(cost: &DMatrix<f64>) -> Result<Assignment> {
    let (n, m) = cost.shape();
    if n > m {
        return Err(Error::DimensionMismatch(format!(
            "assignment needs rows <= cols, got {n}x{m}"
        )));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if n == 0 {
        return Ok(Assignment {
            row_to_col: Vec::new(),
            cost: 0.0,
        });
    }

    // 1-based potentials; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    let total = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[(i, j)])
        .sum();
    Ok(Assignment {
        row_to_col,
        cost: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_three_by_three() {
        let c = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0]);
        let a = linear_assignment(&c).unwrap();
        assert_eq!(a.cost, 5.0);
        assert_eq!(a.row_to_col, vec![1, 0, 2]);
    }

    #[test]
    fn rectangular() {
        let c = DMatrix::from_row_slice(2, 3, &[10.0, 1.0, 5.0, 1.0, 10.0, 5.0]);
        let a = linear_assignment(&c).unwrap();
        assert_eq!(a.row_to_col, vec![1, 0]);
        assert_eq!(a.cost, 2.0);
    }

    #[test]
    fn rejects_tall_and_nan() {
        assert!(linear_assignment(&DMatrix::zeros(3, 2)).is_err());
        assert_eq!(
            linear_assignment(&DMatrix::from_element(1, 1, f64::NAN)).unwrap_err(),
            Error::NonFinite
        );
    }
}
