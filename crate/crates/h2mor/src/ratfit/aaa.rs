use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numkit::{eigenvalues, generalized_eigenvalues};

/// Barycentric rational `sum_j w_j f_j / (z - z_j) / sum_j w_j / (z - z_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Barycentric {
    pub support: Vec<C64>,
    pub values: Vec<C64>,
    pub weights: Vec<C64>,
    pub poles: Vec<C64>,
}

impl Barycentric {
    pub fn degree(&self) -> usize {
        self.support.len().saturating_sub(1)
    }

    pub fn eval(&self, z: C64) -> C64 {
        let mut num = C64::new(0.0, 0.0);
        let mut den = C64::new(0.0, 0.0);
        for ((zj, fj), wj) in self.support.iter().zip(&self.values).zip(&self.weights) {
            let d = z - zj;
            if d == C64::new(0.0, 0.0) {
                return *fj;
            }
            let c = wj / d;
            num += c * fj;
            den += c;
        }
        num / den
    }
}

/// Roots of `sum_j w_j / (z - z_j)`, via the eigenvalues of
/// `diag(z_1..z_{m-1}) - u 1^T / S` with `u_j = w_j (z_j - z_m)`, `S = sum w`.
fn barycentric_poles(z: &[C64], w: &[C64]) -> Result<Vec<C64>> {
    let m = z.len();
    if m < 2 {
        return Ok(Vec::new());
    }
    let s: C64 = w.iter().sum();
    let scale = w.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if s.norm() <= 1e-14 * scale {
        // A root at infinity: fall back to the arrowhead pencil.
        let a = DMatrix::from_fn(m + 1, m + 1, |i, j| match (i, j) {
            (0, 0) => C64::new(0.0, 0.0),
            (0, j) => w[j - 1],
            (_, 0) => C64::new(1.0, 0.0),
            (i, j) if i == j => z[i - 1],
            _ => C64::new(0.0, 0.0),
        });
        let b = DMatrix::from_fn(m + 1, m + 1, |i, j| {
            C64::new((i == j && i > 0) as u8 as f64, 0.0)
        });
        return Ok(generalized_eigenvalues(&a, &b)?
            .into_iter()
            .filter_map(|e| e.finite())
            .collect());
    }
    let zm = z[m - 1];
    let k = DMatrix::from_fn(m - 1, m - 1, |i, j| {
        let u = w[i] * (z[i] - zm) / s;
        if i == j {
            z[i] - u
        } else {
            -u
        }
    });
    Ok(eigenvalues(&k)?
        .into_iter()
        .filter(|p| p.re.is_finite() && p.im.is_finite())
        .collect())
}

/// Greedy AAA with at most `degree + 1` support points, stopping early once
/// the relative residual drops below `tol`.
pub fn aaa(mu: &[C64], h: &[C64], degree: usize, tol: f64) -> Result<Barycentric> {
    let n = mu.len();
    if h.len() != n {
        return Err(Error::DimensionMismatch(
            "points and values differ in length".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("no data".into()));
    }
    if degree >= n {
        return Err(Error::InvalidArgument(format!(
            "degree {degree} needs more than {n} samples"
        )));
    }
    if mu
        .iter()
        .chain(h)
        .any(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        return Err(Error::NonFinite);
    }
    let fmax = h.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mean: C64 = h.iter().sum::<C64>() / n as f64;
    let mut approx = vec![mean; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut support: Vec<usize> = Vec::new();
    let mut weights: Vec<C64> = Vec::new();

    for m in 1..=degree + 1 {
        let (pos, _) = active
            .iter()
            .enumerate()
            .map(|(p, &i)| (p, (h[i] - approx[i]).norm()))
            .fold(
                (0, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        let j = active.remove(pos);
        support.push(j);

        let rows = active.len().max(m);
        let mut loewner = DMatrix::<C64>::zeros(rows, m);
        for (r, &i) in active.iter().enumerate() {
            for (c, &k) in support.iter().enumerate() {
                loewner[(r, c)] = (h[i] - h[k]) / (mu[i] - mu[k]);
            }
        }
        let svd = loewner.svd(false, true);
        let vt = svd.v_t.as_ref().ok_or(Error::NoConvergence("svd"))?;
        // Zero rows pad the system to at least m rows, so V^H is m x m.
        let kmin = (0..m)
            .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
            .unwrap_or(0);
        weights = (0..m).map(|c| vt[(kmin, c)].conj()).collect();

        approx = h.to_vec();
        for &i in &active {
            let mut num = C64::new(0.0, 0.0);
            let mut den = C64::new(0.0, 0.0);
            for (c, &k) in support.iter().enumerate() {
                let t = weights[c] / (mu[i] - mu[k]);
                num += t * h[k];
                den += t;
            }
            approx[i] = num / den;
        }
        let err = active
            .iter()
            .map(|&i| (h[i] - approx[i]).norm())
            .fold(0.0, f64::max);
        if err <= tol * fmax || active.is_empty() {
            break;
        }
    }
    let z: Vec<C64> = support.iter().map(|&i| mu[i]).collect();
    let poles = barycentric_poles(&z, &weights)?;
    Ok(Barycentric {
        values: support.iter().map(|&i| h[i]).collect(),
        support: z,
        weights,
        poles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn points() -> Vec<C64> {
        (0..12)
            .map(|k| {
                c(
                    0.2 + 0.3 * k as f64,
                    if k % 2 == 0 {
                        0.5 * k as f64
                    } else {
                        -0.4 * k as f64
                    },
                )
            })
            .collect()
    }

    #[test]
    fn first_order_pole() {
        let mu = points();
        let h: Vec<C64> = mu.iter().map(|&z| (z + 1.0).inv()).collect();
        let r = aaa(&mu, &h, 1, 1e-13).unwrap();
        assert_eq!(r.poles.len(), 1);
        assert!((r.poles[0] + 1.0).norm() < 1e-10, "{:?}", r.poles);
    }

    #[test]
    fn constant_data() {
        let mu = points();
        let h = vec![c(2.0, 0.0); mu.len()];
        let r = aaa(&mu, &h, 3, 1e-13).unwrap();
        assert_eq!(r.degree(), 0);
        assert!(r.poles.is_empty());
        assert!((r.eval(c(5.0, 1.0)) - 2.0).norm() < 1e-15);
    }

    #[test]
    fn quadratic_poles() {
        let mu = points();
        let h: Vec<C64> = mu.iter().map(|&z| (z * z + 2.0 * z + 2.0).inv()).collect();
        let r = aaa(&mu, &h, 2, 1e-13).unwrap();
        let mut p = r.poles.clone();
        p.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert_eq!(p.len(), 2);
        assert!(
            (p[0] - c(-1.0, -1.0)).norm() < 1e-8 && (p[1] - c(-1.0, 1.0)).norm() < 1e-8,
            "{p:?}"
        );
    }

    #[test]
    fn interpolates_support_points() {
        let mu = points();
        let h: Vec<C64> = mu.iter().map(|&z| (-z).exp() / (z + 0.5)).collect();
        let r = aaa(&mu, &h, 4, 1e-13).unwrap();
        // Interpolation requires every weight to be nonzero; check the limit too.
        let wmax = r.weights.iter().map(|w| w.norm()).fold(0.0, f64::max);
        for ((z, f), w) in r.support.iter().zip(&r.values).zip(&r.weights) {
            assert!(w.norm() > 1e-8 * wmax);
            let near = z + 1e-9 * z.norm();
            assert!((r.eval(near) - f).norm() <= 1e-6 * f.norm().max(1.0));
        }
        assert!(aaa(&mu, &h, 12, 1e-13).is_err());
    }
}
