//! Trust-region reflective least squares with bound constraints
//! (Branch, Coleman and Li), with Jacobian-based variable scaling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrfOptions {
    pub max_iter: usize,
    pub gtol: f64,
    pub xtol: f64,
    pub ftol: f64,
}

impl Default for TrfOptions {
    fn default() -> Self {
        TrfOptions {
            max_iter: 200,
            gtol: 1e-10,
            xtol: 1e-12,
            ftol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrfStatus {
    Gtol,
    Ftol,
    Xtol,
    FtolXtol,
    MaxIterations,
}

impl TrfStatus {
    pub fn converged(self) -> bool {
        self != TrfStatus::MaxIterations
    }
}

#[derive(Debug, Clone)]
pub struct TrfResult {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: TrfStatus,
}

/// Residual and Jacobian at a point; `None` marks a point where the model
/// cannot be evaluated, which shrinks the trust region.
pub type Evaluation = Option<(Vec<f64>, DMatrix<f64>)>;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(j: &DMatrix<f64>, s: &[f64]) -> Vec<f64> {
    (j * DVector::from_column_slice(s)).as_slice().to_vec()
}

fn grad(j: &DMatrix<f64>, f: &[f64]) -> Vec<f64> {
    j.tr_mul(&DVector::from_column_slice(f)).as_slice().to_vec()
}

fn jac_scale_inv(j: &DMatrix<f64>, old: Option<&[f64]>) -> Vec<f64> {
    (0..j.ncols())
        .map(|k| {
            let c = j.column(k).norm();
            match old {
                None if c == 0.0 => 1.0,
                None => c,
                Some(o) => c.max(o[k]),
            }
        })
        .collect()
}

fn cl_scaling(x: &[f64], g: &[f64], lb: &[f64], ub: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mut v = vec![1.0; n];
    let mut dv = vec![0.0; n];
    for i in 0..n {
        if g[i] < 0.0 && ub[i].is_finite() {
            v[i] = ub[i] - x[i];
            dv[i] = -1.0;
        }
        if g[i] > 0.0 && lb[i].is_finite() {
            v[i] = x[i] - lb[i];
            dv[i] = 1.0;
        }
    }
    (v, dv)
}

fn in_bounds(x: &[f64], lb: &[f64], ub: &[f64]) -> bool {
    x.iter().zip(lb).zip(ub).all(|((x, l), u)| x >= l && x <= u)
}

/// Largest `t` with `x + t s` feasible, and which coordinates hit a bound
/// (with the sign of `s`).
fn step_size_to_bound(x: &[f64], s: &[f64], lb: &[f64], ub: &[f64]) -> (f64, Vec<f64>) {
    let steps: Vec<f64> = (0..x.len())
        .map(|i| {
            if s[i] != 0.0 {
                ((lb[i] - x[i]) / s[i]).max((ub[i] - x[i]) / s[i])
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let min = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let hits = (0..x.len())
        .map(|i| {
            if steps[i] == min {
                s[i].signum() * (s[i] != 0.0) as u8 as f64
            } else {
                0.0
            }
        })
        .collect();
    (min, hits)
}

/// Roots `t1 <= t2` of `||x + t s|| = delta` for `x` inside the region.
fn intersect_trust_region(x: &[f64], s: &[f64], delta: f64) -> Option<(f64, f64)> {
    let a = dot(s, s);
    if a == 0.0 {
        return None;
    }
    let b = dot(x, s);
    let c = dot(x, x) - delta * delta;
    if c > 0.0 {
        return None;
    }
    let d = (b * b - a * c).sqrt();
    let q = -(b + d.copysign(b));
    if q == 0.0 {
        return Some((0.0, 0.0));
    }
    let (t1, t2) = (q / a, c / q);
    Some(if t1 < t2 { (t1, t2) } else { (t2, t1) })
}

fn evaluate_quadratic(j: &DMatrix<f64>, g: &[f64], s: &[f64], diag: &[f64]) -> f64 {
    let js = matvec(j, s);
    0.5 * (dot(&js, &js) + s.iter().zip(diag).map(|(s, d)| s * s * d).sum::<f64>()) + dot(g, s)
}

/// Coefficients of `q(t) = a t^2 + b t + c` along `s0 + t s`.
fn build_quadratic_1d(
    j: &DMatrix<f64>,
    g: &[f64],
    s: &[f64],
    diag: &[f64],
    s0: Option<&[f64]>,
) -> (f64, f64, f64) {
    let v = matvec(j, s);
    let a = 0.5 * (dot(&v, &v) + s.iter().zip(diag).map(|(s, d)| s * s * d).sum::<f64>());
    let mut b = dot(g, s);
    let mut c = 0.0;
    if let Some(s0) = s0 {
        let u = matvec(j, s0);
        b += dot(&u, &v)
            + s0.iter()
                .zip(diag)
                .zip(s)
                .map(|((p, d), q)| p * d * q)
                .sum::<f64>();
        c = 0.5 * dot(&u, &u)
            + dot(g, s0)
            + 0.5 * s0.iter().zip(diag).map(|(p, d)| p * p * d).sum::<f64>();
    }
    (a, b, c)
}

fn minimize_quadratic_1d(a: f64, b: f64, lb: f64, ub: f64, c: f64) -> (f64, f64) {
    let mut ts = vec![lb, ub];
    if a != 0.0 {
        let ext = -0.5 * b / a;
        if lb < ext && ext < ub {
            ts.push(ext);
        }
    }
    ts.into_iter()
        .map(|t| (t, t * (a * t + b) + c))
        .fold(
            (lb, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

/// Levenberg-Marquardt parameter for `min ||J p + f||, ||p|| <= delta`
/// from the SVD of `J` (`uf = U^T f`).
fn solve_lsq_trust_region(
    m: usize,
    uf: &[f64],
    s: &[f64],
    v: &DMatrix<f64>,
    delta: f64,
    initial_alpha: Option<f64>,
) -> (Vec<f64>, f64) {
    let n = s.len();
    let suf: Vec<f64> = s.iter().zip(uf).map(|(s, u)| s * u).collect();
    let p_of = |alpha: f64| -> Vec<f64> {
        let coef: Vec<f64> = (0..n).map(|i| suf[i] / (s[i] * s[i] + alpha)).collect();
        matvec(v, &coef).into_iter().map(|x| -x).collect()
    };
    let phi = |alpha: f64| -> (f64, f64) {
        let mut pn = 0.0;
        let mut d3 = 0.0;
        for i in 0..n {
            let den = s[i] * s[i] + alpha;
            pn += (suf[i] / den).powi(2);
            d3 += suf[i] * suf[i] / den.powi(3);
        }
        let pn = pn.sqrt();
        (pn - delta, -d3 / pn)
    };
    let full_rank = m >= n && n > 0 && s[n - 1] > f64::EPSILON * m as f64 * s[0];
    if full_rank {
        let coef: Vec<f64> = (0..n).map(|i| uf[i] / s[i]).collect();
        let p: Vec<f64> = matvec(v, &coef).into_iter().map(|x| -x).collect();
        if norm(&p) <= delta {
            return (p, 0.0);
        }
    }
    let mut alpha_upper = norm(&suf) / delta;
    let mut alpha_lower = if full_rank {
        let (f, fp) = phi(0.0);
        -f / fp
    } else {
        0.0
    };
    let reset = |lo: f64, hi: f64| (0.001 * hi).max((lo * hi).sqrt());
    let mut alpha = match initial_alpha {
        None => reset(alpha_lower, alpha_upper),
        Some(a) if !full_rank && a == 0.0 => reset(alpha_lower, alpha_upper),
        Some(a) => a,
    };
    for _ in 0..10 {
        if alpha < alpha_lower || alpha > alpha_upper {
            alpha = reset(alpha_lower, alpha_upper);
        }
        let (f, fp) = phi(alpha);
        if f < 0.0 {
            alpha_upper = alpha;
        }
        let ratio = f / fp;
        alpha_lower = alpha_lower.max(alpha - ratio);
        alpha -= (f + delta) * ratio / delta;
        if f.abs() < 0.01 * delta {
            break;
        }
    }
    let mut p = p_of(alpha);
    let pn = norm(&p);
    if pn > 0.0 {
        p.iter_mut().for_each(|x| *x *= delta / pn);
    }
    (p, alpha)
}

struct StepContext<'a> {
    x: &'a [f64],
    j_h: &'a DMatrix<f64>,
    diag_h: &'a [f64],
    g_h: &'a [f64],
    d: &'a [f64],
    delta: f64,
    lb: &'a [f64],
    ub: &'a [f64],
    theta: f64,
}

/// Chooses among the reflected Gauss-Newton step, the reflection off the
/// first bound hit, and the scaled gradient step.
fn select_step(ctx: &StepContext, mut p: Vec<f64>, mut p_h: Vec<f64>) -> (Vec<f64>, Vec<f64>, f64) {
    let StepContext {
        x,
        j_h,
        diag_h,
        g_h,
        d,
        delta,
        lb,
        ub,
        theta,
    } = *ctx;
    let n = x.len();
    let xp: Vec<f64> = (0..n).map(|i| x[i] + p[i]).collect();
    if in_bounds(&xp, lb, ub) {
        let v = evaluate_quadratic(j_h, g_h, &p_h, diag_h);
        return (p, p_h, -v);
    }
    let (p_stride, hits) = step_size_to_bound(x, &p, lb, ub);
    let mut r_h = p_h.clone();
    for i in 0..n {
        if hits[i] != 0.0 {
            r_h[i] = -r_h[i];
        }
    }
    let mut r: Vec<f64> = (0..n).map(|i| d[i] * r_h[i]).collect();
    p.iter_mut().for_each(|v| *v *= p_stride);
    p_h.iter_mut().for_each(|v| *v *= p_stride);
    let x_on_bound: Vec<f64> = (0..n).map(|i| x[i] + p[i]).collect();
    let to_tr = intersect_trust_region(&p_h, &r_h, delta).map_or(0.0, |t| t.1);
    let (to_bound, _) = step_size_to_bound(&x_on_bound, &r, lb, ub);
    let r_stride = to_bound.min(to_tr);
    let (r_lo, r_hi) = if r_stride > 0.0 {
        (
            (1.0 - theta) * p_stride / r_stride,
            if r_stride == to_bound {
                theta * to_bound
            } else {
                to_tr
            },
        )
    } else {
        (0.0, -1.0)
    };
    let r_value = if r_lo <= r_hi {
        let (a, b, c) = build_quadratic_1d(j_h, g_h, &r_h, diag_h, Some(&p_h));
        let (t, val) = minimize_quadratic_1d(a, b, r_lo, r_hi, c);
        for i in 0..n {
            r_h[i] = r_h[i] * t + p_h[i];
            r[i] = r_h[i] * d[i];
        }
        val
    } else {
        f64::INFINITY
    };
    p.iter_mut().for_each(|v| *v *= theta);
    p_h.iter_mut().for_each(|v| *v *= theta);
    let p_value = evaluate_quadratic(j_h, g_h, &p_h, diag_h);

    let mut ag_h: Vec<f64> = g_h.iter().map(|v| -v).collect();
    let mut ag: Vec<f64> = (0..n).map(|i| d[i] * ag_h[i]).collect();
    let to_tr = delta / norm(&ag_h);
    let (to_bound, _) = step_size_to_bound(x, &ag, lb, ub);
    let ag_max = if to_bound < to_tr {
        theta * to_bound
    } else {
        to_tr
    };
    let (a, b, _) = build_quadratic_1d(j_h, g_h, &ag_h, diag_h, None);
    let (t, ag_value) = minimize_quadratic_1d(a, b, 0.0, ag_max, 0.0);
    ag_h.iter_mut().for_each(|v| *v *= t);
    ag.iter_mut().for_each(|v| *v *= t);

    if p_value < r_value && p_value < ag_value {
        (p, p_h, -p_value)
    } else if r_value < p_value && r_value < ag_value {
        (r, r_h, -r_value)
    } else {
        (ag, ag_h, -ag_value)
    }
}

fn make_strictly_feasible(x: &mut [f64], lb: &[f64], ub: &[f64]) {
    for i in 0..x.len() {
        if x[i] <= lb[i] {
            x[i] = next_toward(lb[i], ub[i]);
        } else if x[i] >= ub[i] {
            x[i] = next_toward(ub[i], lb[i]);
        }
        if x[i] < lb[i] || x[i] > ub[i] {
            x[i] = 0.5 * (lb[i] + ub[i]);
        }
    }
}

fn next_toward(x: f64, target: f64) -> f64 {
    if x == target || !x.is_finite() {
        return x;
    }
    let up = target > x;
    let bits = x.to_bits();
    if x == 0.0 {
        if up {
            f64::from_bits(1)
        } else {
            -f64::from_bits(1)
        }
    } else if (x > 0.0) == up {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

/// Minimizes `0.5 ||f(x)||^2` subject to `lb <= x <= ub`.
///
/// `fun` must succeed at the (strictly feasible) starting point.
pub fn least_squares<F>(
    mut fun: F,
    x0: &[f64],
    lb: &[f64],
    ub: &[f64],
    opts: TrfOptions,
) -> Result<TrfResult>
where
    F: FnMut(&[f64]) -> Evaluation,
{
    let n = x0.len();
    if lb.len() != n || ub.len() != n {
        return Err(Error::DimensionMismatch(
            "bounds do not match the starting point".into(),
        ));
    }
    let mut x = x0.to_vec();
    for i in 0..n {
        if x[i] <= lb[i] {
            x[i] = lb[i] + 1e-10 * lb[i].abs().max(1.0);
        }
        if x[i] >= ub[i] {
            x[i] = ub[i] - 1e-10 * ub[i].abs().max(1.0);
        }
        if x[i] < lb[i] || x[i] > ub[i] {
            x[i] = 0.5 * (lb[i] + ub[i]);
        }
    }
    let (mut f, mut jac) = fun(&x).ok_or(Error::InvalidArgument(
        "objective is not defined at the starting point".into(),
    ))?;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let m = f.len();
    let mut evaluations = 1;
    let max_eval = 10 * opts.max_iter.max(1) + n * 100;
    let mut cost = 0.5 * dot(&f, &f);
    let mut g = grad(&jac, &f);
    let mut scale_inv = jac_scale_inv(&jac, None);
    let mut scale: Vec<f64> = scale_inv.iter().map(|s| 1.0 / s).collect();

    let (mut v, dv) = cl_scaling(&x, &g, lb, ub);
    for i in 0..n {
        if dv[i] != 0.0 {
            v[i] *= scale_inv[i];
        }
    }
    let mut delta = norm(
        &(0..n)
            .map(|i| x[i] * scale_inv[i] / v[i].sqrt())
            .collect::<Vec<_>>(),
    );
    if delta == 0.0 || !delta.is_finite() {
        delta = 1.0;
    }
    let mut alpha = 0.0;
    let mut iteration = 0;
    let mut status = None;

    loop {
        let (mut v, dv) = cl_scaling(&x, &g, lb, ub);
        let g_norm = (0..n).map(|i| (g[i] * v[i]).abs()).fold(0.0, f64::max);
        if g_norm < opts.gtol {
            status = Some(TrfStatus::Gtol);
        }
        if status.is_some() || iteration >= opts.max_iter || evaluations >= max_eval {
            break;
        }
        for i in 0..n {
            if dv[i] != 0.0 {
                v[i] *= scale_inv[i];
            }
        }
        let d: Vec<f64> = (0..n).map(|i| v[i].sqrt() * scale[i]).collect();
        let diag_h: Vec<f64> = (0..n).map(|i| g[i] * dv[i] * scale[i]).collect();
        let g_h: Vec<f64> = (0..n).map(|i| d[i] * g[i]).collect();
        let mut j_h = jac.clone();
        for k in 0..n {
            j_h.column_mut(k).scale_mut(d[k]);
        }
        let mut j_aug = DMatrix::zeros(m + n, n);
        j_aug.view_mut((0, 0), (m, n)).copy_from(&j_h);
        for k in 0..n {
            j_aug[(m + k, k)] = diag_h[k].sqrt();
        }
        let mut f_aug = DVector::zeros(m + n);
        f_aug.rows_mut(0, m).copy_from_slice(&f);
        let svd = j_aug.svd(true, true);
        let u = svd.u.as_ref().expect("requested U");
        let vt = svd.v_t.as_ref().expect("requested V^T");
        // nalgebra does not sort singular values; order them descending.
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let uf: Vec<f64> = order.iter().map(|&i| u.column(i).dot(&f_aug)).collect();
        let vmat = DMatrix::from_fn(n, s.len(), |r, c| vt[(order[c], r)]);
        let theta = (1.0 - g_norm).max(0.995);

        let mut actual_reduction = -1.0;
        let mut accepted = None;
        while actual_reduction <= 0.0 && evaluations < max_eval {
            let (p_h, a) = solve_lsq_trust_region(m, &uf, &s, &vmat, delta, Some(alpha));
            alpha = a;
            let p: Vec<f64> = (0..n).map(|i| d[i] * p_h[i]).collect();
            let ctx = StepContext {
                x: &x,
                j_h: &j_h,
                diag_h: &diag_h,
                g_h: &g_h,
                d: &d,
                delta,
                lb,
                ub,
                theta,
            };
            let (step, step_h, predicted) = select_step(&ctx, p, p_h);
            let mut x_new: Vec<f64> = (0..n).map(|i| x[i] + step[i]).collect();
            make_strictly_feasible(&mut x_new, lb, ub);
            evaluations += 1;
            let step_h_norm = norm(&step_h);
            let eval = fun(&x_new).filter(|(fr, _)| fr.iter().all(|v| v.is_finite()));
            let Some((f_new, j_new)) = eval else {
                delta = 0.25 * step_h_norm;
                if delta == 0.0 {
                    break;
                }
                continue;
            };
            let cost_new = 0.5 * dot(&f_new, &f_new);
            actual_reduction = cost - cost_new;
            let ratio = if predicted > 0.0 {
                actual_reduction / predicted
            } else if predicted == 0.0 && actual_reduction == 0.0 {
                1.0
            } else {
                0.0
            };
            let delta_new = if ratio < 0.25 {
                0.25 * step_h_norm
            } else if ratio > 0.75 && step_h_norm > 0.95 * delta {
                2.0 * delta
            } else {
                delta
            };
            let step_norm = norm(&step);
            let ftol_ok = actual_reduction < opts.ftol * cost && ratio > 0.25;
            let xtol_ok = step_norm < opts.xtol * (opts.xtol + norm(&x));
            status = match (ftol_ok, xtol_ok) {
                (true, true) => Some(TrfStatus::FtolXtol),
                (true, false) => Some(TrfStatus::Ftol),
                (false, true) => Some(TrfStatus::Xtol),
                _ => None,
            };
            if actual_reduction > 0.0 {
                accepted = Some((x_new, f_new, j_new, cost_new));
            }
            if status.is_some() {
                break;
            }
            if delta_new > 0.0 {
                alpha *= delta / delta_new;
            }
            delta = delta_new;
            if delta == 0.0 {
                break;
            }
        }
        if let Some((xn, fnew, jn, cn)) = accepted {
            x = xn;
            f = fnew;
            jac = jn;
            cost = cn;
            g = grad(&jac, &f);
            scale_inv = jac_scale_inv(&jac, Some(&scale_inv));
            scale = scale_inv.iter().map(|s| 1.0 / s).collect();
        }
        iteration += 1;
        if delta == 0.0 && status.is_none() {
            status = Some(TrfStatus::Xtol);
        }
    }
    Ok(TrfResult {
        x,
        residual: f,
        jacobian: jac,
        cost,
        iterations: iteration,
        evaluations,
        status: status.unwrap_or(TrfStatus::MaxIterations),
    })
}
