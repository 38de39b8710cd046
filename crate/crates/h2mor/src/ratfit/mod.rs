//! Weighted least-squares fitting of real rational functions of degree `(r-1, r)`.
//!
//! A candidate is written in real partial fractions
//!
//! ```text
//! H_r(z) = sum_k (a[2k+1] z + a[2k]) / (z^2 + b[2k+1] z + b[2k])  [+ a[r-1] / (z + b[r-1]) if r is odd]
//! ```
//!
//! which is stable exactly when every `b` is positive. For fixed `b` the
//! optimal `a` solves a linear least-squares problem, so the fit optimizes
//! over `b` alone (variable projection) with a bound-constrained
//! trust-region method started from two initial guesses.

mod aaa;
mod trf;
mod varpro;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub use aaa::{aaa, Barycentric};
pub use trf::{least_squares, Evaluation, TrfOptions, TrfResult, TrfStatus};
pub use varpro::{
    build_theta, varpro_residual_jacobian, DiagonalWeight, MomentRow, VarproEval, VarproProblem,
    WeightedTheta, Weighting,
};

use crate::error::{Error, Result};
use crate::h2space::{CauchyFactorization, SampleSet};
use crate::numkit::linear_assignment;
use crate::systems::RationalRom;

#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractionParams {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Lower bound on every denominator coefficient.
    pub b_min: f64,
    pub trf: TrfOptions,
    pub aaa_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            b_min: 1e-10,
            trf: TrfOptions::default(),
            aaa_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initializer {
    PreviousPoles,
    Aaa,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: PartialFractionParams,
    pub rom: RationalRom,
    pub residual_norm: f64,
    pub jacobian_condition: f64,
    pub iterations: usize,
    pub initializer_used: Initializer,
    pub status: TrfStatus,
    /// The weighted basis lost rank at the solution.
    pub rank_deficient: bool,
    /// Poles of the unweighted AAA approximant of the data (before repair).
    pub aaa_poles: Vec<C64>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.status.converged()
    }
}

/// Closes a pole list under conjugation and moves it into the open left half-plane.
///
/// Poles are paired with the nearest conjugate of another pole by linear
/// assignment on `|lambda_j - conj(lambda_k)|`; a pair is replaced by its
/// average and that average's conjugate, and unpaired poles are projected
/// onto the real axis.
pub fn realify_poles(poles: &[C64]) -> Result<Vec<C64>> {
    let n = poles.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no poles".into()));
    }
    if poles
        .iter()
        .any(|p| !(p.re.is_finite() && p.im.is_finite()))
    {
        return Err(Error::NonFinite);
    }
    let cost = DMatrix::from_fn(n, n, |j, k| (poles[j] - poles[k].conj()).norm());
    let asg = linear_assignment(&cost)?;
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cycle = vec![start];
        seen[start] = true;
        let mut j = asg.row_to_col[start];
        while j != start {
            seen[j] = true;
            cycle.push(j);
            j = asg.row_to_col[j];
        }
        if cycle.len() % 2 == 1 {
            // The most nearly real member becomes real; the rest pair up along the cycle.
            let pos = (0..cycle.len())
                .min_by(|&a, &b| {
                    poles[cycle[a]]
                        .im
                        .abs()
                        .total_cmp(&poles[cycle[b]].im.abs())
                })
                .unwrap_or(0);
            out.push(C64::new(poles[cycle[pos]].re, 0.0));
            cycle.rotate_left(pos);
            cycle.remove(0);
        }
        for pair in cycle.chunks(2) {
            let avg = 0.5 * (poles[pair[0]] + poles[pair[1]].conj());
            out.push(avg);
            out.push(avg.conj());
        }
    }
    for p in &mut out {
        p.re = -p.re.abs().max(f64::MIN_POSITIVE);
    }
    Ok(out)
}

/// Denominator coefficients `b` for a conjugate-closed pole list, each at least `b_min`.
///
/// Conjugate pairs come first (ordered by modulus), then real poles paired
/// into quadratics from the right, and a trailing linear term when the count
/// is odd.
pub fn poles_to_params(poles: &[C64], b_min: f64) -> Result<Vec<f64>> {
    if poles.is_empty() {
        return Err(Error::InvalidArgument("no poles".into()));
    }
    let mut upper: Vec<C64> = poles.iter().copied().filter(|p| p.im > 0.0).collect();
    let lower = poles.iter().filter(|p| p.im < 0.0).count();
    if upper.len() != lower {
        return Err(Error::InvalidArgument(
            "poles are not closed under conjugation".into(),
        ));
    }
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im == 0.0).map(|p| p.re).collect();
    upper.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.im.total_cmp(&b.im)));
    real.sort_by(|a, b| b.total_cmp(a));
    let mut b = Vec::with_capacity(poles.len());
    for p in upper {
        b.push(p.norm_sqr().max(b_min));
        b.push((-2.0 * p.re).max(b_min));
    }
    for pair in real.chunks(2) {
        if let [p, q] = *pair {
            b.push((p * q).max(b_min));
            b.push((-(p + q)).max(b_min));
        } else {
            b.push((-pair[0]).max(b_min));
        }
    }
    Ok(b)
}

/// Extends a pole list to `r` entries with real poles near the data scale.
fn pad_poles(mut poles: Vec<C64>, r: usize, mu: &[C64]) -> Vec<C64> {
    let mut mags: Vec<f64> = mu.iter().map(|z| z.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let s = mags
        .get(mags.len() / 2)
        .copied()
        .unwrap_or(1.0)
        .max(f64::MIN_POSITIVE);
    let mut k = 0;
    while poles.len() < r {
        poles.push(C64::new(-s * (1.0 + 0.5 * k as f64), 0.0));
        k += 1;
    }
    poles.truncate(r);
    poles
}

fn condition(j: &DMatrix<f64>) -> f64 {
    let s = j.singular_values();
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Fit under the Cauchy whitening `fact` of the sample points.
pub fn fit(
    samples: &SampleSet,
    r: usize,
    fact: &CauchyFactorization,
    init: Option<&[C64]>,
    opts: &FitOptions,
) -> Result<FitResult> {
    if fact.points() != samples.points() {
        return Err(Error::DimensionMismatch(
            "factorization belongs to a different sample set".into(),
        ));
    }
    fit_weighted(
        samples.points(),
        samples.values(),
        r,
        fact,
        None,
        init,
        opts,
    )
}

/// Fit of degree `r` to `h = H(mu)` under an arbitrary weighting.
///
/// Starts from `init` (when it has `r` poles) and from the AAA approximant
/// of the data, and returns the result with the smaller residual, preferring
/// `init` on ties.
pub fn fit_weighted<W: Weighting + ?Sized>(
    mu: &[C64],
    h: &[C64],
    r: usize,
    weight: &W,
    moment: Option<MomentRow>,
    init: Option<&[C64]>,
    opts: &FitOptions,
) -> Result<FitResult> {
    if r == 0 {
        return Err(Error::InvalidArgument("degree must be positive".into()));
    }
    if mu.len() != h.len() {
        return Err(Error::DimensionMismatch(
            "points and values differ in length".into(),
        ));
    }
    if mu.len() < 2 * r {
        return Err(Error::InvalidArgument(format!(
            "{} samples are too few for degree {r}",
            mu.len()
        )));
    }
    if !(opts.b_min > 0.0) {
        return Err(Error::InvalidArgument("b_min must be positive".into()));
    }
    let problem = VarproProblem {
        mu,
        h,
        weight,
        moment,
    };

    let mut starts: Vec<(Initializer, Vec<f64>)> = Vec::new();
    if let Some(p) = init.filter(|p| p.len() == r) {
        if let Ok(b) = realify_poles(p).and_then(|q| poles_to_params(&q, opts.b_min)) {
            starts.push((Initializer::PreviousPoles, b));
        }
    }
    let aaa_poles = match aaa(mu, h, r.min(mu.len() - 1), opts.aaa_tol) {
        Ok(bary) => bary.poles,
        Err(_) => Vec::new(),
    };
    let repaired = pad_poles(aaa_poles.clone(), r, mu);
    if let Ok(b) = realify_poles(&repaired).and_then(|q| poles_to_params(&q, opts.b_min)) {
        starts.push((Initializer::Aaa, b));
    }

    let lb = vec![opts.b_min; r];
    let ub = vec![f64::INFINITY; r];
    let mut best: Option<FitResult> = None;
    let mut last_err = Error::NoConvergence("no feasible initialization");
    for (tag, b0) in starts {
        let run = least_squares(
            |b| problem.evaluate(b).ok().map(|e| (e.residual, e.jacobian)),
            &b0,
            &lb,
            &ub,
            opts.trf,
        );
        let outcome = run.and_then(|t| {
            let e = problem.evaluate(&t.x)?;
            let rom = RationalRom::new(e.a.clone(), t.x.clone())?;
            Ok(FitResult {
                params: PartialFractionParams {
                    a: e.a.clone(),
                    b: t.x.clone(),
                },
                rom,
                residual_norm: e.residual_norm(),
                jacobian_condition: condition(&e.jacobian),
                iterations: t.iterations,
                initializer_used: tag,
                status: t.status,
                rank_deficient: e.rank_deficient,
                aaa_poles: aaa_poles.clone(),
            })
        });
        match outcome {
            Ok(res) => {
                if best
                    .as_ref()
                    .is_none_or(|b| res.residual_norm < b.residual_norm)
                {
                    best = Some(res);
                }
            }
            Err(e) => last_err = e,
        }
    }
    best.ok_or(last_err)
}
