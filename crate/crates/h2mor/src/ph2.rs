//! Projected H2 model reduction.
//!
//! Each outer iteration fits a real rational ROM to all samples collected so
//! far, in the norm of the H2 projection onto the span of their kernels, and
//! then samples `H` at the mirror image `-conj(lambda)` of the ROM pole whose
//! tangent space is least covered by that span.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::h2space::{
    cauchy_cholesky, kernel_sine, subspace_angle_tangent, CauchyFactorization, SampleSet,
    DISTINCT_TOL,
};
use crate::numkit::linear_assignment;
use crate::ratfit::{fit, FitOptions};
use crate::systems::{
    h2_error, rom_difference_norm, H2Error, QuadratureOptions, RationalRom, TransferFunctionModel,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Ph2Config {
    pub target_r: usize,
    /// Initial samples in the open right half-plane; conjugates are added
    /// automatically. Empty means the model's default shifts.
    pub initial_mu: Vec<C64>,
    pub tol_term: f64,
    pub max_outer_iters: usize,
    pub spurious_box_factor: f64,
    /// At full degree, stop once the largest tangent-space angle falls below
    /// this value: the poles' tangent spaces already lie in `V(mu)` to the
    /// accuracy of the angle computation.
    pub angle_tol: f64,
    /// Smallest admissible sine between a new sample's kernel and `V(mu)`.
    pub kernel_tol: f64,
    pub fit: FitOptions,
    /// Record the true H2 error of each iterate (not counted as evaluations).
    pub track_error: Option<QuadratureOptions>,
}

impl Ph2Config {
    pub fn new(target_r: usize, initial_mu: Vec<C64>) -> Self {
        Ph2Config {
            target_r,
            initial_mu,
            tol_term: 1e-9,
            max_outer_iters: 100,
            spurious_box_factor: 10.0,
            angle_tol: 1e-8,
            kernel_tol: 1e-6,
            fit: FitOptions::default(),
            track_error: None,
        }
    }
}

/// Number of rightmost model poles used as default initial samples.
pub fn default_initial_count(r: usize) -> usize {
    if r <= 2 {
        2 * r
    } else {
        r
    }
}

/// Region `F(mu)` outside of which a ROM pole counts as spurious.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpuriousBox {
    pub real_interval: (f64, f64),
    pub imag_interval: (f64, f64),
}

impl SpuriousBox {
    pub fn from_points(mu: &[C64], factor: f64) -> Self {
        let fold =
            |f: fn(f64, f64) -> f64, init: f64, g: fn(&C64) -> f64| mu.iter().map(g).fold(init, f);
        let re_max = fold(f64::max, f64::NEG_INFINITY, |z| z.re);
        let re_min = fold(f64::min, f64::INFINITY, |z| z.re);
        let im_max = fold(f64::max, f64::NEG_INFINITY, |z| z.im);
        let im_min = fold(f64::min, f64::INFINITY, |z| z.im);
        SpuriousBox {
            real_interval: (-factor * re_max, -re_min / factor),
            imag_interval: (factor * im_min, factor * im_max),
        }
    }

    pub fn contains(&self, z: C64) -> bool {
        let (a, b) = self.real_interval;
        let (c, d) = self.imag_interval;
        z.re >= a && z.re <= b && z.im >= c && z.im <= d
    }
}

/// Replaces every pole outside `bx` by its matched AAA pole, when it has one.
/// Returns the repaired poles and the poles that were replaced.
pub fn filter_spurious(
    poles: &[C64],
    matched: &[Option<C64>],
    bx: &SpuriousBox,
) -> (Vec<C64>, Vec<C64>) {
    let mut out = Vec::with_capacity(poles.len());
    let mut replaced = Vec::new();
    for (p, m) in poles.iter().zip(matched) {
        match m {
            Some(q) if !bx.contains(*p) => {
                replaced.push(*p);
                out.push(*q);
            }
            _ => out.push(*p),
        }
    }
    (out, replaced)
}

/// Flips AAA poles into the left half-plane (`-|Re| + i Im`) and orders them
/// to match `poles` by minimal total distance.
pub fn match_aaa_poles(poles: &[C64], aaa: &[C64]) -> Result<Vec<Option<C64>>> {
    let flipped: Vec<C64> = aaa.iter().map(|z| C64::new(-z.re.abs(), z.im)).collect();
    let r = poles.len();
    if r == 0 {
        return Ok(Vec::new());
    }
    let cols = flipped.len().max(r);
    let dist = DMatrix::from_fn(r, flipped.len(), |j, k| (poles[j] - flipped[k]).norm());
    // Padding columns take the surplus ROM poles; their cost dominates any real match
    // without swamping the differences between real matches.
    let pad = 1.0
        + 1e3
            * dist
                .iter()
                .copied()
                .filter(|d| d.is_finite())
                .fold(0.0, f64::max)
            * r as f64;
    let cost = DMatrix::from_fn(
        r,
        cols,
        |j, k| if k < flipped.len() { dist[(j, k)] } else { pad },
    );
    let asg = linear_assignment(&cost)?;
    Ok(asg
        .row_to_col
        .iter()
        .map(|&k| flipped.get(k).copied())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewPoints {
    pub points: Vec<C64>,
    /// Angles could not be computed; the pole farthest from all samples was used.
    pub fallback: bool,
    /// Largest principal angle of the selected pole's tangent space.
    pub angle: Option<f64>,
}

impl NewPoints {
    pub fn stagnated(&self) -> bool {
        self.points.is_empty()
    }
}

/// `-conj(lambda*)` (and its conjugate) for the pole `lambda*` whose tangent
/// space makes the largest angle with `V(mu)`.
///
/// Candidates whose kernel is numerically inside `V(mu)` (sine of the angle
/// below `kernel_tol`, see [`kernel_sine`]) are skipped: they add no
/// information but shrink the Cauchy pivots, which amplifies rounding in the
/// whitened data. Nearly real candidates are moved onto the real axis.
pub fn select_new_point(
    poles: &[C64],
    samples: &SampleSet,
    fact: &CauchyFactorization,
    kernel_tol: f64,
) -> NewPoints {
    let angles: Result<Vec<f64>> = poles
        .iter()
        .map(|&p| subspace_angle_tangent(fact, p))
        .collect();
    let (scores, fallback) = match angles {
        Ok(a) => (a, false),
        Err(_) => {
            let s = poles
                .iter()
                .map(|p| {
                    samples
                        .points()
                        .iter()
                        .map(|m| (m + p.conj()).norm())
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            (s, true)
        }
    };
    let mut order: Vec<usize> = (0..poles.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let tol = kernel_tol.max(DISTINCT_TOL);
    for k in order {
        let mut cand = -poles[k].conj();
        if cand.im.abs() <= tol * cand.norm() {
            cand.im = 0.0;
        }
        if !(cand.re > 0.0) || samples.contains(cand) || kernel_sine(samples.points(), cand) < tol {
            continue;
        }
        let mut points = vec![cand];
        if cand.im != 0.0 && !samples.contains(cand.conj()) {
            points.push(cand.conj());
        }
        let angle = (!fallback).then_some(scores[k]);
        return NewPoints {
            points,
            fallback,
            angle,
        };
    }
    NewPoints {
        points: Vec::new(),
        fallback,
        angle: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ph2Status {
    /// Two consecutive iterates differ by less than the tolerance.
    Converged,
    /// Every candidate point already belongs to the sample set, or every
    /// tangent space is numerically contained in the sample subspace.
    Stagnated,
    MaxIterations,
    /// The inner fit failed; the last successful iterate is returned.
    Failed(String),
}

impl Ph2Status {
    pub fn converged(&self) -> bool {
        matches!(self, Ph2Status::Converged | Ph2Status::Stagnated)
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub fom_evals: usize,
    pub rom: RationalRom,
    pub reduced_degree: usize,
    pub samples: usize,
    pub projected_residual: f64,
    pub h2_error: Option<H2Error>,
    /// `||H_r^l - H_r^{l-1}||`, when the previous iterate has the same degree.
    pub step: Option<f64>,
    pub added_points: Vec<C64>,
    pub replaced_spurious: Vec<C64>,
    pub angle_fallback: bool,
    pub selected_angle: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub iterations: Vec<IterationRecord>,
    pub status: Ph2Status,
    pub samples: SampleSet,
}

/// Appends real points `(k + 2) * max |mu|` until there are `min` of them.
fn pad_real(mut mu: Vec<C64>, min: usize) -> Vec<C64> {
    let scale = mu.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut k = 0;
    while mu.len() < min {
        mu.push(C64::new((k + 2) as f64 * scale, 0.0));
        k += 1;
    }
    mu
}

fn close_under_conjugation(mu: &[C64]) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::with_capacity(2 * mu.len());
    let near =
        |a: C64, b: C64| (a - b).norm() <= crate::h2space::DISTINCT_TOL * a.norm().max(b.norm());
    for &z in mu {
        if !out.iter().any(|&w| near(w, z)) {
            out.push(z);
        }
        if z.im != 0.0 && !out.iter().any(|&w| near(w, z.conj())) {
            out.push(z.conj());
        }
    }
    out
}

/// Runs the outer loop until two consecutive ROMs agree to `tol_term`.
pub fn run(model: &TransferFunctionModel, cfg: &Ph2Config) -> Result<(RationalRom, RunRecord)> {
    let r = cfg.target_r;
    if r == 0 {
        return Err(Error::InvalidArgument(
            "target degree must be positive".into(),
        ));
    }
    if !(cfg.tol_term > 0.0) {
        return Err(Error::InvalidArgument(
            "termination tolerance must be positive".into(),
        ));
    }
    let initial = if cfg.initial_mu.is_empty() {
        let shifts = model
            .default_shifts(default_initial_count(r))
            .ok_or_else(|| {
                Error::InvalidArgument("initial samples are required for this model".into())
            })?;
        pad_real(close_under_conjugation(&shifts), (2 * r).min(4))
    } else {
        close_under_conjugation(&cfg.initial_mu)
    };
    if initial.len() < 2 * r && initial.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "{} initial samples; need at least 4 or 2r",
            initial.len()
        )));
    }
    let values = initial
        .iter()
        .map(|&z| model.evaluate(z))
        .collect::<Result<Vec<_>>>()?;
    let mut samples = SampleSet::new(initial, values)?;

    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut prev: Option<RationalRom> = None;
    let mut status = Ph2Status::MaxIterations;
    for _ in 0..cfg.max_outer_iters.max(1) {
        let n = samples.len();
        let rt = if n < 2 * r { 2 * (n / 4) } else { r };
        let fact = cauchy_cholesky(samples.points())?;
        let init = prev
            .as_ref()
            .filter(|p| p.degree() == rt)
            .map(|p| p.poles().to_vec());
        let fitted = match fit(&samples, rt, &fact, init.as_deref(), &cfg.fit) {
            Ok(f) => f,
            Err(e) if prev.is_some() => {
                status = Ph2Status::Failed(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let rom = fitted.rom;
        let step = prev
            .as_ref()
            .filter(|p| p.degree() == rom.degree())
            .map(|p| rom_difference_norm(p, &rom));
        let h2 = cfg.track_error.and_then(|q| h2_error(model, &rom, q).ok());
        let mut rec = IterationRecord {
            fom_evals: model.fom_evals(),
            rom: rom.clone(),
            reduced_degree: rt,
            samples: n,
            projected_residual: fitted.residual_norm,
            h2_error: h2,
            step,
            added_points: Vec::new(),
            replaced_spurious: Vec::new(),
            angle_fallback: false,
            selected_angle: None,
        };
        if rt == r && step.is_some_and(|s| s < cfg.tol_term) {
            iterations.push(rec);
            prev = Some(rom);
            status = Ph2Status::Converged;
            break;
        }

        let poles = rom.poles().to_vec();
        let matched = match_aaa_poles(&poles, &fitted.aaa_poles)?;
        let bx = SpuriousBox::from_points(samples.points(), cfg.spurious_box_factor);
        let (repaired, replaced) = filter_spurious(&poles, &matched, &bx);
        rec.replaced_spurious = replaced;
        let new = select_new_point(&repaired, &samples, &fact, cfg.kernel_tol);
        rec.angle_fallback = new.fallback;
        rec.selected_angle = new.angle;
        if new.stagnated() || (rt == r && new.angle.is_some_and(|a| a < cfg.angle_tol)) {
            iterations.push(rec);
            prev = Some(rom);
            status = Ph2Status::Stagnated;
            break;
        }
        for &z in &new.points {
            let v = model.evaluate(z)?;
            samples.push(z, v)?;
        }
        rec.added_points = new.points;
        iterations.push(rec);
        prev = Some(rom);
    }
    let rom = prev.ok_or(Error::NoConvergence("no iterate"))?;
    Ok((
        rom,
        RunRecord {
            iterations,
            status,
            samples,
        },
    ))
}
