//! Reference algorithms: IRKA, its realization-free Loewner form (TF-IRKA),
//! and quadrature-based rational fitting (QuadVF).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numkit::{pencil_pole_residue, to_complex};
use crate::ratfit::{fit_weighted, realify_poles, DiagonalWeight, FitOptions, MomentRow};
use crate::systems::{
    bcc_rule, h2_error, rom_difference_norm, H2Error, ModelKind, QuadratureOptions, RationalRom,
    TransferFunctionModel,
};

#[derive(Debug, Clone, PartialEq)]
pub struct IrkaConfig {
    pub r: usize,
    /// Initial interpolation points in the open right half-plane, closed under conjugation.
    pub initial_shifts: Vec<C64>,
    pub tol_term: f64,
    pub max_iters: usize,
    pub track_error: Option<QuadratureOptions>,
}

impl IrkaConfig {
    pub fn new(r: usize, initial_shifts: Vec<C64>) -> Self {
        IrkaConfig {
            r,
            initial_shifts,
            tol_term: 1e-9,
            max_iters: 100,
            track_error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadVfConfig {
    pub r: usize,
    pub scale_l: f64,
    /// Total number of quadrature nodes on the imaginary axis (both halves).
    pub num_nodes: usize,
    /// Drop the two moment rows when the moment at infinity is unavailable.
    pub waive_moments: bool,
    pub fit: FitOptions,
}

impl QuadVfConfig {
    pub fn new(r: usize, num_nodes: usize) -> Self {
        QuadVfConfig {
            r,
            scale_l: 10.0,
            num_nodes,
            waive_moments: false,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineIteration {
    pub fom_evals: usize,
    /// `None` when the intermediate reduced model is unstable.
    pub rom: Option<RationalRom>,
    pub shifts: Vec<C64>,
    pub step: Option<f64>,
    pub h2_error: Option<H2Error>,
}

#[derive(Debug, Clone, Default)]
pub struct BaselineRecord {
    pub iterations: Vec<BaselineIteration>,
    pub converged: bool,
    /// Recoverable irregularities (restarts, dropped eigenvalues).
    pub events: Vec<String>,
}

fn check_shifts(shifts: &[C64], r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::InvalidArgument(
            "reduced degree must be positive".into(),
        ));
    }
    if shifts.len() != r {
        return Err(Error::DimensionMismatch(format!(
            "{} shifts for degree {r}",
            shifts.len()
        )));
    }
    for (i, z) in shifts.iter().enumerate() {
        if !(z.re > 0.0) {
            return Err(Error::NotInRightHalfPlane(*z));
        }
        if shifts[..i]
            .iter()
            .any(|w| (w - z).norm() <= 1e-12 * z.norm())
        {
            return Err(Error::DuplicatePoints(
                shifts[..i]
                    .iter()
                    .position(|w| (w - z).norm() <= 1e-12 * z.norm())
                    .unwrap_or(0),
                i,
            ));
        }
    }
    Ok(())
}

/// Next shifts `-conj(lambda)`, closed under conjugation and forced into the
/// right half-plane.
fn mirror(poles: &[C64]) -> Result<Vec<C64>> {
    if poles.is_empty() {
        return Ok(Vec::new());
    }
    Ok(realify_poles(poles)?
        .iter()
        .map(|p| C64::new(p.re.abs(), p.im))
        .collect())
}

fn orthonormalize(m: DMatrix<C64>) -> DMatrix<C64> {
    m.qr().q()
}

/// Real ROM from a complex pencil, or `None` when unstable.
fn rom_from_pencil(
    a: &DMatrix<C64>,
    e: &DMatrix<C64>,
    b: &DVector<C64>,
    c: &DVector<C64>,
) -> Result<(Vec<C64>, Option<RationalRom>)> {
    let (poles, residues) = pencil_pole_residue(a, e, b, c)?;
    let rom = RationalRom::from_pole_residue(&poles, &residues).ok();
    Ok((poles, rom))
}

struct Loop<'a> {
    model: &'a TransferFunctionModel,
    tol: f64,
    track: Option<QuadratureOptions>,
    record: BaselineRecord,
    prev: Option<RationalRom>,
}

impl Loop<'_> {
    /// Records an iterate; returns true when it meets the termination test.
    fn push(&mut self, shifts: &[C64], rom: Option<RationalRom>) -> bool {
        let step = match (&self.prev, &rom) {
            (Some(p), Some(r)) if p.degree() == r.degree() => Some(rom_difference_norm(p, r)),
            _ => None,
        };
        let h2 = match (&rom, self.track) {
            (Some(r), Some(q)) => h2_error(self.model, r, q).ok(),
            _ => None,
        };
        self.record.iterations.push(BaselineIteration {
            fom_evals: self.model.fom_evals(),
            rom: rom.clone(),
            shifts: shifts.to_vec(),
            step,
            h2_error: h2,
        });
        if rom.is_some() {
            self.prev = rom;
        }
        step.is_some_and(|s| s < self.tol)
    }

    fn finish(mut self, converged: bool) -> Result<(RationalRom, BaselineRecord)> {
        self.record.converged = converged;
        let rom = self.prev.ok_or(Error::Unstable)?;
        Ok((rom, self.record))
    }
}

/// Iterative rational Krylov algorithm; needs a realization (state-space or
/// rational model).
///
/// Each iteration performs `2r` shifted solves, all counted by the model.
pub fn irka(
    model: &TransferFunctionModel,
    cfg: &IrkaConfig,
) -> Result<(RationalRom, BaselineRecord)> {
    let Some(ss) = model.realization() else {
        return Err(Error::InvalidArgument(
            "IRKA needs a state-space or rational model".into(),
        ));
    };
    check_shifts(&cfg.initial_shifts, cfg.r)?;
    let n = ss.dim();
    let r = cfg.r;
    if r > n {
        return Err(Error::InvalidArgument(format!(
            "degree {r} exceeds state dimension {n}"
        )));
    }
    let a = to_complex(&ss.a);
    let e =
        ss.e.as_ref()
            .map_or_else(|| DMatrix::identity(n, n), to_complex);
    let b = ss.b.map(|v| C64::new(v, 0.0));
    let c = ss.c.map(|v| C64::new(v, 0.0));

    let mut lp = Loop {
        model,
        tol: cfg.tol_term,
        track: cfg.track_error,
        record: BaselineRecord::default(),
        prev: None,
    };
    let mut shifts = cfg.initial_shifts.clone();
    let mut restarts = 0;
    for _ in 0..cfg.max_iters.max(1) {
        let mut vm = DMatrix::zeros(n, r);
        let mut wm = DMatrix::zeros(n, r);
        for (j, &mu) in shifts.iter().enumerate() {
            vm.set_column(j, &model.resolvent(mu, false)?);
            wm.set_column(j, &model.resolvent(mu, true)?);
        }
        let v = orthonormalize(vm);
        let w = orthonormalize(wm);
        let er = w.adjoint() * &e * &v;
        let ar = w.adjoint() * &a * &v;
        let br = w.adjoint() * &b;
        // c_r^T (z E_r - A_r)^{-1} b_r with c_r^T = c^T V.
        let cr = v.transpose() * &c;
        let (poles, rom) = match rom_from_pencil(&ar, &er, &br, &cr) {
            Ok(x) => x,
            Err(Error::SingularPencil) if restarts < 5 => {
                restarts += 1;
                lp.record.events.push(format!(
                    "singular projected pencil; shifts perturbed by 1e-8 (restart {restarts})"
                ));
                shifts = shifts
                    .iter()
                    .enumerate()
                    .map(|(k, s)| s * (1.0 + 1e-8 * (k + 1) as f64))
                    .collect();
                continue;
            }
            Err(err) => return Err(err),
        };
        if lp.push(&shifts, rom) {
            return lp.finish(true);
        }
        if poles.len() != r {
            lp.record
                .events
                .push(format!("{} finite poles for degree {r}", poles.len()));
            return lp.finish(false);
        }
        shifts = mirror(&poles)?;
    }
    lp.finish(false)
}

/// Loewner matrices `(E, A)` of the Hermite interpolant at `mu`.
pub fn loewner_pencil(mu: &[C64], h: &[C64], hp: &[C64]) -> (DMatrix<C64>, DMatrix<C64>) {
    let r = mu.len();
    let e = DMatrix::from_fn(r, r, |j, k| {
        if j == k {
            -hp[j]
        } else {
            -(h[j] - h[k]) / (mu[j] - mu[k])
        }
    });
    let a = DMatrix::from_fn(r, r, |j, k| {
        if j == k {
            -(h[j] + mu[j] * hp[j])
        } else {
            -(mu[j] * h[j] - mu[k] * h[k]) / (mu[j] - mu[k])
        }
    });
    (e, a)
}

/// IRKA in transfer-function form; each iteration evaluates `H` and `H'` at
/// all `r` shifts afresh (`2r` counted evaluations).
pub fn tfirka(
    model: &TransferFunctionModel,
    cfg: &IrkaConfig,
) -> Result<(RationalRom, BaselineRecord)> {
    if matches!(model.kind(), ModelKind::Tabulated(_)) {
        return Err(Error::InvalidArgument(
            "TF-IRKA needs derivatives, which tabulated models lack".into(),
        ));
    }
    check_shifts(&cfg.initial_shifts, cfg.r)?;
    let r = cfg.r;
    let mut lp = Loop {
        model,
        tol: cfg.tol_term,
        track: cfg.track_error,
        record: BaselineRecord::default(),
        prev: None,
    };
    let mut shifts = cfg.initial_shifts.clone();
    for _ in 0..cfg.max_iters.max(1) {
        let h = shifts
            .iter()
            .map(|&z| model.evaluate_fresh(z))
            .collect::<Result<Vec<_>>>()?;
        let hp = shifts
            .iter()
            .map(|&z| model.derivative(z))
            .collect::<Result<Vec<_>>>()?;
        let (e, a) = loewner_pencil(&shifts, &h, &hp);
        let bv = DVector::from_column_slice(&h);
        let (poles, rom) = rom_from_pencil(&a, &e, &bv, &bv)?;
        if lp.push(&shifts, rom) {
            return lp.finish(true);
        }
        let mut next = mirror(&poles)?;
        if next.len() < r {
            lp.record.events.push(format!(
                "{} infinite eigenvalues; reusing previous shifts",
                r - next.len()
            ));
            // Keep the old shifts that are farthest from the new ones.
            let mut spare: Vec<C64> = shifts
                .iter()
                .copied()
                .filter(|s| !next.iter().any(|p| (p - s).norm() <= 1e-12 * s.norm()))
                .collect();
            spare.sort_by(|x, y| y.re.total_cmp(&x.re));
            while next.len() < r {
                match spare.pop() {
                    Some(s) if s.im == 0.0 || next.len() + 2 <= r => {
                        next.push(s);
                        if s.im != 0.0 {
                            next.push(s.conj());
                            spare.retain(|q| (q - s.conj()).norm() > 1e-12 * s.norm());
                        }
                    }
                    Some(_) => continue,
                    None => break,
                }
            }
            if next.len() != r {
                return lp.finish(false);
            }
        }
        shifts = next;
    }
    lp.finish(false)
}

/// Fits a degree-`r` ROM to samples on the imaginary axis under the
/// Boyd/Clenshaw-Curtis quadrature weights, i.e. minimizes the discretized
/// H2 error. Evaluates `H` once at each node and reads the moment at infinity
/// twice (`n + 2` counted quantities).
pub fn quadvf(
    model: &TransferFunctionModel,
    cfg: &QuadVfConfig,
) -> Result<(RationalRom, BaselineRecord)> {
    if cfg.num_nodes < 2 {
        return Err(Error::InvalidArgument(
            "QuadVF needs at least two nodes".into(),
        ));
    }
    let rule = bcc_rule(cfg.scale_l, cfg.num_nodes)?;
    let values = rule
        .nodes
        .iter()
        .map(|&z| model.evaluate_fresh(z))
        .collect::<Result<Vec<_>>>()?;
    let moment = if cfg.waive_moments {
        None
    } else {
        let plus = model.moment_counted();
        let minus = model.moment_counted();
        match (plus, minus) {
            // The two moment rows share a target for real models and merge into one row.
            (Some(m), Some(_)) => Some(MomentRow {
                target: m,
                weight: 2.0 * rule.moment_weight,
            }),
            _ => {
                return Err(Error::InvalidArgument(
                    "the moment at infinity is unavailable; set waive_moments".into(),
                ))
            }
        }
    };
    let weight = DiagonalWeight::new(&rule.weights)?;
    let res = fit_weighted(&rule.nodes, &values, cfg.r, &weight, moment, None, &cfg.fit)?;
    let record = BaselineRecord {
        iterations: vec![BaselineIteration {
            fom_evals: model.fom_evals(),
            rom: Some(res.rom.clone()),
            shifts: Vec::new(),
            step: None,
            h2_error: None,
        }],
        converged: res.converged(),
        events: Vec::new(),
    };
    Ok((res.rom, record))
}
