use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::model::{ModelKind, StateSpace, TransferFunctionModel};
use super::quadrature::bcc_rule;
use super::rom::{h2_norm_rom, rom_difference_norm, RationalRom};
use crate::error::{Error, Result};
use crate::numkit::solve_lyapunov;

/// Quadrature used for models without a finite realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub points: usize,
    pub scale: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            points: 10_000,
            scale: 10.0,
        }
    }
}

/// How an error was measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMethod {
    Exact,
    Gramian,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H2Error {
    pub absolute: f64,
    pub relative: f64,
    pub method: ErrorMethod,
}

/// `sqrt(c^T P c)` with `A P + P A^T + b b^T = 0`.
pub fn h2_norm_state_space(ss: &StateSpace) -> Result<f64> {
    let (a, b) = ss.standard_form()?;
    gramian_norm(&a, &b, &ss.c)
}

fn gramian_norm(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Result<f64> {
    let q = b * b.transpose();
    let p = solve_lyapunov(a, &q)?;
    Ok(c.dot(&(p * c)).max(0.0).sqrt())
}

/// `||H||_{H2}` by the route appropriate for the model kind.
pub fn h2_norm(model: &TransferFunctionModel, opts: QuadratureOptions) -> Result<f64> {
    match model.kind() {
        ModelKind::StateSpace(ss) => h2_norm_state_space(ss),
        ModelKind::Rational(r) => Ok(h2_norm_rom(r)),
        ModelKind::Delay(_) => quadrature_norm(model, None, opts),
        ModelKind::Tabulated(_) => Err(Error::InvalidArgument(
            "the H2 norm of a tabulated model is not available".into(),
        )),
    }
}

/// Quadrature estimate of `||H - H_r||` (or `||H||` without a ROM).
fn quadrature_norm(
    model: &TransferFunctionModel,
    rom: Option<&RationalRom>,
    opts: QuadratureOptions,
) -> Result<f64> {
    let rule = bcc_rule(opts.scale, opts.points)?;
    let m_h = model
        .moment_at_infinity()
        .ok_or_else(|| Error::InvalidArgument("quadrature needs the moment at infinity".into()))?;
    let m = m_h - rom.map_or(0.0, |r| r.moment_at_infinity());
    let mut values = Vec::with_capacity(rule.nodes.len());
    for &z in &rule.nodes {
        // |f(conj z)| = |f(z)| for real f, so only the closed upper half is evaluated.
        let zz = if z.im < 0.0 { z.conj() } else { z };
        let mut v = model.evaluate_uncounted(zz)?;
        if let Some(r) = rom {
            v -= r.eval(zz);
        }
        values.push(v);
    }
    Ok(rule.squared_norm(&values, m, m).max(0.0).sqrt())
}

/// Absolute and relative H2 error of a reduced model.
///
/// Rational models use the exact pairwise expansion, state-space models the
/// Gramian of the error system (falling back to quadrature when the relative
/// error is below `1e-5`, where the Gramian route is dominated by
/// cancellation), and other models the quadrature in `opts`.
pub fn h2_error(
    model: &TransferFunctionModel,
    rom: &RationalRom,
    opts: QuadratureOptions,
) -> Result<H2Error> {
    match model.kind() {
        ModelKind::Rational(h) => {
            let abs = rom_difference_norm(h, rom);
            let nh = h2_norm_rom(h);
            Ok(H2Error {
                absolute: abs,
                relative: abs / nh,
                method: ErrorMethod::Exact,
            })
        }
        ModelKind::StateSpace(ss) => {
            let (a, b) = ss.standard_form()?;
            let nh = gramian_norm(&a, &b, &ss.c)?;
            let (ar, br, cr) = rom.realization();
            let (n, r) = (a.nrows(), ar.nrows());
            let mut ae = DMatrix::zeros(n + r, n + r);
            ae.view_mut((0, 0), (n, n)).copy_from(&a);
            ae.view_mut((n, n), (r, r)).copy_from(&ar);
            let be = DVector::from_iterator(n + r, b.iter().chain(br.iter()).copied());
            let ce =
                DVector::from_iterator(n + r, ss.c.iter().copied().chain(cr.iter().map(|v| -v)));
            let abs = gramian_norm(&ae, &be, &ce)?;
            if abs > 1e-5 * nh {
                return Ok(H2Error {
                    absolute: abs,
                    relative: abs / nh,
                    method: ErrorMethod::Gramian,
                });
            }
            let poles = ss.poles()?;
            let (lo, hi) = poles.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
                (lo.min(p.norm()), hi.max(p.norm()))
            });
            let scale = if lo > 0.0 && hi.is_finite() {
                (lo * hi).sqrt()
            } else {
                1.0
            };
            let q = QuadratureOptions {
                points: opts.points.max(20_000),
                scale,
            };
            let abs = quadrature_norm(model, Some(rom), q)?;
            Ok(H2Error {
                absolute: abs,
                relative: abs / nh,
                method: ErrorMethod::Quadrature,
            })
        }
        ModelKind::Delay(_) => {
            let nh = quadrature_norm(model, None, opts)?;
            let abs = quadrature_norm(model, Some(rom), opts)?;
            Ok(H2Error {
                absolute: abs,
                relative: abs / nh,
                method: ErrorMethod::Quadrature,
            })
        }
        ModelKind::Tabulated(_) => Err(Error::InvalidArgument(
            "the H2 error against a tabulated model is not available".into(),
        )),
    }
}

/// Interpolation mismatch at one mirrored ROM pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationMismatch {
    pub pole: C64,
    pub point: C64,
    pub value: f64,
    pub derivative: f64,
    /// The residue at this pole vanishes, so the derivative condition is vacuous.
    pub zero_residue: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeierLuenbergerReport {
    pub entries: Vec<InterpolationMismatch>,
    pub max_value: f64,
    pub max_derivative: f64,
}

/// Compares `H` and `H_r` (and their derivatives) at `-conj(lambda_k)` for
/// every pole `lambda_k` of the ROM; a locally optimal ROM interpolates there.
pub fn check_meier_luenberger(
    model: &TransferFunctionModel,
    rom: &RationalRom,
) -> Result<MeierLuenbergerReport> {
    let scale = rom.residues().iter().map(|r| r.norm()).fold(0.0, f64::max);
    let mut entries = Vec::with_capacity(rom.degree());
    for (&pole, res) in rom.poles().iter().zip(rom.residues()) {
        let mu = -pole.conj();
        let value = (model.evaluate_uncounted(mu)? - rom.eval(mu)).norm();
        let derivative = (model.derivative_uncounted(mu)? - rom.derivative(mu)).norm();
        entries.push(InterpolationMismatch {
            pole,
            point: mu,
            value,
            derivative,
            zero_residue: res.norm() <= 1e-14 * scale,
        });
    }
    let max_value = entries.iter().map(|e| e.value).fold(0.0, f64::max);
    let max_derivative = entries
        .iter()
        .filter(|e| !e.zero_residue)
        .map(|e| e.derivative)
        .fold(0.0, f64::max);
    Ok(MeierLuenbergerReport {
        entries,
        max_value,
        max_derivative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_order() -> StateSpace {
        StateSpace::new(
            DMatrix::from_element(1, 1, -1.0),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 1.0),
            None,
        )
        .unwrap()
    }

    #[test]
    fn first_order_norm() {
        assert!((h2_norm_state_space(&first_order()).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unstable_is_rejected() {
        let ss = StateSpace::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 1.0),
            None,
        )
        .unwrap();
        assert_eq!(h2_norm_state_space(&ss).unwrap_err(), Error::Unstable);
    }

    #[test]
    fn exact_rom_has_tiny_error() {
        let model = TransferFunctionModel::state_space(first_order());
        let rom = RationalRom::new(vec![1.0], vec![1.0]).unwrap();
        let e = h2_error(&model, &rom, QuadratureOptions::default()).unwrap();
        assert!(e.relative < 1e-12, "{e:?}");
        let bad = RationalRom::new(vec![1.0], vec![2.0]).unwrap();
        let e = h2_error(&model, &bad, QuadratureOptions::default()).unwrap();
        // ||1/(z+1) - 1/(z+2)||^2 = 1/2 + 1/4 - 2/3.
        assert!((e.absolute - (0.5f64 + 0.25 - 2.0 / 3.0).sqrt()).abs() < 1e-14);
        assert_eq!(e.method, ErrorMethod::Gramian);
    }

    #[test]
    fn delay_error_uses_quadrature() {
        let d = super::super::DelaySystem::new(10, 1.0, 0.1, 0.01).unwrap();
        let model = TransferFunctionModel::delay(d);
        let rom = RationalRom::new(vec![0.01, 0.0], vec![10.0, 1.0]).unwrap();
        let e = h2_error(
            &model,
            &rom,
            QuadratureOptions {
                points: 2000,
                scale: 10.0,
            },
        )
        .unwrap();
        assert_eq!(e.method, ErrorMethod::Quadrature);
        assert!(e.relative.is_finite() && e.relative > 0.0);
        assert_eq!(model.fom_evals(), 0);
    }

    #[test]
    fn meier_luenberger_of_exact_rom_vanishes() {
        let model = TransferFunctionModel::state_space(first_order());
        let rom = RationalRom::new(vec![1.0], vec![1.0]).unwrap();
        let rep = check_meier_luenberger(&model, &rom).unwrap();
        assert!(rep.max_value < 1e-15 && rep.max_derivative < 1e-15);
        assert!((rep.entries[0].point - C64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
