//! One test per acceptance criterion; each prints a PASS/FAIL line.
//! Run with `cargo test --test acceptance -- --nocapture --test-threads 1`.

mod common;

use std::time::{Duration, Instant};

use common::{c, conjugate_pairs, random_rom, random_state_space, report, rng, set_distance};
use h2mor::baselines::{irka, tfirka, IrkaConfig};
use h2mor::h2space::{cauchy_cholesky, cauchy_gram, subspace_angle_tangent};
use h2mor::numkit::{cholesky_lower, schur_complement_min};
use h2mor::ph2::{run, Ph2Config};
use h2mor::ratfit::varpro_residual_jacobian;
use h2mor::systems::{
    bcc_rule, check_meier_luenberger, h2_error, h2_norm_rom, h2_norm_state_space,
    rom_difference_norm, DelaySystem, QuadratureOptions, TransferFunctionModel,
};
use h2mor::Complex64 as C64;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[test]
fn criterion_01_exact_recovery() {
    let mut g = rng(101);
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    let mut failures = 0;
    for r in [2, 4, 6] {
        for _ in 0..20 {
            let truth = random_rom(&mut g, r);
            let model = TransferFunctionModel::rational(truth.clone());
            let mu = conjugate_pairs(&mut g, r + 1, (0.1, 3.0), (0.1, 6.0));
            let t = Instant::now();
            let out = run(&model, &Ph2Config::new(r, mu));
            slowest = slowest.max(t.elapsed());
            match out {
                Ok((rom, _)) => {
                    worst = worst.max(rom_difference_norm(&truth, &rom) / h2_norm_rom(&truth))
                }
                Err(_) => failures += 1,
            }
        }
    }
    let pass = failures == 0 && worst <= 1e-8 && slowest < Duration::from_secs(1);
    report(
        1,
        "exact recovery",
        pass,
        &format!("60 runs, max rel err {worst:.2e}, slowest {slowest:?}, failures {failures}"),
    );
    assert!(pass);
}

fn entrywise_error(m: &DMatrix<C64>, approx: &DMatrix<C64>) -> f64 {
    m.iter()
        .zip(approx.iter())
        .map(|(x, y)| (x - y).norm() / x.norm())
        .fold(0.0, f64::max)
}

fn median_time(points: &[C64], reps: usize) -> Duration {
    let mut t: Vec<Duration> = (0..reps)
        .map(|_| {
            let s = Instant::now();
            std::hint::black_box(cauchy_cholesky(points).unwrap());
            s.elapsed()
        })
        .collect();
    t.sort();
    t[reps / 2]
}

#[test]
fn criterion_02_cauchy_factorization() {
    let mut g = rng(202);
    let mut worst: f64 = 0.0;
    let mut min_cond = f64::INFINITY;
    let mut conventional_ok = true;
    for _ in 0..20 {
        let center = c(g.random_range(0.5..2.0), g.random_range(-2.0..2.0));
        let mu: Vec<C64> = (0..20)
            .map(|_| center + c(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)) * 1e-6)
            .collect();
        let m = cauchy_gram(&mu);
        let f = cauchy_cholesky(&mu).unwrap();
        worst = worst.max(entrywise_error(&m, &f.reconstruct()));
        // cond(M) >= M_pp / d_last for the last pivot p.
        let p = f.perm[mu.len() - 1];
        min_cond = min_cond.min(m[(p, p)].re / f.diag[mu.len() - 1]);
        if let Ok(l) = cholesky_lower(&m) {
            if entrywise_error(&m, &(&l * l.adjoint())) <= 1e-3 {
                conventional_ok = false;
            }
        }
    }
    let pts = |n: usize| -> Vec<C64> {
        let mut g = rng(n as u64);
        (0..n)
            .map(|_| c(g.random_range(0.1..5.0), g.random_range(-10.0..10.0)))
            .collect()
    };
    let (p100, p200) = (pts(100), pts(200));
    let ratio = median_time(&p200, 21).as_secs_f64() / median_time(&p100, 21).as_secs_f64();
    let pass = worst <= 1e-12 && min_cond > 1e12 && conventional_ok && ratio <= 5.0;
    report(
        2,
        "Cauchy LDL accuracy and scaling",
        pass,
        &format!("max entrywise rel err {worst:.2e}, min cond bound {min_cond:.1e}, conventional Cholesky always fails or errs > 1e-3: {conventional_ok}, time ratio n=200/n=100 {ratio:.2}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_varpro_jacobian() {
    let mut g = rng(303);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let r = 1 + trial % 6;
        let n = g.random_range(2 * r..=20);
        let mu: Vec<C64> = (0..n)
            .map(|_| c(g.random_range(0.1..5.0), g.random_range(-10.0..10.0)))
            .collect();
        let f = cauchy_cholesky(&mu).unwrap();
        let target = random_rom(&mut g, 6);
        let h: Vec<C64> = mu.iter().map(|&z| target.eval(z)).collect();
        let b: Vec<f64> = (0..r).map(|_| g.random_range(0.3..3.0)).collect();
        let e = varpro_residual_jacobian(&b, &mu, &h, &f).unwrap();
        let step = 1e-6;
        let mut fd = DMatrix::zeros(e.residual.len(), r);
        for j in 0..r {
            let mut bp = b.clone();
            bp[j] += step;
            let mut bm = b.clone();
            bm[j] -= step;
            let rp = varpro_residual_jacobian(&bp, &mu, &h, &f).unwrap().residual;
            let rm = varpro_residual_jacobian(&bm, &mu, &h, &f).unwrap().residual;
            for i in 0..rp.len() {
                fd[(i, j)] = (rp[i] - rm[i]) / (2.0 * step);
            }
        }
        worst = worst.max((&fd - &e.jacobian).norm() / fd.norm());
    }
    let pass = worst <= 1e-5;
    report(
        3,
        "VARPRO Jacobian vs central differences",
        pass,
        &format!("50 instances, max rel err {worst:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_contraction_and_nesting() {
    let mut g = rng(404);
    let mut excess = f64::NEG_INFINITY;
    let mut worst_drop: f64 = 0.0;
    for _ in 0..100 {
        let r = g.random_range(1..=6);
        let f = random_rom(&mut g, r);
        let norm = h2_norm_rom(&f);
        let n = g.random_range(2..=16);
        let mu: Vec<C64> = (0..n)
            .map(|_| c(g.random_range(0.1..4.0), g.random_range(-8.0..8.0)))
            .collect();
        let mut prev = 0.0;
        for k in 1..=n {
            let fact = cauchy_cholesky(&mu[..k]).unwrap();
            let vals: Vec<C64> = mu[..k].iter().map(|&z| f.eval(z)).collect();
            let p = fact
                .whiten(&vals)
                .iter()
                .map(|v| v.norm_sqr())
                .sum::<f64>()
                .sqrt();
            excess = excess.max(p - norm);
            worst_drop = worst_drop.max(prev - p);
            prev = p;
        }
    }
    let pass = excess <= 1e-10 && worst_drop <= 0.0;
    report(
        4,
        "projection contraction and nesting",
        pass,
        &format!("max ||P F|| - ||F|| = {excess:.2e}, max decrease under appends {worst_drop:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_angle_scaling() {
    let mut g = rng(505);
    let eps = [1e-1, 1e-2, 1e-3];
    let mut worst_band: f64 = 0.0;
    let mut slopes = Vec::new();
    for _ in 0..10 {
        let lambda = c(-g.random_range(0.2..2.0), g.random_range(-3.0..3.0));
        let star = -lambda.conj();
        let dirs: Vec<f64> = (0..3)
            .map(|_| g.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let ratios: Vec<f64> = eps
            .iter()
            .map(|&e| {
                let mu: Vec<C64> = dirs.iter().map(|&t| star + C64::from_polar(e, t)).collect();
                let fact = cauchy_cholesky(&mu).unwrap();
                subspace_angle_tangent(&fact, lambda).unwrap().sin() / e
            })
            .collect();
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        worst_band = worst_band.max(hi / lo);
        slopes.push((ratios[0] / ratios[2]).log10() / 2.0);
    }
    let mean_slope = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let pass = worst_band <= 3.0;
    report(
        5,
        "angle scaling sin(phi)/eps within a factor 3",
        pass,
        &format!(
            "max band {worst_band:.2e}; sin(phi) decays like eps^{:.2}",
            1.0 + mean_slope
        ),
    );
    assert!(pass);
}

fn hermite_mismatch(model: &TransferFunctionModel, rom: &h2mor::systems::RationalRom) -> f64 {
    let r = check_meier_luenberger(model, rom).unwrap();
    r.max_value.max(r.max_derivative)
}

#[test]
fn criterion_06_meier_luenberger() {
    let mut g = rng(606);
    let mut irka_worst: f64 = 0.0;
    let mut ph2_worst: f64 = 0.0;
    let mut not_converged = 0;
    for _ in 0..10 {
        let ss = random_state_space(&mut g, 8);
        let norm = h2_norm_state_space(&ss).unwrap();
        let model = TransferFunctionModel::state_space(ss);
        let shifts = model.default_shifts(4).unwrap();
        let mut cfg = IrkaConfig::new(shifts.len(), shifts);
        cfg.max_iters = 500;
        let (rom, rec) = irka(&model.fork(), &cfg).unwrap();
        if rec.converged {
            irka_worst = irka_worst.max(hermite_mismatch(&model, &rom) / norm);
        } else {
            not_converged += 1;
        }
        let (rom, rec) = run(&model.fork(), &Ph2Config::new(4, Vec::new())).unwrap();
        if rec.status.converged() {
            ph2_worst = ph2_worst.max(hermite_mismatch(&model, &rom) / norm);
        } else {
            not_converged += 1;
        }
    }
    let pass = irka_worst <= 1e-6 && ph2_worst <= 1e-4 && not_converged == 0;
    report(
        6,
        "Meier-Luenberger conditions at convergence",
        pass,
        &format!("IRKA max mismatch/||H|| {irka_worst:.2e}, PH2 {ph2_worst:.2e}, non-converged runs {not_converged}"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_irka_equals_tfirka() {
    let mut g = rng(707);
    let mut worst: f64 = 0.0;
    let mut compared = usize::MAX;
    for _ in 0..5 {
        let ss = random_state_space(&mut g, 6);
        let model = TransferFunctionModel::state_space(ss);
        let mut cfg = IrkaConfig::new(4, model.default_shifts(4).unwrap());
        cfg.max_iters = 5;
        cfg.tol_term = 0.0;
        let (_, a) = irka(&model.fork(), &cfg).unwrap();
        let (_, b) = tfirka(&model.fork(), &cfg).unwrap();
        let k = a.iterations.len().min(b.iterations.len());
        compared = compared.min(k);
        for (x, y) in a.iterations.iter().zip(&b.iterations) {
            let scale = x.shifts.iter().map(|z| z.norm()).fold(1.0, f64::max);
            worst = worst.max(set_distance(&x.shifts, &y.shifts) / scale);
        }
    }
    let pass = compared >= 5 && worst <= 1e-8;
    report(
        7,
        "IRKA and TF-IRKA shift sequences agree",
        pass,
        &format!("{compared} iterations compared, max relative shift difference {worst:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_08_bcc_quadrature() {
    let mut g = rng(808);
    let rule = bcc_rule(10.0, 2000).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        // Odd state dimension: use a random 6-state system plus a real mode.
        let ss6 = random_state_space(&mut g, 4);
        let mut a = DMatrix::zeros(5, 5);
        a.view_mut((0, 0), (4, 4)).copy_from(&ss6.a);
        a[(4, 4)] = -g.random_range(0.2..3.0);
        let b = DVector::from_fn(5, |_, _| g.random_range(-1.0..1.0));
        let cv = DVector::from_fn(5, |_, _| g.random_range(-1.0..1.0));
        let ss = h2mor::systems::StateSpace::new(a, b, cv, None).unwrap();
        let exact = h2_norm_state_space(&ss).unwrap();
        let vals: Vec<C64> = rule.nodes.iter().map(|&z| ss.eval(z).unwrap()).collect();
        let m = ss.moment_at_infinity().unwrap();
        let approx = rule.squared_norm(&vals, m, m).sqrt();
        worst = worst.max((approx - exact).abs() / exact);
    }
    // 100 nodes in the upper half-plane.
    let span = bcc_rule(10.0, 200).unwrap();
    let upper: Vec<f64> = span.upper_nodes().map(|z| z.im).collect();
    let lo = upper.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = upper.iter().copied().fold(0.0, f64::max);
    let two_sig = |x: f64, y: f64| (x - y).abs() <= 0.05 * y.abs();
    let pass = worst <= 1e-3 && upper.len() == 100 && two_sig(lo, 7.8e-2) && two_sig(hi, 6.4e2);
    report(
        8,
        "BCC quadrature fidelity and node span",
        pass,
        &format!("max rel norm err {worst:.2e}; 100 upper nodes span [{lo:.2e}, {hi:.2e}]i"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_delay_comparison() {
    let start = Instant::now();
    let model = TransferFunctionModel::delay(DelaySystem::new(200, 1.0, 0.1, 0.01).unwrap());
    let mu = vec![
        c(0.5, 1.0),
        c(0.5, -1.0),
        c(0.5, 3.0),
        c(0.5, -3.0),
        c(0.5, 10.0),
        c(0.5, -10.0),
    ];
    let quad = QuadratureOptions {
        points: 10_000,
        scale: 10.0,
    };

    let ph2_model = model.fork();
    let (ph2_rom, ph2_rec) = run(&ph2_model, &Ph2Config::new(6, mu.clone())).unwrap();
    let ph2_evals = ph2_model.fom_evals();
    let ph2_err = h2_error(&model, &ph2_rom, quad).unwrap().relative;

    let tf_model = model.fork();
    let mut cfg = IrkaConfig::new(6, mu);
    cfg.max_iters = 1000;
    let (tf_rom, tf_rec) = tfirka(&tf_model, &cfg).unwrap();
    let tf_evals = tf_model.fom_evals();
    let tf_err = h2_error(&model, &tf_rom, quad).unwrap().relative;

    let elapsed = start.elapsed();
    let pass = ph2_rec.status.converged()
        && ph2_evals < tf_evals
        && ph2_err <= 2.0 * tf_err
        && elapsed < Duration::from_secs(300);
    report(
        9,
        "delay model n=200, r=6",
        pass,
        &format!(
            "PH2 {ph2_evals} evals, rel err {ph2_err:.4e} ({:?}); TF-IRKA {tf_evals} evals, rel err {tf_err:.4e} (converged {}); {elapsed:.1?}",
            ph2_rec.status, tf_rec.converged
        ),
    );
    assert!(pass);
}

/// Minimizes the quadratic form over `x` by conjugate gradients on `A x = -B y`.
fn minimize_by_cg(a: &DMatrix<C64>, b: &DMatrix<C64>, cm: &DMatrix<C64>, y: &DVector<C64>) -> f64 {
    let rhs = -(b * y);
    let mut x = DVector::zeros(a.nrows());
    let mut res = rhs.clone();
    let mut p = res.clone();
    let mut rs = res.dotc(&res).re;
    for _ in 0..10 * a.nrows() {
        if rs.sqrt() <= 1e-15 * rhs.norm() {
            break;
        }
        let ap = a * &p;
        let alpha = rs / p.dotc(&ap).re;
        x += &p * C64::new(alpha, 0.0);
        res -= &ap * C64::new(alpha, 0.0);
        let next = res.dotc(&res).re;
        p = &res + &p * C64::new(next / rs, 0.0);
        rs = next;
    }
    let top = a * &x + b * y;
    let bottom = b.adjoint() * &x + cm * y;
    (x.dotc(&top) + y.dotc(&bottom)).re
}

#[test]
fn criterion_10_schur_complement_minimum() {
    let mut g = rng(1010);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = g.random_range(1..=8);
        let m = g.random_range(1..=4);
        let mut rnd = |r: usize, k: usize| {
            DMatrix::from_fn(r, k, |_, _| {
                c(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0))
            })
        };
        let g0 = rnd(n + m, n + m);
        let full = &g0 * g0.adjoint() + DMatrix::identity(n + m, n + m) * C64::new(0.5, 0.0);
        let a = full.view((0, 0), (n, n)).into_owned();
        let b = full.view((0, n), (n, m)).into_owned();
        let cm = full.view((n, n), (m, m)).into_owned();
        let y = rnd(m, 1).column(0).into_owned();
        let direct = minimize_by_cg(&a, &b, &cm, &y);
        let value = schur_complement_min(&a, &b, &cm, &y).unwrap();
        worst = worst.max((value - direct).abs() / direct.abs().max(1.0));
    }
    let pass = worst <= 1e-8;
    report(
        10,
        "Schur complement minimum",
        pass,
        &format!("100 systems, max rel diff {worst:.2e}"),
    );
    assert!(pass);
}
