#![allow(dead_code)]

use h2mor::systems::{RationalRom, StateSpace};
use h2mor::Complex64 as C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Random strictly stable real rational function of degree `r` with
/// numerator degree `r - 1`: pole pairs plus one real pole when `r` is odd.
pub fn random_rom(rng: &mut ChaCha8Rng, r: usize) -> RationalRom {
    let mut a = Vec::with_capacity(r);
    let mut b = Vec::with_capacity(r);
    for _ in 0..r / 2 {
        let p = c(-rng.random_range(0.1..2.0), rng.random_range(0.2..5.0));
        b.push(p.norm_sqr());
        b.push(-2.0 * p.re);
        a.push(rng.random_range(-1.0..1.0));
        a.push(rng.random_range(-1.0..1.0));
    }
    if r % 2 == 1 {
        b.push(rng.random_range(0.1..3.0));
        a.push(rng.random_range(-1.0..1.0));
    }
    RationalRom::new(a, b).unwrap()
}

/// Orthogonal matrix from the QR factorization of a random matrix.
fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// Random stable state-space system `(A, b, c)` of even dimension `n`:
/// `A = Q blockdiag([s, w; -w, s]) Q^T` with `s < 0`.
pub fn random_state_space(rng: &mut ChaCha8Rng, n: usize) -> StateSpace {
    assert!(n.is_multiple_of(2));
    let mut blocks = DMatrix::zeros(n, n);
    for k in 0..n / 2 {
        let s = -rng.random_range(0.1..2.0);
        let w = rng.random_range(0.5..10.0);
        let i = 2 * k;
        blocks[(i, i)] = s;
        blocks[(i + 1, i + 1)] = s;
        blocks[(i, i + 1)] = w;
        blocks[(i + 1, i)] = -w;
    }
    let q = random_orthogonal(rng, n);
    let a = &q * blocks * q.transpose();
    let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let cv = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    StateSpace::new(a, b, cv, None).unwrap()
}

/// `k` random points in the open right half-plane with positive imaginary
/// part, together with their conjugates.
pub fn conjugate_pairs(rng: &mut ChaCha8Rng, k: usize, re: (f64, f64), im: (f64, f64)) -> Vec<C64> {
    let mut out = Vec::with_capacity(2 * k);
    for _ in 0..k {
        let z = c(rng.random_range(re.0..re.1), rng.random_range(im.0..im.1));
        out.push(z);
        out.push(z.conj());
    }
    out
}

/// Greedy nearest matching distance between two point sets of equal size.
pub fn set_distance(x: &[C64], y: &[C64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let mut used = vec![false; y.len()];
    let mut worst: f64 = 0.0;
    for p in x {
        let (j, d) = y
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, q)| (j, (p - q).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id:>2} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
