use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::atoms::{self, Atom, Term};
use crate::error::{Error, Result};
use crate::numkit::linear_assignment;

/// Real stable rational function of degree `(r-1, r)` in partial-fraction form
///
/// ```text
/// H_r(z) = sum_k (a[2k+1] z + a[2k]) / (z^2 + b[2k+1] z + b[2k])  [+ a[r-1] / (z + b[r-1]) if r is odd]
/// ```
///
/// With all `b` strictly positive every pole lies in the open left half-plane.
#[derive(Debug)]
pub struct RationalRom {
    a: Vec<f64>,
    b: Vec<f64>,
    pole_residue: OnceLock<(Vec<C64>, Vec<C64>)>,
}

impl Clone for RationalRom {
    fn clone(&self) -> Self {
        RationalRom {
            a: self.a.clone(),
            b: self.b.clone(),
            pole_residue: self.pole_residue.clone(),
        }
    }
}

impl PartialEq for RationalRom {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b
    }
}

/// One quadratic (or linear) block with its roots ordered so that matching
/// blocks of nearby functions have nearby roots.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub num1: f64,
    pub num0: f64,
    /// First root: upper half-plane for complex pairs, rightmost for real pairs.
    pub alpha: C64,
    pub beta: C64,
    pub linear: bool,
}

/// Roots of `z^2 + b1 z + b0`, ordered as in [`Block`].
pub(crate) fn quadratic_roots(b1: f64, b0: f64) -> (C64, C64) {
    let half = 0.5 * b1;
    let disc = half * half - b0;
    if disc < 0.0 {
        let im = (-disc).sqrt();
        (C64::new(-half, im), C64::new(-half, -im))
    } else {
        let q = -(half + half.signum() * disc.sqrt());
        let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q, b0 / q) };
        let (hi, lo) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
        (C64::new(hi, 0.0), C64::new(lo, 0.0))
    }
}

impl RationalRom {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} numerator vs {} denominator coefficients",
                a.len(),
                b.len()
            )));
        }
        if a.is_empty() {
            return Err(Error::InvalidArgument("degree must be at least 1".into()));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if b.iter().any(|&v| v <= 0.0) {
            return Err(Error::Unstable);
        }
        Ok(RationalRom {
            a,
            b,
            pole_residue: OnceLock::new(),
        })
    }

    pub fn degree(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub(crate) fn blocks(&self) -> Vec<Block> {
        let r = self.degree();
        let mut out = Vec::with_capacity(r.div_ceil(2));
        for k in 0..r / 2 {
            let (alpha, beta) = quadratic_roots(self.b[2 * k + 1], self.b[2 * k]);
            out.push(Block {
                num1: self.a[2 * k + 1],
                num0: self.a[2 * k],
                alpha,
                beta,
                linear: false,
            });
        }
        if r % 2 == 1 {
            let p = C64::new(-self.b[r - 1], 0.0);
            out.push(Block {
                num1: 0.0,
                num0: self.a[r - 1],
                alpha: p,
                beta: p,
                linear: true,
            });
        }
        out
    }

    pub fn eval(&self, z: C64) -> C64 {
        let r = self.degree();
        let mut s = C64::new(0.0, 0.0);
        for k in 0..r / 2 {
            let d = z * (z + self.b[2 * k + 1]) + self.b[2 * k];
            s += (z * self.a[2 * k + 1] + self.a[2 * k]) / d;
        }
        if r % 2 == 1 {
            s += self.a[r - 1] / (z + self.b[r - 1]);
        }
        s
    }

    pub fn derivative(&self, z: C64) -> C64 {
        let r = self.degree();
        let mut s = C64::new(0.0, 0.0);
        for k in 0..r / 2 {
            let (a0, a1, b0, b1) = (
                self.a[2 * k],
                self.a[2 * k + 1],
                self.b[2 * k],
                self.b[2 * k + 1],
            );
            let d = z * (z + b1) + b0;
            let n = z * a1 + a0;
            s += (d * a1 - n * (z * 2.0 + b1)) / (d * d);
        }
        if r % 2 == 1 {
            let d = z + self.b[r - 1];
            s -= self.a[r - 1] / (d * d);
        }
        s
    }

    /// `lim_{w -> inf} i w H_r(i w)`, the sum of residues.
    pub fn moment_at_infinity(&self) -> f64 {
        let r = self.degree();
        let mut s: f64 = (0..r / 2).map(|k| self.a[2 * k + 1]).sum();
        if r % 2 == 1 {
            s += self.a[r - 1];
        }
        s
    }

    fn pole_residue(&self) -> &(Vec<C64>, Vec<C64>) {
        self.pole_residue.get_or_init(|| {
            let mut poles = Vec::with_capacity(self.degree());
            let mut res = Vec::with_capacity(self.degree());
            for blk in self.blocks() {
                if blk.linear {
                    poles.push(blk.alpha);
                    res.push(C64::new(blk.num0, 0.0));
                } else {
                    let (l1, l2) = (blk.alpha, blk.beta);
                    poles.push(l1);
                    res.push((l1 * blk.num1 + blk.num0) / (l1 - l2));
                    poles.push(l2);
                    res.push((l2 * blk.num1 + blk.num0) / (l2 - l1));
                }
            }
            (poles, res)
        })
    }

    /// Poles, computed lazily from the denominator coefficients.
    pub fn poles(&self) -> &[C64] {
        &self.pole_residue().0
    }

    /// Residues matching [`RationalRom::poles`]; unbounded at a double pole.
    pub fn residues(&self) -> &[C64] {
        &self.pole_residue().1
    }

    /// Builds the real partial-fraction form from poles and residues that come
    /// in conjugate pairs (within `1e-8` relative). Poles must be stable.
    pub fn from_pole_residue(poles: &[C64], residues: &[C64]) -> Result<Self> {
        let r = poles.len();
        if residues.len() != r {
            return Err(Error::DimensionMismatch(
                "poles and residues differ in length".into(),
            ));
        }
        if r == 0 {
            return Err(Error::InvalidArgument("degree must be at least 1".into()));
        }
        if poles
            .iter()
            .chain(residues.iter())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite);
        }
        if poles.iter().any(|p| p.re >= 0.0) {
            return Err(Error::Unstable);
        }
        let scale = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let cost = DMatrix::from_fn(r, r, |i, j| (poles[i] - poles[j].conj()).norm());
        let perm = linear_assignment(&cost)?.row_to_col;

        let mut used = vec![false; r];
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut reals: Vec<usize> = Vec::new();
        for i in 0..r {
            if used[i] {
                continue;
            }
            let j = perm[i];
            if j != i && !used[j] && perm[j] == i && poles[i].im.abs() > 1e-8 * scale {
                if (poles[i] - poles[j].conj()).norm() > 1e-6 * scale {
                    return Err(Error::InvalidArgument(
                        "poles are not closed under conjugation".into(),
                    ));
                }
                used[i] = true;
                used[j] = true;
                let (up, lo) = if poles[i].im >= 0.0 { (i, j) } else { (j, i) };
                pairs.push((up, lo));
            } else {
                if poles[i].im.abs() > 1e-8 * scale {
                    return Err(Error::InvalidArgument(
                        "poles are not closed under conjugation".into(),
                    ));
                }
                used[i] = true;
                reals.push(i);
            }
        }
        reals.sort_by(|&x, &y| poles[y].re.total_cmp(&poles[x].re));

        let mut a = Vec::with_capacity(r);
        let mut b = Vec::with_capacity(r);
        for (up, _) in &pairs {
            let lam = poles[*up];
            let rho = residues[*up];
            a.push(-2.0 * (rho * lam.conj()).re);
            a.push(2.0 * rho.re);
            b.push(lam.norm_sqr());
            b.push(-2.0 * lam.re);
        }
        let mut it = reals.chunks(2);
        for chunk in &mut it {
            if chunk.len() == 2 {
                let (l1, l2) = (poles[chunk[0]].re, poles[chunk[1]].re);
                let (r1, r2) = (residues[chunk[0]].re, residues[chunk[1]].re);
                a.push(-(r1 * l2 + r2 * l1));
                a.push(r1 + r2);
                b.push(l1 * l2);
                b.push(-(l1 + l2));
            } else {
                a.push(residues[chunk[0]].re);
                b.push(-poles[chunk[0]].re);
            }
        }
        RationalRom::new(a, b)
    }

    /// Real block-diagonal realization `(A, b, c)` with `H_r(z) = c^T (zI - A)^{-1} b`.
    pub fn realization(&self) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let r = self.degree();
        let mut am = DMatrix::zeros(r, r);
        let mut bv = DVector::zeros(r);
        let mut cv = DVector::zeros(r);
        for k in 0..r / 2 {
            let i = 2 * k;
            am[(i, i + 1)] = 1.0;
            am[(i + 1, i)] = -self.b[i];
            am[(i + 1, i + 1)] = -self.b[i + 1];
            bv[i + 1] = 1.0;
            cv[i] = self.a[i];
            cv[i + 1] = self.a[i + 1];
        }
        if r % 2 == 1 {
            am[(r - 1, r - 1)] = -self.b[r - 1];
            bv[r - 1] = 1.0;
            cv[r - 1] = self.a[r - 1];
        }
        (am, bv, cv)
    }

    /// Expansion into atoms; exact for any root configuration including double roots.
    pub(crate) fn terms(&self) -> Vec<Term> {
        let mut out = Vec::new();
        for blk in self.blocks() {
            out.extend(block_terms(&blk, 1.0));
        }
        out
    }
}

fn block_terms(blk: &Block, sign: f64) -> Vec<Term> {
    let s = C64::new(sign, 0.0);
    if blk.linear {
        return vec![Term::new(s * blk.num0, Atom::simple(blk.alpha))];
    }
    // (n1 z + n0)/((z-a)(z-b)) = n1/(z-b) + (n1 a + n0)/((z-a)(z-b)).
    vec![
        Term::new(s * blk.num1, Atom::simple(blk.beta)),
        Term::new(
            s * (blk.alpha * blk.num1 + blk.num0),
            Atom::double(blk.alpha, blk.beta),
        ),
    ]
}

/// Terms of `p - q` for two matched blocks, arranged so that every
/// coefficient is proportional to a parameter difference.
fn block_difference_terms(p: &Block, q: &Block) -> Vec<Term> {
    let one = C64::new(1.0, 0.0);
    if p.linear && q.linear {
        // a/(z-x) - c/(z-y) = (a-c)/(z-x) + c (x-y)/((z-x)(z-y)).
        return vec![
            Term::new(one * (p.num0 - q.num0), Atom::simple(p.alpha)),
            Term::new((p.alpha - q.alpha) * q.num0, Atom::double(p.alpha, q.alpha)),
        ];
    }
    if p.linear != q.linear {
        let mut t = block_terms(p, 1.0);
        t.extend(block_terms(q, -1.0));
        return t;
    }
    let (a, b, at, bt) = (p.alpha, p.beta, q.alpha, q.beta);
    let d1 = p.num1 - q.num1;
    let cq = at * q.num1 + q.num0;
    let dc = a * d1 + (a - at) * q.num1 + (p.num0 - q.num0);
    vec![
        // n1/(z-b) - n1~/(z-b~)
        Term::new(one * d1, Atom::simple(b)),
        Term::new((b - bt) * q.num1, Atom::double(b, bt)),
        // c D(a,b) - c~ D(a~,b~)
        Term::new(dc, Atom::double(a, b)),
        Term::new(cq * (a - at), Atom::triple(a, at, b)),
        Term::new(cq * (b - bt), Atom::triple(at, b, bt)),
    ]
}

/// `||H_r||_{H2}`.
pub fn h2_norm_rom(rom: &RationalRom) -> f64 {
    atoms::squared_norm(&rom.terms()).sqrt()
}

/// `<f, g>` in H2, conjugate-linear in `f`.
pub fn h2_inner_rom(f: &RationalRom, g: &RationalRom) -> C64 {
    atoms::inner(&f.terms(), &g.terms())
}

/// `||H_1 - H_2||_{H2}`, accurate even when the two functions nearly coincide.
///
/// Blocks of the two functions are paired by a minimum-cost assignment on
/// their roots and each paired difference is expanded so that its
/// coefficients are proportional to parameter differences.
pub fn rom_difference_norm(h1: &RationalRom, h2: &RationalRom) -> f64 {
    atoms::squared_norm(&difference_terms(h1, h2)).sqrt()
}

/// Expanding a paired difference only pays off when the roots move by less
/// than their distance to the imaginary axis; otherwise the expansion cancels.
fn blocks_close(p: &Block, q: &Block) -> bool {
    let gap = (p.alpha - q.alpha).norm() + (p.beta - q.beta).norm();
    let axis = [p.alpha, p.beta, q.alpha, q.beta]
        .iter()
        .map(|x| x.re.abs())
        .fold(f64::INFINITY, f64::min);
    p.linear == q.linear && gap <= 0.5 * axis
}

pub(crate) fn difference_terms(h1: &RationalRom, h2: &RationalRom) -> Vec<Term> {
    let p = h1.blocks();
    let q = h2.blocks();
    let (n, m) = (p.len(), q.len());
    let size = n.max(m);
    let big = 1e300;
    let cost = DMatrix::from_fn(size, size, |i, j| {
        if i < n && j < m {
            let c = (p[i].alpha - q[j].alpha).norm() + (p[i].beta - q[j].beta).norm();
            if p[i].linear != q[j].linear {
                c + 1e100
            } else {
                c.min(1e200)
            }
        } else {
            big
        }
    });
    let perm = linear_assignment(&cost)
        .map(|a| a.row_to_col)
        .unwrap_or_else(|_| (0..size).collect());
    let mut terms = Vec::new();
    let mut matched_q = vec![false; m];
    for i in 0..n {
        let j = perm[i];
        if j < m && blocks_close(&p[i], &q[j]) {
            matched_q[j] = true;
            terms.extend(block_difference_terms(&p[i], &q[j]));
        } else {
            terms.extend(block_terms(&p[i], 1.0));
        }
    }
    for (j, blk) in q.iter().enumerate() {
        if !matched_q[j] {
            terms.extend(block_terms(blk, -1.0));
        }
    }
    terms
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_real_pole() {
        // 1/(z+1) at z = i is (1 - i)/2.
        let rom = RationalRom::new(vec![1.0], vec![1.0]).unwrap();
        assert!((rom.eval(c(0.0, 1.0)) - c(0.5, -0.5)).norm() < 1e-15);
        assert!((h2_norm_rom(&rom) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn quadratic_pole_residue() {
        // 1/(z^2 + 2z + 2): poles -1 +- i, residues -+ i/2.
        let rom = RationalRom::new(vec![1.0, 0.0], vec![2.0, 2.0]).unwrap();
        let p = rom.poles();
        let r = rom.residues();
        assert!((p[0] - c(-1.0, 1.0)).norm() < 1e-15);
        assert!((r[0] - c(0.0, -0.5)).norm() < 1e-15);
        assert!((p[1] - c(-1.0, -1.0)).norm() < 1e-15);
        assert!((r[1] - c(0.0, 0.5)).norm() < 1e-15);
        let z = c(0.3, 0.7);
        let pr: C64 = p.iter().zip(r).map(|(pk, rk)| rk / (z - pk)).sum();
        assert!((pr - rom.eval(z)).norm() < 1e-14);
    }

    #[test]
    fn rejects_unstable_and_mismatch() {
        assert_eq!(
            RationalRom::new(vec![1.0], vec![-1.0]).unwrap_err(),
            Error::Unstable
        );
        assert!(matches!(
            RationalRom::new(vec![1.0, 2.0], vec![1.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn norm_matches_pole_residue_gram() {
        let rom = RationalRom::new(
            vec![0.3, -1.2, 0.7, 2.0, 0.5],
            vec![5.0, 0.4, 1.0, 3.0, 0.8],
        )
        .unwrap();
        let p = rom.poles();
        let r = rom.residues();
        let mut s = C64::new(0.0, 0.0);
        for j in 0..p.len() {
            for k in 0..p.len() {
                s += r[j].conj() * r[k] * (-(p[j].conj() + p[k]).inv());
            }
        }
        assert!((h2_norm_rom(&rom) - s.re.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn round_trip_pole_residue() {
        let rom = RationalRom::new(
            vec![0.3, -1.2, 0.7, 2.0, 0.5],
            vec![5.0, 0.4, 1.0, 3.0, 0.8],
        )
        .unwrap();
        let back = RationalRom::from_pole_residue(rom.poles(), rom.residues()).unwrap();
        assert!(rom_difference_norm(&rom, &back) < 1e-13);
    }

    #[test]
    fn pole_residue_rejects_mismatched_pair() {
        let poles = [C64::new(-1.88, 10.1), C64::new(-3.17, -0.33)];
        let residues = [C64::new(1.0, 0.5), C64::new(1.0, -0.5)];
        assert!(matches!(
            RationalRom::from_pole_residue(&poles, &residues),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn realization_matches_eval() {
        let rom = RationalRom::new(vec![0.3, -1.2, 0.7], vec![5.0, 0.4, 1.0]).unwrap();
        let (a, b, cv) = rom.realization();
        let z = c(0.2, 1.5);
        let m = a.map(|x| c(-x, 0.0)) + DMatrix::<C64>::identity(3, 3) * z;
        let x = m.lu().solve(&b.map(|v| c(v, 0.0))).unwrap();
        let hz: C64 = cv.iter().zip(x.iter()).map(|(ci, xi)| xi * *ci).sum();
        assert!((hz - rom.eval(z)).norm() < 1e-14);
        let dz = (rom.eval(z + c(1e-6, 0.0)) - rom.eval(z - c(1e-6, 0.0))) / 2e-6;
        assert!((dz - rom.derivative(z)).norm() < 1e-8);
    }

    #[test]
    fn difference_of_identical_is_zero_and_small_perturbation_is_resolved() {
        let a = vec![0.3, -1.2, 0.7, 2.0, 0.5];
        let b = vec![5.0, 0.4, 1.0, 3.0, 0.8];
        let rom = RationalRom::new(a.clone(), b.clone()).unwrap();
        assert_eq!(rom_difference_norm(&rom, &rom), 0.0);
        let mut b2 = b.clone();
        b2[1] += 1e-12;
        let rom2 = RationalRom::new(a, b2).unwrap();
        let d = rom_difference_norm(&rom, &rom2);
        // First-order estimate from a central difference of the derivative direction.
        let h = 1e-6;
        let mut bp = b.clone();
        bp[1] += h;
        let romp = RationalRom::new(rom.a().to_vec(), bp).unwrap();
        let slope = rom_difference_norm(&rom, &romp) / h;
        assert!(
            (d / 1e-12 - slope).abs() < 1e-3 * slope,
            "{d} vs {}",
            slope * 1e-12
        );
    }

    #[test]
    fn double_root_block_is_finite() {
        // (z + 1)^2 denominator.
        let rom = RationalRom::new(vec![1.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert!((h2_norm_rom(&rom) - 0.5).abs() < 1e-15);
    }
}
