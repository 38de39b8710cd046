//! Exact H2 inner products of simple rational functions.
//!
//! Every stable rational function used in the crate is written as a sum of
//! coefficients times products `1 / ((z - a_1) ... (z - a_m))` with `m <= 3`.
//! The inner product of two such products reduces, by residues in the right
//! half-plane, to a divided difference evaluated with formulas that never
//! divide by the distance between poles. Differences of nearby functions can
//! then be expanded into terms with small coefficients, which keeps the
//! computed norm of a difference accurate to working precision instead of the
//! square root of it.

use num_complex::Complex64 as C64;

/// `1 / prod_i (z - poles[i])`, all poles in the open left half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Atom {
    poles: [C64; 3],
    order: usize,
}

impl Atom {
    pub fn simple(a: C64) -> Self {
        Atom {
            poles: [a, C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
            order: 1,
        }
    }

    pub fn double(a: C64, b: C64) -> Self {
        Atom {
            poles: [a, b, C64::new(0.0, 0.0)],
            order: 2,
        }
    }

    pub fn triple(a: C64, b: C64, c: C64) -> Self {
        Atom {
            poles: [a, b, c],
            order: 3,
        }
    }

    fn poles(&self) -> &[C64] {
        &self.poles[..self.order]
    }

    #[cfg(test)]
    pub fn eval(&self, z: C64) -> C64 {
        self.poles()
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, &p| acc / (z - p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Term {
    pub coef: C64,
    pub atom: Atom,
}

impl Term {
    pub fn new(coef: C64, atom: Atom) -> Self {
        Term { coef, atom }
    }
}

/// Divided difference of `prod_j 1/(z - factors[j])` at `points`.
fn divided_difference(factors: &[C64], points: &[C64]) -> C64 {
    let m = points.len();
    if factors.len() == 1 {
        let g = factors[0];
        let prod = points
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, &x| acc * (x - g));
        let sign = if (m - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
        return C64::new(sign, 0.0) / prod;
    }
    // Leibniz rule: (u v)[x_0..x_{m-1}] = sum_k u[x_0..x_k] v[x_k..x_{m-1}].
    let (head, rest) = factors.split_at(1);
    (0..m)
        .map(|k| divided_difference(head, &points[..=k]) * divided_difference(rest, &points[k..]))
        .sum()
}

/// `<f, g>` for atoms, conjugate-linear in `f`.
pub(crate) fn atom_inner(f: &Atom, g: &Atom) -> C64 {
    let pts: Vec<C64> = f.poles().iter().map(|a| -a.conj()).collect();
    let m = pts.len();
    let dd = divided_difference(g.poles(), &pts);
    if m % 2 == 1 {
        dd
    } else {
        -dd
    }
}

/// `||sum_k c_k f_k||^2`.
pub(crate) fn squared_norm(terms: &[Term]) -> f64 {
    let mut s = 0.0;
    for (i, ti) in terms.iter().enumerate() {
        let gii = atom_inner(&ti.atom, &ti.atom).re;
        s += ti.coef.norm_sqr() * gii;
        for tj in &terms[i + 1..] {
            s += 2.0 * (ti.coef.conj() * tj.coef * atom_inner(&ti.atom, &tj.atom)).re;
        }
    }
    if s.is_nan() {
        s
    } else {
        s.max(0.0)
    }
}

pub(crate) fn inner(f: &[Term], g: &[Term]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for tf in f {
        for tg in g {
            s += tf.coef.conj() * tg.coef * atom_inner(&tf.atom, &tg.atom);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// (1/2pi) int f conj g over the imaginary axis by the substitution omega = tan(t).
    fn quad_inner(f: &Atom, g: &Atom) -> C64 {
        let n = 200_000;
        let mut s = C64::new(0.0, 0.0);
        for k in 0..n {
            let t =
                -std::f64::consts::FRAC_PI_2 + (k as f64 + 0.5) * std::f64::consts::PI / n as f64;
            let w = t.tan();
            let z = c(0.0, w);
            let jac = 1.0 / t.cos().powi(2);
            s += f.eval(z).conj() * g.eval(z) * jac;
        }
        s * (std::f64::consts::PI / n as f64) / (2.0 * std::f64::consts::PI)
    }

    #[test]
    fn simple_gram_entry() {
        let a = c(-1.0, 2.0);
        let b = c(-0.5, -1.0);
        let g = atom_inner(&Atom::simple(a), &Atom::simple(b));
        assert!((g - (-(a.conj() + b).inv())).norm() < 1e-15);
    }

    #[test]
    fn double_pole_norm() {
        // ||1/(z+1)^2||^2 = 1/4.
        let f = Atom::double(c(-1.0, 0.0), c(-1.0, 0.0));
        assert!((atom_inner(&f, &f) - c(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn matches_quadrature() {
        let atoms = [
            Atom::simple(c(-0.7, 1.3)),
            Atom::double(c(-1.0, 0.5), c(-2.0, -0.3)),
            Atom::triple(c(-0.4, 0.0), c(-1.5, 2.0), c(-0.9, -1.0)),
        ];
        for f in &atoms {
            for g in &atoms {
                let exact = atom_inner(f, g);
                let q = quad_inner(f, g);
                assert!((exact - q).norm() < 1e-6, "{exact} vs {q}");
            }
        }
    }

    #[test]
    fn coalescing_poles_are_continuous() {
        let f = Atom::double(c(-1.0, 0.0), c(-1.0 - 1e-9, 0.0));
        let g = Atom::double(c(-1.0, 0.0), c(-1.0, 0.0));
        assert!((atom_inner(&f, &f) - atom_inner(&g, &g)).norm() < 1e-8);
    }
}
