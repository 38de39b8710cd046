use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::rom::RationalRom;
use crate::error::{Error, Result};
use crate::numkit::{to_complex, Tridiagonal};

/// `H(z) = c^T (z E - A)^{-1} b` with `E = I` when absent.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub e: Option<DMatrix<f64>>,
}

impl StateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
        e: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n
            || b.len() != n
            || c.len() != n
            || e.as_ref().is_some_and(|e| e.shape() != (n, n))
        {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {n} is inconsistent across A, b, c, E"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument(
                "state dimension must be positive".into(),
            ));
        }
        let finite = a
            .iter()
            .chain(b.iter())
            .chain(c.iter())
            .all(|v| v.is_finite())
            && e.as_ref().is_none_or(|e| e.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::NonFinite);
        }
        Ok(StateSpace { a, b, c, e })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn shifted(&self, z: C64) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = -to_complex(&self.a);
        match &self.e {
            Some(e) => m += to_complex(e) * z,
            None => {
                for i in 0..n {
                    m[(i, i)] += z;
                }
            }
        }
        m
    }

    /// `(z E - A)^{-1} b`, or `(z E - A)^{-H} c` when `adjoint` is set.
    pub fn resolvent(&self, z: C64, adjoint: bool) -> Result<DVector<C64>> {
        let (m, rhs) = if adjoint {
            (self.shifted(z).adjoint(), &self.c)
        } else {
            (self.shifted(z), &self.b)
        };
        let x = m
            .lu()
            .solve(&rhs.map(|v| C64::new(v, 0.0)))
            .ok_or(Error::PoleProximity(z))?;
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::PoleProximity(z));
        }
        Ok(x)
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        let x = self.resolvent(z, false)?;
        Ok(self.c.iter().zip(x.iter()).map(|(ci, xi)| xi * *ci).sum())
    }

    pub fn derivative(&self, z: C64) -> Result<C64> {
        // H'(z) = -c^T K^{-1} E K^{-1} b with K = z E - A.
        let k = self.shifted(z);
        let lu = k.lu();
        let x = lu
            .solve(&self.b.map(|v| C64::new(v, 0.0)))
            .ok_or(Error::PoleProximity(z))?;
        let ex = match &self.e {
            Some(e) => to_complex(e) * &x,
            None => x,
        };
        let y = lu.solve(&ex).ok_or(Error::PoleProximity(z))?;
        Ok(-self
            .c
            .iter()
            .zip(y.iter())
            .map(|(ci, yi)| yi * *ci)
            .sum::<C64>())
    }

    /// `E^{-1} A` and `E^{-1} b`.
    pub fn standard_form(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        match &self.e {
            None => Ok((self.a.clone(), self.b.clone())),
            Some(e) => {
                let lu = e.clone().lu();
                let a = lu.solve(&self.a).ok_or(Error::Singular)?;
                let b = lu.solve(&self.b).ok_or(Error::Singular)?;
                Ok((a, b))
            }
        }
    }

    pub fn moment_at_infinity(&self) -> Result<f64> {
        let (_, b) = self.standard_form()?;
        Ok(self.c.dot(&b))
    }

    pub fn poles(&self) -> Result<Vec<C64>> {
        let (a, _) = self.standard_form()?;
        crate::numkit::eigenvalues_real(&a)
    }
}

/// Delay system
///
/// ```text
/// H(z) = c^T (z E - A0 - exp(-tau z) A1)^{-1} b
/// E  = (2/sqrt(eps)) I + T
/// A0 = (2 + 2 rho)/(tau rho) (T - (2/sqrt(eps)) I)
/// A1 = (2 - 2 rho)/(tau rho) (T - (2/sqrt(eps)) I)
/// ```
///
/// where `T` has ones on the first sub- and superdiagonal and at the two
/// corner diagonal entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySystem {
    pub n: usize,
    pub tau: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl DelaySystem {
    /// `b = c` with ones in the first two entries.
    pub fn new(n: usize, tau: f64, rho: f64, epsilon: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("delay system needs n >= 2".into()));
        }
        if !(tau > 0.0 && rho > 0.0 && epsilon > 0.0)
            || ![tau, rho, epsilon].iter().all(|v| v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "tau, rho and epsilon must be positive and finite".into(),
            ));
        }
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        b[1] = 1.0;
        Ok(DelaySystem {
            n,
            tau,
            rho,
            epsilon,
            c: b.clone(),
            b,
        })
    }

    fn t_diag(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            1.0
        } else {
            0.0
        }
    }

    fn coefficients(&self) -> (f64, f64, f64) {
        let s = 2.0 / self.epsilon.sqrt();
        let alpha = (2.0 + 2.0 * self.rho) / (self.tau * self.rho);
        let beta = (2.0 - 2.0 * self.rho) / (self.tau * self.rho);
        (s, alpha, beta)
    }

    /// Bands of `z E - A0 - exp(-tau z) A1`.
    pub fn pencil(&self, z: C64) -> Tridiagonal {
        let (s, alpha, beta) = self.coefficients();
        let g = (-z * self.tau).exp() * beta + alpha;
        let diag = (0..self.n)
            .map(|i| z * (s + self.t_diag(i)) - g * (self.t_diag(i) - s))
            .collect();
        let off = z - g;
        Tridiagonal {
            sub: vec![off; self.n - 1],
            diag,
            sup: vec![off; self.n - 1],
        }
    }

    /// Bands of `E + tau exp(-tau z) A1`, the derivative of the pencil.
    fn pencil_derivative(&self, z: C64) -> Tridiagonal {
        let (s, _, beta) = self.coefficients();
        let g = (-z * self.tau).exp() * (self.tau * beta);
        let diag = (0..self.n)
            .map(|i| g * (self.t_diag(i) - s) + (s + self.t_diag(i)))
            .collect();
        let off = g + 1.0;
        Tridiagonal {
            sub: vec![off; self.n - 1],
            diag,
            sup: vec![off; self.n - 1],
        }
    }

    fn cvec(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        let k = self.pencil(z);
        let x = k
            .solve(&Self::cvec(&self.b))
            .map_err(|_| Error::PoleProximity(z))?;
        Ok(self.c.iter().zip(x.iter()).map(|(ci, xi)| xi * *ci).sum())
    }

    pub fn derivative(&self, z: C64) -> Result<C64> {
        let k = self.pencil(z);
        let x = k
            .solve(&Self::cvec(&self.b))
            .map_err(|_| Error::PoleProximity(z))?;
        let y = k
            .transpose()
            .solve(&Self::cvec(&self.c))
            .map_err(|_| Error::PoleProximity(z))?;
        let kx = self.pencil_derivative(z).matvec(&x);
        Ok(-y.iter().zip(kx.iter()).map(|(yi, ki)| yi * ki).sum::<C64>())
    }

    /// `lim_{w -> inf} i w H(i w) = c^T E^{-1} b`.
    pub fn moment_at_infinity(&self) -> Result<f64> {
        let (s, _, _) = self.coefficients();
        let e = Tridiagonal {
            sub: vec![C64::new(1.0, 0.0); self.n - 1],
            diag: (0..self.n)
                .map(|i| C64::new(s + self.t_diag(i), 0.0))
                .collect(),
            sup: vec![C64::new(1.0, 0.0); self.n - 1],
        };
        let x = e.solve(&Self::cvec(&self.b))?;
        Ok(self.c.iter().zip(x.iter()).map(|(ci, xi)| ci * xi.re).sum())
    }
}

/// Transfer function known only at a fixed set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    pub points: Vec<C64>,
    pub values: Vec<C64>,
}

impl Tabulated {
    pub fn new(points: Vec<C64>, values: Vec<C64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch(
                "points and values differ in length".into(),
            ));
        }
        Ok(Tabulated { points, values })
    }

    /// Table lookup; a conjugate point returns the conjugate value.
    pub fn eval(&self, z: C64) -> Result<C64> {
        let tol = 1e-12 * z.norm().max(1.0);
        for (p, v) in self.points.iter().zip(&self.values) {
            if (p - z).norm() <= tol {
                return Ok(*v);
            }
            if (p.conj() - z).norm() <= tol {
                return Ok(v.conj());
            }
        }
        Err(Error::NotTabulated(z))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    StateSpace(StateSpace),
    Delay(DelaySystem),
    Rational(RationalRom),
    Tabulated(Tabulated),
}

/// A real transfer function `H` with `H(conj z) = conj H(z)`, instrumented
/// with an evaluation counter.
///
/// * [`evaluate`](Self::evaluate) caches values; a point and its conjugate
///   cost one evaluation together.
/// * [`evaluate_fresh`](Self::evaluate_fresh), [`derivative`](Self::derivative)
///   and [`resolvent`](Self::resolvent) are counted every time.
/// * the `*_uncounted` variants are for error measurement only.
#[derive(Debug)]
pub struct TransferFunctionModel {
    kind: ModelKind,
    moment: Option<f64>,
    evals: AtomicUsize,
    cache: Mutex<HashMap<(u64, u64), C64>>,
}

fn cache_key(z: C64) -> ((u64, u64), bool) {
    let im = z.im.abs();
    let re = if z.re == 0.0 { 0.0 } else { z.re };
    ((re.to_bits(), im.to_bits()), z.im < 0.0)
}

impl TransferFunctionModel {
    pub fn new(kind: ModelKind) -> Self {
        TransferFunctionModel {
            kind,
            moment: None,
            evals: AtomicUsize::new(0),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn state_space(ss: StateSpace) -> Self {
        Self::new(ModelKind::StateSpace(ss))
    }

    pub fn delay(d: DelaySystem) -> Self {
        Self::new(ModelKind::Delay(d))
    }

    pub fn rational(rom: RationalRom) -> Self {
        Self::new(ModelKind::Rational(rom))
    }

    pub fn tabulated(t: Tabulated) -> Self {
        Self::new(ModelKind::Tabulated(t))
    }

    /// Supplies `lim i w H(i w)` for models without an analytic value.
    pub fn with_moment(mut self, m: f64) -> Self {
        self.moment = Some(m);
        self
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Independent copy with a zeroed counter and an empty cache.
    pub fn fork(&self) -> Self {
        TransferFunctionModel {
            kind: self.kind.clone(),
            moment: self.moment,
            evals: AtomicUsize::new(0),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn fom_evals(&self) -> usize {
        self.evals.load(Ordering::SeqCst)
    }

    pub fn reset_counter(&self) {
        self.evals.store(0, Ordering::SeqCst);
        self.cache.lock().expect("cache lock").clear();
    }

    fn count(&self, k: usize) {
        self.evals.fetch_add(k, Ordering::SeqCst);
    }

    pub fn evaluate_uncounted(&self, z: C64) -> Result<C64> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let v = match &self.kind {
            ModelKind::StateSpace(ss) => ss.eval(z)?,
            ModelKind::Delay(d) => d.eval(z)?,
            ModelKind::Rational(r) => r.eval(z),
            ModelKind::Tabulated(t) => t.eval(z)?,
        };
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::PoleProximity(z));
        }
        Ok(v)
    }

    pub fn derivative_uncounted(&self, z: C64) -> Result<C64> {
        let v = match &self.kind {
            ModelKind::StateSpace(ss) => ss.derivative(z)?,
            ModelKind::Delay(d) => d.derivative(z)?,
            ModelKind::Rational(r) => r.derivative(z),
            ModelKind::Tabulated(_) => {
                return Err(Error::InvalidArgument(
                    "tabulated models have no derivative".into(),
                ))
            }
        };
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::PoleProximity(z));
        }
        Ok(v)
    }

    /// Cached, counted evaluation.
    pub fn evaluate(&self, z: C64) -> Result<C64> {
        let (key, flip) = cache_key(z);
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(if flip { v.conj() } else { *v });
        }
        let v = self.evaluate_uncounted(z)?;
        self.count(1);
        let stored = if flip { v.conj() } else { v };
        self.cache.lock().expect("cache lock").insert(key, stored);
        Ok(v)
    }

    /// Counted evaluation that bypasses the cache.
    pub fn evaluate_fresh(&self, z: C64) -> Result<C64> {
        let v = self.evaluate_uncounted(z)?;
        self.count(1);
        Ok(v)
    }

    /// Counted derivative `H'(z)`.
    pub fn derivative(&self, z: C64) -> Result<C64> {
        let v = self.derivative_uncounted(z)?;
        self.count(1);
        Ok(v)
    }

    /// State-space realization: the model itself, or the block-diagonal
    /// realization of a rational model.
    pub fn realization(&self) -> Option<StateSpace> {
        match &self.kind {
            ModelKind::StateSpace(ss) => Some(ss.clone()),
            ModelKind::Rational(r) => {
                let (a, b, c) = r.realization();
                StateSpace::new(a, b, c, None).ok()
            }
            _ => None,
        }
    }

    /// Counted shifted solve `(z E - A)^{-1} b` (or the adjoint with `c`) in
    /// the realization of [`Self::realization`].
    pub fn resolvent(&self, z: C64, adjoint: bool) -> Result<DVector<C64>> {
        let x = match &self.kind {
            ModelKind::StateSpace(ss) => ss.resolvent(z, adjoint)?,
            ModelKind::Rational(_) => self
                .realization()
                .ok_or(Error::Unstable)?
                .resolvent(z, adjoint)?,
            _ => {
                return Err(Error::InvalidArgument(
                    "shifted solves need a realization".into(),
                ))
            }
        };
        self.count(1);
        Ok(x)
    }

    /// `lim_{w -> +-inf} i w H(i w)`: analytic where possible, otherwise the supplied value.
    pub fn moment_at_infinity(&self) -> Option<f64> {
        if self.moment.is_some() {
            return self.moment;
        }
        match &self.kind {
            ModelKind::StateSpace(ss) => ss.moment_at_infinity().ok(),
            ModelKind::Delay(d) => d.moment_at_infinity().ok(),
            ModelKind::Rational(r) => Some(r.moment_at_infinity()),
            ModelKind::Tabulated(_) => None,
        }
    }

    /// Counted access to the moment, one model quantity per call.
    pub fn moment_counted(&self) -> Option<f64> {
        let m = self.moment_at_infinity();
        if m.is_some() {
            self.count(1);
        }
        m
    }

    /// Poles when cheaply available (state-space and rational models).
    pub fn poles(&self) -> Option<Vec<C64>> {
        match &self.kind {
            ModelKind::StateSpace(ss) => ss.poles().ok(),
            ModelKind::Rational(r) => Some(r.poles().to_vec()),
            _ => None,
        }
    }

    /// Interpolation points `-conj(lambda)` from the rightmost poles, closed
    /// under conjugation; at least `count` of them (one more if a pair would split).
    pub fn default_shifts(&self, count: usize) -> Option<Vec<C64>> {
        let mut poles = self.poles()?;
        poles.retain(|p| p.re < 0.0);
        poles.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
        let scale = poles
            .iter()
            .map(|p| p.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut out: Vec<C64> = Vec::new();
        let mut i = 0;
        while out.len() < count && i < poles.len() {
            let p = poles[i];
            i += 1;
            let mu = -p.conj();
            if out.iter().any(|q| (q - mu).norm() <= 1e-10 * scale) {
                continue;
            }
            out.push(mu);
            if mu.im.abs() > 1e-10 * scale {
                out.push(mu.conj());
            }
        }
        Some(out)
    }
}
