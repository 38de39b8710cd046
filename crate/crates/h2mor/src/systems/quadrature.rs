use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Boyd/Clenshaw-Curtis rule on the imaginary axis
///
/// ```text
/// ||H||^2 ~ w_inf (|M+|^2 + |M-|^2) + sum_j w_j |H(z_j)|^2
/// z_j = i L cot(j pi / (n+1)),  w_j = L / (2 (n+1) sin^2(j pi / (n+1))),  w_inf = 1 / (4 L (n+1))
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct BccRule {
    pub scale: f64,
    pub nodes: Vec<C64>,
    pub weights: Vec<f64>,
    pub moment_weight: f64,
}

pub fn bcc_rule(scale: f64, n: usize) -> Result<BccRule> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(
            "quadrature scale must be positive".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "quadrature needs at least one node".into(),
        ));
    }
    let np1 = (n + 1) as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for j in 1..=n {
        let t = j as f64 * std::f64::consts::PI / np1;
        let (s, c) = t.sin_cos();
        let cot = if 2 * j == n + 1 { 0.0 } else { c / s };
        nodes.push(C64::new(0.0, scale * cot));
        weights.push(scale / (2.0 * np1 * s * s));
    }
    Ok(BccRule {
        scale,
        nodes,
        weights,
        moment_weight: 1.0 / (4.0 * scale * np1),
    })
}

impl BccRule {
    /// Applies the rule to `|f|^2` given its values at the nodes and the two moments.
    pub fn squared_norm(&self, values: &[C64], moment_plus: f64, moment_minus: f64) -> f64 {
        let s: f64 = self
            .weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v.norm_sqr())
            .sum();
        s + self.moment_weight * (moment_plus * moment_plus + moment_minus * moment_minus)
    }

    /// Nodes with positive imaginary part.
    pub fn upper_nodes(&self) -> impl Iterator<Item = C64> + '_ {
        self.nodes.iter().copied().filter(|z| z.im > 0.0)
    }
}
