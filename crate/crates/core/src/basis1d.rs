//! One-dimensional building blocks: the Gauss-Lobatto-Legendre rule, the
//! nodal (Lagrange) polynomials through its nodes, and the edge
//! (histopolant) polynomials built from their derivatives.
//!
//! Edge polynomial `e_i` (for `i = 1..=p`) is `-Σ_{k<i} dl_k/dξ`. It has
//! degree `p-1` and unit integral over `[ξ_{i-1}, ξ_i]`, zero over every
//! other sub-interval, so the derivative of a nodal expansion is exactly
//! the edge expansion of the nodal differences `q_i - q_{i-1}`.

use crate::matrix::IntMatrix;
use crate::{Error, Result};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 16;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Legendre polynomial `L_n(x)` and its derivative, by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut l_prev, mut l) = (1.0, x);
    let (mut d_prev, mut d) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let l_next = ((2.0 * kf + 1.0) * x * l - kf * l_prev) / (kf + 1.0);
        // L'_{k+1} = L'_{k-1} + (2k+1) L_k
        let d_next = d_prev + (2.0 * kf + 1.0) * l;
        l_prev = l;
        l = l_next;
        d_prev = d;
        d = d_next;
    }
    (l, d)
}

/// Gauss-Lobatto-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GllRule {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GllRule {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule to `f`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Builds the GLL rule of degree `p`: the roots of `(1-ξ²)L_p'(ξ)`.
///
/// Interior nodes are found by Newton iteration on `L_p'` starting from
/// `-cos(πi/p)`; `L_p''` comes from the Legendre equation. The result is
/// symmetrised so that `ξ_i = -ξ_{p-i}` holds bit-for-bit.
pub fn gll_rule(p: usize) -> Result<GllRule> {
    if !(1..=MAX_DEGREE).contains(&p) {
        return Err(Error::Config(format!(
            "polynomial degree {p} outside supported range 1..={MAX_DEGREE}"
        )));
    }
    let pf = p as f64;
    let mut nodes = vec![0.0; p + 1];
    nodes[0] = -1.0;
    nodes[p] = 1.0;
    for (i, node) in nodes.iter_mut().enumerate().take(p).skip(1) {
        let mut x = -(std::f64::consts::PI * i as f64 / pf).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (l, dl) = legendre(p, x);
            let d2l = (2.0 * x * dl - pf * (pf + 1.0) * l) / (1.0 - x * x);
            let dx = dl / d2l;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                break;
            }
        }
        *node = x;
    }
    for i in 0..(p + 1) / 2 {
        let m = 0.5 * (nodes[p - i] - nodes[i]);
        nodes[i] = -m;
        nodes[p - i] = m;
    }
    if p % 2 == 0 {
        nodes[p / 2] = 0.0;
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (l, _) = legendre(p, x);
            2.0 / (pf * (pf + 1.0) * l * l)
        })
        .collect();
    for i in 0..(p + 1) / 2 {
        let m = 0.5 * (weights[i] + weights[p - i]);
        weights[i] = m;
        weights[p - i] = m;
    }
    Ok(GllRule {
        degree: p,
        nodes,
        weights,
    })
}

/// Gauss-Legendre rule with `n` points, used for dense (near exact) integration
/// when initialising degrees of freedom and measuring errors.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a Gauss rule needs at least one point");
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (l, dl) = legendre(n, x);
            let dx = l / dl;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                break;
            }
        }
        let (_, dl) = legendre(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dl * dl);
    }
    (nodes, weights)
}

/// Nodal and edge polynomials of degree `p` on the GLL nodes.
#[derive(Debug, Clone)]
pub struct Basis1D {
    rule: GllRule,
    /// `1 / Π_{k≠i}(ξ_i - ξ_k)` for each node.
    denom: Vec<f64>,
}

impl Basis1D {
    pub fn new(p: usize) -> Result<Self> {
        let rule = gll_rule(p)?;
        let x = rule.nodes();
        let denom = (0..=p)
            .map(|i| {
                let prod: f64 = (0..=p).filter(|&k| k != i).map(|k| x[i] - x[k]).product();
                1.0 / prod
            })
            .collect();
        Ok(Self { rule, denom })
    }

    pub fn degree(&self) -> usize {
        self.rule.degree
    }

    pub fn rule(&self) -> &GllRule {
        &self.rule
    }

    pub fn nodes(&self) -> &[f64] {
        self.rule.nodes()
    }

    /// Lagrange polynomial `l_i(ξ)`.
    pub fn nodal(&self, i: usize, xi: f64) -> f64 {
        let x = self.nodes();
        if let Some(k) = x.iter().position(|&n| n == xi) {
            return if k == i { 1.0 } else { 0.0 };
        }
        let num: f64 = (0..x.len())
            .filter(|&k| k != i)
            .map(|k| xi - x[k])
            .product();
        num * self.denom[i]
    }

    /// `dl_i/dξ` from the product rule applied to the Lagrange product.
    pub fn nodal_deriv(&self, i: usize, xi: f64) -> f64 {
        let x = self.nodes();
        let n = x.len();
        let mut sum = 0.0;
        for m in 0..n {
            if m == i {
                continue;
            }
            let prod: f64 = (0..n)
                .filter(|&k| k != i && k != m)
                .map(|k| xi - x[k])
                .product();
            sum += prod;
        }
        sum * self.denom[i]
    }

    /// Edge polynomial `e_i(ξ)` for `1 <= i <= p`.
    pub fn edge(&self, i: usize, xi: f64) -> f64 {
        assert!(
            (1..=self.degree()).contains(&i),
            "edge index {i} outside 1..={}",
            self.degree()
        );
        -(0..i).map(|k| self.nodal_deriv(k, xi)).sum::<f64>()
    }

    /// All nodal polynomials at `ξ`, indexed `0..=p`.
    pub fn nodal_all(&self, xi: f64) -> Vec<f64> {
        (0..=self.degree()).map(|i| self.nodal(i, xi)).collect()
    }

    /// All edge polynomials at `ξ`; entry `j-1` holds `e_j(ξ)`.
    pub fn edge_all(&self, xi: f64) -> Vec<f64> {
        let p = self.degree();
        let mut out = Vec::with_capacity(p);
        let mut acc = 0.0;
        for k in 0..p {
            acc -= self.nodal_deriv(k, xi);
            out.push(acc);
        }
        out
    }
}

/// One-dimensional incidence matrix: row `i-1` maps nodal values to `q_i - q_{i-1}`.
pub fn incidence_1d(p: usize) -> IntMatrix {
    let mut e = IntMatrix::zeros(p, p + 1);
    for i in 1..=p {
        e.set(i - 1, i - 1, -1);
        e.set(i - 1, i, 1);
    }
    e
}
