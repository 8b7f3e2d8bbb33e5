//! Tensor-product spaces on the reference square `[-1,1]²`.
//!
//! Local DOF orderings (all zero based):
//!
//! * `W`: `ε(i,j) = l_i(ξ) l_j(η)`, index `i(p+1) + j`.
//! * `U`: the two vector components alternate. The ξ-component
//!   `l_i(ξ) e_j(η) ê_ξ` (`i = 0..=p`, `j = 1..=p`) sits at `2(ip + j - 1)`,
//!   the η-component `e_i(ξ) l_j(η) ê_η` (`i = 1..=p`, `j = 0..=p`) at
//!   `2((i-1)(p+1) + j) + 1`.
//! * `Q`: `e_i(ξ) e_j(η)`, index `(i-1)p + (j-1)`.
//!
//! Quadrature is collocated on the `(p+1)²` tensor GLL nodes, with point
//! `(ξ_a, η_b)` at index `a(p+1) + b`, so the W evaluation matrix is the
//! identity.

use nalgebra::DMatrix;

use crate::basis1d::Basis1D;
use crate::matrix::IntMatrix;
use crate::Result;

/// Component and tensor indices of a local U degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UDof {
    /// `l_i(ξ) e_j(η) ê_ξ`: flux through the η-directed segment at `ξ_i`.
    Xi { i: usize, j: usize },
    /// `e_i(ξ) l_j(η) ê_η`: flux through the ξ-directed segment at `η_j`.
    Eta { i: usize, j: usize },
}

/// Local function spaces, incidence matrices and evaluation tables for degree `p`.
#[derive(Debug, Clone)]
pub struct LocalSpaces {
    p: usize,
    basis: Basis1D,
    e10: IntMatrix,
    e21: IntMatrix,
    /// `edge_tab[a*p + (j-1)] = e_j(ξ_a)` at the GLL nodes.
    edge_tab: Vec<f64>,
    /// Tensor GLL weights at quadrature point `a(p+1)+b`.
    weights: Vec<f64>,
}

impl LocalSpaces {
    pub fn new(p: usize) -> Result<Self> {
        let basis = Basis1D::new(p)?;
        let nodes = basis.nodes().to_vec();
        let w1 = basis.rule().weights().to_vec();
        let mut edge_tab = Vec::with_capacity((p + 1) * p);
        for &x in &nodes {
            edge_tab.extend(basis.edge_all(x));
        }
        let mut weights = Vec::with_capacity((p + 1) * (p + 1));
        for wa in &w1 {
            for wb in &w1 {
                weights.push(wa * wb);
            }
        }
        Ok(Self {
            p,
            e10: incidence_e10(p),
            e21: incidence_e21(p),
            basis,
            edge_tab,
            weights,
        })
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn basis(&self) -> &Basis1D {
        &self.basis
    }

    pub fn dim_w(&self) -> usize {
        (self.p + 1) * (self.p + 1)
    }

    pub fn dim_u(&self) -> usize {
        2 * self.p * (self.p + 1)
    }

    pub fn dim_q(&self) -> usize {
        self.p * self.p
    }

    pub fn num_quad(&self) -> usize {
        self.dim_w()
    }

    pub fn e10(&self) -> &IntMatrix {
        &self.e10
    }

    pub fn e21(&self) -> &IntMatrix {
        &self.e21
    }

    /// Tensor quadrature weights, `w_a w_b` at index `a(p+1)+b`.
    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Reference coordinates of quadrature point `q`.
    pub fn quad_point(&self, q: usize) -> (f64, f64) {
        let x = self.basis.nodes();
        (x[q / (self.p + 1)], x[q % (self.p + 1)])
    }

    #[inline]
    pub fn w_index(&self, i: usize, j: usize) -> usize {
        i * (self.p + 1) + j
    }

    #[inline]
    pub fn u_xi_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.p && (1..=self.p).contains(&j));
        2 * (i * self.p + j - 1)
    }

    #[inline]
    pub fn u_eta_index(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..=self.p).contains(&i) && j <= self.p);
        2 * ((i - 1) * (self.p + 1) + j) + 1
    }

    #[inline]
    pub fn q_index(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..=self.p).contains(&i) && (1..=self.p).contains(&j));
        (i - 1) * self.p + (j - 1)
    }

    pub fn w_dof(&self, k: usize) -> (usize, usize) {
        (k / (self.p + 1), k % (self.p + 1))
    }

    pub fn u_dof(&self, k: usize) -> UDof {
        let m = k / 2;
        if k % 2 == 0 {
            UDof::Xi {
                i: m / self.p,
                j: m % self.p + 1,
            }
        } else {
            UDof::Eta {
                i: m / (self.p + 1) + 1,
                j: m % (self.p + 1),
            }
        }
    }

    pub fn q_dof(&self, k: usize) -> (usize, usize) {
        (k / self.p + 1, k % self.p + 1)
    }

    pub fn eval_w(&self, k: usize, xi: f64, eta: f64) -> f64 {
        let (i, j) = self.w_dof(k);
        self.basis.nodal(i, xi) * self.basis.nodal(j, eta)
    }

    /// Reference-frame vector value `(v^ξ, v^η)` of U basis function `k`.
    pub fn eval_u(&self, k: usize, xi: f64, eta: f64) -> [f64; 2] {
        match self.u_dof(k) {
            UDof::Xi { i, j } => [self.basis.nodal(i, xi) * self.basis.edge(j, eta), 0.0],
            UDof::Eta { i, j } => [0.0, self.basis.edge(i, xi) * self.basis.nodal(j, eta)],
        }
    }

    pub fn eval_q(&self, k: usize, xi: f64, eta: f64) -> f64 {
        let (i, j) = self.q_dof(k);
        self.basis.edge(i, xi) * self.basis.edge(j, eta)
    }

    /// Evaluation matrices at the collocated quadrature points.
    ///
    /// `A` is `#q × d_W`, `B` is `2#q × d_U` (rows `2q`, `2q+1` hold the ξ and
    /// η components at point `q`), `C` is `#q × d_Q`.
    pub fn eval_matrices(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let nq = self.num_quad();
        let a = DMatrix::from_fn(nq, self.dim_w(), |q, k| {
            let (x, y) = self.quad_point(q);
            self.eval_w(k, x, y)
        });
        let b = DMatrix::from_fn(2 * nq, self.dim_u(), |r, k| {
            let (x, y) = self.quad_point(r / 2);
            self.eval_u(k, x, y)[r % 2]
        });
        let c = DMatrix::from_fn(nq, self.dim_q(), |q, k| {
            let (x, y) = self.quad_point(q);
            self.eval_q(k, x, y)
        });
        (a, b, c)
    }

    #[inline]
    fn edge_at(&self, a: usize, j: usize) -> f64 {
        self.edge_tab[a * self.p + j - 1]
    }

    /// Reference vector field at every quadrature point from local U coefficients.
    pub fn interp_u(&self, u: &[f64], out: &mut [[f64; 2]]) {
        let p = self.p;
        for a in 0..=p {
            for b in 0..=p {
                let mut vx = 0.0;
                for j in 1..=p {
                    vx += u[self.u_xi_index(a, j)] * self.edge_at(b, j);
                }
                let mut vy = 0.0;
                for i in 1..=p {
                    vy += u[self.u_eta_index(i, b)] * self.edge_at(a, i);
                }
                out[a * (p + 1) + b] = [vx, vy];
            }
        }
    }

    /// Transpose of [`interp_u`](Self::interp_u): `out_k = Σ_q ε_k(q)·vals_q`.
    pub fn project_u(&self, vals: &[[f64; 2]], out: &mut [f64]) {
        let p = self.p;
        for i in 0..=p {
            for j in 1..=p {
                let mut s = 0.0;
                for b in 0..=p {
                    s += vals[i * (p + 1) + b][0] * self.edge_at(b, j);
                }
                out[self.u_xi_index(i, j)] = s;
            }
        }
        for i in 1..=p {
            for j in 0..=p {
                let mut s = 0.0;
                for a in 0..=p {
                    s += vals[a * (p + 1) + j][1] * self.edge_at(a, i);
                }
                out[self.u_eta_index(i, j)] = s;
            }
        }
    }

    /// Q field at every quadrature point from local Q coefficients.
    pub fn interp_q(&self, h: &[f64], out: &mut [f64]) {
        let p = self.p;
        // tmp(i, b) = Σ_j h(i,j) e_j(η_b)
        let mut tmp = vec![0.0; p * (p + 1)];
        for i in 1..=p {
            for b in 0..=p {
                let mut s = 0.0;
                for j in 1..=p {
                    s += h[self.q_index(i, j)] * self.edge_at(b, j);
                }
                tmp[(i - 1) * (p + 1) + b] = s;
            }
        }
        for a in 0..=p {
            for b in 0..=p {
                let mut s = 0.0;
                for i in 1..=p {
                    s += self.edge_at(a, i) * tmp[(i - 1) * (p + 1) + b];
                }
                out[a * (p + 1) + b] = s;
            }
        }
    }

    /// Transpose of [`interp_q`](Self::interp_q).
    pub fn project_q(&self, vals: &[f64], out: &mut [f64]) {
        let p = self.p;
        let mut tmp = vec![0.0; p * (p + 1)];
        for i in 1..=p {
            for b in 0..=p {
                let mut s = 0.0;
                for a in 0..=p {
                    s += self.edge_at(a, i) * vals[a * (p + 1) + b];
                }
                tmp[(i - 1) * (p + 1) + b] = s;
            }
        }
        for i in 1..=p {
            for j in 1..=p {
                let mut s = 0.0;
                for b in 0..=p {
                    s += tmp[(i - 1) * (p + 1) + b] * self.edge_at(b, j);
                }
                out[self.q_index(i, j)] = s;
            }
        }
    }
}

/// Local incidence matrix of the perpendicular gradient `∇⊥ψ = (-∂ψ/∂η, ∂ψ/∂ξ)`.
pub fn incidence_e10(p: usize) -> IntMatrix {
    let np = p + 1;
    let w = |i: usize, j: usize| i * np + j;
    let mut e = IntMatrix::zeros(2 * p * np, np * np);
    for i in 0..=p {
        for j in 1..=p {
            let r = 2 * (i * p + j - 1);
            e.set(r, w(i, j - 1), 1);
            e.set(r, w(i, j), -1);
        }
    }
    for i in 1..=p {
        for j in 0..=p {
            let r = 2 * ((i - 1) * np + j) + 1;
            e.set(r, w(i, j), 1);
            e.set(r, w(i - 1, j), -1);
        }
    }
    e
}

/// Local incidence matrix of the divergence.
pub fn incidence_e21(p: usize) -> IntMatrix {
    let np = p + 1;
    let ux = |i: usize, j: usize| 2 * (i * p + j - 1);
    let ue = |i: usize, j: usize| 2 * ((i - 1) * np + j) + 1;
    let mut e = IntMatrix::zeros(p * p, 2 * p * np);
    for i in 1..=p {
        for j in 1..=p {
            let r = (i - 1) * p + (j - 1);
            e.set(r, ux(i, j), 1);
            e.set(r, ux(i - 1, j), -1);
            e.set(r, ue(i, j), 1);
            e.set(r, ue(i, j - 1), -1);
        }
    }
    e
}
