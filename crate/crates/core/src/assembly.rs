//! Global operators built from element kernels.
//!
//! Nothing is assembled into a global sparse matrix. Every operator loops
//! over elements, evaluates the local fields at the collocated quadrature
//! points, applies the pointwise weights and projects back; the local
//! results are then scattered into the global vector serially in element
//! order so that results do not depend on the thread count.
//!
//! Quadrature-point values of global fields use the flat layout
//! `e * (p+1)² + q`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::geometry::CubedSphereMesh;
use crate::solver::{solve_spd, BlockJacobi, LinearOperator, SolveStats, SolverSettings};
use crate::{Error, Result};

/// Per-point weights derived from the geometry.
#[derive(Debug, Clone, Copy)]
struct PointWeights {
    /// `w_q G_q` (symmetric, stored as `g00, g01, g11`).
    wg: [f64; 3],
    /// `w_q det J_q`.
    wdet: f64,
    /// `w_q / det J_q`.
    w_over_det: f64,
    det: f64,
    w: f64,
}

/// Mass matrices, incidence relations and coupling operators on a mesh.
pub struct Operators {
    mesh: CubedSphereMesh,
    pw: Vec<PointWeights>,
    mass_w: Vec<f64>,
    /// Global `E10`: `(E10 ω)_g = ω[plus] - ω[minus]`.
    e10_pairs: Vec<(usize, usize)>,
    mu_pc: BlockJacobi,
    mq_chol: Vec<Cholesky<f64, Dyn>>,
    settings: SolverSettings,
}

impl std::fmt::Debug for Operators {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Operators")
            .field("elements", &self.mesh.num_elements())
            .field("n_u", &self.mesh.n_u())
            .field("settings", &self.settings)
            .finish()
    }
}

impl Operators {
    pub fn new(mesh: CubedSphereMesh, settings: SolverSettings) -> Result<Self> {
        let sp = mesh.spaces();
        let nq = sp.num_quad();
        let w = sp.quad_weights();
        let mut pw = Vec::with_capacity(mesh.num_elements() * nq);
        for e in 0..mesh.num_elements() {
            for (q, pt) in mesh.geometry(e).points.iter().enumerate() {
                let g = pt.metric;
                pw.push(PointWeights {
                    wg: [w[q] * g[0][0], w[q] * g[0][1], w[q] * g[1][1]],
                    wdet: w[q] * pt.det,
                    w_over_det: w[q] / pt.det,
                    det: pt.det,
                    w: w[q],
                });
            }
        }

        let mut mass_w = vec![0.0; mesh.n_w()];
        for e in 0..mesh.num_elements() {
            for (k, &g) in mesh.w_dofs(e).iter().enumerate() {
                // A is the identity: W DOF k sits on quadrature point k
                mass_w[g] += pw[e * nq + k].wdet;
            }
        }

        let mut e10_pairs = vec![(usize::MAX, usize::MAX); mesh.n_u()];
        for e in 0..mesh.num_elements() {
            let wd = mesh.w_dofs(e);
            for (k, (&g, &s)) in mesh.u_dofs(e).iter().zip(mesh.u_signs(e)).enumerate() {
                if e10_pairs[g].0 != usize::MAX {
                    continue;
                }
                let row = sp.e10().row(k);
                let plus = wd[row.iter().position(|&v| v == 1).expect("E10 row has +1")];
                let minus = wd[row.iter().position(|&v| v == -1).expect("E10 row has -1")];
                e10_pairs[g] = if s > 0.0 { (plus, minus) } else { (minus, plus) };
            }
        }

        let mut ops = Self {
            mesh,
            pw,
            mass_w,
            e10_pairs,
            mu_pc: BlockJacobi::new(Vec::new())?,
            mq_chol: Vec::new(),
            settings,
        };
        ops.mu_pc = ops.build_mass_u_preconditioner()?;
        ops.mq_chol = (0..ops.mesh.num_elements())
            .map(|e| {
                ops.element_mass_q(e).cholesky().ok_or_else(|| {
                    Error::Numerical(format!("Q mass block of element {e} is not positive definite"))
                })
            })
            .collect::<Result<_>>()?;
        Ok(ops)
    }

    pub fn mesh(&self) -> &CubedSphereMesh {
        &self.mesh
    }

    pub fn settings(&self) -> SolverSettings {
        self.settings
    }

    pub fn num_quad_total(&self) -> usize {
        self.pw.len()
    }

    /// `w_q det J_q` at every quadrature point (physical area weights).
    pub fn area_weights(&self) -> Vec<f64> {
        self.pw.iter().map(|p| p.wdet).collect()
    }

    /// Diagonal of the W mass matrix.
    pub fn mass_w_diag(&self) -> &[f64] {
        &self.mass_w
    }

    // ---------------------------------------------------------------- kernels

    fn nq(&self) -> usize {
        self.mesh.spaces().num_quad()
    }

    /// Reference velocity components at every quadrature point.
    pub fn interp_u(&self, u: &[f64]) -> Vec<[f64; 2]> {
        let sp = self.mesh.spaces();
        let nq = self.nq();
        let mut out = vec![[0.0; 2]; self.pw.len()];
        out.par_chunks_mut(nq).enumerate().for_each_init(
            || vec![0.0; sp.dim_u()],
            |loc, (e, vals)| {
                self.mesh.gather_u(e, u, loc);
                sp.interp_u(loc, vals);
            },
        );
        out
    }

    /// Physical depth `(C h)_q / det J_q` at every quadrature point.
    pub fn interp_q_physical(&self, h: &[f64]) -> Vec<f64> {
        let sp = self.mesh.spaces();
        let nq = self.nq();
        let mut out = vec![0.0; self.pw.len()];
        out.par_chunks_mut(nq).enumerate().for_each(|(e, vals)| {
            sp.interp_q(self.mesh.q_slice(e, h), vals);
            for (v, p) in vals.iter_mut().zip(&self.pw[e * nq..(e + 1) * nq]) {
                *v /= p.det;
            }
        });
        out
    }

    /// W field at every quadrature point (the nodal values themselves).
    pub fn interp_w(&self, w: &[f64]) -> Vec<f64> {
        let nq = self.nq();
        let mut out = vec![0.0; self.pw.len()];
        for e in 0..self.mesh.num_elements() {
            self.mesh.gather_w(e, w, &mut out[e * nq..(e + 1) * nq]);
        }
        out
    }

    /// Physical speed squared `vᵀGv / det J` for reference vectors `v`.
    pub fn kinetic_density(&self, v: &[[f64; 2]]) -> Vec<f64> {
        v.iter()
            .zip(&self.pw)
            .map(|(v, p)| {
                let [g00, g01, g11] = p.wg;
                (g00 * v[0] * v[0] + 2.0 * g01 * v[0] * v[1] + g11 * v[1] * v[1]) / (p.w * p.det)
            })
            .collect()
    }

    /// Runs `kernel` on the reference velocity of every element and returns
    /// the unassembled projected results (`d_U` values per element).
    fn u_loop<F>(&self, u: &[f64], kernel: F) -> Vec<f64>
    where
        F: Fn(usize, &mut [[f64; 2]]) + Sync,
    {
        let sp = self.mesh.spaces();
        let (du, nq) = (sp.dim_u(), self.nq());
        let mut buf = vec![0.0; self.mesh.num_elements() * du];
        buf.par_chunks_mut(du).enumerate().for_each_init(
            || (vec![0.0; du], vec![[0.0; 2]; nq]),
            |(loc, vals), (e, out)| {
                self.mesh.gather_u(e, u, loc);
                sp.interp_u(loc, vals);
                kernel(e, vals);
                sp.project_u(vals, out);
            },
        );
        buf
    }

    fn scatter_u(&self, buf: &[f64]) -> Vec<f64> {
        let du = self.mesh.spaces().dim_u();
        let mut y = vec![0.0; self.mesh.n_u()];
        for e in 0..self.mesh.num_elements() {
            self.mesh.scatter_add_u(e, &buf[e * du..(e + 1) * du], &mut y);
        }
        y
    }

    fn apply_metric(&self, e: usize, vals: &mut [[f64; 2]], scale: Option<&[f64]>) {
        let nq = vals.len();
        for (q, v) in vals.iter_mut().enumerate() {
            let [g00, g01, g11] = self.pw[e * nq + q].wg;
            let s = scale.map_or(1.0, |s| s[e * nq + q]);
            *v = [
                s * (g00 * v[0] + g01 * v[1]),
                s * (g01 * v[0] + g11 * v[1]),
            ];
        }
    }

    /// Unassembled element products `M_U^e u`.
    fn mass_u_local(&self, u: &[f64]) -> Vec<f64> {
        self.u_loop(u, |e, vals| self.apply_metric(e, vals, None))
    }

    // ---------------------------------------------------------------- masses

    /// `y = M_W x`.
    pub fn apply_mass_w(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mass_w).map(|(a, m)| a * m).collect()
    }

    /// `M_W⁻¹ x`, a direct division.
    pub fn solve_mass_w(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mass_w).map(|(a, m)| a / m).collect()
    }

    /// `y = M_U u`.
    pub fn apply_mass_u(&self, u: &[f64]) -> Vec<f64> {
        self.scatter_u(&self.mass_u_local(u))
    }

    /// `y = M_Q h`; element blocks only.
    pub fn apply_mass_q(&self, h: &[f64]) -> Vec<f64> {
        let sp = self.mesh.spaces();
        let (dq, nq) = (sp.dim_q(), self.nq());
        let mut y = vec![0.0; self.mesh.n_q()];
        y.par_chunks_mut(dq).enumerate().for_each_init(
            || vec![0.0; nq],
            |vals, (e, out)| {
                sp.interp_q(self.mesh.q_slice(e, h), vals);
                for (v, p) in vals.iter_mut().zip(&self.pw[e * nq..(e + 1) * nq]) {
                    *v *= p.w_over_det;
                }
                sp.project_q(vals, out);
            },
        );
        y
    }

    /// `M_Q⁻¹ r` by per-element Cholesky solves.
    pub fn solve_mass_q(&self, r: &[f64]) -> Vec<f64> {
        let dq = self.mesh.spaces().dim_q();
        let mut x = vec![0.0; r.len()];
        x.par_chunks_mut(dq).enumerate().for_each(|(e, out)| {
            let b = DVector::from_column_slice(&r[e * dq..(e + 1) * dq]);
            out.copy_from_slice(self.mq_chol[e].solve(&b).as_slice());
        });
        x
    }

    /// Solves `M_U x = rhs` with `x` as the initial guess.
    pub fn solve_mass_u(&self, rhs: &[f64], x: &mut [f64]) -> Result<SolveStats> {
        solve_spd(&MassU { ops: self }, &self.mu_pc, rhs, x, self.settings)
    }

    /// Dense local `M_U` block of element `e` in the element's own orientation.
    pub fn element_mass_u(&self, e: usize) -> DMatrix<f64> {
        self.element_weighted_u(e, None)
    }

    fn element_weighted_u(&self, e: usize, scale: Option<&[f64]>) -> DMatrix<f64> {
        let sp = self.mesh.spaces();
        let (du, nq) = (sp.dim_u(), self.nq());
        let mut m = DMatrix::zeros(du, du);
        let mut unit = vec![0.0; du];
        let mut vals = vec![[0.0; 2]; nq];
        let mut col = vec![0.0; du];
        for l in 0..du {
            unit.iter_mut().for_each(|v| *v = 0.0);
            unit[l] = 1.0;
            sp.interp_u(&unit, &mut vals);
            self.apply_metric(e, &mut vals, scale);
            sp.project_u(&vals, &mut col);
            m.column_mut(l).copy_from_slice(&col);
        }
        // symmetrise away round-off from the two projection orders
        (&m + m.transpose()) * 0.5
    }

    /// Dense local `M_Q` block of element `e`.
    pub fn element_mass_q(&self, e: usize) -> DMatrix<f64> {
        let sp = self.mesh.spaces();
        let (dq, nq) = (sp.dim_q(), self.nq());
        let mut m = DMatrix::zeros(dq, dq);
        let mut unit = vec![0.0; dq];
        let mut vals = vec![0.0; nq];
        let mut col = vec![0.0; dq];
        for l in 0..dq {
            unit.iter_mut().for_each(|v| *v = 0.0);
            unit[l] = 1.0;
            sp.interp_q(&unit, &mut vals);
            for (v, p) in vals.iter_mut().zip(&self.pw[e * nq..(e + 1) * nq]) {
                *v *= p.w_over_det;
            }
            sp.project_q(&vals, &mut col);
            m.column_mut(l).copy_from_slice(&col);
        }
        (&m + m.transpose()) * 0.5
    }

    /// Element-block Jacobi: every global U DOF belongs to the first element
    /// that touches it, and each block is the assembled `M_U` restricted to
    /// the DOFs one element owns.
    fn build_mass_u_preconditioner(&self) -> Result<BlockJacobi> {
        let nel = self.mesh.num_elements();
        let mut owner = vec![usize::MAX; self.mesh.n_u()];
        let mut pos = vec![0usize; self.mesh.n_u()];
        let mut owned: Vec<Vec<usize>> = vec![Vec::new(); nel];
        for (e, list) in owned.iter_mut().enumerate() {
            for &g in self.mesh.u_dofs(e) {
                if owner[g] == usize::MAX {
                    owner[g] = e;
                    pos[g] = list.len();
                    list.push(g);
                }
            }
        }
        let locals: Vec<DMatrix<f64>> = (0..nel)
            .into_par_iter()
            .map(|e| self.element_mass_u(e))
            .collect();
        let mut blocks: Vec<DMatrix<f64>> =
            owned.iter().map(|l| DMatrix::zeros(l.len(), l.len())).collect();
        for (e, m) in locals.iter().enumerate() {
            let (g, s) = (self.mesh.u_dofs(e), self.mesh.u_signs(e));
            for k in 0..g.len() {
                for l in 0..g.len() {
                    let o = owner[g[k]];
                    if o == owner[g[l]] {
                        blocks[o][(pos[g[k]], pos[g[l]])] += s[k] * s[l] * m[(k, l)];
                    }
                }
            }
        }
        BlockJacobi::new(
            owned
                .into_iter()
                .zip(blocks)
                .filter(|(l, _)| !l.is_empty())
                .collect(),
        )
    }

    // ---------------------------------------------------------------- incidence

    /// Global `E10 ω` (strong perpendicular gradient, W to U).
    pub fn apply_e10(&self, w: &[f64]) -> Vec<f64> {
        self.e10_pairs.iter().map(|&(a, b)| w[a] - w[b]).collect()
    }

    /// Global `E10ᵀ y` for an assembled U vector `y`.
    pub fn apply_e10_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.n_w()];
        for (&(a, b), v) in self.e10_pairs.iter().zip(y) {
            out[a] += v;
            out[b] -= v;
        }
        out
    }

    /// Global `E21 u` (strong divergence, U to Q).
    pub fn apply_e21(&self, u: &[f64]) -> Vec<f64> {
        let sp = self.mesh.spaces();
        let dq = sp.dim_q();
        let mut out = vec![0.0; self.mesh.n_q()];
        out.par_chunks_mut(dq).enumerate().for_each_init(
            || vec![0.0; sp.dim_u()],
            |loc, (e, o)| {
                self.mesh.gather_u(e, u, loc);
                sp.e21().apply(loc, o);
            },
        );
        out
    }

    /// Global `E21ᵀ φ` (Q to U).
    pub fn apply_e21_transpose(&self, phi: &[f64]) -> Vec<f64> {
        let sp = self.mesh.spaces();
        let du = sp.dim_u();
        let mut buf = vec![0.0; self.mesh.num_elements() * du];
        buf.par_chunks_mut(du).enumerate().for_each(|(e, out)| {
            sp.e21().apply_transpose(self.mesh.q_slice(e, phi), out);
        });
        self.scatter_u(&buf)
    }

    // ---------------------------------------------------------------- weak operators

    /// Right-hand side `-E10ᵀ M_U u` of the weak curl.
    pub fn weak_curl_rhs(&self, u: &[f64]) -> Vec<f64> {
        let sp = self.mesh.spaces();
        let du = sp.dim_u();
        let local = self.mass_u_local(u);
        let mut out = vec![0.0; self.mesh.n_w()];
        let mut wl = vec![0.0; sp.dim_w()];
        for e in 0..self.mesh.num_elements() {
            sp.e10().apply_transpose(&local[e * du..(e + 1) * du], &mut wl);
            for v in wl.iter_mut() {
                *v = -*v;
            }
            self.mesh.scatter_add_w(e, &wl, &mut out);
        }
        out
    }

    /// Weak curl: `ω = M_W⁻¹(-E10ᵀ M_U u)`.
    pub fn weak_curl(&self, u: &[f64]) -> Vec<f64> {
        self.solve_mass_w(&self.weak_curl_rhs(u))
    }

    /// Weak gradient of Q coefficients as a U right-hand side: `-E21ᵀ M_Q φ`.
    pub fn weak_grad(&self, phi: &[f64]) -> Vec<f64> {
        let mut g = self.apply_e21_transpose(&self.apply_mass_q(phi));
        g.iter_mut().for_each(|v| *v = -*v);
        g
    }

    /// Weak gradient of a field given by physical values at quadrature points:
    /// `-⟨ε_k, ∇f⟩ = ⟨∇·ε_k, f⟩ = (E21ᵀ Φ)_k` with `Φ_j = Σ_q w_q C_qj f_q`.
    ///
    /// The sign matches the momentum equation, i.e. this returns the RHS of
    /// `M_U g = -∇f`.
    pub fn neg_grad_pointwise(&self, f: &[f64]) -> Vec<f64> {
        let phi = self.test_q(f);
        self.apply_e21_transpose(&phi)
    }

    /// `Φ_j = Σ_q w_q C_qj f_q` for physical values `f` at quadrature points.
    pub fn test_q(&self, f: &[f64]) -> Vec<f64> {
        let sp = self.mesh.spaces();
        let (dq, nq) = (sp.dim_q(), self.nq());
        let mut phi = vec![0.0; self.mesh.n_q()];
        phi.par_chunks_mut(dq).enumerate().for_each_init(
            || vec![0.0; nq],
            |vals, (e, out)| {
                for q in 0..nq {
                    vals[q] = self.pw[e * nq + q].w * f[e * nq + q];
                }
                sp.project_q(vals, out);
            },
        );
        phi
    }

    /// Rotational term `⟨ε_k, (ω+f) k×u⟩` given `ω+f` at quadrature points.
    ///
    /// Because `JᵀRJ = det(J) R` for the quarter turn `R`, the metric drops
    /// out and the kernel is `w_q (ω+f)_q R v_q` in reference components.
    pub fn rotational(&self, abs_vort_q: &[f64], u: &[f64]) -> Vec<f64> {
        let nq = self.nq();
        let buf = self.u_loop(u, |e, vals| {
            for (q, v) in vals.iter_mut().enumerate() {
                let s = self.pw[e * nq + q].w * abs_vort_q[e * nq + q];
                *v = [-s * v[1], s * v[0]];
            }
        });
        self.scatter_u(&buf)
    }

    /// Thickness-weighted projection RHS `⟨ε_k, h u⟩`, `h` physical at quadrature points.
    pub fn flux_rhs(&self, h_q: &[f64], u: &[f64]) -> Vec<f64> {
        let buf = self.u_loop(u, |e, vals| self.apply_metric(e, vals, Some(h_q)));
        self.scatter_u(&buf)
    }

    /// Vector Laplacian `Δu = E10 ω + d` with `ω` the weak curl and
    /// `M_U d = -E21ᵀ M_Q E21 u`. `guess` warm-starts the solve.
    pub fn laplacian(&self, u: &[f64], guess: &mut [f64]) -> Result<(Vec<f64>, SolveStats)> {
        let omega = self.weak_curl(u);
        let r = self.apply_e10(&omega);
        let delta = self.apply_e21(u);
        let rhs = self.weak_grad(&delta);
        let stats = self.solve_mass_u(&rhs, guess)?;
        let out = guess.iter().zip(&r).map(|(d, r)| d + r).collect();
        Ok((out, stats))
    }
}

/// `M_U` as a linear operator.
pub struct MassU<'a> {
    pub ops: &'a Operators,
}

impl LinearOperator for MassU<'_> {
    fn dim(&self) -> usize {
        self.ops.mesh.n_u()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.ops.apply_mass_u(x));
    }
}

/// `M_Q` as a linear operator.
pub struct MassQ<'a> {
    pub ops: &'a Operators,
}

impl LinearOperator for MassQ<'_> {
    fn dim(&self) -> usize {
        self.ops.mesh.n_q()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.ops.apply_mass_q(x));
    }
}

/// `u ↦ ⟨ε, h u⟩` for a fixed depth field.
pub struct FluxOp<'a> {
    pub ops: &'a Operators,
    /// Physical depth at quadrature points.
    pub h_q: Vec<f64>,
}

impl LinearOperator for FluxOp<'_> {
    fn dim(&self) -> usize {
        self.ops.mesh.n_u()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.ops.flux_rhs(&self.h_q, x));
    }
}

/// `u ↦ ⟨ε, (ω+f) k×u⟩` for a fixed absolute vorticity.
pub struct RotationalOp<'a> {
    pub ops: &'a Operators,
    /// `ω + f` at quadrature points.
    pub abs_vort_q: Vec<f64>,
}

impl LinearOperator for RotationalOp<'_> {
    fn dim(&self) -> usize {
        self.ops.mesh.n_u()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.ops.rotational(&self.abs_vort_q, x));
    }
}
