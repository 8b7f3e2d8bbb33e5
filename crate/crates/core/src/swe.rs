//! Rotating shallow water equations in vector-invariant form,
//!
//! ```text
//! ∂u/∂t + (ω + f) k×u + ∇(½|u|² + g h) = -c₀ Δ²u
//! ∂h/∂t + ∇·(h u) = 0
//! ```
//!
//! with `u` in the edge space, `h` in the surface space and the diagnosed
//! vorticity in the nodal space. The depth update is a pure incidence
//! application, so mass is conserved to round-off whatever the flux.

use log::warn;

use crate::assembly::Operators;
use crate::consts::{EARTH_OMEGA, GRAVITY};
use crate::geometry::{dot, CubedSphereMesh};
use crate::solver::SolveStats;
use crate::{Error, Result};

/// Biharmonic coefficient rule `c₀ = 0.0718 Δx^3.2` (SI units).
pub fn default_c0(mesh: &CubedSphereMesh) -> f64 {
    0.0718 * mesh.equatorial_spacing().powf(3.2)
}

/// Coriolis parameter `2Ω (axis · x)` at the W nodes.
pub fn coriolis_field(mesh: &CubedSphereMesh, omega: f64, axis: [f64; 3]) -> Vec<f64> {
    mesh.w_positions()
        .iter()
        .map(|&x| 2.0 * omega * dot(axis, x))
        .collect()
}

/// Prognostic variables: edge fluxes `u` (m²/s) and cell volumes `h` (m³).
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub h: Vec<f64>,
    /// Model time in seconds.
    pub t: f64,
}

/// Physical parameters of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physics {
    pub gravity: f64,
    pub rotation_rate: f64,
    /// Rotation axis of the planet (unit vector).
    pub rotation_axis: [f64; 3],
    /// Biharmonic viscosity coefficient (m⁴/s); zero disables it.
    pub c0: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            gravity: GRAVITY,
            rotation_rate: EARTH_OMEGA,
            rotation_axis: [0.0, 0.0, 1.0],
            c0: 0.0,
        }
    }
}

/// Diagnosed fields and global monitors of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Relative vorticity (W DOFs, s⁻¹).
    pub vorticity: Vec<f64>,
    /// Mass flux (U DOFs).
    pub flux: Vec<f64>,
    /// Total volume `Σ h`.
    pub mass: f64,
    /// `1ᵀ M_W ω`.
    pub vorticity_integral: f64,
    /// `∫ ½ h|u|² + ½ g h²`.
    pub energy: f64,
    /// `∫ (ω+f)²/h`.
    pub potential_enstrophy: f64,
    /// `‖E21 u‖` in the Q mass norm.
    pub divergence_l2: f64,
    /// Smallest physical depth at any quadrature point.
    pub min_depth: f64,
    pub max_depth: f64,
}

/// Time derivative of a state together with solver statistics.
#[derive(Debug, Clone)]
pub struct Tendency {
    pub du: Vec<f64>,
    pub dh: Vec<f64>,
    pub momentum_iters: usize,
    pub flux_iters: usize,
}

/// Per-step solver statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub momentum_iters: usize,
    pub flux_iters: usize,
}

/// The discretised shallow water system on one mesh.
#[derive(Debug)]
pub struct ShallowWater {
    ops: Operators,
    physics: Physics,
    coriolis_w: Vec<f64>,
    // warm starts for the iterative solves
    guess_flux: Vec<f64>,
    guess_accel: Vec<f64>,
    guess_lap: [Vec<f64>; 2],
    negative_steps: usize,
    warned_negative: bool,
    warned_cfl: bool,
}

impl ShallowWater {
    pub fn new(ops: Operators, physics: Physics) -> Result<Self> {
        if !(physics.c0 >= 0.0 && physics.c0.is_finite()) {
            return Err(Error::Config(format!("c0 must be non-negative, got {}", physics.c0)));
        }
        let coriolis_w = coriolis_field(ops.mesh(), physics.rotation_rate, physics.rotation_axis);
        let nu = ops.mesh().n_u();
        Ok(Self {
            ops,
            physics,
            coriolis_w,
            guess_flux: vec![0.0; nu],
            guess_accel: vec![0.0; nu],
            guess_lap: [vec![0.0; nu], vec![0.0; nu]],
            negative_steps: 0,
            warned_negative: false,
            warned_cfl: false,
        })
    }

    pub fn ops(&self) -> &Operators {
        &self.ops
    }

    pub fn mesh(&self) -> &CubedSphereMesh {
        self.ops.mesh()
    }

    pub fn physics(&self) -> &Physics {
        &self.physics
    }

    pub fn coriolis(&self) -> &[f64] {
        &self.coriolis_w
    }

    fn check(&self, s: &State) -> Result<()> {
        let m = self.mesh();
        if s.u.len() != m.n_u() || s.h.len() != m.n_q() {
            return Err(Error::Config(format!(
                "state sizes (u: {}, h: {}) do not match the mesh (n_U = {}, n_Q = {})",
                s.u.len(),
                s.h.len(),
                m.n_u(),
                m.n_q()
            )));
        }
        Ok(())
    }

    /// Weak vorticity `ω` with `⟨η, ω⟩ = -⟨∇⊥η, u⟩`.
    pub fn diagnose_vorticity(&self, s: &State) -> Vec<f64> {
        self.ops.weak_curl(&s.u)
    }

    /// Mass flux `F` with `⟨μ, F⟩ = ⟨μ, h u⟩`.
    pub fn diagnose_flux(&mut self, s: &State) -> Result<(Vec<f64>, SolveStats)> {
        let hq = self.ops.interp_q_physical(&s.h);
        let rhs = self.ops.flux_rhs(&hq, &s.u);
        let mut f = self.guess_flux.clone();
        let stats = self.ops.solve_mass_u(&rhs, &mut f)?;
        self.guess_flux.copy_from_slice(&f);
        Ok((f, stats))
    }

    /// Bernoulli potential `½|u|² + g h` at quadrature points.
    fn bernoulli(&self, s: &State, hq: &[f64]) -> Vec<f64> {
        let v = self.ops.interp_u(&s.u);
        let ke = self.ops.kinetic_density(&v);
        ke.iter()
            .zip(hq)
            .map(|(k, h)| 0.5 * k + self.physics.gravity * h)
            .collect()
    }

    /// `ω + f` at quadrature points.
    fn absolute_vorticity_q(&self, omega: &[f64]) -> Vec<f64> {
        let abs: Vec<f64> = omega.iter().zip(&self.coriolis_w).map(|(a, b)| a + b).collect();
        self.ops.interp_w(&abs)
    }

    /// Inviscid momentum right-hand side `-⟨ε,(ω+f)k×u⟩ + E21ᵀΦ`, and the
    /// rotational part on its own.
    pub fn momentum_rhs(&self, s: &State) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hq = self.ops.interp_q_physical(&s.h);
        let omega = self.diagnose_vorticity(s);
        let rot = self.ops.rotational(&self.absolute_vorticity_q(&omega), &s.u);
        let bern = self.bernoulli(s, &hq);
        let phi = self.ops.test_q(&bern);
        let grad = self.ops.apply_e21_transpose(&phi);
        let rhs = grad.iter().zip(&rot).map(|(g, r)| g - r).collect();
        (rhs, rot, phi)
    }

    /// `Δ²u`, warm-started from the previous call.
    pub fn biharmonic(&mut self, u: &[f64]) -> Result<(Vec<f64>, usize)> {
        let [g1, g2] = &mut self.guess_lap;
        let (l1, s1) = self.ops.laplacian(u, g1)?;
        let (l2, s2) = self.ops.laplacian(&l1, g2)?;
        Ok((l2, s1.iterations + s2.iterations))
    }

    /// Full tendency `(du/dt, dh/dt)` of a state.
    pub fn tendency(&mut self, s: &State) -> Result<Tendency> {
        self.check(s)?;
        let (flux, fs) = self.diagnose_flux(s)?;
        let (rhs, _, _) = self.momentum_rhs(s);
        let mut du = self.guess_accel.clone();
        let ms = self.ops.solve_mass_u(&rhs, &mut du)?;
        self.guess_accel.copy_from_slice(&du);
        let mut momentum_iters = ms.iterations;
        if self.physics.c0 > 0.0 {
            let (b, it) = self.biharmonic(&s.u)?;
            momentum_iters += it;
            let c0 = self.physics.c0;
            du.iter_mut().zip(&b).for_each(|(d, b)| *d -= c0 * b);
        }
        let dh = self.mass_tendency(&flux);
        Ok(Tendency {
            du,
            dh,
            momentum_iters,
            flux_iters: fs.iterations,
        })
    }

    /// `dh/dt = -E21 F`.
    pub fn mass_tendency(&self, flux: &[f64]) -> Vec<f64> {
        self.ops.apply_e21(flux).into_iter().map(|v| -v).collect()
    }

    /// Global monitors; recomputed from the state alone.
    pub fn diagnostics(&mut self, s: &State) -> Result<Diagnostics> {
        self.check(s)?;
        let ops = &self.ops;
        let omega = ops.weak_curl(&s.u);
        let hq = ops.interp_q_physical(&s.h);
        let v = ops.interp_u(&s.u);
        let ke = ops.kinetic_density(&v);
        let absq = self.absolute_vorticity_q(&omega);
        let area = ops.area_weights();
        let g = self.physics.gravity;
        let mut energy = 0.0;
        let mut enstrophy = 0.0;
        for i in 0..area.len() {
            energy += area[i] * (0.5 * hq[i] * ke[i] + 0.5 * g * hq[i] * hq[i]);
            enstrophy += area[i] * absq[i] * absq[i] / hq[i];
        }
        let delta = ops.apply_e21(&s.u);
        let div2: f64 = delta.iter().zip(ops.apply_mass_q(&delta)).map(|(a, b)| a * b).sum();
        let vort_int: f64 = ops.apply_mass_w(&omega).iter().sum();
        let (min_depth, max_depth) = hq
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| (lo.min(h), hi.max(h)));
        let (flux, _) = self.diagnose_flux(s)?;
        Ok(Diagnostics {
            vorticity: omega,
            flux,
            mass: s.h.iter().sum(),
            vorticity_integral: vort_int,
            energy,
            potential_enstrophy: enstrophy,
            divergence_l2: div2.max(0.0).sqrt(),
            min_depth,
            max_depth,
        })
    }

    /// Gravity-wave Courant number `√(g max h) Δt / Δx`.
    pub fn courant_number(&self, s: &State, dt: f64) -> f64 {
        let hq = self.ops.interp_q_physical(&s.h);
        let hmax = hq.iter().cloned().fold(0.0, f64::max);
        (self.physics.gravity * hmax).sqrt() * dt / self.mesh().equatorial_spacing()
    }

    /// One step of the two-stage Runge-Kutta (Heun) scheme
    ///
    /// ```text
    /// y' = yⁿ + Δt T(yⁿ)
    /// yⁿ⁺¹ = yⁿ + ½Δt (T(yⁿ) + T(y'))
    /// ```
    pub fn rk2_step(&mut self, s: &State, dt: f64) -> Result<(State, StepStats)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if !self.warned_cfl {
            let cfl = self.courant_number(s, dt);
            if cfl > 1.0 {
                warn!("gravity-wave Courant number {cfl:.3} exceeds 1 at dt = {dt} s");
                self.warned_cfl = true;
            }
        }
        let t1 = self.tendency(s)?;
        let mid = State {
            u: axpy(dt, &t1.du, &s.u),
            h: axpy(dt, &t1.dh, &s.h),
            t: s.t + dt,
        };
        let t2 = self.tendency(&mid)?;
        let half = 0.5 * dt;
        let next = State {
            u: s.u
                .iter()
                .zip(t1.du.iter().zip(&t2.du))
                .map(|(y, (a, b))| y + half * (a + b))
                .collect(),
            h: s.h
                .iter()
                .zip(t1.dh.iter().zip(&t2.dh))
                .map(|(y, (a, b))| y + half * (a + b))
                .collect(),
            t: s.t + dt,
        };
        if next.u.iter().chain(&next.h).any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state at t = {} s", next.t)));
        }
        self.check_depth(&next)?;
        Ok((
            next,
            StepStats {
                momentum_iters: t1.momentum_iters + t2.momentum_iters,
                flux_iters: t1.flux_iters + t2.flux_iters,
            },
        ))
    }

    fn check_depth(&mut self, s: &State) -> Result<()> {
        let hq = self.ops.interp_q_physical(&s.h);
        let min = hq.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            self.negative_steps += 1;
            if !self.warned_negative {
                warn!("negative depth {min:.6e} m at t = {} s", s.t);
                self.warned_negative = true;
            }
            if self.negative_steps >= 10 {
                return Err(Error::Numerical(format!(
                    "depth negative for {} consecutive steps (min {min:.6e} m at t = {} s)",
                    self.negative_steps, s.t
                )));
            }
        } else {
            self.negative_steps = 0;
        }
        Ok(())
    }
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| y + a * x).collect()
}

/// Heun's method for a generic vector ODE `y' = f(t, y)`.
pub fn heun<F>(y: &[f64], t: f64, dt: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    let k1 = f(t, y);
    let mid = axpy(dt, &k1, y);
    let k2 = f(t + dt, &mid);
    y.iter()
        .zip(k1.iter().zip(&k2))
        .map(|(y, (a, b))| y + 0.5 * dt * (a + b))
        .collect()
}
