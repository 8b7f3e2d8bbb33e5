//! Preconditioned conjugate gradients and block Jacobi preconditioning.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// A square linear map applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// An approximate inverse `z = P⁻¹ r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// The identity preconditioner.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Convergence controls for [`solve_spd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Target relative residual `‖b - Ax‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 500,
        }
    }
}

/// Outcome of a converged solve.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A` by preconditioned CG.
///
/// `x` holds the initial guess on entry and the solution on exit.
pub fn solve_spd<A: LinearOperator + ?Sized, P: Preconditioner + ?Sized>(
    op: &A,
    pc: &P,
    b: &[f64],
    x: &mut [f64],
    settings: SolverSettings,
) -> Result<SolveStats> {
    let n = op.dim();
    assert_eq!(b.len(), n, "right-hand side length");
    assert_eq!(x.len(), n, "solution length");
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = dot(&r, &r).sqrt() / bnorm;
    if res <= settings.tol {
        return Ok(SolveStats {
            iterations: 0,
            residual: res,
        });
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let mut ad = vec![0.0; n];
    for it in 1..=settings.max_iter {
        op.apply(&d, &mut ad);
        let dad = dot(&d, &ad);
        if !(dad > 0.0) {
            return Err(Error::Numerical(format!(
                "conjugate gradients lost positivity (dᵀAd = {dad:e}) at iteration {it}"
            )));
        }
        let alpha = rz / dad;
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        if !res.is_finite() {
            return Err(Error::Numerical("non-finite residual in conjugate gradients".into()));
        }
        if res <= settings.tol {
            return Ok(SolveStats {
                iterations: it,
                residual: res,
            });
        }
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
    }
    Err(Error::Solver {
        iterations: settings.max_iter,
        residual: res,
    })
}

/// Block Jacobi preconditioner over disjoint index sets covering the unknowns.
#[derive(Debug, Clone)]
pub struct BlockJacobi {
    blocks: Vec<(Vec<usize>, DMatrix<f64>)>,
}

impl BlockJacobi {
    /// Inverts each SPD block by Cholesky factorisation.
    pub fn new(blocks: Vec<(Vec<usize>, DMatrix<f64>)>) -> Result<Self> {
        let blocks = blocks
            .into_iter()
            .map(|(idx, m)| {
                let inv = m
                    .cholesky()
                    .ok_or_else(|| {
                        Error::Numerical("preconditioner block is not positive definite".into())
                    })?
                    .inverse();
                Ok((idx, inv))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }
}

impl Preconditioner for BlockJacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for (idx, inv) in &self.blocks {
            let local = DVector::from_iterator(idx.len(), idx.iter().map(|&i| r[i]));
            let out = inv * local;
            for (k, &i) in idx.iter().enumerate() {
                z[i] = out[k];
            }
        }
    }
}

/// Dense matrix as an operator, mostly for tests and small problems.
impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let out = self * DVector::from_column_slice(x);
        y.copy_from_slice(out.as_slice());
    }
}
