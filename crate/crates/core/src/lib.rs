//! Mixed mimetic spectral elements for the rotating shallow water equations
//! on an equiangular cubed sphere.
//!
//! The discretisation uses three compatible spaces on every element: nodal
//! functions for the vorticity (`W`), edge functions for the velocity and
//! mass flux (`U`) and surface functions for the depth (`Q`). Differential
//! operators between them are integer incidence matrices, so the strong
//! divergence and the discrete de Rham identities hold exactly on the curved
//! mesh while the metric only enters through the mass matrices.
//!
//! Module map:
//!
//! * [`basis1d`]: GLL rule, nodal and histopolant polynomials
//! * [`spaces2d`]: tensor-product bases, local incidence matrices, evaluation kernels
//! * [`geometry`]: cubed-sphere topology, gnomonic map, Jacobians, global numbering
//! * [`assembly`]: mass matrices, nonlinear coupling operators, CG solver
//! * [`swe`]: shallow water tendencies, biharmonic viscosity, RK2, monitors
//! * [`testcases`]: Williamson 2 and 6, Galewsky jet, error norms

pub mod assembly;
pub mod basis1d;
pub mod consts;
mod error;
pub mod geometry;
pub mod matrix;
pub mod solver;
pub mod spaces2d;
pub mod swe;
pub mod testcases;

pub use error::{Error, Result};

/// The three discrete function spaces of the complex `W --rot--> U --div--> Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    W,
    U,
    Q,
}

/// A global degree-of-freedom vector tagged with the space it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub space: Space,
    pub data: Vec<f64>,
}

impl Field {
    pub fn new(space: Space, data: Vec<f64>) -> Self {
        Self { space, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}
