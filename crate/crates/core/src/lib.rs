//! Reconstruction of the source term of an anisotropic diffusion equation on
//! the square `(-1, 1)^2` from noisy boundary Cauchy data.
//!
//! The discrete problem uses P1 finite elements on uniform triangulations.
//! The misfit between the Neumann and Dirichlet solutions plus a Tikhonov
//! term is minimized by Fletcher-Reeves conjugate gradients; the minimizer can
//! also be computed directly from the Lavrentiev normal equation.

pub mod assembly;
pub mod error;
pub mod experiments;
pub mod forward;
pub mod io;
pub mod mesh;
pub mod regularization;
pub mod selftest;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
pub use forward::{CauchyPair, ForwardContext};
pub use mesh::{BoundaryField, NodalField, TriMesh};
pub use regularization::{cg_minimize, lavrentiev_solve, CgOptions, RegularizedProblem};
