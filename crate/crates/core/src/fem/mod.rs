//! Transient finite-element reference solver: linear triangles on a
//! structured mesh, consistent mass, backward Euler in time.

mod assembly;
mod mesh;
pub mod mms;
mod solver;
mod sparse;

pub use assembly::{assemble, assemble_load, element_mass, element_stiffness, SourceField};
pub use mesh::{generate_mesh, FemMesh};
pub use solver::{backward_euler_solve, dirichlet_nodes, l2_error, solve_problem, solve_with_source, FemSettings, FemSolution};
pub use sparse::{cg_solve, CgOutcome, CsrMatrix};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("invalid FEM setting {field}: {reason}")]
    InvalidSetting { field: &'static str, reason: &'static str },
    #[error("triangle {triangle} is degenerate (signed area {area})")]
    DegenerateElement { triangle: usize, area: f64 },
    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point ({x}, {y}) lies outside the mesh")]
    OutsideDomain { x: f64, y: f64 },
    #[error("time {t} s is outside the solution interval [0, {t_end}]")]
    TimeOutOfRange { t: f64, t_end: f64 },
}
