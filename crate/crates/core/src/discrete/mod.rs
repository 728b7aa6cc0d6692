//! Finite-difference diffusion-drift operators on a 1-D grid.

mod audit;
mod grid;
mod operator;
pub mod tridiag;

pub use audit::{invariance_audit, HalfspaceOvershoot, InvarianceReport, InvarianceWitness, AUDIT_TOL};
pub use grid::{BoundaryCondition, Grid1D, GridFunction};
pub use operator::{
    garding_constants, gradient_norm_sq, quadratic_form, Coefficient, DiscreteOperator, OperatorSpec, ScalarFn,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("invalid operator specification: {0}")]
    InvalidSpec(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error(
        "grid function has {got_nodes} nodes x {got_components} components, operator expects {nodes} x {components}"
    )]
    ShapeMismatch { nodes: usize, components: usize, got_nodes: usize, got_components: usize },
}
