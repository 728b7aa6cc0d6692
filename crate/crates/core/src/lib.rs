//! Constrained steady states of diffusion-reaction systems.
//!
//! The solver finds grid functions `u` with values in a convex set `C` such
//! that `0 ∈ Au + F(x, u, u')`, where `A` is a finite-difference diffusion
//! operator and `F` a (possibly set-valued) nonlinearity whose values meet the
//! tangent cone of `C` on its boundary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrete;
pub mod equilibrium;
pub mod geometry;
pub mod io;
pub mod miranda;
pub mod problems;
pub mod setvalued;

pub use discrete::{
    BoundaryCondition, Coefficient, DiscreteOperator, Grid1D, GridFunction, InvarianceReport, OperatorError,
    OperatorSpec,
};
pub use equilibrium::{
    residual, resolvent_iterate, truncation_iterate, viability_simulate, Constraint, MovingBox, SolveReport,
    SolveStatus, SolverConfig, SolverError, StepSchedule,
};
pub use geometry::{ConvexBody, GeometryError, Halfspace};
pub use miranda::{miranda_solve, Cube, MirandaError, MirandaOptions, MirandaSolution};
pub use setvalued::{tangent_selection, FieldError, NonlinearityField, SelectionError, SetValue};
