//! Constrained equilibria of `0 ∈ Au + F(x, u, u')` with `u(x) ∈ C(x)`.

mod constraint;

pub use constraint::{Constraint, MovingBox};

use serde::Serialize;
use thiserror::Error;

use crate::discrete::{DiscreteOperator, GridFunction, OperatorError};
use crate::geometry::GeometryError;
use crate::setvalued::{select_in_cone, FieldError, NonlinearityField, SelectionError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepSchedule {
    /// `h_k = h0`
    Fixed,
    /// `h_k = h0 / k`
    Harmonic,
}

impl StepSchedule {
    pub fn step(self, h0: f64, k: usize) -> f64 {
        match self {
            StepSchedule::Fixed => h0,
            StepSchedule::Harmonic => h0 / k.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub schedule: StepSchedule,
    pub h0: f64,
    pub max_iter: usize,
    pub tol_residual: f64,
    pub tol_step: f64,
    pub damping: f64,
    /// Damped sweeps per outer step. One sweep is the plain splitting; many
    /// sweeps solve each step's fixed-point problem.
    pub inner_max_iter: usize,
    pub inner_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            schedule: StepSchedule::Fixed,
            h0: 0.5,
            max_iter: 500,
            tol_residual: 1e-8,
            tol_step: 1e-10,
            damping: 1.0,
            inner_max_iter: 1,
            inner_tol: 1e-13,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, shift: f64) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if !(self.h0 > 0.0) || !self.h0.is_finite() {
            return bad(format!("h0 must be positive, got {}", self.h0));
        }
        if shift > 0.0 && self.h0 * shift >= 1.0 {
            return bad(format!("h0 * shift = {} must be below 1", self.h0 * shift));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if self.max_iter == 0 || self.inner_max_iter == 0 {
            return bad("iteration limits must be positive".into());
        }
        if !(self.tol_residual >= 0.0) || !(self.tol_step >= 0.0) || !(self.inner_tol >= 0.0) {
            return bad("tolerances must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    TangencyFailure,
    NonConvergence,
    LocalizationFailed,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::MaxIter => "MaxIter",
            SolveStatus::TangencyFailure => "TangencyFailure",
            SolveStatus::NonConvergence => "NonConvergence",
            SolveStatus::LocalizationFailed => "LocalizationFailed",
        }
    }
}

/// Node and state where `F ∩ T_C(u)` came out empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangencyWitness {
    pub iteration: usize,
    pub node: usize,
    pub x: f64,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub gap: f64,
}

/// Terms of `|Au + v| <= h^-1 d_K(u + h v)` at one iterate, all in the
/// quadrature-weighted norm. `defect` is `h^-1` times the last sweep's change
/// and bounds how far the iterate is from the step's fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRecord {
    pub h: f64,
    pub lhs: f64,
    pub retraction: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub step_history: Vec<f64>,
    pub equation_residual: f64,
    pub tangency_residual: f64,
    pub constraint_violation: f64,
    pub final_h: f64,
    pub tangency_failure: Option<TangencyWitness>,
    #[serde(skip)]
    pub bound_history: Vec<BoundRecord>,
    #[serde(skip)]
    pub u_star: GridFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub equation_residual: f64,
    pub tangency_residual: f64,
}

struct Selection {
    v: GridFunction,
    gradient: GridFunction,
}

enum SelectOutcome {
    Ok(Selection),
    Empty(TangencyWitness),
}

fn check_shapes(op: &DiscreteOperator, constraint: &Constraint, u: &GridFunction) -> Result<(), SolverError> {
    let (n, m) = (op.grid().nodes, op.components());
    if u.nodes() != n || u.components() != m {
        return Err(SolverError::Shape(format!(
            "grid function is {}x{}, operator is {n}x{m}",
            u.nodes(),
            u.components()
        )));
    }
    if constraint.dim() != m {
        return Err(SolverError::Shape(format!(
            "constraint has dimension {}, operator has {m} components",
            constraint.dim()
        )));
    }
    if let Constraint::Moving(b) = constraint {
        if b.lower.nodes() != n {
            return Err(SolverError::Shape(format!("moving box has {} nodes, grid has {n}", b.lower.nodes())));
        }
    }
    Ok(())
}

/// Nodewise minimal-norm element of `F(x_j, u_j, u'_j) ∩ T_C(Π u_j)`. Pinned
/// Dirichlet nodes get zero.
fn select(
    op: &DiscreteOperator,
    field: &NonlinearityField,
    constraint: &Constraint,
    u: &GridFunction,
    iteration: usize,
) -> Result<SelectOutcome, SolverError> {
    let gradient = op.gradient(u);
    let mut v = GridFunction::zeros(u.nodes(), u.components());
    for j in 0..u.nodes() {
        if op.is_pinned(j) {
            continue;
        }
        let x = op.grid().x(j);
        let body = constraint.section(j);
        let value = field.evaluate(x, u.at(j), gradient.at(j))?;
        let base = body.project(u.at(j));
        match select_in_cone(&value, &body, &base) {
            Ok(y) => v.set(j, &y),
            Err(SelectionError::EmptyIntersection { gap }) => {
                return Ok(SelectOutcome::Empty(TangencyWitness {
                    iteration,
                    node: j,
                    x,
                    u: u.at(j).to_vec(),
                    p: gradient.at(j).to_vec(),
                    gap,
                }))
            }
            Err(SelectionError::Field(e)) => return Err(e.into()),
            Err(SelectionError::Geometry(e)) => return Err(e.into()),
        }
    }
    Ok(SelectOutcome::Ok(Selection { v, gradient }))
}

fn weighted_norm(op: &DiscreteOperator, per_node_sq: impl Fn(usize) -> f64) -> f64 {
    let w = op.grid().weights();
    (0..op.grid().nodes).filter(|&j| !op.is_pinned(j)).map(|j| w[j] * per_node_sq(j)).sum::<f64>().sqrt()
}

/// Weighted norm of `dist(-Au_j, F(x_j, u_j, u'_j))` over the free nodes.
fn equation_residual(
    op: &DiscreteOperator,
    field: &NonlinearityField,
    u: &GridFunction,
    gradient: &GridFunction,
) -> Result<f64, SolverError> {
    let au = op.apply(u)?;
    let mut d2 = vec![0.0; u.nodes()];
    for (j, slot) in d2.iter_mut().enumerate() {
        if op.is_pinned(j) {
            continue;
        }
        let value = field.evaluate(op.grid().x(j), u.at(j), gradient.at(j))?;
        let minus_au: Vec<f64> = au.at(j).iter().map(|a| -a).collect();
        *slot = value.distance(&minus_au).powi(2);
    }
    Ok(weighted_norm(op, |j| d2[j]))
}

/// `h^-1 d_K(u + h v)` in the weighted norm.
fn retraction_term(op: &DiscreteOperator, constraint: &Constraint, u: &GridFunction, v: &GridFunction, h: f64) -> f64 {
    let w = u.lin_comb(1.0, v, h);
    let d = constraint.distances(&w);
    weighted_norm(op, |j| d[j] * d[j]) / h
}

fn with_pinned_zero(op: &DiscreteOperator, u: &GridFunction) -> GridFunction {
    u.map_nodes(|j, v| if op.is_pinned(j) { vec![0.0; v.len()] } else { v.to_vec() })
}

/// One damped sweep `(1 - θ) u + θ J_h(Π(u + h v))`, returning the new
/// iterate and the undamped map value.
fn sweep(
    op: &DiscreteOperator,
    constraint: &Constraint,
    u: &GridFunction,
    v: &GridFunction,
    h: f64,
    damping: f64,
) -> Result<(GridFunction, GridFunction), SolverError> {
    let w = constraint.project(&u.lin_comb(1.0, v, h));
    let phi = op.resolvent(h, &with_pinned_zero(op, &w))?;
    let next = if damping == 1.0 { phi.clone() } else { u.lin_comb(1.0 - damping, &phi, damping) };
    Ok((next, phi))
}

fn final_status(history: &[f64], tol: f64) -> SolveStatus {
    let tail = (history.len() / 5).max(1);
    let best = history[history.len() - tail..].iter().copied().fold(f64::INFINITY, f64::min);
    if best > 10.0 * tol {
        SolveStatus::NonConvergence
    } else {
        SolveStatus::MaxIter
    }
}

/// Resolvent-retraction iteration
/// `u_{k+1} = (1 - θ) u_k + θ J_{h_k}(Π_C(u_k + h_k v_k))`, where `v_k` is the
/// nodewise tangent selection of `F` at `u_k`.
pub fn resolvent_iterate(
    op: &DiscreteOperator,
    field: &NonlinearityField,
    constraint: &Constraint,
    u0: &GridFunction,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    cfg.validate(op.shift())?;
    check_shapes(op, constraint, u0)?;
    let mut u = with_pinned_zero(op, &constraint.project(u0));
    let mut report = SolveReport {
        status: SolveStatus::MaxIter,
        iterations: 0,
        residual_history: Vec::new(),
        step_history: Vec::new(),
        equation_residual: f64::NAN,
        tangency_residual: f64::NAN,
        constraint_violation: f64::NAN,
        final_h: cfg.h0,
        tangency_failure: None,
        bound_history: Vec::new(),
        u_star: u.clone(),
    };

    for k in 1..=cfg.max_iter {
        let h = cfg.schedule.step(cfg.h0, k);
        report.iterations = k;
        report.final_h = h;
        let sel = match select(op, field, constraint, &u, k)? {
            SelectOutcome::Ok(s) => s,
            SelectOutcome::Empty(w) => {
                report.status = SolveStatus::TangencyFailure;
                report.tangency_failure = Some(w);
                report.u_star = u;
                return Ok(report);
            }
        };
        let residual = equation_residual(op, field, &u, &sel.gradient)?;
        let (mut next, phi) = sweep(op, constraint, &u, &sel.v, h, cfg.damping)?;
        let defect = phi.max_abs_diff(&u);
        let violation = constraint.max_distance(&u);
        report.residual_history.push(residual);
        report.step_history.push(defect);
        report.equation_residual = residual;
        report.constraint_violation = violation;
        report.tangency_residual = retraction_term(op, constraint, &u, &sel.v, h);
        if residual <= cfg.tol_residual && defect <= cfg.tol_step && violation <= cfg.tol_step {
            report.status = SolveStatus::Converged;
            report.u_star = u;
            return Ok(report);
        }

        let mut last_change = next.max_abs_diff(&u);
        let mut prev = u;
        for _ in 1..cfg.inner_max_iter {
            if last_change <= cfg.inner_tol {
                break;
            }
            let inner_sel = match select(op, field, constraint, &next, k)? {
                SelectOutcome::Ok(s) => s,
                SelectOutcome::Empty(w) => {
                    report.status = SolveStatus::TangencyFailure;
                    report.tangency_failure = Some(w);
                    report.u_star = next;
                    return Ok(report);
                }
            };
            let (candidate, _) = sweep(op, constraint, &next, &inner_sel.v, h, cfg.damping)?;
            prev = std::mem::replace(&mut next, candidate);
            last_change = next.max_abs_diff(&prev);
        }

        // bound terms at the new iterate, with a fresh selection there
        if let SelectOutcome::Ok(s) = select(op, field, constraint, &next, k)? {
            let an = op.apply(&next)?;
            let lhs = weighted_norm(op, |j| an.at(j).iter().zip(s.v.at(j)).map(|(a, b)| (a + b).powi(2)).sum::<f64>());
            let diff = next.lin_comb(1.0, &prev, -1.0);
            let change = weighted_norm(op, |j| diff.at(j).iter().map(|d| d * d).sum::<f64>());
            report.bound_history.push(BoundRecord {
                h,
                lhs,
                retraction: retraction_term(op, constraint, &next, &s.v, h),
                defect: change / (h * cfg.damping),
            });
        }
        u = next;
    }

    report.status = final_status(&report.residual_history, cfg.tol_residual);
    report.u_star = u;
    Ok(report)
}

/// Damped Picard iteration `u ↦ (-A)^{-1} v(π(u))`, with `π` the clamp into
/// `[lower, upper]` and `v` the tangent selection at the clamped state. The
/// limit is checked to lie in the box afterwards.
pub fn truncation_iterate(
    op: &DiscreteOperator,
    field: &NonlinearityField,
    walls: &MovingBox,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    cfg.validate(op.shift())?;
    let constraint = Constraint::Moving(walls.clone());
    let mut u = with_pinned_zero(op, &walls.clamp(&GridFunction::zeros(op.grid().nodes, op.components())));
    check_shapes(op, &constraint, &u)?;
    let mut report = SolveReport {
        status: SolveStatus::MaxIter,
        iterations: 0,
        residual_history: Vec::new(),
        step_history: Vec::new(),
        equation_residual: f64::NAN,
        tangency_residual: 0.0,
        constraint_violation: f64::NAN,
        final_h: f64::INFINITY,
        tangency_failure: None,
        bound_history: Vec::new(),
        u_star: u.clone(),
    };
    let mut converged = false;
    for k in 1..=cfg.max_iter {
        report.iterations = k;
        let clamped = walls.clamp(&u);
        let sel = match select(op, field, &constraint, &clamped, k)? {
            SelectOutcome::Ok(s) => s,
            SelectOutcome::Empty(w) => {
                report.status = SolveStatus::TangencyFailure;
                report.tangency_failure = Some(w);
                report.u_star = u;
                return Ok(report);
            }
        };
        let target = op.solve_negative(&with_pinned_zero(op, &sel.v))?;
        let step = target.max_abs_diff(&u);
        let gradient = op.gradient(&u);
        let residual = equation_residual(op, field, &u, &gradient)?;
        report.residual_history.push(residual);
        report.step_history.push(step);
        report.equation_residual = residual;
        report.constraint_violation = constraint.max_distance(&u);
        if residual <= cfg.tol_residual && step <= cfg.tol_step {
            converged = true;
            break;
        }
        u = u.lin_comb(1.0 - cfg.damping, &target, cfg.damping);
    }
    report.status = if converged {
        if report.constraint_violation <= cfg.tol_step.max(1e-9) {
            SolveStatus::Converged
        } else {
            SolveStatus::LocalizationFailed
        }
    } else {
        final_status(&report.residual_history, cfg.tol_residual)
    };
    report.u_star = u;
    Ok(report)
}

/// Diagnostics of an implicit Euler trajectory run without projection.
#[derive(Debug, Clone, Serialize)]
pub struct ViabilityReport {
    pub completed: bool,
    pub steps: usize,
    pub h: f64,
    pub t_end: f64,
    pub max_distance: f64,
    pub distance_history: Vec<f64>,
    pub mean_history: Vec<f64>,
    pub terminal_residual: f64,
    pub tangency_failure: Option<TangencyWitness>,
    #[serde(skip)]
    pub final_state: GridFunction,
}

/// `u_{k+1} = J_h(u_k + h v_k)` up to `t_end`; records how far the states
/// stray from `C`.
pub fn viability_simulate(
    op: &DiscreteOperator,
    field: &NonlinearityField,
    constraint: &Constraint,
    u0: &GridFunction,
    t_end: f64,
    h: f64,
) -> Result<ViabilityReport, SolverError> {
    if !(h > 0.0) || !(t_end > 0.0) {
        return Err(SolverError::InvalidConfig(format!("need h > 0 and t_end > 0, got h = {h}, t_end = {t_end}")));
    }
    if op.shift() > 0.0 && h * op.shift() >= 1.0 {
        return Err(SolverError::InvalidConfig(format!("h * shift = {} must be below 1", h * op.shift())));
    }
    check_shapes(op, constraint, u0)?;
    let steps = (t_end / h).round().max(1.0) as usize;
    let mut u = with_pinned_zero(op, u0);
    let mut report = ViabilityReport {
        completed: false,
        steps: 0,
        h,
        t_end,
        max_distance: constraint.max_distance(&u),
        distance_history: Vec::with_capacity(steps),
        mean_history: Vec::with_capacity(steps),
        terminal_residual: f64::NAN,
        tangency_failure: None,
        final_state: u.clone(),
    };
    for k in 1..=steps {
        let sel = match select(op, field, constraint, &u, k)? {
            SelectOutcome::Ok(s) => s,
            SelectOutcome::Empty(w) => {
                report.tangency_failure = Some(w);
                report.final_state = u;
                return Ok(report);
            }
        };
        u = op.resolvent(h, &with_pinned_zero(op, &u.lin_comb(1.0, &sel.v, h)))?;
        let d = constraint.max_distance(&u);
        report.max_distance = report.max_distance.max(d);
        report.distance_history.push(d);
        report.mean_history.push(u.mean());
        report.steps = k;
    }
    report.completed = true;
    report.terminal_residual = equation_residual(op, field, &u, &op.gradient(&u))?;
    report.final_state = u;
    Ok(report)
}

/// Equation residual `|dist(-Au, F(u))|` and the worst tangency defect of
/// the selection at `u`. A node where the selection fails contributes its
/// gap.
pub fn residual(
    op: &DiscreteOperator,
    field: &NonlinearityField,
    constraint: &Constraint,
    u: &GridFunction,
) -> Result<ResidualReport, SolverError> {
    check_shapes(op, constraint, u)?;
    let gradient = op.gradient(u);
    let equation = equation_residual(op, field, u, &gradient)?;
    let mut tangency: f64 = 0.0;
    for j in (0..u.nodes()).filter(|&j| !op.is_pinned(j)) {
        let body = constraint.section(j);
        let base = body.project(u.at(j));
        let value = field.evaluate(op.grid().x(j), u.at(j), gradient.at(j))?;
        match select_in_cone(&value, &body, &base) {
            Ok(y) => {
                let q = body.tangent_cone_contains(&base, &y, crate::geometry::CONE_TOL)?;
                tangency = tangency.max(q.directional_derivative);
            }
            Err(SelectionError::EmptyIntersection { gap }) => tangency = tangency.max(gap),
            Err(SelectionError::Field(e)) => return Err(e.into()),
            Err(SelectionError::Geometry(e)) => return Err(e.into()),
        }
    }
    Ok(ResidualReport { equation_residual: equation, tangency_residual: tangency })
}
