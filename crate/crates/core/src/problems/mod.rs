//! Problem catalog: turns a config into an operator, a nonlinearity and a
//! constraint, and checks the hypotheses the solvers rely on.

mod catalog;
mod config;
mod verify;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use catalog::{build_field, shifted_field, TestMap, CATALOG};
pub use config::{
    broadcast, AuditSection, BernsteinSection, CoefficientConfig, ConfigError, ConstraintSection, CubeSection,
    GridSection, InitialSection, MapSection, MirandaSection, NonlinearitySection, OperatorSection, OutputSection,
    ProblemConfig, ProblemSection, SimulateSection, SolverSection, VerifySection,
};
pub use verify::{
    check_conditions, verify_bernstein, verify_envelope, verify_subsuper, verify_tangency, verify_zero_admissible,
    ConditionCheck, ConditionReport, ConditionWitness, SUBSUPER_TOL,
};

use crate::discrete::{
    BoundaryCondition, Coefficient, DiscreteOperator, Grid1D, GridFunction, OperatorError, OperatorSpec,
};
use crate::equilibrium::{Constraint, MovingBox, SolverConfig, StepSchedule};
use crate::geometry::{ConvexBody, GeometryError};
use crate::miranda::{Cube, MirandaError, MirandaOptions};
use crate::setvalued::NonlinearityField;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Miranda(#[from] MirandaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// `-(d u')' + ... ∈ F(x, u, u')` with Neumann walls.
    NeumannRd,
    /// Reaction-diffusion with a declared drift.
    DriftRd,
    PeriodicRd,
    /// `-u'' ∈ φ(t, u, u')` in the ball of radius `R`.
    BernsteinBvp,
    /// Dirichlet problem inside walls moving with `x`.
    MovingRectangles,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::NeumannRd => "neumann_rd",
            ProblemKind::DriftRd => "drift_rd",
            ProblemKind::PeriodicRd => "periodic_rd",
            ProblemKind::BernsteinBvp => "bernstein_bvp",
            ProblemKind::MovingRectangles => "moving_rectangles",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::NeumannRd, Self::DriftRd, Self::PeriodicRd, Self::BernsteinBvp, Self::MovingRectangles]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Resolvent,
    Truncation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Constant(Vec<f64>),
    /// Independent uniform draws from the constraint section at each node.
    Random {
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifySettings {
    pub samples: usize,
    pub seed: u64,
    /// Sampled gradients lie in `[-range, range]^N`.
    pub gradient_range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSettings {
    pub steps: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateSettings {
    pub t_end: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinParams {
    pub radius: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Largest `|v|` sampled for the growth bound.
    pub v_max: f64,
}

/// A fully resolved problem ready for the solvers.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub components: usize,
    pub grid: Grid1D,
    pub operator: OperatorSpec,
    /// The field the solver sees (for Bernstein problems, `φ - c u`).
    pub field: NonlinearityField,
    /// The field as declared in the config.
    pub declared_field: NonlinearityField,
    pub constraint: Constraint,
    pub method: SolveMethod,
    pub solver: SolverConfig,
    pub initial: InitialState,
    pub verify: VerifySettings,
    pub audit: AuditSettings,
    pub simulate: SimulateSettings,
    pub bernstein: Option<BernsteinParams>,
}

fn coefficient(c: CoefficientConfig) -> Coefficient {
    match c {
        CoefficientConfig::Constant(v) => Coefficient::Constant(v),
        CoefficientConfig::Sine { mean, amplitude } => Coefficient::Sine { mean, amplitude },
    }
}

fn polynomial(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ProblemError> {
    Err(ConfigError::Invalid(msg.into()).into())
}

fn require<'a, T>(v: &'a Option<T>, section: &str, key: &str) -> Result<&'a T, ProblemError> {
    v.as_ref().ok_or_else(|| ConfigError::Missing { section: section.into(), key: key.into() }.into())
}

impl ProblemSpec {
    /// Resolves `cfg`; relative paths (tables) are taken from `base_dir`.
    pub fn from_config(cfg: &ProblemConfig, base_dir: &Path) -> Result<Self, ProblemError> {
        let problem = require(&cfg.problem, "problem", "kind")?;
        let kind = ProblemKind::parse(&problem.kind).ok_or_else(|| ConfigError::Value {
            section: "problem".into(),
            key: "kind".into(),
            message: format!("unknown kind '{}'", problem.kind),
        })?;
        let n = problem.components;
        if n == 0 {
            return invalid("components must be positive");
        }
        let g = require(&cfg.grid, "grid", "length")?;
        let op = require(&cfg.operator, "operator", "bc")?;
        let bc = BoundaryCondition::parse(&op.bc).ok_or_else(|| ConfigError::Value {
            section: "operator".into(),
            key: "bc".into(),
            message: format!("unknown boundary condition '{}'", op.bc),
        })?;
        match (kind, bc) {
            (ProblemKind::NeumannRd, b) if b != BoundaryCondition::Neumann => {
                return invalid("neumann_rd needs bc = neumann")
            }
            (ProblemKind::PeriodicRd, b) if b != BoundaryCondition::Periodic => {
                return invalid("periodic_rd needs bc = periodic")
            }
            (ProblemKind::MovingRectangles, b) if b != BoundaryCondition::Dirichlet => {
                return invalid("moving_rectangles needs bc = dirichlet")
            }
            (ProblemKind::DriftRd, _) if op.gamma.is_none() => return invalid("drift_rd needs gamma declared"),
            _ => {}
        }
        let grid = Grid1D::new(g.length, g.nodes, bc)?;

        let nl = require(&cfg.nonlinearity, "nonlinearity", "name")?;
        let declared_field = build_field(nl, n, base_dir)?;

        let bernstein = match (kind, &cfg.bernstein) {
            (ProblemKind::BernsteinBvp, Some(b)) => {
                if b.radius < 0.0 || b.a < 0.0 || b.b < 0.0 || b.c < 0.0 {
                    return invalid("bernstein radius, a, b and c must be nonnegative");
                }
                Some(BernsteinParams { radius: b.radius, a: b.a, b: b.b, c: b.c, v_max: b.v_max.unwrap_or(10.0) })
            }
            (ProblemKind::BernsteinBvp, None) => return invalid("bernstein_bvp needs a [bernstein] section"),
            (_, Some(_)) => return invalid("[bernstein] only applies to bernstein_bvp"),
            (_, None) => None,
        };

        let mut operator = OperatorSpec::new(coefficient(op.d), bc, n);
        if let Some(gamma) = op.gamma {
            operator = operator.with_drift(coefficient(gamma));
        }
        let field = match bernstein {
            Some(b) => {
                if op.shift.is_some_and(|s| s != b.c) {
                    return invalid("bernstein_bvp sets the operator shift to c; drop [operator] shift");
                }
                operator = operator.with_shift(b.c);
                shifted_field(&declared_field, b.c, b.radius)
            }
            None => {
                operator = operator.with_shift(op.shift.unwrap_or(0.0));
                declared_field.clone()
            }
        };
        operator.validate(&grid)?;

        let constraint = match (bernstein, &cfg.constraint) {
            (Some(b), None) => Constraint::Uniform(ConvexBody::ball(vec![0.0; n], b.radius)?),
            (Some(_), Some(_)) => return invalid("bernstein_bvp takes its constraint from [bernstein] radius"),
            (None, Some(c)) => build_constraint(c, &grid, n)?,
            (None, None) => {
                return Err(ConfigError::Missing { section: "constraint".into(), key: "shape".into() }.into())
            }
        };
        if kind == ProblemKind::MovingRectangles && !matches!(constraint, Constraint::Moving(_)) {
            return invalid("moving_rectangles needs constraint shape = moving");
        }

        let method = match cfg.solver.method.as_deref() {
            None if kind == ProblemKind::MovingRectangles => SolveMethod::Truncation,
            None | Some("resolvent") => SolveMethod::Resolvent,
            Some("truncation") => {
                if !matches!(constraint, Constraint::Moving(_)) || bc != BoundaryCondition::Dirichlet {
                    return invalid("truncation needs a moving box and Dirichlet walls");
                }
                SolveMethod::Truncation
            }
            Some(other) => return invalid(format!("unknown solver method '{other}'")),
        };
        let solver = solver_config(&cfg.solver)?;

        let initial = match (&cfg.initial.value, cfg.initial.random) {
            (Some(_), Some(true)) => return invalid("initial: give either value or random, not both"),
            (_, Some(true)) => InitialState::Random { seed: cfg.initial.seed.unwrap_or(0) },
            (Some(v), _) => InitialState::Constant(broadcast(v, n, "initial value")?),
            (None, _) => InitialState::Constant(vec![0.0; n]),
        };

        let verify = VerifySettings {
            samples: cfg.verify.samples.unwrap_or(10_000),
            seed: cfg.verify.seed.unwrap_or(42),
            gradient_range: cfg.verify.gradient_range.unwrap_or(1.0),
        };
        let audit = AuditSettings {
            steps: cfg.audit.steps.clone().unwrap_or_else(|| vec![1e-3, 1e-2, 1e-1]),
            samples: cfg.audit.samples.unwrap_or(1000),
            seed: cfg.audit.seed.unwrap_or(42),
        };
        let simulate = SimulateSettings { t_end: cfg.simulate.t_end.unwrap_or(1.0), h: cfg.simulate.h.unwrap_or(0.01) };

        Ok(Self {
            kind,
            components: n,
            grid,
            operator,
            field,
            declared_field,
            constraint,
            method,
            solver,
            initial,
            verify,
            audit,
            simulate,
            bernstein,
        })
    }

    /// Replaces every seed (initial draw, verifiers, audit) with `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let InitialState::Random { seed: s } = &mut self.initial {
            *s = seed;
        }
        self.verify.seed = seed;
        self.audit.seed = seed;
        self
    }

    pub fn assemble(&self) -> Result<DiscreteOperator, OperatorError> {
        DiscreteOperator::assemble(&self.operator, &self.grid)
    }

    pub fn initial_state(&self) -> GridFunction {
        match &self.initial {
            InitialState::Constant(v) => GridFunction::constant(self.grid.nodes, v),
            InitialState::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                GridFunction::from_nodes(
                    (0..self.grid.nodes).map(|j| self.constraint.section(j).sample(&mut rng)).collect(),
                )
            }
        }
    }
}

fn build_constraint(c: &ConstraintSection, grid: &Grid1D, n: usize) -> Result<Constraint, ProblemError> {
    let body = match c.shape.as_str() {
        "box" => {
            let lo = broadcast(require(&c.lo, "constraint", "lo")?, n, "lo")?;
            let hi = broadcast(require(&c.hi, "constraint", "hi")?, n, "hi")?;
            ConvexBody::boxed(lo, hi)?
        }
        "ball" => {
            let center = match &c.center {
                Some(v) => broadcast(v, n, "center")?,
                None => vec![0.0; n],
            };
            ConvexBody::ball(center, *require(&c.radius, "constraint", "radius")?)?
        }
        "simplex" => ConvexBody::simplex(n, *require(&c.mass, "constraint", "mass")?)?,
        "moving" => {
            let alpha = broadcast(require(&c.alpha, "constraint", "alpha")?, n, "alpha")?;
            let beta = broadcast(require(&c.beta, "constraint", "beta")?, n, "beta")?;
            let walls = MovingBox::from_fns(
                grid,
                |x| alpha.iter().map(|p| polynomial(p, x)).collect(),
                |x| beta.iter().map(|p| polynomial(p, x)).collect(),
            )?;
            return Ok(Constraint::Moving(walls));
        }
        other => return invalid(format!("unknown constraint shape '{other}'")),
    };
    Ok(Constraint::Uniform(body))
}

fn solver_config(s: &SolverSection) -> Result<SolverConfig, ProblemError> {
    let d = SolverConfig::default();
    let schedule = match s.schedule.as_deref() {
        None | Some("fixed") => StepSchedule::Fixed,
        Some("harmonic") => StepSchedule::Harmonic,
        Some(other) => return invalid(format!("unknown step schedule '{other}'")),
    };
    Ok(SolverConfig {
        schedule,
        h0: s.h0.unwrap_or(d.h0),
        max_iter: s.max_iter.unwrap_or(d.max_iter),
        tol_residual: s.tol_residual.unwrap_or(d.tol_residual),
        tol_step: s.tol_step.unwrap_or(d.tol_step),
        damping: s.damping.unwrap_or(d.damping),
        inner_max_iter: s.inner_max_iter.unwrap_or(d.inner_max_iter),
        inner_tol: s.inner_tol.unwrap_or(d.inner_tol),
    })
}

/// Zero-finding problem from the `[map]`, `[cube]` and `[miranda]` sections.
#[derive(Debug, Clone)]
pub struct MirandaProblem {
    pub map: TestMap,
    pub cube: Cube,
    pub options: MirandaOptions,
}

impl MirandaProblem {
    pub fn from_config(cfg: &ProblemConfig) -> Result<Self, ProblemError> {
        let map = TestMap::from_section(require(&cfg.map, "map", "kind")?)?;
        let c = require(&cfg.cube, "cube", "lo")?;
        let n = map.dim();
        let cube = Cube::new(broadcast(&c.lo, n, "cube lo")?, broadcast(&c.hi, n, "cube hi")?)?;
        let d = MirandaOptions::default();
        let m = &cfg.miranda;
        let options = MirandaOptions {
            tol: m.tol.unwrap_or(d.tol),
            max_depth: m.max_depth.unwrap_or(d.max_depth),
            resolution: m.resolution.unwrap_or(d.resolution),
            margin: m.margin.unwrap_or(d.margin),
            ..d
        };
        Ok(Self { map, cube, options })
    }
}
