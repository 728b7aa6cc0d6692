//! Sampled checks of the hypotheses behind each problem kind.
//!
//! Every check reports a margin per sample, nonnegative when the hypothesis
//! holds there, and passes only if the smallest margin is nonnegative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{BernsteinParams, ProblemKind, ProblemSpec};
use crate::discrete::{BoundaryCondition, Grid1D, GridFunction};
use crate::equilibrium::{Constraint, MovingBox};
use crate::geometry::ConvexBody;
use crate::setvalued::{select_in_cone, NonlinearityField, SelectionError, SetValue};

/// Slack allowed on discrete second differences of the walls.
pub const SUBSUPER_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionWitness {
    pub x: f64,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// The quantity the check bounds, e.g. `f(t, u, 0) u` for the sign check.
    pub value: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    pub worst_margin: f64,
    /// The sample with the smallest margin.
    pub witness: Option<ConditionWitness>,
}

impl ConditionCheck {
    fn new(name: &str) -> Self {
        Self { name: name.into(), passed: true, samples: 0, worst_margin: f64::INFINITY, witness: None }
    }

    fn record(&mut self, mut w: ConditionWitness) {
        // normalize -0.0
        w.margin += 0.0;
        self.samples += 1;
        if w.margin < self.worst_margin || self.witness.is_none() {
            self.worst_margin = w.margin;
            self.passed = w.margin >= 0.0;
            self.witness = Some(w);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub passed: bool,
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    fn from_checks(checks: Vec<ConditionCheck>) -> Self {
        Self { passed: checks.iter().all(|c| c.passed), checks }
    }

    pub fn merge(mut self, other: ConditionReport) -> Self {
        self.checks.extend(other.checks);
        self.passed = self.checks.iter().all(|c| c.passed);
        self
    }

    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn sample_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo < hi {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn gaussian_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len > 1e-12 {
            return g.into_iter().map(|v| v / len).collect();
        }
    }
}

/// A point on the boundary of `body`.
fn boundary_point(body: &ConvexBody, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match body {
        ConvexBody::Box { lo, hi } => {
            let mut u = body.sample(rng);
            let i = rng.random_range(0..lo.len());
            u[i] = if rng.random::<bool>() { hi[i] } else { lo[i] };
            u
        }
        ConvexBody::Ball { center, radius } => {
            let d = gaussian_direction(rng, center.len());
            center.iter().zip(d).map(|(c, di)| c + radius * di).collect()
        }
        ConvexBody::Simplex { dim, total_mass } => {
            let mut u = body.sample(rng);
            if *dim > 1 {
                let i = rng.random_range(0..*dim);
                u[i] = 0.0;
                let rest: f64 = u.iter().sum();
                if rest > 0.0 {
                    u.iter_mut().for_each(|v| *v *= total_mass / rest);
                } else {
                    u[(i + 1) % dim] = *total_mass;
                }
            }
            u
        }
        ConvexBody::HalfspaceIntersection { witness, .. } => {
            let d = gaussian_direction(rng, witness.len());
            let scale = 10.0 * (1.0 + witness.iter().map(|w| w.abs()).fold(0.0, f64::max));
            let far: Vec<f64> = body.sample(rng).iter().zip(d).map(|(s, di)| s + scale * di).collect();
            body.project(&far)
        }
    }
}

/// How far `y` points into `body` at the boundary point `u`: the smallest
/// inward component over the active faces (for the simplex the mass
/// constraint counts in both directions).
fn inward_slack(body: &ConvexBody, u: &[f64], y: &[f64]) -> f64 {
    let tol = 1e-9;
    let mut slack = f64::INFINITY;
    match body {
        ConvexBody::Box { lo, hi } => {
            for i in 0..u.len() {
                if u[i] <= lo[i] + tol {
                    slack = slack.min(y[i]);
                }
                if u[i] >= hi[i] - tol {
                    slack = slack.min(-y[i]);
                }
            }
        }
        ConvexBody::Ball { center, radius } => {
            if *radius == 0.0 {
                return -y.iter().map(|v| v.abs()).fold(0.0, f64::max);
            }
            let r: f64 = u.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
            if r >= radius - tol {
                slack = -u.iter().zip(center).zip(y).map(|((a, c), yi)| (a - c) * yi).sum::<f64>() / r;
            }
        }
        ConvexBody::Simplex { .. } => {
            // the mass constraint is an equality; roundoff below `tol` is not a violation
            slack = -(y.iter().sum::<f64>().abs() - tol).max(0.0);
            for (ui, yi) in u.iter().zip(y) {
                if *ui <= tol {
                    slack = slack.min(*yi);
                }
            }
        }
        ConvexBody::HalfspaceIntersection { halfspaces, .. } => {
            for h in halfspaces {
                if h.excess(u) >= -tol {
                    let len = h.normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                    slack = slack.min(-h.normal.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / len);
                }
            }
        }
    }
    if slack.is_finite() {
        slack
    } else {
        0.0
    }
}

fn free_nodes(grid: &Grid1D, dirichlet: bool) -> Vec<usize> {
    if dirichlet {
        (1..grid.nodes - 1).collect()
    } else {
        (0..grid.nodes).collect()
    }
}

/// Samples boundary states of the constraint and checks that the field
/// points into it there.
///
/// For uniform sets the tangent selection is computed and its inward slack
/// is the margin (the gap, negated, when the selection is empty). For a
/// moving box a face `u_i = lower_i(x)` is sampled with the gradient
/// component locked to the wall's slope, and the margin is the largest
/// `y_i` over the value; upper faces use `-y_i`.
pub fn verify_tangency(spec: &ProblemSpec, samples: usize, seed: u64) -> ConditionReport {
    let mut check = ConditionCheck::new("tangency");
    let n = spec.components;
    let range = spec.verify.gradient_range;
    let dirichlet = spec.operator.bc == BoundaryCondition::Dirichlet;
    let nodes = free_nodes(&spec.grid, dirichlet);
    for k in 0..samples {
        let mut rng = sample_rng(seed, k);
        let j = nodes[rng.random_range(0..nodes.len())];
        let x = spec.grid.x(j);
        let mut p: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -range, range)).collect();
        match &spec.constraint {
            Constraint::Uniform(body) => {
                let u = boundary_point(body, &mut rng);
                check.record(tangency_sample(&spec.field, body, x, u, p));
            }
            Constraint::Moving(walls) => {
                let (lower, upper) = (walls.lower.at(j), walls.upper.at(j));
                let mut u: Vec<f64> = (0..n).map(|i| uniform(&mut rng, lower[i], upper[i])).collect();
                let i = rng.random_range(0..n);
                let on_upper = rng.random::<bool>();
                let wall = if on_upper { &walls.upper } else { &walls.lower };
                u[i] = wall.at(j)[i];
                p[i] = wall_slope(&spec.grid, wall, j, i);
                let w = match spec.field.evaluate_unchecked(x, &u, &p) {
                    Ok(v) => {
                        let value = if on_upper { v.lo[i] } else { v.hi[i] };
                        ConditionWitness { x, margin: if on_upper { -value } else { value }, value, u, p }
                    }
                    Err(_) => ConditionWitness { x, u, p, value: f64::NAN, margin: f64::NEG_INFINITY },
                };
                check.record(w);
            }
        }
    }
    ConditionReport::from_checks(vec![check])
}

fn tangency_sample(field: &NonlinearityField, body: &ConvexBody, x: f64, u: Vec<f64>, p: Vec<f64>) -> ConditionWitness {
    let value = match field.evaluate_unchecked(x, &u, &p) {
        Ok(v) => v,
        Err(_) => return ConditionWitness { x, u, p, value: f64::NAN, margin: f64::NEG_INFINITY },
    };
    match select_in_cone(&value, body, &u) {
        Ok(y) => {
            let slack = inward_slack(body, &u, &y);
            ConditionWitness { x, u, p, value: slack, margin: slack }
        }
        Err(SelectionError::EmptyIntersection { gap }) => ConditionWitness { x, u, p, value: gap, margin: -gap },
        Err(_) => ConditionWitness { x, u, p, value: f64::NAN, margin: f64::NEG_INFINITY },
    }
}

/// Central difference of component `i` of `wall` at an interior node.
fn wall_slope(grid: &Grid1D, wall: &GridFunction, j: usize, i: usize) -> f64 {
    let n = wall.nodes();
    let (a, b) = (j.saturating_sub(1), (j + 1).min(n - 1));
    (wall.at(b)[i] - wall.at(a)[i]) / ((b - a) as f64 * grid.dx())
}

fn min_dot(v: &SetValue, u: &[f64]) -> f64 {
    v.lo.iter().zip(&v.hi).zip(u).map(|((l, h), ui)| (l * ui).min(h * ui)).sum()
}

/// Sign, growth and boundary-product conditions for `-u'' ∈ f(t, u, u')` on
/// `[0, length]` inside the ball of radius `R`.
///
/// * `sign`: `min_{y ∈ f(t, u, 0)} y·u ≤ 0` for `R < |u| ≤ 3R + 1`; the
///   witness value is that product.
/// * `growth`: `|f(t, u, v)| ≤ a|v|² + b` for `|u| ≤ R`, `|v| ≤ v_max`.
/// * `min_product`: `min_y y·u ≤ cR²` for `|u| = R`, `u·v = 0`.
pub fn verify_bernstein(
    f: &NonlinearityField,
    components: usize,
    length: f64,
    params: &BernsteinParams,
    samples: usize,
    seed: u64,
) -> ConditionReport {
    let BernsteinParams { radius, a, b, c, v_max } = *params;
    let n = components;
    let mut sign = ConditionCheck::new("bernstein_sign");
    let mut growth = ConditionCheck::new("bernstein_growth");
    let mut product = ConditionCheck::new("bernstein_min_product");
    let failed =
        |x: f64, u: Vec<f64>, p: Vec<f64>| ConditionWitness { x, u, p, value: f64::NAN, margin: f64::NEG_INFINITY };
    for k in 0..samples {
        let mut rng = sample_rng(seed, k);
        let t = uniform(&mut rng, 0.0, length);

        let dir = gaussian_direction(&mut rng, n);
        let r = uniform(&mut rng, radius, 3.0 * radius + 1.0).max(radius + 1e-9 * (1.0 + radius));
        let u: Vec<f64> = dir.iter().map(|d| r * d).collect();
        let zero = vec![0.0; n];
        sign.record(match f.evaluate_unchecked(t, &u, &zero) {
            Ok(v) => {
                let value = min_dot(&v, &u);
                ConditionWitness { x: t, u, p: zero, value, margin: -value }
            }
            Err(_) => failed(t, u, zero),
        });

        let dir = gaussian_direction(&mut rng, n);
        let ru = radius * rng.random::<f64>().powf(1.0 / n as f64);
        let u: Vec<f64> = dir.iter().map(|d| ru * d).collect();
        let vdir = gaussian_direction(&mut rng, n);
        let rv = uniform(&mut rng, 0.0, v_max);
        let v: Vec<f64> = vdir.iter().map(|d| rv * d).collect();
        growth.record(match f.evaluate_unchecked(t, &u, &v) {
            Ok(val) => {
                let value = val.max_norm();
                ConditionWitness { x: t, u, p: v, value, margin: a * rv * rv + b - value }
            }
            Err(_) => failed(t, u, v),
        });

        let dir = gaussian_direction(&mut rng, n);
        let u: Vec<f64> = dir.iter().map(|d| radius * d).collect();
        // tangent velocity: Gaussian with the radial part removed
        let g: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * v_max).collect();
        let radial: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let v: Vec<f64> = g.iter().zip(&dir).map(|(gi, di)| gi - radial * di).collect();
        product.record(match f.evaluate_unchecked(t, &u, &v) {
            Ok(val) => {
                let value = min_dot(&val, &u);
                ConditionWitness { x: t, u, p: v, value, margin: c * radius * radius - value }
            }
            Err(_) => failed(t, u, v),
        });
    }
    ConditionReport::from_checks(vec![sign, growth, product])
}

/// Discrete sub/superharmonicity and boundary signs of moving walls:
/// `lower'' ≥ 0` and `upper'' ≤ 0` at interior nodes (up to
/// [`SUBSUPER_TOL`], which is folded into the margin), `lower ≤ 0 ≤ upper`
/// at both ends, and `lower ≤ upper` everywhere.
pub fn verify_subsuper(alpha: &GridFunction, beta: &GridFunction, grid: &Grid1D) -> ConditionReport {
    let mut sub = ConditionCheck::new("lower_subharmonic");
    let mut sup = ConditionCheck::new("upper_superharmonic");
    let mut ends = ConditionCheck::new("boundary_signs");
    let mut order = ConditionCheck::new("order");
    let n = alpha.nodes();
    let dx2 = grid.dx() * grid.dx();
    let w = |j: usize, i: usize, value: f64, margin: f64| ConditionWitness {
        x: grid.x(j),
        u: vec![alpha.at(j)[i], beta.at(j)[i]],
        p: vec![],
        value,
        margin,
    };
    for i in 0..alpha.components() {
        for j in 0..n {
            let gap = beta.at(j)[i] - alpha.at(j)[i];
            order.record(w(j, i, gap, gap));
        }
        for j in 1..n - 1 {
            let d2 = |g: &GridFunction| (g.at(j + 1)[i] - 2.0 * g.at(j)[i] + g.at(j - 1)[i]) / dx2;
            let (da, db) = (d2(alpha), d2(beta));
            sub.record(w(j, i, da, da + SUBSUPER_TOL));
            sup.record(w(j, i, db, SUBSUPER_TOL - db));
        }
        for j in [0, n - 1] {
            let (a, b) = (alpha.at(j)[i], beta.at(j)[i]);
            ends.record(w(j, i, a, -a));
            ends.record(w(j, i, b, b));
        }
    }
    ConditionReport::from_checks(vec![sub, sup, ends, order])
}

/// `|F(x, u, p)| ≤ bound(x)` on sampled states of the constraint with
/// gradients in `[-range, range]^N`. Empty when no bound is declared.
pub fn verify_envelope(spec: &ProblemSpec, samples: usize, seed: u64) -> ConditionReport {
    let mut check = ConditionCheck::new("envelope");
    let Some(bound) = spec.field.bound.clone() else {
        return ConditionReport::from_checks(vec![]);
    };
    let n = spec.components;
    let range = spec.verify.gradient_range;
    for k in 0..samples {
        let mut rng = sample_rng(seed ^ 0x5eed_e4e1, k);
        let j = rng.random_range(0..spec.grid.nodes);
        let x = spec.grid.x(j);
        let u = spec.constraint.section(j).sample(&mut rng);
        let p: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -range, range)).collect();
        let w = match spec.field.evaluate_unchecked(x, &u, &p) {
            Ok(v) => {
                let value = v.max_norm();
                ConditionWitness { x, u, p, value, margin: bound(x) - value }
            }
            Err(_) => ConditionWitness { x, u, p, value: f64::NAN, margin: f64::NEG_INFINITY },
        };
        check.record(w);
    }
    ConditionReport::from_checks(vec![check])
}

/// Dirichlet walls hold the state at 0, so a fixed constraint set must
/// contain it; the margin is minus the distance from 0.
pub fn verify_zero_admissible(body: &ConvexBody) -> ConditionReport {
    let mut check = ConditionCheck::new("dirichlet_zero_in_set");
    let zero = vec![0.0; body.dim()];
    let d = body.distance(&zero);
    check.record(ConditionWitness { x: 0.0, u: zero, p: vec![], value: d, margin: -d });
    ConditionReport::from_checks(vec![check])
}

/// Every verifier that applies to the problem kind, with the configured
/// sample count and seed.
pub fn check_conditions(spec: &ProblemSpec) -> ConditionReport {
    let (samples, seed) = (spec.verify.samples, spec.verify.seed);
    let mut report = verify_tangency(spec, samples, seed).merge(verify_envelope(spec, samples, seed));
    if let (BoundaryCondition::Dirichlet, Constraint::Uniform(body)) = (spec.operator.bc, &spec.constraint) {
        report = report.merge(verify_zero_admissible(body));
    }
    if let (ProblemKind::MovingRectangles, Constraint::Moving(MovingBox { lower, upper })) =
        (spec.kind, &spec.constraint)
    {
        report = report.merge(verify_subsuper(lower, upper, &spec.grid));
    }
    if let Some(params) = &spec.bernstein {
        report = report.merge(verify_bernstein(
            &spec.declared_field,
            spec.components,
            spec.grid.length,
            params,
            samples,
            seed,
        ));
    }
    report
}
