//! Set-valued nonlinearities `F(x, u, p)` with interval-box values.
//!
//! Values are componentwise intervals ([`SetValue`]). Discontinuous terms are
//! regularized by a sampled Filippov hull; tangent selections pick the
//! minimal-norm element of `F(x, u, p) ∩ T_C(u)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{dist, norm, ConvexBody, GeometryError, CONE_TOL};

/// Pointwise vector field `(x, u, p) -> R^N`.
pub type VectorFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync>;
/// Nonnegative envelope `x -> b(x)`.
pub type EnvelopeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tolerance for interval membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

const STALL_WINDOW: usize = 50;
const STALL_REDUCTION: f64 = 1e-14;
const GAP_TOL: f64 = 1e-11;
const SELECTION_MAX_ITER: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("value norm {norm} exceeds envelope {bound} at x = {x}")]
    BoundViolated { x: f64, norm: f64, bound: f64 },
    #[error("interval bounds out of order in component {component}: {lo} > {hi}")]
    InvertedInterval { component: usize, lo: f64, hi: f64 },
    #[error("non-finite value in component {0}")]
    NonFinite(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("F(x,u,p) does not meet the tangent cone (gap {gap:.3e})")]
    EmptyIntersection { gap: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A componentwise interval box `[lo, hi]`; a singleton when `lo == hi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetValue {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SetValue {
    pub fn singleton(y: Vec<f64>) -> Self {
        Self { lo: y.clone(), hi: y }
    }

    pub fn interval(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, FieldError> {
        for (component, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(FieldError::NonFinite(component));
            }
            if l > h {
                return Err(FieldError::InvertedInterval { component, lo: l, hi: h });
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn clamp(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(self.lo.iter().zip(&self.hi)).map(|(&v, (&l, &h))| v.clamp(l, h)).collect()
    }

    /// Euclidean distance from `y` to the box.
    pub fn distance(&self, y: &[f64]) -> f64 {
        dist(y, &self.clamp(y))
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.distance(y) <= tol
    }

    /// Largest Euclidean norm of an element.
    pub fn max_norm(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| l.abs().max(h.abs()).powi(2)).sum::<f64>().sqrt()
    }

    /// Minimal-norm element.
    pub fn min_norm_point(&self) -> Vec<f64> {
        self.clamp(&vec![0.0; self.dim()])
    }

    /// One-sided Hausdorff excess `sup_{y in self} dist(y, other)`.
    ///
    /// The distance to a box is separable, so the supremum is attained
    /// componentwise at an endpoint.
    pub fn excess_over(&self, other: &SetValue) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .map(|((&l, &h), (&ol, &oh))| {
                let d = |y: f64| {
                    if y < ol {
                        ol - y
                    } else if y > oh {
                        y - oh
                    } else {
                        0.0
                    }
                };
                d(l).max(d(h)).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Componentwise hull of `self` and `other`.
    pub fn hull(&self, other: &SetValue) -> SetValue {
        SetValue {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &SetValue, tol: f64) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .all(|((l, h), (ol, oh))| *l >= ol - tol && *h <= oh + tol)
    }
}

/// How the values of a [`NonlinearityField`] are produced.
#[derive(Clone)]
pub enum FieldKind {
    SingleValued(VectorFn),
    IntervalValued {
        lo: VectorFn,
        hi: VectorFn,
    },
    /// Componentwise hull of `g` over `sample_count` points of the ball of
    /// radius `delta` around `(x, u, p)`, always including the center.
    FilippovHull {
        g: VectorFn,
        delta: f64,
        sample_count: usize,
        seed: u64,
    },
}

/// Reaction term with an optional envelope `|y| <= b(x)`.
#[derive(Clone)]
pub struct NonlinearityField {
    pub kind: FieldKind,
    pub bound: Option<EnvelopeFn>,
    pub name: String,
}

impl fmt::Debug for NonlinearityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            FieldKind::SingleValued(_) => "SingleValued".to_string(),
            FieldKind::IntervalValued { .. } => "IntervalValued".to_string(),
            FieldKind::FilippovHull { delta, sample_count, .. } => {
                format!("FilippovHull(delta = {delta}, samples = {sample_count})")
            }
        };
        f.debug_struct("NonlinearityField")
            .field("name", &self.name)
            .field("kind", &kind)
            .field("bounded", &self.bound.is_some())
            .finish()
    }
}

/// A point `(x, u, p)` of the state space of a field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldState {
    pub x: f64,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

impl FieldState {
    pub fn new(x: f64, u: Vec<f64>, p: Vec<f64>) -> Self {
        Self { x, u, p }
    }

    fn distance(&self, other: &FieldState) -> f64 {
        let d2 = (self.x - other.x).powi(2)
            + self.u.iter().zip(&other.u).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            + self.p.iter().zip(&other.p).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        d2.sqrt()
    }

    /// A point drawn uniformly from the ball of radius `radius` around self.
    fn perturbed<R: Rng + ?Sized>(&self, radius: f64, rng: &mut R) -> FieldState {
        let dim = 1 + self.u.len() + self.p.len();
        let mut g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let len = norm(&g).max(f64::MIN_POSITIVE);
        let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
        g.iter_mut().for_each(|gi| *gi *= r / len);
        let n = self.u.len();
        FieldState {
            x: self.x + g[0],
            u: self.u.iter().zip(&g[1..=n]).map(|(a, b)| a + b).collect(),
            p: self.p.iter().zip(&g[1 + n..]).map(|(a, b)| a + b).collect(),
        }
    }
}

impl NonlinearityField {
    pub fn single_valued<F>(name: &str, g: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { kind: FieldKind::SingleValued(Arc::new(g)), bound: None, name: name.into() }
    }

    pub fn interval_valued<L, H>(name: &str, lo: L, hi: H) -> Self
    where
        L: Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        H: Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { kind: FieldKind::IntervalValued { lo: Arc::new(lo), hi: Arc::new(hi) }, bound: None, name: name.into() }
    }

    pub fn filippov<F>(name: &str, g: F, delta: f64, sample_count: usize, seed: u64) -> Self
    where
        F: Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            kind: FieldKind::FilippovHull { g: Arc::new(g), delta, sample_count, seed },
            bound: None,
            name: name.into(),
        }
    }

    /// Declares the envelope `b(x)`.
    pub fn with_bound<B>(mut self, b: B) -> Self
    where
        B: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.bound = Some(Arc::new(b));
        self
    }

    /// Same field with a different Filippov sample count or radius.
    /// Returns `self` unchanged for other kinds.
    pub fn with_filippov(&self, delta: f64, sample_count: usize) -> Self {
        let mut out = self.clone();
        if let FieldKind::FilippovHull { delta: d, sample_count: s, .. } = &mut out.kind {
            *d = delta;
            *s = sample_count;
        }
        out
    }

    /// Evaluates `F(x, u, p)` without the envelope check.
    pub fn evaluate_unchecked(&self, x: f64, u: &[f64], p: &[f64]) -> Result<SetValue, FieldError> {
        match &self.kind {
            FieldKind::SingleValued(g) => {
                let y = g(x, u, p);
                if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                    return Err(FieldError::NonFinite(i));
                }
                Ok(SetValue::singleton(y))
            }
            FieldKind::IntervalValued { lo, hi } => SetValue::interval(lo(x, u, p), hi(x, u, p)),
            FieldKind::FilippovHull { g, delta, sample_count, seed } => {
                let center = FieldState::new(x, u.to_vec(), p.to_vec());
                let mut hull = SetValue::singleton(g(x, u, p));
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                for _ in 0..*sample_count {
                    let s = center.perturbed(*delta, &mut rng);
                    hull = hull.hull(&SetValue::singleton(g(s.x, &s.u, &s.p)));
                }
                if let Some(i) = hull.lo.iter().chain(&hull.hi).position(|v| !v.is_finite()) {
                    return Err(FieldError::NonFinite(i % u.len().max(1)));
                }
                Ok(hull)
            }
        }
    }

    /// Evaluates `F(x, u, p)` and checks it against the declared envelope.
    pub fn evaluate(&self, x: f64, u: &[f64], p: &[f64]) -> Result<SetValue, FieldError> {
        let value = self.evaluate_unchecked(x, u, p)?;
        if let Some(b) = &self.bound {
            let bound = b(x);
            let norm = value.max_norm();
            if norm > bound * (1.0 + 1e-12) + 1e-14 {
                return Err(FieldError::BoundViolated { x, norm, bound });
            }
        }
        Ok(value)
    }

    pub fn evaluate_at(&self, s: &FieldState) -> Result<SetValue, FieldError> {
        self.evaluate(s.x, &s.u, &s.p)
    }
}

/// Minimal-norm element of `value ∩ T_C(u)`.
///
/// Box constraints have a product tangent cone and are handled in closed
/// form; the other shapes use Dykstra's alternating projections between the
/// value box and the cone, declaring the intersection empty when the gap
/// stalls above tolerance.
pub fn select_in_cone(value: &SetValue, constraint: &ConvexBody, u: &[f64]) -> Result<Vec<f64>, SelectionError> {
    let distance = constraint.distance(u);
    if distance > CONE_TOL {
        return Err(GeometryError::PointNotInSet { distance }.into());
    }
    let y = match constraint {
        ConvexBody::Box { lo, hi } => {
            let mut y = Vec::with_capacity(u.len());
            let mut gap2 = 0.0;
            for i in 0..u.len() {
                let face = |tol: f64| {
                    let (mut a, mut b) = (value.lo[i], value.hi[i]);
                    if u[i] <= lo[i] + tol {
                        a = a.max(0.0);
                    }
                    if u[i] >= hi[i] - tol {
                        b = b.min(0.0);
                    }
                    (a, b)
                };
                let (mut a, mut b) = face(CONE_TOL);
                if a > b {
                    // strictly inside the face band the true cone is the whole line
                    (a, b) = face(0.0);
                }
                if a > b {
                    // componentwise gap between the value interval and the cone
                    gap2 += (a - b).powi(2);
                    y.push(0.0);
                } else {
                    y.push(0.0f64.clamp(a, b));
                }
            }
            if gap2 > 0.0 {
                return Err(SelectionError::EmptyIntersection { gap: gap2.sqrt() });
            }
            // exact by construction; no verification pass
            return Ok(y);
        }
        _ => dykstra_box_cone(value, constraint, u)?,
    };
    verify_selection(value, constraint, u, &y)?;
    Ok(y)
}

fn dykstra_box_cone(value: &SetValue, constraint: &ConvexBody, u: &[f64]) -> Result<Vec<f64>, SelectionError> {
    let n = u.len();
    let mut x = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut gaps: Vec<f64> = Vec::new();
    let mut last_in_box = value.min_norm_point();
    for _ in 0..SELECTION_MAX_ITER {
        let xp: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let y = value.clamp(&xp);
        p = xp.iter().zip(&y).map(|(a, b)| a - b).collect();
        let yq: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        let x_new = constraint.tangent_project(u, &yq)?;
        q = yq.iter().zip(&x_new).map(|(a, b)| a - b).collect();
        let gap = dist(&y, &x_new);
        let change = dist(&x_new, &x);
        x = x_new;
        last_in_box = y;
        if gap <= GAP_TOL && change <= 1e-15 * (1.0 + norm(&x)) {
            break;
        }
        gaps.push(gap);
        let k = gaps.len();
        if k > STALL_WINDOW && gap > GAP_TOL {
            let earlier = gaps[k - 1 - STALL_WINDOW];
            if earlier - gap < STALL_REDUCTION {
                return Err(SelectionError::EmptyIntersection { gap });
            }
        }
    }
    let gap = dist(&last_in_box, &x);
    if gap > 1e-9 {
        return Err(SelectionError::EmptyIntersection { gap });
    }
    // the box iterate is feasible for the value; snap cone-side error away
    let y = constraint.tangent_project(u, &last_in_box)?;
    Ok(value.clamp(&y))
}

fn verify_selection(value: &SetValue, constraint: &ConvexBody, u: &[f64], y: &[f64]) -> Result<(), SelectionError> {
    let box_gap = value.distance(y);
    let cone = constraint.tangent_cone_contains(u, y, CONE_TOL)?;
    if box_gap > MEMBERSHIP_TOL || !cone.contains {
        return Err(SelectionError::EmptyIntersection { gap: box_gap.max(cone.directional_derivative) });
    }
    Ok(())
}

/// Minimal-norm element of `F(x, u, p) ∩ T_C(u)`.
pub fn tangent_selection(
    field: &NonlinearityField,
    constraint: &ConvexBody,
    x: f64,
    u: &[f64],
    p: &[f64],
) -> Result<Vec<f64>, SelectionError> {
    let value = field.evaluate(x, u, p)?;
    select_in_cone(&value, constraint, u)
}

/// Parameters of the a-posteriori graph approximation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphApproxConfig {
    pub epsilon: f64,
    pub sample_count: usize,
    pub perturbation_radius: f64,
    pub seed: u64,
}

impl GraphApproxConfig {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon, sample_count: 32, perturbation_radius: 0.5 * epsilon, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphApproxReport {
    pub states: usize,
    pub passed: usize,
    pub pass_fraction: f64,
    pub worst_gap: f64,
    pub worst_state: Option<FieldState>,
}

/// Checks `f(s) ∈ F(B(s, ε)) + εB` on each state by searching perturbed
/// states `s'` with `|s' - s| < ε`.
pub fn validate_graph_approximation<S>(
    selection: S,
    field: &NonlinearityField,
    cfg: &GraphApproxConfig,
    states: &[FieldState],
) -> GraphApproxReport
where
    S: Fn(&FieldState) -> Option<Vec<f64>>,
{
    let radius = cfg.perturbation_radius.min(cfg.epsilon * (1.0 - 1e-9));
    let mut passed = 0;
    let mut worst_gap = 0.0f64;
    let mut worst_state = None;
    for (index, s) in states.iter().enumerate() {
        let Some(y) = selection(s) else {
            worst_gap = f64::INFINITY;
            worst_state = Some(s.clone());
            continue;
        };
        let gap_at = |t: &FieldState| -> f64 { field.evaluate_at(t).map(|v| v.distance(&y)).unwrap_or(f64::INFINITY) };
        let mut best = gap_at(s);
        if best > cfg.epsilon {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            for _ in 0..cfg.sample_count {
                let t = s.perturbed(radius, &mut rng);
                debug_assert!(t.distance(s) < cfg.epsilon);
                best = best.min(gap_at(&t));
                if best <= cfg.epsilon {
                    break;
                }
            }
        }
        if best <= cfg.epsilon {
            passed += 1;
        }
        if best > worst_gap {
            worst_gap = best;
            worst_state = Some(s.clone());
        }
    }
    let n = states.len();
    GraphApproxReport {
        states: n,
        passed,
        pass_fraction: if n == 0 { 1.0 } else { passed as f64 / n as f64 },
        worst_gap,
        worst_state,
    }
}

/// Largest one-sided Hausdorff excess of `F` at sampled states within
/// `delta` of `s` over `F(s)`. A diagnostic for upper semicontinuity.
pub fn semicontinuity_probe(
    field: &NonlinearityField,
    s: &FieldState,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<f64, FieldError> {
    let base = field.evaluate_at(s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let t = s.perturbed(delta, &mut rng);
        let v = field.evaluate_at(&t)?;
        worst = worst.max(v.excess_over(&base));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const ALPHA: f64 = 0.3;

    fn heaviside(_x: f64, u: &[f64], _p: &[f64]) -> Vec<f64> {
        vec![if u[0] >= ALPHA { 1.0 } else { 0.0 }]
    }

    fn unit_interval() -> ConvexBody {
        ConvexBody::cube(1, 0.0, 1.0).unwrap()
    }

    fn interval_field(lo: f64, hi: f64) -> NonlinearityField {
        NonlinearityField::interval_valued("const", move |_, u, _| vec![lo; u.len()], move |_, u, _| vec![hi; u.len()])
    }

    #[test]
    fn evaluate_examples() {
        let f = NonlinearityField::single_valued("decay", |_, u, _| u.iter().map(|v| -v).collect());
        let v = f.evaluate(0.0, &[0.5], &[0.0]).unwrap();
        assert!(v.is_singleton());
        assert_eq!(v.lo, vec![-0.5]);

        let delta = 1e-3;
        let h = NonlinearityField::filippov("heaviside", heaviside, delta, 64, 7);
        let v = h.evaluate(0.0, &[ALPHA], &[0.0]).unwrap();
        assert_eq!((v.lo[0], v.hi[0]), (0.0, 1.0));
        let v = h.evaluate(0.0, &[ALPHA - 2.0 * delta], &[0.0]).unwrap();
        assert_eq!((v.lo[0], v.hi[0]), (0.0, 0.0));
    }

    #[test]
    fn envelope_is_enforced() {
        let f = NonlinearityField::single_valued("lin", |_, u, _| vec![2.0 * u[0]]).with_bound(|_| 1.0);
        assert!(f.evaluate(0.0, &[0.4], &[0.0]).is_ok());
        let err = f.evaluate(0.0, &[0.6], &[0.0]).unwrap_err();
        assert!(matches!(err, FieldError::BoundViolated { .. }));
    }

    #[test]
    fn filippov_hull_is_monotone() {
        let states = [ALPHA - 0.01, ALPHA - 1e-3, ALPHA, ALPHA + 5e-4];
        for &u in &states {
            let mut prev: Option<SetValue> = None;
            for count in [1, 4, 16, 64, 256] {
                let f = NonlinearityField::filippov("h", heaviside, 2e-3, count, 5);
                let v = f.evaluate(0.0, &[u], &[0.0]).unwrap();
                if let Some(p) = &prev {
                    assert!(p.is_subset_of(&v, 0.0), "sample count monotonicity at u = {u}");
                }
                prev = Some(v);
            }
            let mut prev: Option<SetValue> = None;
            for delta in [1e-4, 1e-3, 1e-2, 1e-1] {
                let f = NonlinearityField::filippov("h", heaviside, delta, 64, 5);
                let v = f.evaluate(0.0, &[u], &[0.0]).unwrap();
                if let Some(p) = &prev {
                    assert!(p.is_subset_of(&v, 0.0), "delta monotonicity at u = {u}");
                }
                prev = Some(v);
            }
        }
    }

    #[test]
    fn selection_examples() {
        let c = unit_interval();
        let y = tangent_selection(&interval_field(-1.0, 1.0), &c, 0.0, &[0.0], &[0.0]).unwrap();
        assert_eq!(y, vec![0.0]);
        let err = tangent_selection(&interval_field(-2.0, -2.0), &c, 0.0, &[0.0], &[0.0]).unwrap_err();
        assert!(matches!(err, SelectionError::EmptyIntersection { .. }));

        let c2 = ConvexBody::cube(2, 0.0, 1.0).unwrap();
        let err = tangent_selection(&interval_field(0.3, 0.7), &c2, 0.0, &[0.5, 1.0], &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, SelectionError::EmptyIntersection { .. }));
    }

    /// Dense grid search over the value box for elements in the tangent cone.
    fn grid_oracle(value: &SetValue, c: &ConvexBody, u: &[f64], steps: usize) -> Option<Vec<f64>> {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for i in 0..=steps {
            for j in 0..=steps {
                let y = vec![
                    value.lo[0] + (value.hi[0] - value.lo[0]) * i as f64 / steps as f64,
                    value.lo[1] + (value.hi[1] - value.lo[1]) * j as f64 / steps as f64,
                ];
                if c.tangent_cone_contains(u, &y, 1e-12).unwrap().contains {
                    let n = norm(&y);
                    if best.as_ref().is_none_or(|(bn, _)| n < *bn) {
                        best = Some((n, y));
                    }
                }
            }
        }
        best.map(|b| b.1)
    }

    #[test]
    fn selection_agrees_with_grid_oracle() {
        let value = SetValue::interval(vec![0.3, 0.3], vec![0.7, 0.7]).unwrap();
        let c = ConvexBody::cube(2, 0.0, 1.0).unwrap();
        assert!(grid_oracle(&value, &c, &[0.5, 1.0], 200).is_none());

        let ball = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let u = [0.6, 0.8];
        let value = SetValue::interval(vec![-1.0, -0.5], vec![0.5, 1.0]).unwrap();
        let y = select_in_cone(&value, &ball, &u).unwrap();
        let oracle = grid_oracle(&value, &ball, &u, 400).unwrap();
        assert!(norm(&y) <= norm(&oracle) + 1e-9);
        assert!(dist(&y, &oracle) < 1e-2);

        // box entirely on the outward side of the ball's tangent half-space
        let value = SetValue::interval(vec![0.3, 0.3], vec![0.7, 0.7]).unwrap();
        assert!(grid_oracle(&value, &ball, &u, 200).is_none());
        assert!(matches!(select_in_cone(&value, &ball, &u), Err(SelectionError::EmptyIntersection { .. })));
    }

    #[test]
    fn selection_on_simplex_and_halfspaces() {
        let s = ConvexBody::simplex(3, 1.0).unwrap();
        let u = [0.0, 0.5, 0.5];
        let value = SetValue::interval(vec![-0.2, -1.0, -1.0], vec![0.4, 1.0, 1.0]).unwrap();
        let y = select_in_cone(&value, &s, &u).unwrap();
        assert!(y[0] >= -1e-12);
        assert_abs_diff_eq!(y.iter().sum::<f64>(), 0.0, epsilon = 1e-9);
        assert!(norm(&y) < 1e-9);

        let value = SetValue::interval(vec![0.1, 0.1, 0.1], vec![0.2, 0.2, 0.2]).unwrap();
        assert!(select_in_cone(&value, &s, &u).is_err());
    }

    #[test]
    fn interior_selection_is_box_min_norm() {
        let c = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let value = SetValue::interval(vec![0.2, -3.0], vec![0.9, -1.0]).unwrap();
        let y = select_in_cone(&value, &c, &[0.1, 0.1]).unwrap();
        assert_abs_diff_eq!(y[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn graph_approximation_examples() {
        let f = NonlinearityField::single_valued("lin", |_, u, _| vec![1.0 - u[0]]);
        let states: Vec<FieldState> =
            (0..100).map(|k| FieldState::new(0.0, vec![k as f64 / 99.0], vec![0.0])).collect();
        let cfg = GraphApproxConfig::new(1e-3);
        let exact = validate_graph_approximation(|s| f.evaluate_at(s).ok().map(|v| v.lo), &f, &cfg, &states);
        assert_eq!(exact.pass_fraction, 1.0);
        let shifted = validate_graph_approximation(
            |s| f.evaluate_at(s).ok().map(|v| vec![v.lo[0] + 2.0 * cfg.epsilon]),
            &f,
            &cfg,
            &states,
        );
        assert_eq!(shifted.pass_fraction, 0.0);
        assert!(shifted.worst_gap >= cfg.epsilon);
    }

    #[test]
    fn semicontinuity_examples() {
        let f = NonlinearityField::single_valued("sin", |_, u, _| vec![u[0].sin()]);
        let s = FieldState::new(0.0, vec![0.4], vec![0.0]);
        let excess: Vec<f64> =
            [1e-1, 1e-2, 1e-3].iter().map(|&d| semicontinuity_probe(&f, &s, d, 200, 1).unwrap()).collect();
        assert!(excess[0] > excess[1] && excess[1] > excess[2]);
        assert!(excess[2] < 1e-3);

        let at_jump = FieldState::new(0.0, vec![ALPHA], vec![0.0]);
        let hull = NonlinearityField::filippov("h", heaviside, 1e-2, 64, 3);
        let e = semicontinuity_probe(&hull, &at_jump, 1e-2, 200, 1).unwrap();
        assert!(e <= 1.0);
        assert_eq!(e, 0.0);

        let raw = NonlinearityField::single_valued("h", heaviside);
        for d in [1e-1, 1e-2, 1e-3] {
            assert_eq!(semicontinuity_probe(&raw, &at_jump, d, 200, 1).unwrap(), 1.0);
        }
    }
}
