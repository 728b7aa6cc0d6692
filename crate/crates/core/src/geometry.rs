//! Convex constraint sets in `R^N`.
//!
//! A [`ConvexBody`] answers distance, nearest-point, tangent-cone and
//! supporting half-space queries. All four supported shapes have a closed-form
//! or finitely convergent metric projection, so the projection doubles as a
//! 1-Lipschitz retraction onto the set.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance on the directional derivative of the distance function
/// used for tangent cone membership.
pub const CONE_TOL: f64 = 1e-9;

/// Default number of normals used to circumscribe a ball by half-spaces.
pub const DEFAULT_BALL_NORMALS: usize = 64;

const DYKSTRA_MAX_ITER: usize = 20_000;
const DYKSTRA_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid box: lo[{index}] = {lo} exceeds hi[{index}] = {hi}")]
    InvalidBox { index: usize, lo: f64, hi: f64 },
    #[error("ball radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("simplex total mass must be positive, got {0}")]
    InvalidMass(f64),
    #[error("half-space normal {0} is zero")]
    ZeroNormal(usize),
    #[error("witness point violates half-space {index} by {excess}")]
    EmptyIntersection { index: usize, excess: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point is not in the set (distance {distance})")]
    PointNotInSet { distance: f64 },
}

/// A closed half-space `{x : normal · x <= offset}` with a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    /// Builds a half-space, rescaling so the normal has unit length.
    pub fn new(normal: Vec<f64>, offset: f64) -> Option<Self> {
        let len = norm(&normal);
        if len == 0.0 || !len.is_finite() {
            return None;
        }
        Some(Self { normal: normal.iter().map(|p| p / len).collect(), offset: offset / len })
    }

    /// Signed excess `normal · x - offset`; positive outside.
    pub fn excess(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }

    fn project(&self, x: &mut [f64]) {
        let e = self.excess(x);
        if e > 0.0 {
            for (xi, pi) in x.iter_mut().zip(&self.normal) {
                *xi -= e * pi;
            }
        }
    }
}

/// Convex constraint set.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexBody {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{u >= 0, sum u_i = total_mass}` in `R^dim`.
    Simplex {
        dim: usize,
        total_mass: f64,
    },
    HalfspaceIntersection {
        halfspaces: Vec<Halfspace>,
        witness: Vec<f64>,
    },
}

/// Result of a tangent cone membership query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeQueryResult {
    pub contains: bool,
    /// Directional derivative of the distance function, equal to the distance
    /// from the direction to the tangent cone.
    pub directional_derivative: f64,
}

impl ConvexBody {
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        for (index, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l <= h) {
                return Err(GeometryError::InvalidBox { index, lo: l, hi: h });
            }
        }
        Ok(ConvexBody::Box { lo, hi })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Self::boxed(vec![lo; dim], vec![hi; dim])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeometryError::InvalidRadius(radius));
        }
        Ok(ConvexBody::Ball { center, radius })
    }

    pub fn simplex(dim: usize, total_mass: f64) -> Result<Self, GeometryError> {
        if !(total_mass > 0.0) || !total_mass.is_finite() {
            return Err(GeometryError::InvalidMass(total_mass));
        }
        Ok(ConvexBody::Simplex { dim, total_mass })
    }

    /// Intersection of half-spaces `p_n · x <= a_n`. The `witness` must lie
    /// in every half-space (up to `1e-9`) so the set is known to be nonempty.
    pub fn halfspaces(list: Vec<(Vec<f64>, f64)>, witness: Vec<f64>) -> Result<Self, GeometryError> {
        let mut halfspaces = Vec::with_capacity(list.len());
        for (index, (p, a)) in list.into_iter().enumerate() {
            if p.len() != witness.len() {
                return Err(GeometryError::DimensionMismatch { expected: witness.len(), got: p.len() });
            }
            let hs = Halfspace::new(p, a).ok_or(GeometryError::ZeroNormal(index))?;
            let excess = hs.excess(&witness);
            if excess > 1e-9 {
                return Err(GeometryError::EmptyIntersection { index, excess });
            }
            halfspaces.push(hs);
        }
        Ok(ConvexBody::HalfspaceIntersection { halfspaces, witness })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Box { lo, .. } => lo.len(),
            ConvexBody::Ball { center, .. } => center.len(),
            ConvexBody::Simplex { dim, .. } => *dim,
            ConvexBody::HalfspaceIntersection { witness, .. } => witness.len(),
        }
    }

    /// Euclidean distance from `x` to the set.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            ConvexBody::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&xi, (&l, &h))| {
                    let d = if xi < l {
                        l - xi
                    } else if xi > h {
                        xi - h
                    } else {
                        0.0
                    };
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            ConvexBody::Ball { center, radius } => (dist(x, center) - radius).max(0.0),
            _ => dist(x, &self.project(x)),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.distance(x) <= tol
    }

    /// Metric projection onto the set.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConvexBody::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).map(|(&xi, (&l, &h))| xi.clamp(l, h)).collect()
            }
            ConvexBody::Ball { center, radius } => {
                let r = dist(x, center);
                if r <= *radius {
                    x.to_vec()
                } else {
                    let s = radius / r;
                    x.iter().zip(center).map(|(xi, ci)| ci + s * (xi - ci)).collect()
                }
            }
            ConvexBody::Simplex { total_mass, .. } => project_simplex(x, *total_mass),
            ConvexBody::HalfspaceIntersection { halfspaces, .. } => {
                dykstra(x, halfspaces.len(), |k, y| halfspaces[k].project(y))
            }
        }
    }

    /// Tangent cone membership of `v` at `x`.
    ///
    /// Fails with [`GeometryError::PointNotInSet`] when `x` is farther than
    /// `tol` from the set.
    pub fn tangent_cone_contains(&self, x: &[f64], v: &[f64], tol: f64) -> Result<ConeQueryResult, GeometryError> {
        let w = self.tangent_project_tol(x, v, tol)?;
        let dd = dist(v, &w);
        Ok(ConeQueryResult { contains: dd <= tol.max(CONE_TOL), directional_derivative: dd })
    }

    /// Nearest point of the tangent cone at `x` to `v`, with the default
    /// membership tolerance.
    pub fn tangent_project(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.tangent_project_tol(x, v, CONE_TOL)
    }

    /// Nearest point of the tangent cone at `x` to `v`. Constraints within
    /// `tol` of being active are treated as active.
    pub fn tangent_project_tol(&self, x: &[f64], v: &[f64], tol: f64) -> Result<Vec<f64>, GeometryError> {
        let distance = self.distance(x);
        if distance > tol {
            return Err(GeometryError::PointNotInSet { distance });
        }
        Ok(match self {
            ConvexBody::Box { lo, hi } => v
                .iter()
                .enumerate()
                .map(|(i, &vi)| {
                    let at_lo = x[i] <= lo[i] + tol;
                    let at_hi = x[i] >= hi[i] - tol;
                    match (at_lo, at_hi) {
                        (true, true) => 0.0,
                        (true, false) => vi.max(0.0),
                        (false, true) => vi.min(0.0),
                        (false, false) => vi,
                    }
                })
                .collect(),
            ConvexBody::Ball { center, radius } => {
                let r = dist(x, center);
                if r < radius - tol || r == 0.0 {
                    v.to_vec()
                } else {
                    let n: Vec<f64> = x.iter().zip(center).map(|(a, c)| (a - c) / r).collect();
                    let s = dot(&n, v).max(0.0);
                    v.iter().zip(&n).map(|(vi, ni)| vi - s * ni).collect()
                }
            }
            ConvexBody::Simplex { .. } => {
                let active: Vec<bool> = x.iter().map(|&xi| xi <= tol).collect();
                project_simplex_cone(v, &active)
            }
            ConvexBody::HalfspaceIntersection { halfspaces, .. } => {
                let active: Vec<Halfspace> = halfspaces
                    .iter()
                    .filter(|h| h.excess(x) >= -tol)
                    .map(|h| Halfspace { normal: h.normal.clone(), offset: 0.0 })
                    .collect();
                if active.is_empty() {
                    v.to_vec()
                } else {
                    dykstra(v, active.len(), |k, y| active[k].project(y))
                }
            }
        })
    }

    /// Supporting half-spaces with the default ball circumscription.
    pub fn supporting_halfspaces(&self) -> Vec<Halfspace> {
        self.supporting_halfspaces_with(DEFAULT_BALL_NORMALS)
    }

    /// Finite family of supporting half-spaces. Exact for boxes, simplices and
    /// half-space intersections; for balls an outer polytope with
    /// `ball_normals` faces (in 2-D the Hausdorff gap is
    /// [`ball_outer_gap`]` * radius`).
    pub fn supporting_halfspaces_with(&self, ball_normals: usize) -> Vec<Halfspace> {
        match self {
            ConvexBody::Box { lo, hi } => {
                let n = lo.len();
                let mut out = Vec::with_capacity(2 * n);
                for i in 0..n {
                    let mut e = vec![0.0; n];
                    e[i] = -1.0;
                    out.push(Halfspace { normal: e.clone(), offset: -lo[i] });
                    e[i] = 1.0;
                    out.push(Halfspace { normal: e, offset: hi[i] });
                }
                out
            }
            ConvexBody::Simplex { dim, total_mass } => {
                let n = *dim;
                let mut out = Vec::with_capacity(n + 2);
                for i in 0..n {
                    let mut e = vec![0.0; n];
                    e[i] = -1.0;
                    out.push(Halfspace { normal: e, offset: 0.0 });
                }
                let s = (n as f64).sqrt();
                out.push(Halfspace { normal: vec![1.0 / s; n], offset: total_mass / s });
                out.push(Halfspace { normal: vec![-1.0 / s; n], offset: -total_mass / s });
                out
            }
            ConvexBody::HalfspaceIntersection { halfspaces, .. } => halfspaces.clone(),
            ConvexBody::Ball { center, radius } => ball_directions(center.len(), ball_normals)
                .into_iter()
                .map(|p| {
                    let offset = dot(&p, center) + radius;
                    Halfspace { normal: p, offset }
                })
                .collect(),
        }
    }

    /// Draws a point of the set. Boxes, balls and simplices are sampled
    /// uniformly; half-space intersections by projecting a Gaussian cloud
    /// around the witness, which puts mass on the boundary.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            ConvexBody::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(&l, &h)| if l == h { l } else { rng.random_range(l..=h) }).collect()
            }
            ConvexBody::Ball { center, radius } => {
                let n = center.len();
                let mut g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                let len = norm(&g).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                for (gi, ci) in g.iter_mut().zip(center) {
                    *gi = ci + r * *gi / len;
                }
                g
            }
            ConvexBody::Simplex { dim, total_mass } => {
                let e: Vec<f64> = (0..*dim).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let s: f64 = e.iter().sum();
                e.iter().map(|ei| total_mass * ei / s).collect()
            }
            ConvexBody::HalfspaceIntersection { witness, .. } => {
                let y: Vec<f64> = witness
                    .iter()
                    .map(|w| {
                        let z: f64 = StandardNormal.sample(rng);
                        w + z
                    })
                    .collect();
                self.project(&y)
            }
        }
    }
}

/// Hausdorff gap of the regular `count`-gon circumscribing the unit circle.
pub fn ball_outer_gap(count: usize) -> f64 {
    1.0 / (std::f64::consts::PI / count as f64).cos() - 1.0
}

/// Quotient `d_K(x + h v) / h`, whose limit as `h -> 0+` is the directional
/// derivative of the distance function (zero iff `v` is tangent).
pub fn contingent_quotient(body: &ConvexBody, x: &[f64], v: &[f64], h: f64) -> f64 {
    let y: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
    body.distance(&y) / h
}

/// Sampled Clarke quotient: the largest `d_K(y + h v) / h` over `y = x` and
/// `neighbors` points of the set drawn within `radius` of `x`.
pub fn clarke_quotient<R: Rng + ?Sized>(
    body: &ConvexBody,
    x: &[f64],
    v: &[f64],
    h: f64,
    radius: f64,
    neighbors: usize,
    rng: &mut R,
) -> f64 {
    let mut best = contingent_quotient(body, x, v, h);
    for _ in 0..neighbors {
        let z: Vec<f64> = x.iter().map(|xi| xi + radius * rng.random_range(-1.0..=1.0)).collect();
        let y = body.project(&z);
        if dist(&y, x) <= 2.0 * radius {
            best = best.max(contingent_quotient(body, &y, v, h));
        }
    }
    best
}

fn ball_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count.max(3))
            .map(|m| {
                let t = 2.0 * std::f64::consts::PI * m as f64 / count.max(3) as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // coordinate directions followed by a deterministic low-discrepancy
            // spread of the remaining count
            let mut out = Vec::with_capacity(count.max(2 * n));
            for i in 0..n {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; n];
                    e[i] = s;
                    out.push(e);
                }
            }
            let mut k = 1usize;
            while out.len() < count {
                let mut p: Vec<f64> = (0..n)
                    .map(|i| {
                        let alpha = ((i + 2) as f64).sqrt().fract();
                        let u = (k as f64 * alpha).fract();
                        2.0 * u - 1.0
                    })
                    .collect();
                let len = norm(&p);
                if len > 1e-6 {
                    p.iter_mut().for_each(|pi| *pi /= len);
                    out.push(p);
                }
                k += 1;
            }
            out
        }
    }
}

/// Sort-based Euclidean projection onto `{u >= 0, sum u = mass}`.
fn project_simplex(x: &[f64], mass: f64) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - mass) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    x.iter().map(|&xi| (xi - theta).max(0.0)).collect()
}

/// Projection onto `{w : sum w = 0, w_i >= 0 for active i}`.
///
/// The minimizer has the form `w_i = v_i - mu` on free coordinates and
/// `max(v_i - mu, 0)` on active ones, with `mu` the root of a nonincreasing
/// piecewise-linear function.
fn project_simplex_cone(v: &[f64], active: &[bool]) -> Vec<f64> {
    let g =
        |mu: f64| -> f64 { v.iter().zip(active).map(|(&vi, &a)| if a { (vi - mu).max(0.0) } else { vi - mu }).sum() };
    let shape = |mu: f64| -> Vec<f64> {
        v.iter().zip(active).map(|(&vi, &a)| if a { (vi - mu).max(0.0) } else { vi - mu }).collect()
    };
    if active.iter().all(|&a| a) {
        // only w = 0 satisfies both constraints
        return vec![0.0; v.len()];
    }
    // g is piecewise linear with kinks at v_i for active i; locate the piece
    // containing the root, then solve it exactly.
    let mut knots: Vec<f64> = v.iter().zip(active).filter_map(|(&vi, &a)| a.then_some(vi)).collect();
    knots.sort_by(f64::total_cmp);
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for &k in &knots {
        if g(k) > 0.0 {
            lo = k;
        } else {
            hi = k;
            break;
        }
    }
    // on (lo, hi) the active coordinates with v_i >= hi are positive
    let probe = if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo + 1.0
    } else if hi.is_finite() {
        hi - 1.0
    } else {
        0.0
    };
    let (mut sum, mut count) = (0.0, 0usize);
    for (&vi, &a) in v.iter().zip(active) {
        if !a || vi > probe {
            sum += vi;
            count += 1;
        }
    }
    let mu = if count == 0 { probe } else { sum / count as f64 };
    shape(mu)
}

/// Dykstra's alternating projection onto an intersection of `m` convex sets,
/// given their individual in-place projections.
fn dykstra<P>(x0: &[f64], m: usize, project: P) -> Vec<f64>
where
    P: Fn(usize, &mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut incr = vec![vec![0.0; n]; m];
    let mut y = vec![0.0; n];
    for _ in 0..DYKSTRA_MAX_ITER {
        let mut change = 0.0f64;
        for (k, inc) in incr.iter_mut().enumerate() {
            for i in 0..n {
                y[i] = x[i] + inc[i];
            }
            let before = y.clone();
            project(k, &mut y);
            for i in 0..n {
                inc[i] = before[i] - y[i];
                change = change.max((y[i] - x[i]).abs());
                x[i] = y[i];
            }
        }
        if change <= DYKSTRA_TOL * (1.0 + norm(&x)) {
            break;
        }
    }
    x
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> ConvexBody {
        ConvexBody::cube(2, 0.0, 1.0).unwrap()
    }

    /// Brute-force simplex projection: enumerate supports, solve the
    /// equality-constrained projection on each, keep the nearest feasible one.
    fn simplex_projection_oracle(x: &[f64], mass: f64) -> Vec<f64> {
        let n = x.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1 << n) {
            let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let s: f64 = support.iter().map(|&i| x[i]).sum();
            let shift = (s - mass) / support.len() as f64;
            let mut y = vec![0.0; n];
            for &i in &support {
                y[i] = x[i] - shift;
            }
            if y.iter().all(|&yi| yi >= -1e-15) {
                let d = dist(&y, x);
                if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                    best = Some((d, y));
                }
            }
        }
        best.unwrap().1
    }

    #[test]
    fn distance_examples() {
        let ball = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(ball.distance(&[2.0, 0.0]), 1.0, epsilon = 1e-15);
        assert_eq!(unit_square().distance(&[0.5, 0.5]), 0.0);
        // oracle: nearest point (1, 0), distance 1
        let simplex = ConvexBody::simplex(2, 1.0).unwrap();
        let oracle = simplex_projection_oracle(&[2.0, 0.0], 1.0);
        assert_abs_diff_eq!(dist(&oracle, &[2.0, 0.0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(simplex.distance(&[2.0, 0.0]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(unit_square().project(&[2.0, -1.0]), vec![1.0, 0.0]);
        let ball = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = ball.project(&[3.0, 4.0]);
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.8, epsilon = 1e-15);
        let simplex = ConvexBody::simplex(3, 1.0).unwrap();
        let p = simplex.project(&[0.8, 0.8, 0.8]);
        let q = simplex_projection_oracle(&[0.8, 0.8, 0.8], 1.0);
        for (a, b) in p.iter().zip(&q) {
            assert_abs_diff_eq!(*a, 1.0 / 3.0, epsilon = 1e-15);
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn simplex_projection_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let n = rng.random_range(1..=6);
            let mass = rng.random_range(0.1..3.0);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let body = ConvexBody::simplex(n, mass).unwrap();
            let p = body.project(&x);
            let q = simplex_projection_oracle(&x, mass);
            assert!(dist(&p, &q) < 1e-12, "{x:?}: {p:?} vs {q:?}");
        }
    }

    #[test]
    fn halfspace_projection_matches_box() {
        let hs = ConvexBody::halfspaces(
            vec![(vec![-1.0, 0.0], 0.0), (vec![1.0, 0.0], 1.0), (vec![0.0, -1.0], 0.0), (vec![0.0, 2.0], 2.0)],
            vec![0.5, 0.5],
        )
        .unwrap();
        let b = unit_square();
        for x in [[2.0, -1.0], [0.3, 0.7], [-3.0, 4.0], [1.5, 0.2]] {
            assert!(dist(&hs.project(&x), &b.project(&x)) < 1e-12);
        }
    }

    #[test]
    fn halfspace_requires_witness() {
        let err = ConvexBody::halfspaces(vec![(vec![1.0], 0.0)], vec![1.0]).unwrap_err();
        assert!(matches!(err, GeometryError::EmptyIntersection { .. }));
        assert!(ConvexBody::ball(vec![0.0], 0.0).is_err());
        assert!(ConvexBody::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(ConvexBody::simplex(2, -1.0).is_err());
    }

    #[test]
    fn cone_examples() {
        let b = unit_square();
        let r = b.tangent_cone_contains(&[0.0, 0.5], &[1.0, 0.0], CONE_TOL).unwrap();
        assert!(r.contains);
        let r = b.tangent_cone_contains(&[0.0, 0.5], &[-1.0, 0.0], CONE_TOL).unwrap();
        assert!(!r.contains);
        assert_abs_diff_eq!(r.directional_derivative, 1.0, epsilon = 1e-15);
        let ball = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let r = ball.tangent_cone_contains(&[1.0, 0.0], &[0.0, 1.0], CONE_TOL).unwrap();
        assert!(r.contains);
        let err = b.tangent_cone_contains(&[2.0, 0.5], &[0.0, 0.0], CONE_TOL);
        assert!(matches!(err, Err(GeometryError::PointNotInSet { .. })));
    }

    #[test]
    fn tangent_project_examples() {
        let b = unit_square();
        assert_eq!(b.tangent_project(&[0.0, 0.5], &[-2.0, 3.0]).unwrap(), vec![0.0, 3.0]);
        let ball = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let w = ball.tangent_project(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(w[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-15);
        let v = [-7.0, 2.5];
        assert_eq!(b.tangent_project(&[0.5, 0.5], &v).unwrap(), v.to_vec());
        assert_eq!(ball.tangent_project(&[0.1, 0.2], &v).unwrap(), v.to_vec());
    }

    #[test]
    fn degenerate_box_forces_zero() {
        let b = ConvexBody::boxed(vec![0.0, 0.3], vec![1.0, 0.3]).unwrap();
        let w = b.tangent_project(&[0.5, 0.3], &[1.0, -2.0]).unwrap();
        assert_eq!(w, vec![1.0, 0.0]);
    }

    #[test]
    fn simplex_cone_keeps_mass() {
        let s = ConvexBody::simplex(3, 1.0).unwrap();
        let x = [0.0, 0.4, 0.6];
        let w = s.tangent_project(&x, &[-1.0, 2.0, 0.5]).unwrap();
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 0.0, epsilon = 1e-14);
        assert!(w[0] >= 0.0);
        // numeric cross-check: moving along w stays in the simplex to first order
        assert!(contingent_quotient(&s, &x, &w, 1e-6) < 1e-8);
    }

    #[test]
    fn supporting_halfspace_examples() {
        let hs = unit_square().supporting_halfspaces();
        let expect = [(vec![-1.0, 0.0], 0.0), (vec![1.0, 0.0], 1.0), (vec![0.0, -1.0], 0.0), (vec![0.0, 1.0], 1.0)];
        assert_eq!(hs.len(), 4);
        for (h, (p, a)) in hs.iter().zip(expect) {
            assert_eq!(h.normal, p);
            assert_eq!(h.offset, a);
        }
        let s = ConvexBody::simplex(2, 1.0).unwrap().supporting_halfspaces();
        let r = 1.0 / 2f64.sqrt();
        assert_eq!(s.len(), 4);
        assert_eq!(s[0].normal, vec![-1.0, 0.0]);
        assert_eq!(s[1].normal, vec![0.0, -1.0]);
        assert_abs_diff_eq!(s[2].normal[0], r, epsilon = 1e-15);
        assert_abs_diff_eq!(s[2].offset, r, epsilon = 1e-15);
        assert_abs_diff_eq!(s[3].offset, -r, epsilon = 1e-15);
    }

    #[test]
    fn ball_circumscription_gap() {
        let ball = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let hs = ball.supporting_halfspaces_with(8);
        assert_eq!(hs.len(), 8);
        // vertices of the circumscribed octagon sit at angle pi/8 between normals
        let t = std::f64::consts::PI / 8.0;
        let r = 1.0 / t.cos();
        let vertex = [r * t.cos(), r * t.sin()];
        assert!(hs.iter().all(|h| h.excess(&vertex) <= 1e-12));
        assert_abs_diff_eq!(r - 1.0, ball_outer_gap(8), epsilon = 1e-15);
        assert!(ball_outer_gap(DEFAULT_BALL_NORMALS) < 1.3e-3);
    }

    #[test]
    fn membership_matches_halfspaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let n = rng.random_range(1..=5);
            let body = if rng.random_bool(0.5) {
                let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.0)).collect();
                let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.0..2.0)).collect();
                ConvexBody::boxed(lo, hi).unwrap()
            } else {
                ConvexBody::simplex(n, rng.random_range(0.5..2.0)).unwrap()
            };
            let x: Vec<f64> = match &body {
                ConvexBody::Simplex { total_mass, .. } => {
                    let mut y = body.sample(&mut rng);
                    // perturb within the affine hull so membership can fail
                    let i = rng.random_range(0..n);
                    let j = (i + 1) % n;
                    let t = rng.random_range(-0.5..0.5);
                    y[i] += t;
                    y[j] -= t;
                    if n == 1 {
                        y[0] = *total_mass;
                    }
                    y
                }
                _ => (0..n).map(|_| rng.random_range(-1.5..1.5)).collect(),
            };
            let inside = body.distance(&x) <= 1e-12;
            let by_faces = body.supporting_halfspaces().iter().all(|h| h.excess(&x) <= 1e-12);
            assert_eq!(inside, by_faces, "{body:?} {x:?}");
        }
    }
}
