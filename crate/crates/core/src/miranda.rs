//! Zero finding by sign conditions on a cube.
//!
//! [`bolzano_bisect`] handles the scalar case. [`miranda_solve`] subdivides an
//! `n`-cube along its longest axis, keeping a child whose face-sign
//! certificate still holds, and falls back to the child holding the smallest
//! sampled `|f|` when neither does (zeros on the splitting hyperplane).
//!
//! The certificate is sampled, not rigorous: it holds "up to the sampling
//! resolution".

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MirandaError {
    #[error("no sign change: f(a) = {fa}, f(b) = {fb}")]
    NoSignChange { fa: f64, fb: f64 },
    #[error("invalid cube: lo[{0}] >= hi[{0}]")]
    InvalidCube(usize),
    #[error("cube dimension {got} does not match map dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("face sign certificate fails on the initial cube")]
    CertificateFailed(Box<MirandaCertificate>),
    #[error("brute-force grid too large: {points} points in dimension {dim}")]
    GridTooLarge { dim: usize, points: f64 },
}

/// The product `Π [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cube {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cube {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, MirandaError> {
        if lo.len() != hi.len() {
            return Err(MirandaError::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if let Some(k) = lo.iter().zip(&hi).position(|(l, h)| !(l < h)) {
            return Err(MirandaError::InvalidCube(k));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(dim: usize, half_width: f64) -> Result<Self, MirandaError> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    /// Longest axis; ties go to the lowest index.
    pub fn longest_axis(&self) -> usize {
        let mut best = 0;
        for k in 1..self.dim() {
            if self.hi[k] - self.lo[k] > self.hi[best] - self.lo[best] {
                best = k;
            }
        }
        best
    }

    /// Splits at the midpoint of `axis` into (lower, upper) halves.
    pub fn split(&self, axis: usize) -> (Cube, Cube) {
        let mid = 0.5 * (self.lo[axis] + self.hi[axis]);
        let mut lower = self.clone();
        let mut upper = self.clone();
        lower.hi[axis] = mid;
        upper.lo[axis] = mid;
        (lower, upper)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Regular grid with `resolution` points per axis over the given axes;
    /// the remaining coordinates are taken from `base`.
    fn grid_points(&self, axes: &[usize], resolution: usize, base: &[f64]) -> Vec<Vec<f64>> {
        let r = resolution.max(2);
        let total = r.pow(axes.len() as u32);
        let mut out = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut x = base.to_vec();
            for &k in axes {
                let i = idx % r;
                idx /= r;
                x[k] = self.lo[k] + (self.hi[k] - self.lo[k]) * i as f64 / (r - 1) as f64;
            }
            out.push(x);
        }
        out
    }

    /// Sample points of the face `x_axis = lo` (`upper == false`) or `= hi`.
    pub fn face_points(&self, axis: usize, upper: bool, resolution: usize) -> Vec<Vec<f64>> {
        let mut base = self.center();
        base[axis] = if upper { self.hi[axis] } else { self.lo[axis] };
        let others: Vec<usize> = (0..self.dim()).filter(|&k| k != axis).collect();
        self.grid_points(&others, resolution, &base)
    }

    pub fn volume_points(&self, resolution: usize) -> Vec<Vec<f64>> {
        let axes: Vec<usize> = (0..self.dim()).collect();
        self.grid_points(&axes, resolution, &self.center())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceSide {
    Lower,
    Upper,
}

/// Sign verdict on one face: the extreme of `f_axis` seen on it (minimum on a
/// lower face, maximum on an upper face) and where it was attained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceVerdict {
    pub axis: usize,
    pub side: FaceSide,
    pub extreme: f64,
    pub witness: Vec<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    Holds,
    /// Holds, but some face touches zero within the margin tolerance.
    HoldsDegenerate,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MirandaCertificate {
    pub faces: Vec<FaceVerdict>,
    pub resolution: usize,
    pub margin: f64,
    pub status: CertificateStatus,
}

impl MirandaCertificate {
    pub fn holds(&self) -> bool {
        self.status != CertificateStatus::Fails
    }

    /// The worst failing face, if any.
    pub fn failing_face(&self) -> Option<&FaceVerdict> {
        self.faces.iter().filter(|f| !f.holds).reduce(|best, f| {
            if signed_violation(f) > signed_violation(best) {
                f
            } else {
                best
            }
        })
    }

    pub fn witnesses(&self) -> Vec<Vec<f64>> {
        self.faces.iter().map(|f| f.witness.clone()).collect()
    }
}

fn signed_violation(f: &FaceVerdict) -> f64 {
    match f.side {
        FaceSide::Lower => -f.extreme,
        FaceSide::Upper => f.extreme,
    }
}

const DEGENERATE_TOL: f64 = 1e-12;

/// Sampled check of `f_k >= margin` on every lower face `x_k = lo_k` and
/// `f_k <= -margin` on every upper face `x_k = hi_k`.
pub fn miranda_check<F>(f: &F, cube: &Cube, resolution: usize) -> MirandaCertificate
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    miranda_check_with(f, cube, resolution, 0.0, &[])
}

/// [`miranda_check`] with an explicit margin and extra points that are
/// re-tested on whichever faces they lie on (e.g. earlier witnesses).
pub fn miranda_check_with<F>(
    f: &F,
    cube: &Cube,
    resolution: usize,
    margin: f64,
    extra: &[Vec<f64>],
) -> MirandaCertificate
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = cube.dim();
    let mut faces = Vec::with_capacity(2 * n);
    let mut degenerate = false;
    for axis in 0..n {
        for side in [FaceSide::Lower, FaceSide::Upper] {
            let upper = side == FaceSide::Upper;
            let target = if upper { cube.hi[axis] } else { cube.lo[axis] };
            let mut points = cube.face_points(axis, upper, resolution);
            points.extend(extra.iter().filter(|p| p.len() == n && p[axis] == target && cube.contains(p)).cloned());
            let mut extreme = if upper { f64::NEG_INFINITY } else { f64::INFINITY };
            let mut witness = points[0].clone();
            for p in points {
                let v = f(&p)[axis];
                let worse = if upper { v > extreme } else { v < extreme } || v.is_nan();
                if worse {
                    extreme = v;
                    witness = p;
                }
            }
            let holds = if upper { extreme <= -margin } else { extreme >= margin };
            if holds && (extreme.abs() - margin).abs() <= DEGENERATE_TOL {
                degenerate = true;
            }
            faces.push(FaceVerdict { axis, side, extreme, witness, holds });
        }
    }
    let status = if faces.iter().any(|f| !f.holds) {
        CertificateStatus::Fails
    } else if degenerate {
        CertificateStatus::HoldsDegenerate
    } else {
        CertificateStatus::Holds
    };
    MirandaCertificate { faces, resolution, margin, status }
}

/// Bisection for a sign change of a continuous scalar function on `[a, b]`.
pub fn bolzano_bisect<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, MirandaError>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (a.min(b), a.max(b));
    let (mut fa, fb) = (f(a), f(b));
    if fa * fb > 0.0 || fa.is_nan() || fb.is_nan() {
        return Err(MirandaError::NoSignChange { fa, fb });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fa * fm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MirandaOptions {
    /// Target diameter of the final subcube.
    pub tol: f64,
    pub max_depth: usize,
    /// Face sampling points per axis.
    pub resolution: usize,
    pub margin: f64,
    /// Accept degenerate (zero-margin) certificates on the initial cube.
    pub trust_degenerate: bool,
}

impl Default for MirandaOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_depth: 200, resolution: 9, margin: 0.0, trust_degenerate: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MirandaStatus {
    Converged,
    /// `max_depth` reached before the diameter dropped below `tol`; the
    /// returned point is the best available.
    DepthExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MirandaSolution {
    pub zero: Vec<f64>,
    /// `|f(zero)|` (Euclidean).
    pub residual: f64,
    pub depth: usize,
    /// Number of subdivisions decided by the minimal-|f| fallback.
    pub fallbacks: usize,
    pub final_cube: Cube,
    pub status: MirandaStatus,
    pub certificate: MirandaCertificate,
}

fn abs_f<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64]) -> f64 {
    f(x).iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Certified bisection for a zero of `f` on `cube`.
pub fn miranda_solve<F>(f: &F, cube: &Cube, opts: &MirandaOptions) -> Result<MirandaSolution, MirandaError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = cube.dim();
    let probe = f(&cube.center());
    if probe.len() != n {
        return Err(MirandaError::DimensionMismatch { expected: probe.len(), got: n });
    }
    let certificate = miranda_check_with(f, cube, opts.resolution, opts.margin, &[]);
    let acceptable = match certificate.status {
        CertificateStatus::Holds => true,
        CertificateStatus::HoldsDegenerate => opts.trust_degenerate,
        CertificateStatus::Fails => false,
    };
    if !acceptable {
        return Err(MirandaError::CertificateFailed(Box::new(certificate)));
    }
    let mut current = cube.clone();
    let mut depth = 0;
    let mut fallbacks = 0;
    while current.diameter() > opts.tol && depth < opts.max_depth {
        let axis = current.longest_axis();
        let (lower, upper) = current.split(axis);
        let certified = |child: &Cube| miranda_check_with(f, child, opts.resolution, opts.margin, &[]).holds();
        current = if certified(&lower) {
            lower
        } else if certified(&upper) {
            upper
        } else {
            fallbacks += 1;
            let best =
                |c: &Cube| c.volume_points(opts.resolution).iter().map(|p| abs_f(f, p)).fold(f64::INFINITY, f64::min);
            if best(&lower) <= best(&upper) {
                lower
            } else {
                upper
            }
        };
        depth += 1;
    }
    let zero = current.center();
    let residual = abs_f(f, &zero);
    let status = if current.diameter() <= opts.tol {
        MirandaStatus::Converged
    } else {
        log::warn!("miranda_solve: depth limit {} reached at diameter {:.3e}", opts.max_depth, current.diameter());
        MirandaStatus::DepthExceeded
    };
    Ok(MirandaSolution { zero, residual, depth, fallbacks, final_cube: current, status, certificate })
}

/// Argmin of `|f|` over a regular grid with `grid` points per axis.
/// Ties resolve to the first point in axis-0-fastest order.
pub fn brute_force_zero<F>(f: &F, cube: &Cube, grid: usize) -> Result<Vec<f64>, MirandaError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = cube.dim();
    let points = (grid.max(2) as f64).powi(n as i32);
    if n > 3 || points > 1e7 {
        return Err(MirandaError::GridTooLarge { dim: n, points });
    }
    let r = grid.max(2);
    let mut best = (f64::INFINITY, cube.center());
    let mut x = vec![0.0; n];
    for idx0 in 0..points as usize {
        let mut idx = idx0;
        for (k, xk) in x.iter_mut().enumerate() {
            let i = idx % r;
            idx /= r;
            *xk = cube.lo[k] + (cube.hi[k] - cube.lo[k]) * i as f64 / (r - 1) as f64;
        }
        let v = abs_f(f, &x);
        if v < best.0 {
            best = (v, x.clone());
        }
    }
    Ok(best.1)
}
