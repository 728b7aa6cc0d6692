use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex};

use super::grid::{BoundaryCondition, Grid1D, GridFunction};
use super::tridiag::{CyclicLu, TridiagLu};
use super::OperatorError;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

// harmonic step schedules produce a fresh h every iteration
const MAX_CACHED_FACTORS: usize = 64;

/// Spatially varying coefficient on `[0, length]`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    /// `mean + amplitude * sin(2 pi x / length)`
    Sine {
        mean: f64,
        amplitude: f64,
    },
    Function(ScalarFn),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Sine { mean, amplitude } => write!(f, "Sine {{ mean: {mean}, amplitude: {amplitude} }}"),
            Coefficient::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl Coefficient {
    pub fn function<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Coefficient::Function(Arc::new(f))
    }

    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Sine { mean, amplitude } => mean + amplitude * (2.0 * PI * x / length).sin(),
            Coefficient::Function(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Constant(c) if *c == 0.0)
            || matches!(self, Coefficient::Sine { mean, amplitude } if *mean == 0.0 && *amplitude == 0.0)
    }
}

/// `A = d(x) u'' + d'(x) u' - gamma(x) u' + shift * u`, acting identically on
/// every component.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub diffusion: Coefficient,
    pub drift: Coefficient,
    pub bc: BoundaryCondition,
    /// Added to the diagonal; the resolvent needs `h * shift < 1`.
    pub shift: f64,
    pub components: usize,
}

impl OperatorSpec {
    pub fn new(diffusion: Coefficient, bc: BoundaryCondition, components: usize) -> Self {
        Self { diffusion, drift: Coefficient::Constant(0.0), bc, shift: 0.0, components }
    }

    pub fn laplacian(bc: BoundaryCondition, components: usize) -> Self {
        Self::new(Coefficient::Constant(1.0), bc, components)
    }

    pub fn with_drift(mut self, drift: Coefficient) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    /// Diffusion at the half nodes `x_{j+1/2}`, `j = 0..cells`.
    fn half_node_diffusion(&self, grid: &Grid1D) -> Vec<f64> {
        let dx = grid.dx();
        let cells = if grid.periodic { grid.nodes } else { grid.nodes - 1 };
        (0..cells).map(|j| self.diffusion.eval((j as f64 + 0.5) * dx, grid.length)).collect()
    }

    fn node_drift(&self, grid: &Grid1D) -> Vec<f64> {
        grid.coordinates().into_iter().map(|x| self.drift.eval(x, grid.length)).collect()
    }

    /// Smallest diffusion value over nodes and half nodes.
    pub fn min_diffusion(&self, grid: &Grid1D) -> f64 {
        let nodes = grid.coordinates().into_iter().map(|x| self.diffusion.eval(x, grid.length));
        self.half_node_diffusion(grid).into_iter().chain(nodes).fold(f64::INFINITY, f64::min)
    }

    pub fn max_drift(&self, grid: &Grid1D) -> f64 {
        self.node_drift(grid).into_iter().map(f64::abs).fold(0.0, f64::max)
    }

    pub fn validate(&self, grid: &Grid1D) -> Result<(), OperatorError> {
        if self.components == 0 {
            return Err(OperatorError::InvalidSpec("operator needs at least one component".into()));
        }
        if grid.periodic != (self.bc == BoundaryCondition::Periodic) {
            return Err(OperatorError::InvalidSpec("grid and boundary condition disagree on periodicity".into()));
        }
        let d0 = self.min_diffusion(grid);
        if !(d0 > 0.0) || !d0.is_finite() {
            return Err(OperatorError::InvalidSpec(format!("diffusion must be positive, minimum is {d0}")));
        }
        let g = self.max_drift(grid);
        if !g.is_finite() {
            return Err(OperatorError::InvalidSpec("drift is not finite".into()));
        }
        if !self.shift.is_finite() {
            return Err(OperatorError::InvalidSpec("shift is not finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug)]
enum Factor {
    Banded(TridiagLu),
    Cyclic(CyclicLu),
}

/// Assembled tridiagonal (cyclic for periodic grids) stencil for one scalar
/// component. Immutable after assembly; factorizations are cached per
/// `(alpha, beta)` pair of `alpha I - beta A`.
pub struct DiscreteOperator {
    grid: Grid1D,
    bc: BoundaryCondition,
    components: usize,
    shift: f64,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    // A[0][n-1] and A[n-1][0] for periodic grids
    top_right: f64,
    bottom_left: f64,
    min_diffusion: f64,
    max_drift: f64,
    cache: Mutex<HashMap<(u64, u64), Arc<Factor>>>,
}

impl fmt::Debug for DiscreteOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteOperator")
            .field("grid", &self.grid)
            .field("bc", &self.bc)
            .field("components", &self.components)
            .field("shift", &self.shift)
            .finish_non_exhaustive()
    }
}

impl DiscreteOperator {
    pub fn assemble(spec: &OperatorSpec, grid: &Grid1D) -> Result<Self, OperatorError> {
        spec.validate(grid)?;
        let n = grid.nodes;
        let dx = grid.dx();
        let dx2 = dx * dx;
        let dh = spec.half_node_diffusion(grid);
        let gamma = spec.node_drift(grid);
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let (mut top_right, mut bottom_left) = (0.0, 0.0);

        match spec.bc {
            BoundaryCondition::Periodic => {
                for j in 0..n {
                    let left = dh[(j + n - 1) % n];
                    let right = dh[j];
                    sub[j] = left / dx2 + gamma[j] / (2.0 * dx);
                    sup[j] = right / dx2 - gamma[j] / (2.0 * dx);
                    diag[j] = -(left + right) / dx2;
                }
                top_right = sub[0];
                bottom_left = sup[n - 1];
                sub[0] = 0.0;
                sup[n - 1] = 0.0;
            }
            BoundaryCondition::Neumann | BoundaryCondition::Dirichlet => {
                for j in 1..n - 1 {
                    sub[j] = dh[j - 1] / dx2 + gamma[j] / (2.0 * dx);
                    sup[j] = dh[j] / dx2 - gamma[j] / (2.0 * dx);
                    diag[j] = -(dh[j - 1] + dh[j]) / dx2;
                }
                if spec.bc == BoundaryCondition::Neumann {
                    // ghost node u_{-1} = u_1, so the drift term vanishes at the wall
                    diag[0] = -2.0 * dh[0] / dx2;
                    sup[0] = 2.0 * dh[0] / dx2;
                    diag[n - 1] = -2.0 * dh[n - 2] / dx2;
                    sub[n - 1] = 2.0 * dh[n - 2] / dx2;
                } else {
                    sub[1] = 0.0;
                    sup[n - 2] = 0.0;
                }
            }
        }
        let interior = if spec.bc == BoundaryCondition::Dirichlet { 1..n - 1 } else { 0..n };
        for j in interior {
            diag[j] += spec.shift;
        }

        let op = Self {
            grid: *grid,
            bc: spec.bc,
            components: spec.components,
            shift: spec.shift,
            sub,
            diag,
            sup,
            top_right,
            bottom_left,
            min_diffusion: spec.min_diffusion(grid),
            max_drift: spec.max_drift(grid),
            cache: Mutex::new(HashMap::new()),
        };
        if !op.satisfies_m_matrix() {
            log::warn!(
                "dx = {} exceeds 2 d0 / |gamma| = {}; the discrete maximum principle may fail",
                dx,
                2.0 * op.min_diffusion / op.max_drift
            );
        }
        Ok(op)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn min_diffusion(&self) -> f64 {
        self.min_diffusion
    }

    pub fn max_drift(&self) -> f64 {
        self.max_drift
    }

    /// Off-diagonal entries are nonnegative when `dx <= 2 d0 / |gamma|`.
    pub fn satisfies_m_matrix(&self) -> bool {
        self.max_drift == 0.0 || self.grid.dx() <= 2.0 * self.min_diffusion / self.max_drift
    }

    /// Whether node `j` is a Dirichlet boundary node (value pinned to 0).
    pub fn is_pinned(&self, j: usize) -> bool {
        self.bc == BoundaryCondition::Dirichlet && (j == 0 || j + 1 == self.grid.nodes)
    }

    fn check_shape(&self, u: &GridFunction) -> Result<(), OperatorError> {
        if u.nodes() != self.grid.nodes || u.components() != self.components {
            return Err(OperatorError::ShapeMismatch {
                nodes: self.grid.nodes,
                components: self.components,
                got_nodes: u.nodes(),
                got_components: u.components(),
            });
        }
        Ok(())
    }

    /// Stencil action on one component. Dirichlet boundary values are treated
    /// as zero and the boundary rows return zero.
    pub fn apply_scalar(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let mut out = vec![0.0; n];
        for j in 0..n {
            if self.is_pinned(j) {
                continue;
            }
            let mut s = self.diag[j] * u[j];
            if j > 0 && !self.is_pinned(j - 1) {
                s += self.sub[j] * u[j - 1];
            }
            if j + 1 < n && !self.is_pinned(j + 1) {
                s += self.sup[j] * u[j + 1];
            }
            out[j] = s;
        }
        if self.bc == BoundaryCondition::Periodic {
            out[0] += self.top_right * u[n - 1];
            out[n - 1] += self.bottom_left * u[0];
        }
        out
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction, OperatorError> {
        self.check_shape(u)?;
        let mut out = GridFunction::zeros(u.nodes(), u.components());
        for i in 0..self.components {
            out.set_component(i, &self.apply_scalar(&u.component(i)));
        }
        Ok(out)
    }

    /// Dense matrix of the scalar stencil, row-major. Dirichlet boundary rows
    /// and columns are zero.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.grid.nodes;
        let columns: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                self.apply_scalar(&e)
            })
            .collect();
        (0..n).map(|row| (0..n).map(|col| columns[col][row]).collect()).collect()
    }

    fn factor(&self, alpha: f64, beta: f64) -> Result<Arc<Factor>, OperatorError> {
        let key = (alpha.to_bits(), beta.to_bits());
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(f) = cache.get(&key) {
            return Ok(Arc::clone(f));
        }
        let n = self.grid.nodes;
        let mut sub: Vec<f64> = self.sub.iter().map(|a| -beta * a).collect();
        let mut diag: Vec<f64> = self.diag.iter().map(|a| alpha - beta * a).collect();
        let mut sup: Vec<f64> = self.sup.iter().map(|a| -beta * a).collect();
        let singular =
            || OperatorError::SingularSystem(format!("{alpha} I - {beta} A is singular for {:?} conditions", self.bc));
        let factor = match self.bc {
            BoundaryCondition::Periodic => Factor::Cyclic(
                CyclicLu::factor(&sub, &diag, &sup, -beta * self.top_right, -beta * self.bottom_left)
                    .ok_or_else(singular)?,
            ),
            _ => {
                if self.bc == BoundaryCondition::Dirichlet {
                    for j in [0, n - 1] {
                        sub[j] = 0.0;
                        sup[j] = 0.0;
                        diag[j] = 1.0;
                    }
                }
                Factor::Banded(TridiagLu::factor(&sub, &diag, &sup).ok_or_else(singular)?)
            }
        };
        if cache.len() >= MAX_CACHED_FACTORS {
            cache.clear();
        }
        let factor = Arc::new(factor);
        cache.insert(key, Arc::clone(&factor));
        Ok(factor)
    }

    /// Solves `(alpha I - beta A) u = f` componentwise. Dirichlet boundary
    /// values of the solution are zero.
    pub fn solve_shifted(&self, alpha: f64, beta: f64, f: &GridFunction) -> Result<GridFunction, OperatorError> {
        self.check_shape(f)?;
        if self.shift > 0.0 && alpha > 0.0 && beta * self.shift >= alpha {
            return Err(OperatorError::SingularSystem(format!(
                "step {} times shift {} is not below 1",
                beta / alpha,
                self.shift
            )));
        }
        if alpha == 0.0 && self.shift == 0.0 && self.bc != BoundaryCondition::Dirichlet {
            return Err(OperatorError::SingularSystem(format!(
                "{:?} operator without shift has constants in its kernel",
                self.bc
            )));
        }
        let factor = self.factor(alpha, beta)?;
        let n = self.grid.nodes;
        let mut out = GridFunction::zeros(n, self.components);
        for i in 0..self.components {
            let rhs = f.component(i);
            let mut x = rhs.clone();
            if self.bc == BoundaryCondition::Dirichlet {
                x[0] = 0.0;
                x[n - 1] = 0.0;
            }
            match factor.as_ref() {
                Factor::Banded(lu) => lu.solve_in_place(&mut x),
                Factor::Cyclic(lu) => lu.solve_in_place(&mut x),
            }
            let ax = self.apply_scalar(&x);
            let scale = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let defect = (0..n)
                .filter(|&j| !self.is_pinned(j))
                .map(|j| (alpha * x[j] - beta * ax[j] - rhs[j]).abs())
                .fold(0.0, f64::max);
            if !(defect <= 1e-10 * scale.max(1.0) * (1.0 + alpha.abs() + beta.abs())) {
                return Err(OperatorError::SingularSystem(format!(
                    "solve defect {defect:e} for data of size {scale:e}"
                )));
            }
            out.set_component(i, &x);
        }
        Ok(out)
    }

    /// `J_h f = (I - hA)^{-1} f`.
    pub fn resolvent(&self, h: f64, f: &GridFunction) -> Result<GridFunction, OperatorError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(OperatorError::InvalidSpec(format!("resolvent step must be positive, got {h}")));
        }
        self.solve_shifted(1.0, h, f)
    }

    /// Solves `-A u = f`.
    pub fn solve_negative(&self, f: &GridFunction) -> Result<GridFunction, OperatorError> {
        self.solve_shifted(0.0, 1.0, f)
    }

    /// `J_{t/m}^m u0`, the implicit Euler approximation of the flow at time `t`.
    pub fn semigroup_powers(&self, t: f64, m: usize, u0: &GridFunction) -> Result<GridFunction, OperatorError> {
        if !(t > 0.0) || m == 0 {
            return Err(OperatorError::InvalidSpec(format!("need t > 0 and m >= 1, got t = {t}, m = {m}")));
        }
        let h = t / m as f64;
        let mut u = u0.clone();
        for _ in 0..m {
            u = self.resolvent(h, &u)?;
        }
        Ok(u)
    }

    /// Nodal gradient using the stencil's central differences: one-sided at
    /// Dirichlet walls, zero at Neumann walls, wrapped for periodic grids.
    pub fn gradient(&self, u: &GridFunction) -> GridFunction {
        let n = u.nodes();
        let dx = self.grid.dx();
        let mut out = GridFunction::zeros(n, u.components());
        for i in 0..u.components() {
            let c = u.component(i);
            let g: Vec<f64> = (0..n)
                .map(|j| match self.bc {
                    BoundaryCondition::Periodic => (c[(j + 1) % n] - c[(j + n - 1) % n]) / (2.0 * dx),
                    _ if j == 0 => match self.bc {
                        BoundaryCondition::Neumann => 0.0,
                        _ => (c[1] - c[0]) / dx,
                    },
                    _ if j == n - 1 => match self.bc {
                        BoundaryCondition::Neumann => 0.0,
                        _ => (c[n - 1] - c[n - 2]) / dx,
                    },
                    _ => (c[j + 1] - c[j - 1]) / (2.0 * dx),
                })
                .collect();
            out.set_component(i, &g);
        }
        out
    }
}

fn central_gradient(c: &[f64], dx: f64, periodic: bool) -> Vec<f64> {
    let n = c.len();
    (0..n)
        .map(|j| {
            if periodic {
                (c[(j + 1) % n] - c[(j + n - 1) % n]) / (2.0 * dx)
            } else if j == 0 {
                (c[1] - c[0]) / dx
            } else if j == n - 1 {
                (c[n - 1] - c[n - 2]) / dx
            } else {
                (c[j + 1] - c[j - 1]) / (2.0 * dx)
            }
        })
        .collect()
}

/// Discrete bilinear form `sum_cells d (du)(dv)/dx + sum_nodes w gamma u' v`,
/// summed over components. Equals `-<Au, v>` up to boundary corrections.
pub fn quadratic_form(spec: &OperatorSpec, grid: &Grid1D, u: &GridFunction, v: &GridFunction) -> f64 {
    let dx = grid.dx();
    let n = grid.nodes;
    let dh = spec.half_node_diffusion(grid);
    let gamma = spec.node_drift(grid);
    let w = grid.weights();
    let mut total = 0.0;
    for i in 0..u.components() {
        let (cu, cv) = (u.component(i), v.component(i));
        for (k, d) in dh.iter().enumerate() {
            let next = (k + 1) % n;
            total += d * (cu[next] - cu[k]) * (cv[next] - cv[k]) / dx;
        }
        let gu = central_gradient(&cu, dx, grid.periodic);
        total += (0..n).map(|j| w[j] * gamma[j] * gu[j] * cv[j]).sum::<f64>();
    }
    total
}

/// `sum_cells (du)^2 / dx`, the discrete squared H1 seminorm.
pub fn gradient_norm_sq(grid: &Grid1D, u: &GridFunction) -> f64 {
    let dx = grid.dx();
    let n = grid.nodes;
    let cells = if grid.periodic { n } else { n - 1 };
    (0..u.components())
        .map(|i| {
            let c = u.component(i);
            (0..cells).map(|k| (c[(k + 1) % n] - c[k]).powi(2) / dx).sum::<f64>()
        })
        .sum()
}

/// Constants `(c, C)` with `c |u'|^2 <= a(u, u) + C |u|^2`:
/// `c = d0 / 2`, `C = |gamma|^2 / (2 d0)`.
pub fn garding_constants(spec: &OperatorSpec, grid: &Grid1D) -> (f64, f64) {
    let d0 = spec.min_diffusion(grid);
    let g = spec.max_drift(grid);
    (0.5 * d0, g * g / (2.0 * d0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn op(spec: &OperatorSpec, n: usize) -> DiscreteOperator {
        let grid = Grid1D::new(1.0, n, spec.bc).unwrap();
        DiscreteOperator::assemble(spec, &grid).unwrap()
    }

    fn scalar(values: Vec<f64>) -> GridFunction {
        GridFunction::from_nodes(values.into_iter().map(|v| vec![v]).collect())
    }

    fn specs() -> Vec<OperatorSpec> {
        let mut out = Vec::new();
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann, BoundaryCondition::Periodic] {
            out.push(OperatorSpec::laplacian(bc, 1));
            out.push(
                OperatorSpec::new(Coefficient::Sine { mean: 1.0, amplitude: 0.5 }, bc, 1)
                    .with_drift(Coefficient::function(|x| 0.5 + x)),
            );
        }
        out
    }

    // (I - hA) restricted to the unknowns that are not pinned
    fn dense_resolvent(a: &DiscreteOperator, h: f64, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let m = a.dense();
        let free: Vec<usize> = (0..n).filter(|&j| !a.is_pinned(j)).collect();
        let k = free.len();
        let mat = DMatrix::from_fn(k, k, |r, c| {
            let delta = if r == c { 1.0 } else { 0.0 };
            delta - h * m[free[r]][free[c]]
        });
        let rhs = DVector::from_iterator(k, free.iter().map(|&j| f[j]));
        let sol = mat.lu().solve(&rhs).unwrap();
        let mut out = vec![0.0; n];
        for (r, &j) in free.iter().enumerate() {
            out[j] = sol[r];
        }
        out
    }

    #[test]
    fn neumann_annihilates_constants() {
        let a = op(&OperatorSpec::laplacian(BoundaryCondition::Neumann, 2), 11);
        let u = GridFunction::constant(11, &[3.0, -1.5]);
        assert!(a.apply(&u).unwrap().max_abs() < 1e-12);
        let sine = op(
            &OperatorSpec::new(Coefficient::Sine { mean: 1.0, amplitude: 0.5 }, BoundaryCondition::Neumann, 2)
                .with_drift(Coefficient::Constant(0.7)),
            11,
        );
        assert!(sine.apply(&u).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn dirichlet_single_interior_node() {
        let a = op(&OperatorSpec::laplacian(BoundaryCondition::Dirichlet, 1), 3);
        let au = a.apply(&scalar(vec![0.0, 1.0, 0.0])).unwrap();
        assert_eq!(au.component(0), vec![0.0, -8.0, 0.0]);
        let u = a.resolvent(0.125, &scalar(vec![1.0, 1.0, 1.0])).unwrap();
        assert!((u.at(1)[0] - 0.5).abs() < 1e-15);
        assert_eq!(u.at(0)[0], 0.0);
        assert_eq!(u.at(2)[0], 0.0);
    }

    #[test]
    fn periodic_sine_is_eigenfunction_to_second_order() {
        let mut errors = Vec::new();
        for n in [32, 64, 128] {
            let a = op(&OperatorSpec::laplacian(BoundaryCondition::Periodic, 1), n);
            let u = GridFunction::from_fn(a.grid(), |x| vec![(2.0 * PI * x).sin()]);
            let au = a.apply(&u).unwrap();
            let expected = u.lin_comb(-(2.0 * PI).powi(2), &u, 0.0);
            errors.push(au.max_abs_diff(&expected));
        }
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn resolvent_matches_dense_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in specs() {
            let a = op(&spec, 31);
            for h in [1e-3, 0.05, 1.0] {
                let f: Vec<f64> = (0..31).map(|_| rng.random_range(-1.0..1.0)).collect();
                let ours = a.resolvent(h, &scalar(f.clone())).unwrap().component(0);
                let oracle = dense_resolvent(&a, h, &f);
                let diff = ours.iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(diff <= 1e-12, "{:?} h={h}: {diff}", spec.bc);
            }
        }
    }

    #[test]
    fn resolvent_fixes_constants_under_neumann() {
        let a = op(&OperatorSpec::laplacian(BoundaryCondition::Neumann, 1), 21);
        let f = GridFunction::constant(21, &[0.7]);
        for h in [1e-4, 0.3, 50.0] {
            assert!(a.resolvent(h, &f).unwrap().max_abs_diff(&f) < 1e-12);
        }
    }

    #[test]
    fn shift_restricts_step() {
        let spec = OperatorSpec::laplacian(BoundaryCondition::Neumann, 1).with_shift(2.0);
        let a = op(&spec, 11);
        let f = GridFunction::constant(11, &[1.0]);
        assert!(a.resolvent(0.4, &f).is_ok());
        assert!(matches!(a.resolvent(0.5, &f), Err(OperatorError::SingularSystem(_))));
        // constants scale by 1 / (1 - h shift)
        let u = a.resolvent(0.25, &f).unwrap();
        assert!((u.at(3)[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pure_neumann_inverse_is_singular() {
        let a = op(&OperatorSpec::laplacian(BoundaryCondition::Neumann, 1), 11);
        let f = GridFunction::constant(11, &[1.0]);
        assert!(matches!(a.solve_negative(&f), Err(OperatorError::SingularSystem(_))));
    }

    #[test]
    fn dirichlet_inverse_matches_parabola() {
        // -u'' = 1, u(0) = u(1) = 0 is reproduced exactly by the stencil
        let a = op(&OperatorSpec::laplacian(BoundaryCondition::Dirichlet, 1), 21);
        let u = a.solve_negative(&GridFunction::constant(21, &[1.0])).unwrap();
        let exact = GridFunction::from_fn(a.grid(), |x| vec![0.5 * x * (1.0 - x)]);
        assert!(u.max_abs_diff(&exact) < 1e-12);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let grid = Grid1D::new(1.0, 11, BoundaryCondition::Neumann).unwrap();
        let bad = OperatorSpec::new(Coefficient::Sine { mean: 0.2, amplitude: 0.5 }, BoundaryCondition::Neumann, 1);
        assert!(matches!(DiscreteOperator::assemble(&bad, &grid), Err(OperatorError::InvalidSpec(_))));
        assert!(Grid1D::new(1.0, 2, BoundaryCondition::Neumann).is_err());
        let periodic = OperatorSpec::laplacian(BoundaryCondition::Periodic, 1);
        assert!(DiscreteOperator::assemble(&periodic, &grid).is_err());
    }

    #[test]
    fn m_matrix_condition() {
        let spec = OperatorSpec::laplacian(BoundaryCondition::Neumann, 1).with_drift(Coefficient::Constant(50.0));
        assert!(!op(&spec, 11).satisfies_m_matrix());
        assert!(op(&spec, 101).satisfies_m_matrix());
    }

    #[test]
    fn quadratic_form_examples() {
        let spec = OperatorSpec::laplacian(BoundaryCondition::Neumann, 1);
        let grid = Grid1D::new(1.0, 41, BoundaryCondition::Neumann).unwrap();
        let ramp = GridFunction::from_fn(&grid, |x| vec![x]);
        assert!((quadratic_form(&spec, &grid, &ramp, &ramp) - 1.0).abs() < 1e-12);
        let c = GridFunction::constant(41, &[2.5]);
        assert_eq!(quadratic_form(&spec, &grid, &c, &c), 0.0);
    }

    #[test]
    fn quadratic_form_is_symmetric_without_drift() {
        let spec = OperatorSpec::new(Coefficient::Sine { mean: 1.0, amplitude: 0.5 }, BoundaryCondition::Periodic, 2);
        let grid = Grid1D::new(2.0, 50, BoundaryCondition::Periodic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rand_fn =
            || GridFunction::from_nodes((0..50).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect());
        let (u, v) = (rand_fn(), rand_fn());
        let (a, b) = (quadratic_form(&spec, &grid, &u, &v), quadratic_form(&spec, &grid, &v, &u));
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn garding_estimate_holds_on_random_functions() {
        let spec = OperatorSpec::new(Coefficient::Sine { mean: 1.0, amplitude: 0.5 }, BoundaryCondition::Neumann, 1)
            .with_drift(Coefficient::function(|x| 3.0 * (5.0 * x).cos()));
        let grid = Grid1D::new(1.0, 101, BoundaryCondition::Neumann).unwrap();
        let (c, big_c) = garding_constants(&spec, &grid);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let u = GridFunction::from_nodes((0..101).map(|_| vec![rng.random_range(-1.0..1.0)]).collect());
            let lhs = c * gradient_norm_sq(&grid, &u);
            let l2 = u.weighted_norm(&grid).powi(2);
            let rhs = quadratic_form(&spec, &grid, &u, &u) + big_c * l2;
            assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn form_agrees_with_operator_pairing_under_neumann() {
        // -<Au, u> and a(u, u) differ only through the wall rows
        let spec = OperatorSpec::new(Coefficient::Sine { mean: 1.0, amplitude: 0.3 }, BoundaryCondition::Neumann, 1)
            .with_drift(Coefficient::Constant(0.8));
        let mut gaps = Vec::new();
        for n in [51, 101, 201] {
            let grid = Grid1D::new(1.0, n, BoundaryCondition::Neumann).unwrap();
            let a = DiscreteOperator::assemble(&spec, &grid).unwrap();
            let u = GridFunction::from_fn(&grid, |x| vec![(PI * x).cos() + x * x]);
            let au = a.apply(&u).unwrap();
            let w = grid.weights();
            let pairing: f64 = -(0..n).map(|j| w[j] * au.at(j)[0] * u.at(j)[0]).sum::<f64>();
            gaps.push((pairing - quadratic_form(&spec, &grid, &u, &u)).abs());
        }
        for pair in gaps.windows(2) {
            assert!(pair[0] / pair[1] > 3.5, "{gaps:?}");
        }
    }

    #[test]
    fn scalar_post_widder() {
        let a = op(&OperatorSpec::laplacian(BoundaryCondition::Dirichlet, 1), 3);
        let u = a.semigroup_powers(0.1, 10, &scalar(vec![0.0, 1.0, 0.0])).unwrap();
        let expected = 1.08f64.powi(-10);
        assert!((u.at(1)[0] - expected).abs() < 1e-14);
        assert!((expected - 0.46319).abs() < 5e-6);
        assert!(((-0.8f64).exp() - 0.44933).abs() < 5e-6);
    }

    #[test]
    fn semigroup_keeps_neumann_constants() {
        let a = op(&OperatorSpec::laplacian(BoundaryCondition::Neumann, 1), 15);
        let c = GridFunction::constant(15, &[-0.25]);
        assert!(a.semigroup_powers(3.0, 7, &c).unwrap().max_abs_diff(&c) < 1e-12);
    }

    #[test]
    fn gradient_conventions() {
        let grid = Grid1D::new(1.0, 11, BoundaryCondition::Dirichlet).unwrap();
        let a = DiscreteOperator::assemble(&OperatorSpec::laplacian(BoundaryCondition::Dirichlet, 1), &grid).unwrap();
        let u = GridFunction::from_fn(&grid, |x| vec![x * x]);
        let g = a.gradient(&u);
        assert!((g.at(5)[0] - 1.0).abs() < 1e-12);
        assert!((g.at(0)[0] - 0.1).abs() < 1e-12);
        let neumann = op(&OperatorSpec::laplacian(BoundaryCondition::Neumann, 1), 11);
        assert_eq!(neumann.gradient(&u).at(10)[0], 0.0);
    }

    #[test]
    fn cache_is_reused() {
        let a = op(&OperatorSpec::laplacian(BoundaryCondition::Periodic, 1), 16);
        let f = GridFunction::constant(16, &[1.0]);
        a.resolvent(0.1, &f).unwrap();
        a.resolvent(0.1, &f).unwrap();
        a.resolvent(0.2, &f).unwrap();
        assert_eq!(a.cache.lock().unwrap().len(), 2);
    }
}
