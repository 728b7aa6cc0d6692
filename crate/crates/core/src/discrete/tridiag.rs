//! Thomas algorithm and its cyclic (Sherman-Morrison) variant.

/// LU factors of a tridiagonal matrix `(sub, diag, sup)`, where row `i` reads
/// `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1]`. `sub[0]` and `sup[n-1]`
/// are ignored.
#[derive(Debug, Clone)]
pub struct TridiagLu {
    sub: Vec<f64>,
    sup_scaled: Vec<f64>,
    pivots: Vec<f64>,
}

impl TridiagLu {
    /// Returns `None` on a vanishing pivot.
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Option<Self> {
        let n = diag.len();
        let mut sup_scaled = vec![0.0; n];
        let mut pivots = vec![0.0; n];
        let scale = diag.iter().map(|d| d.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut pivot = diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = diag[i] - sub[i] * sup_scaled[i - 1];
            }
            if pivot.abs() <= 1e-14 * scale || !pivot.is_finite() {
                return None;
            }
            pivots[i] = pivot;
            sup_scaled[i] = if i + 1 < n { sup[i] / pivot } else { 0.0 };
        }
        Some(Self { sub: sub.to_vec(), sup_scaled, pivots })
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        rhs[0] /= self.pivots[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.sub[i] * rhs[i - 1]) / self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.sup_scaled[i] * rhs[i + 1];
        }
    }
}

/// Factorization of a cyclic tridiagonal matrix with corner entries
/// `top_right = A[0][n-1]` and `bottom_left = A[n-1][0]`.
#[derive(Debug, Clone)]
pub struct CyclicLu {
    lu: TridiagLu,
    // Sherman-Morrison correction vectors
    z: Vec<f64>,
    gamma: f64,
    bottom_left: f64,
    denom: f64,
}

impl CyclicLu {
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64], top_right: f64, bottom_left: f64) -> Option<Self> {
        let n = diag.len();
        let gamma = -diag[0];
        let mut modified = diag.to_vec();
        modified[0] -= gamma;
        modified[n - 1] -= top_right * bottom_left / gamma;
        let lu = TridiagLu::factor(sub, &modified, sup)?;
        let mut z = vec![0.0; n];
        z[0] = gamma;
        z[n - 1] = bottom_left;
        lu.solve_in_place(&mut z);
        let denom = 1.0 + z[0] + top_right * z[n - 1] / gamma;
        if denom.abs() <= 1e-14 || !denom.is_finite() {
            return None;
        }
        Some(Self { lu, z, gamma, bottom_left: top_right, denom })
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        self.lu.solve_in_place(rhs);
        // v = (1, 0, ..., 0, top_right / gamma)
        let factor = (rhs[0] + self.bottom_left * rhs[n - 1] / self.gamma) / self.denom;
        for (r, z) in rhs.iter_mut().zip(&self.z) {
            *r -= factor * z;
        }
    }
}
