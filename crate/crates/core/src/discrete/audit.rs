use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::grid::GridFunction;
use super::operator::DiscreteOperator;
use super::OperatorError;
use crate::geometry::ConvexBody;

/// Overshoot above which the audit fails.
pub const AUDIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct HalfspaceOvershoot {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub worst: f64,
}

/// Largest violation seen: resolvent step, sample index, node, output value.
#[derive(Debug, Clone, Serialize)]
pub struct InvarianceWitness {
    pub h: f64,
    pub sample: usize,
    pub node: usize,
    pub x: f64,
    pub value: Vec<f64>,
    pub halfspace: usize,
    pub overshoot: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub passed: bool,
    pub worst_overshoot: f64,
    pub samples: usize,
    pub steps: Vec<f64>,
    pub halfspaces: Vec<HalfspaceOvershoot>,
    pub witness: Option<InvarianceWitness>,
}

/// Applies `J_h` to seeded random grid functions with nodal values in `body`
/// and records how far the output leaves each supporting half-space.
pub fn invariance_audit(
    op: &DiscreteOperator,
    body: &ConvexBody,
    steps: &[f64],
    sample_count: usize,
    seed: u64,
) -> Result<InvarianceReport, OperatorError> {
    let n = op.grid().nodes;
    if body.dim() != op.components() {
        return Err(OperatorError::ShapeMismatch {
            nodes: n,
            components: op.components(),
            got_nodes: n,
            got_components: body.dim(),
        });
    }
    let faces = body.supporting_halfspaces();
    let mut worst: Vec<f64> = vec![0.0; faces.len()];
    let mut witness: Option<InvarianceWitness> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for sample in 0..sample_count {
        let data = GridFunction::from_nodes((0..n).map(|_| body.sample(&mut rng)).collect());
        for &h in steps {
            let out = op.resolvent(h, &data)?;
            for j in 0..n {
                let u = out.at(j);
                for (k, face) in faces.iter().enumerate() {
                    let excess = face.excess(u).max(0.0);
                    if excess > worst[k] {
                        worst[k] = excess;
                    }
                    if excess > witness.as_ref().map_or(0.0, |w| w.overshoot) {
                        witness = Some(InvarianceWitness {
                            h,
                            sample,
                            node: j,
                            x: op.grid().x(j),
                            value: u.to_vec(),
                            halfspace: k,
                            overshoot: excess,
                        });
                    }
                }
            }
        }
    }

    let worst_overshoot = worst.iter().copied().fold(0.0, f64::max);
    let passed = worst_overshoot <= AUDIT_TOL;
    let halfspaces = faces
        .into_iter()
        .zip(worst)
        .map(|(f, w)| HalfspaceOvershoot { normal: f.normal, offset: f.offset, worst: w })
        .collect();
    Ok(InvarianceReport {
        passed,
        worst_overshoot,
        samples: sample_count,
        steps: steps.to_vec(),
        halfspaces,
        witness: if passed { None } else { witness },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{BoundaryCondition, Coefficient, Grid1D, OperatorSpec};

    fn assembled(spec: OperatorSpec, n: usize) -> DiscreteOperator {
        let grid = Grid1D::new(1.0, n, spec.bc).unwrap();
        DiscreteOperator::assemble(&spec, &grid).unwrap()
    }

    #[test]
    fn neumann_box_is_invariant() {
        let op = assembled(
            OperatorSpec::new(Coefficient::Sine { mean: 1.0, amplitude: 0.5 }, BoundaryCondition::Neumann, 2)
                .with_drift(Coefficient::Constant(0.5)),
            101,
        );
        let body = ConvexBody::cube(2, 0.0, 1.0).unwrap();
        let report = invariance_audit(&op, &body, &[1e-3, 1e-1], 100, 3).unwrap();
        assert!(report.passed, "{:?}", report.worst_overshoot);
        assert!(report.witness.is_none());
    }

    #[test]
    fn dirichlet_with_origin_passes() {
        let op = assembled(OperatorSpec::laplacian(BoundaryCondition::Dirichlet, 1), 51);
        let body = ConvexBody::cube(1, -1.0, 1.0).unwrap();
        assert!(invariance_audit(&op, &body, &[1e-2], 100, 3).unwrap().passed);
    }

    #[test]
    fn dirichlet_without_origin_fails_with_witness() {
        let op = assembled(OperatorSpec::laplacian(BoundaryCondition::Dirichlet, 1), 51);
        let body = ConvexBody::cube(1, 0.5, 1.0).unwrap();
        let report = invariance_audit(&op, &body, &[1e-2], 10, 3).unwrap();
        assert!(!report.passed);
        let w = report.witness.unwrap();
        // the wall value 0 sits 0.5 below the lower face
        assert!((w.overshoot - 0.5).abs() < 1e-12);
        assert_eq!(w.value, vec![0.0]);
        assert!(w.node == 0 || w.node == 50);
    }

    #[test]
    fn ball_constraint_is_invariant_under_periodic_diffusion() {
        let op = assembled(OperatorSpec::laplacian(BoundaryCondition::Periodic, 2), 40);
        let body = ConvexBody::ball(vec![0.2, -0.1], 0.7).unwrap();
        assert!(invariance_audit(&op, &body, &[1e-2, 1.0], 50, 9).unwrap().passed);
    }

    #[test]
    fn audit_is_deterministic() {
        let op = assembled(OperatorSpec::laplacian(BoundaryCondition::Dirichlet, 1), 21);
        let body = ConvexBody::cube(1, 0.2, 1.0).unwrap();
        let a = serde_json::to_string(&invariance_audit(&op, &body, &[0.1], 20, 4).unwrap()).unwrap();
        let b = serde_json::to_string(&invariance_audit(&op, &body, &[0.1], 20, 4).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
