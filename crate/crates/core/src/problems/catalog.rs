//! Named nonlinearities and test maps referenced from configs.

use std::path::Path;
use std::sync::Arc;

use super::config::{ConfigError, MapSection, NonlinearitySection};
use crate::io::Table;
use crate::setvalued::{FieldKind, NonlinearityField, VectorFn};

pub const CATALOG: [&str; 7] =
    ["linear", "constant", "logistic_cubic", "heaviside", "interval_linear", "quadratic_gradient", "tabulated"];

const DEFAULT_FILIPPOV_DELTA: f64 = 0.05;
const DEFAULT_FILIPPOV_SAMPLES: usize = 64;

fn params<const K: usize>(name: &str, p: &[f64], defaults: [f64; K]) -> Result<[f64; K], ConfigError> {
    if p.len() > K {
        return Err(ConfigError::Invalid(format!("{name} takes at most {K} parameters, got {}", p.len())));
    }
    let mut out = defaults;
    out[..p.len()].copy_from_slice(p);
    Ok(out)
}

/// Builds the field named in `section` for `components` components.
/// Relative table paths are resolved against `base_dir`.
pub fn build_field(
    section: &NonlinearitySection,
    components: usize,
    base_dir: &Path,
) -> Result<NonlinearityField, ConfigError> {
    let name = section.name.as_str();
    let p = &section.params;
    let field = match name {
        // a - b u
        "linear" => {
            let [a, b] = params(name, p, [0.0, 1.0])?;
            NonlinearityField::single_valued(name, move |_, u, _| u.iter().map(|ui| a - b * ui).collect())
        }
        "constant" => {
            let c =
                if p.is_empty() { vec![0.0; components] } else { super::config::broadcast(p, components, "constant")? };
            NonlinearityField::single_valued(name, move |_, _, _| c.clone())
        }
        // r u (1 - u) (u - theta)
        "logistic_cubic" => {
            let [r, theta] = params(name, p, [1.0, 0.4])?;
            NonlinearityField::single_valued(name, move |_, u, _| {
                u.iter().map(|ui| r * ui * (1.0 - ui) * (ui - theta)).collect()
            })
        }
        // switch at the threshold minus linear decay, Filippov-regularized
        "heaviside" => {
            let [threshold] = params(name, p, [0.5])?;
            let g = move |_: f64, u: &[f64], _: &[f64]| -> Vec<f64> {
                u.iter().map(|ui| if *ui >= threshold { 1.0 - ui } else { -ui }).collect()
            };
            NonlinearityField::filippov(
                name,
                g,
                section.filippov_delta.unwrap_or(DEFAULT_FILIPPOV_DELTA),
                section.filippov_samples.unwrap_or(DEFAULT_FILIPPOV_SAMPLES),
                section.filippov_seed.unwrap_or(0),
            )
        }
        // [a - b u - w, a - b u + w]
        "interval_linear" => {
            let [a, b, w] = params(name, p, [0.0, 1.0, 0.1])?;
            if w < 0.0 {
                return Err(ConfigError::Invalid(format!("interval half-width must be nonnegative, got {w}")));
            }
            NonlinearityField::interval_valued(
                name,
                move |_, u, _| u.iter().map(|ui| a - b * ui - w).collect(),
                move |_, u, _| u.iter().map(|ui| a - b * ui + w).collect(),
            )
        }
        // a - b u + q |u'|^2, componentwise
        "quadratic_gradient" => {
            let [a, b, q] = params(name, p, [0.0, 1.0, 0.0])?;
            NonlinearityField::single_valued(name, move |_, u, du| {
                u.iter().zip(du).map(|(ui, pi)| a - b * ui + q * pi * pi).collect()
            })
        }
        "tabulated" => {
            let rel = section
                .table
                .as_deref()
                .ok_or_else(|| ConfigError::Invalid("tabulated nonlinearity needs a 'table' path".into()))?;
            let path = base_dir.join(rel);
            let table = Table::load(&path)?;
            if table.components() != components {
                return Err(ConfigError::Invalid(format!(
                    "table {} has {} value columns, problem has {components} components",
                    path.display(),
                    table.components()
                )));
            }
            let lo = Arc::new(table);
            let hi = Arc::clone(&lo);
            NonlinearityField::interval_valued(name, move |x, u, _| lo.eval(x, u).0, move |x, u, _| hi.eval(x, u).1)
        }
        other => {
            return Err(ConfigError::Invalid(format!("unknown nonlinearity '{other}', expected one of {CATALOG:?}")))
        }
    };
    Ok(match section.bound {
        Some(b) if b >= 0.0 => field.with_bound(move |_| b),
        Some(b) => return Err(ConfigError::Invalid(format!("envelope bound must be nonnegative, got {b}"))),
        None => field,
    })
}

/// `F(x, u, p) - c u`, keeping the kind of `field`. The envelope, if any, is
/// widened by `c` times `radius`.
pub fn shifted_field(field: &NonlinearityField, c: f64, radius: f64) -> NonlinearityField {
    let minus = move |g: VectorFn| -> VectorFn {
        Arc::new(move |x, u, p| g(x, u, p).into_iter().zip(u).map(|(y, ui)| y - c * ui).collect())
    };
    let kind = match &field.kind {
        FieldKind::SingleValued(g) => FieldKind::SingleValued(minus(Arc::clone(g))),
        FieldKind::IntervalValued { lo, hi } => {
            FieldKind::IntervalValued { lo: minus(Arc::clone(lo)), hi: minus(Arc::clone(hi)) }
        }
        FieldKind::FilippovHull { g, delta, sample_count, seed } => {
            FieldKind::FilippovHull { g: minus(Arc::clone(g)), delta: *delta, sample_count: *sample_count, seed: *seed }
        }
    };
    let bound = field.bound.as_ref().map(|b| {
        let b = Arc::clone(b);
        Arc::new(move |x: f64| b(x) + c.abs() * radius) as crate::setvalued::EnvelopeFn
    });
    NonlinearityField { kind, bound, name: format!("{} - {c} u", field.name) }
}

/// Finite-dimensional map `M x + b (+ cubic_i x_i^3)` for the zero finder.
#[derive(Debug, Clone, PartialEq)]
pub struct TestMap {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub cubic: Vec<f64>,
}

impl TestMap {
    pub fn from_section(s: &MapSection) -> Result<Self, ConfigError> {
        let n = s.offset.len();
        if n == 0 || s.matrix.len() != n || s.matrix.iter().any(|r| r.len() != n) {
            return Err(ConfigError::Invalid(format!("map matrix must be {n}x{n} to match the offset")));
        }
        let cubic = match (s.kind.as_str(), &s.cubic) {
            ("affine", None) => vec![0.0; n],
            ("affine", Some(_)) => return Err(ConfigError::Invalid("affine map takes no cubic terms".into())),
            ("affine_cubic", Some(c)) => super::config::broadcast(c, n, "cubic")?,
            ("affine_cubic", None) => return Err(ConfigError::Invalid("affine_cubic map needs 'cubic'".into())),
            (other, _) => {
                return Err(ConfigError::Invalid(format!(
                    "unknown map kind '{other}', expected affine or affine_cubic"
                )))
            }
        };
        Ok(Self { matrix: s.matrix.clone(), offset: s.offset.clone(), cubic })
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .zip(&self.cubic)
            .enumerate()
            .map(|(i, ((row, b), c))| row.iter().zip(x).map(|(m, xi)| m * xi).sum::<f64>() + b + c * x[i].powi(3))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section(name: &str, params: Vec<f64>) -> NonlinearitySection {
        NonlinearitySection {
            name: name.into(),
            params,
            bound: None,
            table: None,
            filippov_delta: None,
            filippov_samples: None,
            filippov_seed: None,
        }
    }

    #[test]
    fn catalog_values() {
        let dir = Path::new(".");
        let f = build_field(&section("linear", vec![0.5, 1.0]), 1, dir).unwrap();
        assert_eq!(f.evaluate(0.0, &[0.2], &[0.0]).unwrap().lo, vec![0.3]);
        let f = build_field(&section("logistic_cubic", vec![1.0, 0.4]), 1, dir).unwrap();
        for root in [0.0, 0.4, 1.0] {
            assert_eq!(f.evaluate(0.0, &[root], &[0.0]).unwrap().lo[0].abs(), 0.0);
        }
        let f = build_field(&section("interval_linear", vec![1.0, 2.0, 0.25]), 2, dir).unwrap();
        let v = f.evaluate(0.0, &[0.5, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!((v.lo.clone(), v.hi.clone()), (vec![-0.25, 0.75], vec![0.25, 1.25]));
        let f = build_field(&section("quadratic_gradient", vec![0.0, 0.0, 1.0]), 1, dir).unwrap();
        assert_eq!(f.evaluate(0.0, &[0.0], &[3.0]).unwrap().lo, vec![9.0]);
        let f = build_field(&section("constant", vec![1.0, -1.0]), 2, dir).unwrap();
        assert_eq!(f.evaluate(0.0, &[0.0, 0.0], &[0.0, 0.0]).unwrap().lo, vec![1.0, -1.0]);
        assert!(build_field(&section("nope", vec![]), 1, dir).is_err());
        assert!(build_field(&section("linear", vec![1.0, 2.0, 3.0]), 1, dir).is_err());
    }

    #[test]
    fn heaviside_is_set_valued_at_the_switch() {
        let f = build_field(&section("heaviside", vec![0.5]), 1, Path::new(".")).unwrap();
        let v = f.evaluate(0.0, &[0.5], &[0.0]).unwrap();
        assert!(v.lo[0] < -0.4 && v.hi[0] > 0.4);
        let away = f.evaluate(0.0, &[0.9], &[0.0]).unwrap();
        assert!(away.hi[0] - away.lo[0] < 0.11);
    }

    #[test]
    fn shift_subtracts_linear_term() {
        let f = build_field(&section("constant", vec![1.0]), 1, Path::new(".")).unwrap().with_bound(|_| 1.0);
        let g = shifted_field(&f, 2.0, 3.0);
        assert_eq!(g.evaluate(0.0, &[3.0], &[0.0]).unwrap().lo, vec![-5.0]);
        let i = shifted_field(
            &build_field(&section("interval_linear", vec![0.0, 0.0, 1.0]), 1, Path::new(".")).unwrap(),
            1.0,
            1.0,
        );
        let v = i.evaluate(0.0, &[0.5], &[0.0]).unwrap();
        assert_eq!((v.lo[0], v.hi[0]), (-1.5, 0.5));
    }

    #[test]
    fn affine_map() {
        let s = MapSection {
            kind: "affine".into(),
            matrix: vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
            offset: vec![0.25, -0.5],
            cubic: None,
        };
        let m = TestMap::from_section(&s).unwrap();
        assert_eq!(m.eval(&[0.25, -0.5]), vec![0.0, 0.0]);
        let bad = MapSection { matrix: vec![vec![1.0]], ..s };
        assert!(TestMap::from_section(&bad).is_err());
    }
}
