//! INI-style problem configuration.
//!
//! Lists are whitespace or comma separated; per-component lists are
//! separated by `;`, and a single entry is broadcast to every component.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ini::{Ini, ParseOption};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("[{section}] {key}: {message}")]
    Value { section: String, key: String, message: String },
    #[error("missing [{section}] {key}")]
    Missing { section: String, key: String },
    #[error("unknown key [{section}] {key}")]
    UnknownKey { section: String, key: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("{0}")]
    Invalid(String),
}

/// Coefficient as written in a config: a number or `sine <mean> <amplitude>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientConfig {
    Constant(f64),
    Sine { mean: f64, amplitude: f64 },
}

impl FromStr for CoefficientConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = tokens(s);
        match parts.as_slice() {
            [v] => v.parse().map(CoefficientConfig::Constant).map_err(|_| format!("not a number: {v}")),
            ["sine", mean, amp] => Ok(CoefficientConfig::Sine {
                mean: mean.parse().map_err(|_| format!("not a number: {mean}"))?,
                amplitude: amp.parse().map_err(|_| format!("not a number: {amp}"))?,
            }),
            _ => Err(format!("expected a number or 'sine <mean> <amplitude>', got '{s}'")),
        }
    }
}

impl std::fmt::Display for CoefficientConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoefficientConfig::Constant(c) => write!(f, "{c}"),
            CoefficientConfig::Sine { mean, amplitude } => write!(f, "sine {mean} {amplitude}"),
        }
    }
}

fn tokens(s: &str) -> Vec<&str> {
    s.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect()
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    tokens(s).into_iter().map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t}"))).collect()
}

fn parse_groups(s: &str) -> Result<Vec<Vec<f64>>, String> {
    s.split(';').map(parse_list).collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn fmt_groups(v: &[Vec<f64>]) -> String {
    v.iter().map(|g| fmt_list(g)).collect::<Vec<_>>().join("; ")
}

/// Expands a broadcastable per-component value to `n` entries.
pub fn broadcast<T: Clone>(v: &[T], n: usize, what: &str) -> Result<Vec<T>, ConfigError> {
    match v.len() {
        1 => Ok(vec![v[0].clone(); n]),
        k if k == n => Ok(v.to_vec()),
        k => Err(ConfigError::Invalid(format!("{what} has {k} entries, expected 1 or {n}"))),
    }
}

struct SectionReader<'a> {
    name: &'static str,
    entries: BTreeMap<&'a str, &'a str>,
}

impl<'a> SectionReader<'a> {
    fn raw(&mut self, key: &str) -> Option<&'a str> {
        self.entries.remove(key)
    }

    fn opt<T, F>(&mut self, key: &str, parse: F) -> Result<Option<T>, ConfigError>
    where
        F: FnOnce(&str) -> Result<T, String>,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => parse(v.trim()).map(Some).map_err(|message| ConfigError::Value {
                section: self.name.into(),
                key: key.into(),
                message,
            }),
        }
    }

    fn num<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        self.opt(key, |v| v.parse::<T>().map_err(|_| format!("cannot parse '{v}'")))
    }

    fn text(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        self.opt(key, |v| Ok(v.to_string()))
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.opt(key, parse_list)
    }

    fn groups(&mut self, key: &str) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        self.opt(key, parse_groups)
    }

    fn coefficient(&mut self, key: &str) -> Result<Option<CoefficientConfig>, ConfigError> {
        self.opt(key, str::parse)
    }

    fn required<T>(&self, key: &str, v: Option<T>) -> Result<T, ConfigError> {
        v.ok_or_else(|| ConfigError::Missing { section: self.name.into(), key: key.into() })
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.keys().next() {
            Some(k) => Err(ConfigError::UnknownKey { section: self.name.into(), key: (*k).into() }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSection {
    pub kind: String,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub length: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSection {
    pub bc: String,
    pub d: CoefficientConfig,
    pub gamma: Option<CoefficientConfig>,
    pub shift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearitySection {
    pub name: String,
    pub params: Vec<f64>,
    pub bound: Option<f64>,
    pub table: Option<String>,
    pub filippov_delta: Option<f64>,
    pub filippov_samples: Option<usize>,
    pub filippov_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSection {
    pub shape: String,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub mass: Option<f64>,
    /// Polynomial coefficients in x (constant term first), per component.
    pub alpha: Option<Vec<Vec<f64>>>,
    pub beta: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitialSection {
    pub value: Option<Vec<f64>>,
    pub random: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverSection {
    pub method: Option<String>,
    pub schedule: Option<String>,
    pub h0: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol_residual: Option<f64>,
    pub tol_step: Option<f64>,
    pub damping: Option<f64>,
    pub inner_max_iter: Option<usize>,
    pub inner_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifySection {
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub gradient_range: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditSection {
    pub steps: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulateSection {
    pub t_end: Option<f64>,
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinSection {
    pub radius: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub v_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSection {
    pub kind: String,
    /// Rows of the linear part.
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub cubic: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeSection {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MirandaSection {
    pub tol: Option<f64>,
    pub max_depth: Option<usize>,
    pub resolution: Option<usize>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSection {
    pub dir: Option<String>,
}

/// Parsed configuration file. Only keys present in the file are stored, so
/// serializing and re-parsing reproduces the same value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProblemConfig {
    pub problem: Option<ProblemSection>,
    pub grid: Option<GridSection>,
    pub operator: Option<OperatorSection>,
    pub nonlinearity: Option<NonlinearitySection>,
    pub constraint: Option<ConstraintSection>,
    pub initial: InitialSection,
    pub solver: SolverSection,
    pub verify: VerifySection,
    pub audit: AuditSection,
    pub simulate: SimulateSection,
    pub bernstein: Option<BernsteinSection>,
    pub map: Option<MapSection>,
    pub cube: Option<CubeSection>,
    pub miranda: MirandaSection,
    pub output: OutputSection,
}

const SECTIONS: [&str; 15] = [
    "problem",
    "grid",
    "operator",
    "nonlinearity",
    "constraint",
    "initial",
    "solver",
    "verify",
    "audit",
    "simulate",
    "bernstein",
    "map",
    "cube",
    "miranda",
    "output",
];

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let opts = ParseOption { enabled_escape: false, ..ParseOption::default() };
        let ini = Ini::load_from_str_opt(text, opts).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut sections: BTreeMap<&str, BTreeMap<&str, &str>> = BTreeMap::new();
        for (name, props) in ini.iter() {
            let name = match name {
                Some(n) => n,
                None if props.is_empty() => continue,
                None => return Err(ConfigError::Syntax("keys outside of any section".into())),
            };
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection(name.into()));
            }
            let entry = sections.entry(name).or_default();
            for (k, v) in props.iter() {
                if entry.insert(k, v).is_some() {
                    return Err(ConfigError::Syntax(format!("duplicate key [{name}] {k}")));
                }
            }
        }
        let mut take = |name: &'static str| -> Option<SectionReader<'_>> {
            sections.remove(name).map(|entries| SectionReader { name, entries })
        };
        let mut cfg = ProblemConfig::default();

        if let Some(mut s) = take("problem") {
            let kind = s.text("kind")?;
            let components = s.num("components")?;
            cfg.problem = Some(ProblemSection { kind: s.required("kind", kind)?, components: components.unwrap_or(1) });
            s.finish()?;
        }
        if let Some(mut s) = take("grid") {
            let length = s.num("length")?;
            let nodes = s.num("nodes")?;
            cfg.grid = Some(GridSection { length: s.required("length", length)?, nodes: s.required("nodes", nodes)? });
            s.finish()?;
        }
        if let Some(mut s) = take("operator") {
            let bc = s.text("bc")?;
            let d = s.coefficient("d")?;
            cfg.operator = Some(OperatorSection {
                bc: s.required("bc", bc)?,
                d: d.unwrap_or(CoefficientConfig::Constant(1.0)),
                gamma: s.coefficient("gamma")?,
                shift: s.num("shift")?,
            });
            s.finish()?;
        }
        if let Some(mut s) = take("nonlinearity") {
            let name = s.text("name")?;
            cfg.nonlinearity = Some(NonlinearitySection {
                name: s.required("name", name)?,
                params: s.list("params")?.unwrap_or_default(),
                bound: s.num("bound")?,
                table: s.text("table")?,
                filippov_delta: s.num("filippov_delta")?,
                filippov_samples: s.num("filippov_samples")?,
                filippov_seed: s.num("filippov_seed")?,
            });
            s.finish()?;
        }
        if let Some(mut s) = take("constraint") {
            let shape = s.text("shape")?;
            cfg.constraint = Some(ConstraintSection {
                shape: s.required("shape", shape)?,
                lo: s.list("lo")?,
                hi: s.list("hi")?,
                center: s.list("center")?,
                radius: s.num("radius")?,
                mass: s.num("mass")?,
                alpha: s.groups("alpha")?,
                beta: s.groups("beta")?,
            });
            s.finish()?;
        }
        if let Some(mut s) = take("initial") {
            cfg.initial = InitialSection { value: s.list("value")?, random: s.num("random")?, seed: s.num("seed")? };
            s.finish()?;
        }
        if let Some(mut s) = take("solver") {
            cfg.solver = SolverSection {
                method: s.text("method")?,
                schedule: s.text("schedule")?,
                h0: s.num("h0")?,
                max_iter: s.num("max_iter")?,
                tol_residual: s.num("tol_residual")?,
                tol_step: s.num("tol_step")?,
                damping: s.num("damping")?,
                inner_max_iter: s.num("inner_max_iter")?,
                inner_tol: s.num("inner_tol")?,
            };
            s.finish()?;
        }
        if let Some(mut s) = take("verify") {
            cfg.verify = VerifySection {
                samples: s.num("samples")?,
                seed: s.num("seed")?,
                gradient_range: s.num("gradient_range")?,
            };
            s.finish()?;
        }
        if let Some(mut s) = take("audit") {
            cfg.audit = AuditSection { steps: s.list("steps")?, samples: s.num("samples")?, seed: s.num("seed")? };
            s.finish()?;
        }
        if let Some(mut s) = take("simulate") {
            cfg.simulate = SimulateSection { t_end: s.num("t_end")?, h: s.num("h")? };
            s.finish()?;
        }
        if let Some(mut s) = take("bernstein") {
            let (radius, a, b, c) = (s.num("radius")?, s.num("a")?, s.num("b")?, s.num("c")?);
            cfg.bernstein = Some(BernsteinSection {
                radius: s.required("radius", radius)?,
                a: s.required("a", a)?,
                b: s.required("b", b)?,
                c: s.required("c", c)?,
                v_max: s.num("v_max")?,
            });
            s.finish()?;
        }
        if let Some(mut s) = take("map") {
            let (kind, matrix, offset) = (s.text("kind")?, s.groups("matrix")?, s.list("offset")?);
            cfg.map = Some(MapSection {
                kind: s.required("kind", kind)?,
                matrix: s.required("matrix", matrix)?,
                offset: s.required("offset", offset)?,
                cubic: s.list("cubic")?,
            });
            s.finish()?;
        }
        if let Some(mut s) = take("cube") {
            let (lo, hi) = (s.list("lo")?, s.list("hi")?);
            cfg.cube = Some(CubeSection { lo: s.required("lo", lo)?, hi: s.required("hi", hi)? });
            s.finish()?;
        }
        if let Some(mut s) = take("miranda") {
            cfg.miranda = MirandaSection {
                tol: s.num("tol")?,
                max_depth: s.num("max_depth")?,
                resolution: s.num("resolution")?,
                margin: s.num("margin")?,
            };
            s.finish()?;
        }
        if let Some(mut s) = take("output") {
            cfg.output = OutputSection { dir: s.text("dir")? };
            s.finish()?;
        }
        Ok(cfg)
    }

    /// Canonical text form; `parse(to_ini_string())` reproduces `self`.
    pub fn to_ini_string(&self) -> String {
        let mut out = String::new();
        let mut section = |name: &str, entries: Vec<(&str, Option<String>)>| {
            let present: Vec<_> = entries.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect();
            if present.is_empty() {
                return;
            }
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (k, v) in present {
                let _ = writeln!(out, "{k} = {v}");
            }
        };
        let s = |v: &Option<String>| v.clone();
        let n = |v: Option<f64>| v.map(|x| x.to_string());
        let u = |v: Option<usize>| v.map(|x| x.to_string());
        let w = |v: Option<u64>| v.map(|x| x.to_string());
        let l = |v: &Option<Vec<f64>>| v.as_deref().map(fmt_list);
        let g = |v: &Option<Vec<Vec<f64>>>| v.as_deref().map(fmt_groups);

        if let Some(p) = &self.problem {
            section("problem", vec![("kind", Some(p.kind.clone())), ("components", Some(p.components.to_string()))]);
        }
        if let Some(p) = &self.grid {
            section("grid", vec![("length", Some(p.length.to_string())), ("nodes", Some(p.nodes.to_string()))]);
        }
        if let Some(p) = &self.operator {
            section(
                "operator",
                vec![
                    ("bc", Some(p.bc.clone())),
                    ("d", Some(p.d.to_string())),
                    ("gamma", p.gamma.map(|c| c.to_string())),
                    ("shift", n(p.shift)),
                ],
            );
        }
        if let Some(p) = &self.nonlinearity {
            section(
                "nonlinearity",
                vec![
                    ("name", Some(p.name.clone())),
                    ("params", (!p.params.is_empty()).then(|| fmt_list(&p.params))),
                    ("bound", n(p.bound)),
                    ("table", s(&p.table)),
                    ("filippov_delta", n(p.filippov_delta)),
                    ("filippov_samples", u(p.filippov_samples)),
                    ("filippov_seed", w(p.filippov_seed)),
                ],
            );
        }
        if let Some(p) = &self.constraint {
            section(
                "constraint",
                vec![
                    ("shape", Some(p.shape.clone())),
                    ("lo", l(&p.lo)),
                    ("hi", l(&p.hi)),
                    ("center", l(&p.center)),
                    ("radius", n(p.radius)),
                    ("mass", n(p.mass)),
                    ("alpha", g(&p.alpha)),
                    ("beta", g(&p.beta)),
                ],
            );
        }
        let p = &self.initial;
        section(
            "initial",
            vec![("value", l(&p.value)), ("random", p.random.map(|b| b.to_string())), ("seed", w(p.seed))],
        );
        let p = &self.solver;
        section(
            "solver",
            vec![
                ("method", s(&p.method)),
                ("schedule", s(&p.schedule)),
                ("h0", n(p.h0)),
                ("max_iter", u(p.max_iter)),
                ("tol_residual", n(p.tol_residual)),
                ("tol_step", n(p.tol_step)),
                ("damping", n(p.damping)),
                ("inner_max_iter", u(p.inner_max_iter)),
                ("inner_tol", n(p.inner_tol)),
            ],
        );
        let p = &self.verify;
        section(
            "verify",
            vec![("samples", u(p.samples)), ("seed", w(p.seed)), ("gradient_range", n(p.gradient_range))],
        );
        let p = &self.audit;
        section("audit", vec![("steps", l(&p.steps)), ("samples", u(p.samples)), ("seed", w(p.seed))]);
        let p = &self.simulate;
        section("simulate", vec![("t_end", n(p.t_end)), ("h", n(p.h))]);
        if let Some(p) = &self.bernstein {
            section(
                "bernstein",
                vec![
                    ("radius", Some(p.radius.to_string())),
                    ("a", Some(p.a.to_string())),
                    ("b", Some(p.b.to_string())),
                    ("c", Some(p.c.to_string())),
                    ("v_max", n(p.v_max)),
                ],
            );
        }
        if let Some(p) = &self.map {
            section(
                "map",
                vec![
                    ("kind", Some(p.kind.clone())),
                    ("matrix", Some(fmt_groups(&p.matrix))),
                    ("offset", Some(fmt_list(&p.offset))),
                    ("cubic", l(&p.cubic)),
                ],
            );
        }
        if let Some(p) = &self.cube {
            section("cube", vec![("lo", Some(fmt_list(&p.lo))), ("hi", Some(fmt_list(&p.hi)))]);
        }
        let p = &self.miranda;
        section(
            "miranda",
            vec![
                ("tol", n(p.tol)),
                ("max_depth", u(p.max_depth)),
                ("resolution", u(p.resolution)),
                ("margin", n(p.margin)),
            ],
        );
        section("output", vec![("dir", s(&self.output.dir))]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# comment line
[problem]
kind = moving_rectangles
components = 2

[grid]
length = 1
nodes = 51

[operator]
bc = dirichlet
d = sine 1 0.5
gamma = 0.25

[nonlinearity]
name = linear
params = 1, 1

[constraint]
shape = moving
alpha = -1 0 1; -2
beta = 1

[solver]
h0 = 0.25
schedule = harmonic

[output]
dir = C:\\runs\\a
";

    #[test]
    fn parses_sections() {
        let cfg = ProblemConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.problem.as_ref().unwrap().components, 2);
        assert_eq!(cfg.operator.as_ref().unwrap().d, CoefficientConfig::Sine { mean: 1.0, amplitude: 0.5 });
        let c = cfg.constraint.as_ref().unwrap();
        assert_eq!(c.alpha.as_ref().unwrap(), &vec![vec![-1.0, 0.0, 1.0], vec![-2.0]]);
        assert_eq!(cfg.nonlinearity.as_ref().unwrap().params, vec![1.0, 1.0]);
        assert_eq!(cfg.output.dir.as_deref(), Some("C:\\runs\\a"));
        assert_eq!(cfg.solver.h0, Some(0.25));
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = ProblemConfig::parse(SAMPLE).unwrap();
        let text = cfg.to_ini_string();
        assert_eq!(ProblemConfig::parse(&text).unwrap(), cfg);
        assert_eq!(ProblemConfig::parse(&text).unwrap().to_ini_string(), text);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            ProblemConfig::parse("[grid]\nlength = 1\nnodes = 5\nnode = 3\n"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(ProblemConfig::parse("[grid]\nlength = x\nnodes = 5\n"), Err(ConfigError::Value { .. })));
        assert!(matches!(ProblemConfig::parse("[grid]\nlength = 1\n"), Err(ConfigError::Missing { .. })));
        assert!(matches!(ProblemConfig::parse("[nope]\na = 1\n"), Err(ConfigError::UnknownSection(_))));
        assert!(ProblemConfig::parse("[operator]\nbc = neumann\nd = cosine 1 2\n").is_err());
    }

    #[test]
    fn broadcast_rules() {
        assert_eq!(broadcast(&[1.0], 3, "x").unwrap(), vec![1.0; 3]);
        assert!(broadcast(&[1.0, 2.0], 3, "x").is_err());
    }
}
