//! CSV input and output.

use std::fmt::Write as _;
use std::path::Path;

use crate::discrete::{Grid1D, GridFunction};
use crate::problems::ConfigError;

/// Columns `x, u_1, ..., u_N`.
pub fn grid_function_csv(grid: &Grid1D, u: &GridFunction) -> String {
    let mut out = String::from("x");
    for i in 1..=u.components() {
        let _ = write!(out, ",u_{i}");
    }
    out.push('\n');
    for j in 0..u.nodes() {
        let _ = write!(out, "{}", grid.x(j));
        for v in u.at(j) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Columns `iter, residual`, iterations counted from 1.
pub fn residuals_csv(history: &[f64]) -> String {
    let mut out = String::from("iter,residual\n");
    for (k, r) in history.iter().enumerate() {
        let _ = writeln!(out, "{},{r}", k + 1);
    }
    out
}

/// Reads a grid function written by [`grid_function_csv`].
pub fn parse_grid_function_csv(text: &str) -> Result<(Vec<f64>, GridFunction), ConfigError> {
    let mut xs = Vec::new();
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let vals = parse_row(line, line_no)?;
        if vals.len() < 2 {
            return Err(ConfigError::Invalid(format!("line {}: expected x and at least one value", line_no + 1)));
        }
        xs.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    Ok((xs, GridFunction::from_nodes(rows)))
}

fn parse_row(line: &str, line_no: usize) -> Result<Vec<f64>, ConfigError> {
    line.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| ConfigError::Invalid(format!("line {}: cannot parse '{}'", line_no + 1, t.trim())))
        })
        .collect()
}

/// `(x, levels)` where each level is `(u, lo, hi)`.
type Station = (f64, Vec<(f64, Vec<f64>, Vec<f64>)>);

/// Interval-valued nonlinearity sampled on `(x, u)` levels, with columns
/// `x, u, lo_1, ..., lo_N, hi_1, ..., hi_N`.
///
/// Evaluation takes the nearest tabulated `x` and, for each component,
/// interpolates both bounds linearly in `u_i` across that station's levels
/// (constant beyond the first and last level). Rows with `lo > hi` are
/// rejected, so interpolated bounds stay ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    stations: Vec<Station>,
    components: usize,
}

impl Table {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut stations: Vec<Station> = Vec::new();
        let mut components = None;
        for (line_no, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || (line_no == 0 && trimmed.starts_with('x')) {
                continue;
            }
            let bad = |m: &str| ConfigError::Invalid(format!("line {}: {m}", line_no + 1));
            let vals = parse_row(trimmed, line_no)?;
            if vals.len() < 4 || vals.len() % 2 != 0 {
                return Err(bad("expected x, u, lo_1..lo_N and hi_1..hi_N"));
            }
            let n = (vals.len() - 2) / 2;
            if *components.get_or_insert(n) != n {
                return Err(bad("inconsistent column count"));
            }
            let (x, level) = (vals[0], vals[1]);
            let (lo, hi) = (vals[2..2 + n].to_vec(), vals[2 + n..].to_vec());
            if lo.iter().zip(&hi).any(|(l, h)| l > h) {
                return Err(bad("lower bound above upper bound"));
            }
            match stations.iter_mut().find(|(sx, _)| *sx == x) {
                Some((_, levels)) => levels.push((level, lo, hi)),
                None => stations.push((x, vec![(level, lo, hi)])),
            }
        }
        let components = components.ok_or_else(|| ConfigError::Invalid("empty table".into()))?;
        stations.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, levels) in &mut stations {
            levels.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        Ok(Self { stations, components })
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Interpolated `(lo, hi)` at `(x, u)`.
    pub fn eval(&self, x: f64, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (_, levels) = self
            .stations
            .iter()
            .min_by(|a, b| (a.0 - x).abs().total_cmp(&(b.0 - x).abs()))
            .expect("table has at least one station");
        let mut lo = Vec::with_capacity(self.components);
        let mut hi = Vec::with_capacity(self.components);
        for i in 0..self.components {
            let ui = u.get(i).copied().unwrap_or(0.0);
            let k = levels.partition_point(|(l, _, _)| *l <= ui);
            let (a, b, t) = if k == 0 {
                (0, 0, 0.0)
            } else if k == levels.len() {
                (k - 1, k - 1, 0.0)
            } else {
                (k - 1, k, (ui - levels[k - 1].0) / (levels[k].0 - levels[k - 1].0))
            };
            lo.push(levels[a].1[i] + t * (levels[b].1[i] - levels[a].1[i]));
            hi.push(levels[a].2[i] + t * (levels[b].2[i] - levels[a].2[i]));
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::BoundaryCondition;

    #[test]
    fn grid_csv_round_trip() {
        let grid = Grid1D::new(1.0, 5, BoundaryCondition::Neumann).unwrap();
        let u = GridFunction::from_fn(&grid, |x| vec![x * x, 1.0 / 3.0]);
        let text = grid_function_csv(&grid, &u);
        assert!(text.starts_with("x,u_1,u_2\n0,0,0.3333333333333333\n"));
        let (xs, back) = parse_grid_function_csv(&text).unwrap();
        assert_eq!(xs, grid.coordinates());
        assert_eq!(back, u);
    }

    #[test]
    fn residual_csv() {
        assert_eq!(residuals_csv(&[0.5, 0.25]), "iter,residual\n1,0.5\n2,0.25\n");
    }

    #[test]
    fn table_interpolates_in_u_and_snaps_in_x() {
        let t = Table::parse("x,u,lo_1,hi_1\n0,0,1,1\n0,1,-1,0\n1,0,2,2\n1,1,0,0\n").unwrap();
        assert_eq!(t.eval(0.1, &[0.5]), (vec![0.0], vec![0.5]));
        assert_eq!(t.eval(0.9, &[0.25]), (vec![1.5], vec![1.5]));
        assert_eq!(t.eval(0.0, &[-3.0]), (vec![1.0], vec![1.0]));
        assert_eq!(t.eval(0.0, &[7.0]), (vec![-1.0], vec![0.0]));
        assert!(Table::parse("x,u,lo_1,hi_1\n0,0,1,1\n0,1,2\n").is_err());
        assert!(Table::parse("x,u,lo_1,hi_1\n0,0,1,0\n").is_err());
    }
}
