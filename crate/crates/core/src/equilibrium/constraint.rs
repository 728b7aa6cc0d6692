use std::borrow::Cow;

use serde::Serialize;

use crate::discrete::{Grid1D, GridFunction};
use crate::geometry::{ConvexBody, GeometryError};

/// Box `[lower(x), upper(x)]` whose walls move with the node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MovingBox {
    pub lower: GridFunction,
    pub upper: GridFunction,
}

impl MovingBox {
    pub fn new(lower: GridFunction, upper: GridFunction) -> Result<Self, GeometryError> {
        if lower.nodes() != upper.nodes() || lower.components() != upper.components() {
            return Err(GeometryError::DimensionMismatch {
                expected: lower.as_slice().len(),
                got: upper.as_slice().len(),
            });
        }
        for j in 0..lower.nodes() {
            for (i, (l, h)) in lower.at(j).iter().zip(upper.at(j)).enumerate() {
                if !(l <= h) {
                    return Err(GeometryError::InvalidBox { index: j * lower.components() + i, lo: *l, hi: *h });
                }
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn from_fns<L, U>(grid: &Grid1D, lower: L, upper: U) -> Result<Self, GeometryError>
    where
        L: Fn(f64) -> Vec<f64>,
        U: Fn(f64) -> Vec<f64>,
    {
        Self::new(GridFunction::from_fn(grid, lower), GridFunction::from_fn(grid, upper))
    }

    pub fn section(&self, j: usize) -> ConvexBody {
        ConvexBody::Box { lo: self.lower.at(j).to_vec(), hi: self.upper.at(j).to_vec() }
    }

    /// Componentwise clamp into the section at each node.
    pub fn clamp(&self, u: &GridFunction) -> GridFunction {
        u.map_nodes(|j, v| {
            v.iter().zip(self.lower.at(j).iter().zip(self.upper.at(j))).map(|(x, (l, h))| x.clamp(*l, *h)).collect()
        })
    }
}

/// Pointwise constraint `u(x_j) ∈ C_j`.
#[derive(Debug, Clone)]
pub enum Constraint {
    Uniform(ConvexBody),
    Moving(MovingBox),
}

impl From<ConvexBody> for Constraint {
    fn from(body: ConvexBody) -> Self {
        Constraint::Uniform(body)
    }
}

impl From<MovingBox> for Constraint {
    fn from(b: MovingBox) -> Self {
        Constraint::Moving(b)
    }
}

impl Constraint {
    pub fn dim(&self) -> usize {
        match self {
            Constraint::Uniform(b) => b.dim(),
            Constraint::Moving(m) => m.lower.components(),
        }
    }

    pub fn section(&self, j: usize) -> Cow<'_, ConvexBody> {
        match self {
            Constraint::Uniform(b) => Cow::Borrowed(b),
            Constraint::Moving(m) => Cow::Owned(m.section(j)),
        }
    }

    pub fn project(&self, u: &GridFunction) -> GridFunction {
        match self {
            Constraint::Uniform(b) => u.map_nodes(|_, v| b.project(v)),
            Constraint::Moving(m) => m.clamp(u),
        }
    }

    pub fn distances(&self, u: &GridFunction) -> Vec<f64> {
        (0..u.nodes()).map(|j| self.section(j).distance(u.at(j))).collect()
    }

    pub fn max_distance(&self, u: &GridFunction) -> f64 {
        self.distances(u).into_iter().fold(0.0, f64::max)
    }
}
