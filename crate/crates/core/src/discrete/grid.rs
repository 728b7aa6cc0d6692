use serde::{Deserialize, Serialize};

use super::OperatorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Periodic,
}

impl BoundaryCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
            BoundaryCondition::Periodic => "periodic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dirichlet" => Some(Self::Dirichlet),
            "neumann" => Some(Self::Neumann),
            "periodic" => Some(Self::Periodic),
            _ => None,
        }
    }
}

/// Uniform grid on `[0, length]`. Periodic grids omit the node at `length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    pub length: f64,
    pub nodes: usize,
    pub periodic: bool,
}

impl Grid1D {
    pub fn new(length: f64, nodes: usize, bc: BoundaryCondition) -> Result<Self, OperatorError> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(OperatorError::InvalidSpec(format!("domain length must be positive, got {length}")));
        }
        if nodes < 3 {
            return Err(OperatorError::InvalidSpec(format!("need at least 3 nodes, got {nodes}")));
        }
        Ok(Self { length, nodes, periodic: bc == BoundaryCondition::Periodic })
    }

    pub fn dx(&self) -> f64 {
        if self.periodic {
            self.length / self.nodes as f64
        } else {
            self.length / (self.nodes - 1) as f64
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.nodes).map(|j| self.x(j)).collect()
    }

    /// Trapezoidal quadrature weights (uniform for periodic grids).
    pub fn weights(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut w = vec![dx; self.nodes];
        if !self.periodic {
            w[0] = 0.5 * dx;
            w[self.nodes - 1] = 0.5 * dx;
        }
        w
    }
}

/// Grid function with `components` values per node, stored node-major so
/// that the state at a node is a contiguous slice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    nodes: usize,
    components: usize,
    data: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(nodes: usize, components: usize) -> Self {
        Self { nodes, components, data: vec![0.0; nodes * components] }
    }

    pub fn constant(nodes: usize, value: &[f64]) -> Self {
        let mut data = Vec::with_capacity(nodes * value.len());
        for _ in 0..nodes {
            data.extend_from_slice(value);
        }
        Self { nodes, components: value.len(), data }
    }

    /// Scalar-per-component function of the coordinate.
    pub fn from_fn<F: Fn(f64) -> Vec<f64>>(grid: &Grid1D, f: F) -> Self {
        let values: Vec<Vec<f64>> = grid.coordinates().into_iter().map(f).collect();
        let components = values.first().map_or(0, Vec::len);
        Self { nodes: grid.nodes, components, data: values.concat() }
    }

    pub fn from_nodes(values: Vec<Vec<f64>>) -> Self {
        let components = values.first().map_or(0, Vec::len);
        Self { nodes: values.len(), components, data: values.concat() }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, j: usize) -> &[f64] {
        &self.data[j * self.components..(j + 1) * self.components]
    }

    pub fn at_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.components..(j + 1) * self.components]
    }

    pub fn set(&mut self, j: usize, value: &[f64]) {
        self.at_mut(j).copy_from_slice(value);
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.nodes).map(|j| self.data[j * self.components + i]).collect()
    }

    pub fn set_component(&mut self, i: usize, values: &[f64]) {
        for (j, v) in values.iter().enumerate() {
            self.data[j * self.components + i] = *v;
        }
    }

    pub fn map_nodes<F: FnMut(usize, &[f64]) -> Vec<f64>>(&self, mut f: F) -> GridFunction {
        let mut out = self.clone();
        for j in 0..self.nodes {
            let v = f(j, self.at(j));
            out.set(j, &v);
        }
        out
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &GridFunction, b: f64) -> GridFunction {
        GridFunction {
            nodes: self.nodes,
            components: self.components,
            data: self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Quadrature-weighted L2 norm.
    pub fn weighted_norm(&self, grid: &Grid1D) -> f64 {
        grid.weights()
            .iter()
            .enumerate()
            .map(|(j, w)| w * self.at(j).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.data.iter().sum::<f64>() / self.data.len() as f64
        }
    }
}
