use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Axis-aligned box `[lower, upper]` in one or two dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainSpec {
    pub fn interval(lower: f64, upper: f64) -> Self {
        Self { lower: vec![lower], upper: vec![upper] }
    }

    pub fn rectangle(lower: [f64; 2], upper: [f64; 2]) -> Self {
        Self { lower: lower.to_vec(), upper: upper.to_vec() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.nodes - 1) as f64
    }
}

/// Uniform tensor grid on an interval or rectangle.
///
/// Nodes are numbered with the first axis fastest. Interior nodes carry the
/// unknowns of every discrete operator; boundary nodes hold the homogeneous
/// Dirichlet condition.
#[derive(Clone, Debug)]
pub struct Grid {
    axes: Vec<Axis>,
    interior: Vec<usize>,
    interior_of: Vec<Option<usize>>,
}

/// Smallest node count per axis (three interior nodes).
pub const MIN_NODES: usize = 5;

pub fn build_grid(domain: &DomainSpec, nodes_per_axis: &[usize]) -> Result<Grid> {
    let dim = domain.lower.len();
    if !(1..=2).contains(&dim) {
        return Err(LabError::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
    }
    if domain.upper.len() != dim || nodes_per_axis.len() != dim {
        return Err(LabError::InvalidGrid("axis count mismatch".into()));
    }
    let mut axes = Vec::with_capacity(dim);
    for k in 0..dim {
        let (lo, hi, n) = (domain.lower[k], domain.upper[k], nodes_per_axis[k]);
        if !lo.is_finite() || !hi.is_finite() || hi <= lo {
            return Err(LabError::InvalidGrid(format!("degenerate extent [{lo}, {hi}] on axis {k}")));
        }
        if n < MIN_NODES {
            return Err(LabError::InvalidGrid(format!("{n} nodes on axis {k}; need at least {MIN_NODES}")));
        }
        axes.push(Axis { lower: lo, upper: hi, nodes: n });
    }
    let total: usize = axes.iter().map(|a| a.nodes).product();
    let mut interior = Vec::new();
    let mut interior_of = vec![None; total];
    for flat in 0..total {
        let idx = multi_index(&axes, flat);
        let inside = (0..dim).all(|k| idx[k] > 0 && idx[k] + 1 < axes[k].nodes);
        if inside {
            interior_of[flat] = Some(interior.len());
            interior.push(flat);
        }
    }
    Ok(Grid { axes, interior, interior_of })
}

fn multi_index(axes: &[Axis], flat: usize) -> [usize; 2] {
    match axes.len() {
        1 => [flat, 0],
        _ => [flat % axes[0].nodes, flat / axes[0].nodes],
    }
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.axes[axis].spacing()
    }

    pub fn max_spacing(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).fold(0.0, f64::max)
    }

    /// Volume `h_1 ... h_n` of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    /// Flat indices of interior nodes, in unknown order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_index(&self, flat: usize) -> Option<usize> {
        self.interior_of[flat]
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        self.interior_of[flat].is_none()
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        multi_index(&self.axes, flat)
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        match self.dim() {
            1 => idx[0],
            _ => idx[0] + self.axes[0].nodes * idx[1],
        }
    }

    /// Neighbor of `flat` shifted by `offset` along `axis`, if it exists.
    pub fn neighbor(&self, flat: usize, axis: usize, offset: isize) -> Option<usize> {
        let mut idx = self.multi_index(flat);
        let shifted = idx[axis] as isize + offset;
        if shifted < 0 || shifted >= self.axes[axis].nodes as isize {
            return None;
        }
        idx[axis] = shifted as usize;
        Some(self.flat_index(idx))
    }

    /// Node coordinates padded to two components (the second is 0 in 1D).
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let idx = self.multi_index(flat);
        let mut p = [0.0; 2];
        for (k, axis) in self.axes.iter().enumerate() {
            p[k] = axis.lower + idx[k] as f64 * axis.spacing();
        }
        p
    }

    /// Trapezoidal weights for `dx` over all nodes.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|flat| {
                let idx = self.multi_index(flat);
                self.axes
                    .iter()
                    .enumerate()
                    .map(|(k, a)| {
                        let h = a.spacing();
                        if idx[k] == 0 || idx[k] + 1 == a.nodes {
                            0.5 * h
                        } else {
                            h
                        }
                    })
                    .product()
            })
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.upper - a.lower).product()
    }

    /// Stable text used for content hashing.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self.axes.iter().map(|a| format!("[{:?},{:?}]x{}", a.lower, a.upper, a.nodes)).collect();
        format!("grid({})", parts.join(";"))
    }
}

/// Real function sampled at every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction(pub Vec<f64>);

impl GridFunction {
    pub fn zeros(grid: &Grid) -> Self {
        Self(vec![0.0; grid.node_count()])
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self((0..grid.node_count()).map(|i| f(grid.point(i))).collect())
    }

    /// Samples `f` at interior nodes and sets boundary nodes to zero.
    pub fn from_fn_interior(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for &flat in grid.interior_nodes() {
            out.0[flat] = f(grid.point(flat));
        }
        out
    }

    pub fn from_interior(grid: &Grid, values: &[f64]) -> Self {
        assert_eq!(values.len(), grid.interior_count());
        let mut out = Self::zeros(grid);
        for (&flat, &v) in grid.interior_nodes().iter().zip(values) {
            out.0[flat] = v;
        }
        out
    }

    pub fn interior(&self, grid: &Grid) -> Vec<f64> {
        grid.interior_nodes().iter().map(|&i| self.0[i]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Boundary entries are zero up to `rel_tol` times the largest entry.
    pub fn vanishes_on_boundary(&self, grid: &Grid, rel_tol: f64) -> bool {
        let scale = self.max_abs();
        (0..grid.node_count()).filter(|&i| grid.is_boundary(i)).all(|i| self.0[i].abs() <= rel_tol * scale)
    }

    pub fn axpy(&self, a: f64, other: &GridFunction) -> GridFunction {
        GridFunction(self.0.iter().zip(&other.0).map(|(x, y)| x + a * y).collect())
    }

    pub fn scaled(&self, a: f64) -> GridFunction {
        GridFunction(self.0.iter().map(|x| a * x).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interval_nine_nodes() {
        let g = build_grid(&DomainSpec::interval(0.0, PI), &[9]).unwrap();
        assert_eq!(g.interior_count(), 7);
        assert!((g.spacing(0) - PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn square_five_by_five_has_nine_interior_nodes() {
        let g = build_grid(&DomainSpec::rectangle([0.0, 0.0], [1.0, 1.0]), &[5, 5]).unwrap();
        assert_eq!(g.interior_count(), 9);
        for &flat in g.interior_nodes() {
            for axis in 0..2 {
                for off in [-1, 1] {
                    assert!(g.neighbor(flat, axis, off).is_some());
                }
            }
        }
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let g = build_grid(&DomainSpec::interval(0.0, PI), &[513]).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - PI).abs() <= 1e-12 * PI);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_grid(&DomainSpec { lower: vec![0.0; 3], upper: vec![1.0; 3] }, &[9, 9, 9]).is_err());
        assert!(build_grid(&DomainSpec::interval(1.0, 1.0), &[9]).is_err());
        assert!(build_grid(&DomainSpec::interval(0.0, 1.0), &[4]).is_err());
        assert!(build_grid(&DomainSpec::interval(0.0, f64::INFINITY), &[9]).is_err());
    }
}
