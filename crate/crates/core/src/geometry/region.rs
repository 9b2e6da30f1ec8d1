use std::collections::VecDeque;

use crate::error::{LabError, Result};
use crate::geometry::grid::{Grid, GridFunction};

/// Measurement window `Γ`: the grid nodes inside a closed axis-aligned box.
#[derive(Clone, Debug)]
pub struct Region {
    lower: [f64; 2],
    upper: [f64; 2],
    member: Vec<bool>,
    members: Vec<usize>,
    edge: Vec<usize>,
}

impl Region {
    pub fn from_box(grid: &Grid, lower: &[f64], upper: &[f64]) -> Result<Self> {
        let dim = grid.dim();
        if lower.len() != dim || upper.len() != dim {
            return Err(LabError::InvalidRegion("box dimension mismatch".into()));
        }
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for k in 0..dim {
            if !(lower[k] < upper[k]) {
                return Err(LabError::InvalidRegion(format!("empty extent on axis {k}")));
            }
            lo[k] = lower[k];
            hi[k] = upper[k];
        }
        let slack = 1e-12 * grid.max_spacing();
        let member: Vec<bool> = (0..grid.node_count())
            .map(|i| {
                let p = grid.point(i);
                (0..dim).all(|k| p[k] >= lo[k] - slack && p[k] <= hi[k] + slack)
            })
            .collect();
        let members: Vec<usize> = (0..member.len()).filter(|&i| member[i]).collect();
        if members.is_empty() {
            return Err(LabError::InvalidRegion("box contains no grid nodes".into()));
        }
        if let Some(&i) = members.iter().find(|&&i| grid.is_boundary(i)) {
            return Err(LabError::InvalidRegion(format!("node {i} lies on the outer boundary")));
        }
        let edge = members
            .iter()
            .copied()
            .filter(|&i| (0..dim).any(|k| [-1, 1].iter().any(|&o| grid.neighbor(i, k, o).is_some_and(|j| !member[j]))))
            .collect();
        let region = Self { lower: lo, upper: hi, member, members, edge };
        if !region.is_connected(grid) {
            return Err(LabError::InvalidRegion("node set is not connected".into()));
        }
        Ok(region)
    }

    fn is_connected(&self, grid: &Grid) -> bool {
        let mut seen = vec![false; self.member.len()];
        let mut queue = VecDeque::from([self.members[0]]);
        seen[self.members[0]] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for k in 0..grid.dim() {
                for o in [-1, 1] {
                    if let Some(j) = grid.neighbor(i, k, o) {
                        if self.member[j] && !seen[j] {
                            seen[j] = true;
                            count += 1;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        count == self.members.len()
    }

    pub fn lower(&self) -> [f64; 2] {
        self.lower
    }

    pub fn upper(&self) -> [f64; 2] {
        self.upper
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.member[flat]
    }

    /// Whether a point lies in the closed box.
    pub fn contains_point(&self, x: [f64; 2], dim: usize) -> bool {
        (0..dim).all(|k| x[k] >= self.lower[k] && x[k] <= self.upper[k])
    }

    /// Member nodes as flat grid indices, increasing.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Members with at least one axis-neighbor outside the region (`∂Γ`).
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.edge
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Values of `u` at the member nodes.
    pub fn restrict(&self, u: &GridFunction) -> Vec<f64> {
        self.members.iter().map(|&i| u.0[i]).collect()
    }

    /// Whether `u` vanishes off the region up to `tol` absolute.
    pub fn supports(&self, u: &GridFunction, tol: f64) -> bool {
        u.0.iter().enumerate().all(|(i, v)| self.member[i] || v.abs() <= tol)
    }

    pub fn describe(&self) -> String {
        format!("region({:?},{:?})", self.lower, self.upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::{build_grid, DomainSpec};
    use std::f64::consts::PI;

    #[test]
    fn interval_window() {
        let grid = build_grid(&DomainSpec::interval(0.0, PI), &[65]).unwrap();
        let r = Region::from_box(&grid, &[1.0], &[2.0]).unwrap();
        let h = grid.spacing(0);
        assert!(r.members().iter().all(|&i| grid.point(i)[0] >= 1.0 && grid.point(i)[0] <= 2.0));
        assert!(r.len() as f64 >= (1.0 / h).floor());
        assert_eq!(r.boundary_nodes().len(), 2);
    }

    #[test]
    fn rectangle_edge_ring() {
        let grid = build_grid(&DomainSpec::rectangle([0.0, 0.0], [1.0, 1.0]), &[11, 11]).unwrap();
        let r = Region::from_box(&grid, &[0.3, 0.3], &[0.7, 0.7]).unwrap();
        assert_eq!(r.len(), 25);
        assert_eq!(r.boundary_nodes().len(), 16);
    }

    #[test]
    fn rejects_touching_outer_boundary() {
        let grid = build_grid(&DomainSpec::interval(0.0, 1.0), &[11]).unwrap();
        assert!(Region::from_box(&grid, &[0.0], &[0.5]).is_err());
        assert!(Region::from_box(&grid, &[0.51], &[0.55]).is_err());
    }
}
