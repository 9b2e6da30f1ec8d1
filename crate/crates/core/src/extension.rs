//! The `s = 1/2` extension problem on `Ω × (0, ∞)`: spectral extension, the
//! Dirichlet-to-Neumann operator `T = P^{1/2}`, the partial Neumann-to-Dirichlet
//! map on `Γ`, and a finite-difference cylinder solver used as an oracle.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::calculus::interior_data;
use crate::error::{LabError, Result};
use crate::geometry::fields::{MetricField, PotentialField};
use crate::geometry::grid::{Grid, GridFunction};
use crate::geometry::region::Region;
use crate::operator::{assemble, SpectralDecomposition};

/// `u(·, y) = Σ e^{-y sqrt(λ_k)} f_k φ_k`.
pub fn extend_spectral(spec: &SpectralDecomposition, f: &GridFunction, y: f64) -> Result<GridFunction> {
    if !(y >= 0.0) {
        return Err(LabError::Precondition(format!("height y = {y} must be nonnegative")));
    }
    let x = interior_data(spec, f)?;
    Ok(GridFunction::from_interior(spec.grid(), &spec.apply_fn(&x, |l| (-y * l.sqrt()).exp())))
}

/// `T f = -∂_y u|_{y=0} = P^{1/2} f`.
pub fn dn_operator(spec: &SpectralDecomposition, f: &GridFunction) -> Result<GridFunction> {
    let x = interior_data(spec, f)?;
    Ok(GridFunction::from_interior(spec.grid(), &spec.apply_fn(&x, f64::sqrt)))
}

fn check_supported(region: &Region, f: &GridFunction) -> Result<()> {
    let tol = 1e-14 * f.max_abs();
    if !region.supports(f, tol) {
        return Err(LabError::Precondition("Neumann data must be supported in the window".into()));
    }
    Ok(())
}

/// Values of `P^{-1/2} f` at the window nodes; zero elsewhere.
pub fn nd_map(spec: &SpectralDecomposition, f: &GridFunction, region: &Region) -> Result<GridFunction> {
    check_supported(region, f)?;
    let x = interior_data(spec, f)?;
    let full = GridFunction::from_interior(spec.grid(), &spec.apply_fn(&x, |l| 1.0 / l.sqrt()));
    Ok(mask(&full, region))
}

/// The nonlocal source-to-solution map `f ↦ v|_Γ` with `P^{1/2} v = f`.
pub fn source_to_solution_nonlocal(spec: &SpectralDecomposition, f: &GridFunction, region: &Region) -> Result<GridFunction> {
    nd_map(spec, f, region)
}

/// ND map of complex data, applied to real and imaginary parts.
pub fn nd_map_complex(
    spec: &SpectralDecomposition,
    re: &GridFunction,
    im: &GridFunction,
    region: &Region,
) -> Result<(GridFunction, GridFunction)> {
    Ok((nd_map(spec, re, region)?, nd_map(spec, im, region)?))
}

/// Zeroes `u` outside the window.
pub fn mask(u: &GridFunction, region: &Region) -> GridFunction {
    GridFunction(u.0.iter().enumerate().map(|(i, v)| if region.contains(i) { *v } else { 0.0 }).collect())
}

/// Finite-difference solution on `Ω × [0, Y]`, one interior vector per height.
#[derive(Clone, Debug)]
pub struct CylinderSolution {
    grid: Grid,
    pub height: f64,
    pub dy: f64,
    /// `levels[j]` holds interior values at `y = j dy`; the last level is the cap.
    pub levels: Vec<Vec<f64>>,
    /// Relative residual `‖K u − b‖ / ‖b‖` of the assembled system.
    pub residual: f64,
}

impl CylinderSolution {
    pub fn trace(&self) -> GridFunction {
        GridFunction::from_interior(&self.grid, &self.levels[0])
    }

    pub fn level(&self, j: usize) -> GridFunction {
        GridFunction::from_interior(&self.grid, &self.levels[j])
    }
}

/// Solves `(-Δ_g + V - ∂_y²) u = 0`, `-∂_y u = f` at `y = 0` (ghost-node
/// closure), `u = 0` at `y = Y` and on `∂Ω × [0, Y]`.
///
/// When `lambda1` is given, `Y` must satisfy `e^{-sqrt(λ_1) Y} < 1e-6`.
pub fn solve_cylinder_direct(
    grid: &Grid,
    g: &MetricField,
    v: &PotentialField,
    f: &GridFunction,
    height: f64,
    y_nodes: usize,
    lambda1: Option<f64>,
) -> Result<CylinderSolution> {
    if y_nodes < 3 || !(height > 0.0) {
        return Err(LabError::Precondition("need Y > 0 and at least 3 height nodes".into()));
    }
    if let Some(l1) = lambda1 {
        let decay = (-l1.sqrt() * height).exp();
        if !(decay < 1e-6) {
            return Err(LabError::Precondition(format!("cap height too small: e^(-sqrt(λ1) Y) = {decay:e}")));
        }
    }
    if f.len() != grid.node_count() || !f.vanishes_on_boundary(grid, 1e-12) {
        return Err(LabError::Precondition("Neumann data must vanish on the outer boundary".into()));
    }
    let op = assemble(grid, g, v)?;
    let n = op.size();
    let levels = y_nodes - 1;
    let dy = height / levels as f64;
    let m = op.mass();
    let total = n * levels;
    let mut trip = Vec::with_capacity(total * 8);
    let a = op.stiffness().triplets();
    for j in 0..levels {
        let (afac, mfac) = if j == 0 { (0.5, 1.0) } else { (1.0, 2.0) };
        let base = j * n;
        for &(r, c, val) in &a {
            trip.push(Triplet::new(base + r, base + c, afac * val));
        }
        for r in 0..n {
            trip.push(Triplet::new(base + r, base + r, mfac * m[r] / (dy * dy)));
            if j + 1 < levels {
                trip.push(Triplet::new(base + r, base + n + r, -m[r] / (dy * dy)));
                trip.push(Triplet::new(base + n + r, base + r, -m[r] / (dy * dy)));
            }
        }
    }
    let kmat = SparseColMat::<usize, f64>::try_new_from_triplets(total, total, &trip)
        .map_err(|e| LabError::LinearSolve(format!("{e:?}")))?;
    let fi = f.interior(grid);
    let mut rhs = Mat::<f64>::zeros(total, 1);
    for r in 0..n {
        rhs[(r, 0)] = m[r] * fi[r] / dy;
    }
    let rhs_norm = (0..n).map(|r| rhs[(r, 0)].powi(2)).sum::<f64>().sqrt();
    if rhs_norm == 0.0 {
        return Ok(CylinderSolution { grid: grid.clone(), height, dy, levels: vec![vec![0.0; n]; y_nodes], residual: 0.0 });
    }
    let llt = kmat.sp_cholesky(Side::Lower).map_err(|e| LabError::LinearSolve(format!("{e:?}")))?;
    let sol = llt.solve(&rhs);
    let ku = &kmat * &sol;
    let residual = (0..total).map(|i| (ku[(i, 0)] - rhs[(i, 0)]).powi(2)).sum::<f64>().sqrt() / rhs_norm;
    let mut out: Vec<Vec<f64>> = (0..levels).map(|j| (0..n).map(|r| sol[(j * n + r, 0)]).collect()).collect();
    out.push(vec![0.0; n]);
    Ok(CylinderSolution { grid: grid.clone(), height, dy, levels: out, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::{build_grid, DomainSpec};
    use crate::operator::eigendecompose;
    use std::f64::consts::PI;

    fn setup(nodes: usize) -> (Grid, SpectralDecomposition) {
        let grid = build_grid(&DomainSpec::interval(0.0, PI), &[nodes]).unwrap();
        let op = assemble(&grid, &MetricField::identity(1), &PotentialField::zero(1)).unwrap();
        let spec = eigendecompose(&op, nodes - 2).unwrap();
        (grid, spec)
    }

    #[test]
    fn dn_squared_is_p() {
        let (grid, spec) = setup(65);
        let f = GridFunction::from_fn_interior(&grid, |x| x[0] * (PI - x[0]) * (1.0 + x[0].cos()));
        let tt = dn_operator(&spec, &dn_operator(&spec, &f).unwrap()).unwrap();
        let op = assemble(&grid, &MetricField::identity(1), &PotentialField::zero(1)).unwrap();
        let p = op.apply_p(&f.interior(&grid));
        let ti = tt.interior(&grid);
        let scale = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in ti.iter().zip(&p) {
            assert!((a - b).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn cylinder_trace_matches_nd_map() {
        let (grid, spec) = setup(65);
        let gamma = Region::from_box(&grid, &[0.05], &[PI - 0.05]).unwrap();
        let f = GridFunction::from_fn_interior(&grid, |x| x[0].sin());
        let f = mask(&f, &gamma);
        let nd = nd_map(&spec, &f, &gamma).unwrap();
        let cyl =
            solve_cylinder_direct(&grid, &MetricField::identity(1), &PotentialField::zero(1), &f, 20.0, 401, Some(spec.gap()))
                .unwrap();
        assert!(cyl.residual < 1e-10);
        let tr = mask(&cyl.trace(), &gamma);
        let err: f64 = tr.0.iter().zip(&nd.0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nrm: f64 = nd.0.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(err / nrm < 1e-2, "rel err {}", err / nrm);
    }

    #[test]
    fn rejects_data_outside_window() {
        let (grid, spec) = setup(33);
        let gamma = Region::from_box(&grid, &[1.0], &[2.0]).unwrap();
        let f = GridFunction::from_fn_interior(&grid, |x| x[0].sin());
        assert!(nd_map(&spec, &f, &gamma).is_err());
    }
}
