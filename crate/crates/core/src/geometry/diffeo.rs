use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::geometry::fields::{Bump, ComposedPotential, MetricField, PotentialField, PulledBackMetric};
use crate::geometry::grid::Grid;
use crate::geometry::region::Region;
use crate::jet::{seed, Jet};

/// Jacobian as `[component][derivative axis]`.
pub type JetJacobian = [[Jet; 2]; 2];

pub trait DiffeoModel: Debug + Send + Sync {
    fn map(&self, x: &[Jet; 2], dim: usize) -> [Jet; 2];
    fn jacobian(&self, x: &[Jet; 2], dim: usize) -> JetJacobian;
    /// Closed set outside of which the map is the identity, as a list of bumps.
    fn support(&self) -> Vec<Bump>;
    fn describe(&self) -> String;
}

#[derive(Clone, Copy, Debug)]
pub struct IdentityMap;

impl DiffeoModel for IdentityMap {
    fn map(&self, x: &[Jet; 2], _dim: usize) -> [Jet; 2] {
        *x
    }

    fn jacobian(&self, x: &[Jet; 2], _dim: usize) -> JetJacobian {
        let order = x[0].order();
        let one = Jet::constant(1.0).truncate(order);
        let zero = Jet::zero().truncate(order);
        [[one, zero], [zero, one]]
    }

    fn support(&self) -> Vec<Bump> {
        Vec::new()
    }

    fn describe(&self) -> String {
        "identity".into()
    }
}

/// `Ψ(x) = x + shift * b(x)` with `b` a unit-height smooth bump.
#[derive(Clone, Copy, Debug)]
pub struct BumpShift {
    pub bump: Bump,
    pub shift: [f64; 2],
}

impl DiffeoModel for BumpShift {
    fn map(&self, x: &[Jet; 2], dim: usize) -> [Jet; 2] {
        let b = self.bump.eval_jet(x, dim);
        let mut out = *x;
        for k in 0..dim {
            out[k] = x[k] + b.scale(self.shift[k]);
        }
        out
    }

    fn jacobian(&self, x: &[Jet; 2], dim: usize) -> JetJacobian {
        let grad = self.bump.grad_jet(x, dim);
        let order = x[0].order();
        let mut out = [[Jet::zero().truncate(order); 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                let delta = if k == i { 1.0 } else { 0.0 };
                out[k][i] =
                    if k < dim && i < dim { grad[i].scale(self.shift[k]) + delta } else { Jet::constant(delta).truncate(order) };
            }
        }
        out
    }

    fn support(&self) -> Vec<Bump> {
        vec![self.bump]
    }

    fn describe(&self) -> String {
        format!("bump-shift(center={:?},radius={:?},shift={:?})", self.bump.center, self.bump.radius, self.shift)
    }
}

/// `outer ∘ inner`.
#[derive(Clone, Debug)]
pub struct ComposedMap {
    pub outer: Diffeomorphism,
    pub inner: Diffeomorphism,
}

impl DiffeoModel for ComposedMap {
    fn map(&self, x: &[Jet; 2], _dim: usize) -> [Jet; 2] {
        self.outer.map_jet(&self.inner.map_jet(x))
    }

    fn jacobian(&self, x: &[Jet; 2], dim: usize) -> JetJacobian {
        let y = self.inner.map_jet(x);
        let a = self.outer.jacobian_jet(&y);
        let b = self.inner.jacobian_jet(x);
        let order = x[0].order();
        let mut out = [[Jet::zero().truncate(order); 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                if k >= dim || i >= dim {
                    out[k][i] = Jet::constant(if k == i { 1.0 } else { 0.0 }).truncate(order);
                    continue;
                }
                let mut acc = Jet::zero().truncate(order);
                for m in 0..dim {
                    acc += a[k][m] * b[m][i];
                }
                out[k][i] = acc;
            }
        }
        out
    }

    fn support(&self) -> Vec<Bump> {
        let mut s = self.outer.model.support();
        s.extend(self.inner.model.support());
        s
    }

    fn describe(&self) -> String {
        format!("compose({};{})", self.outer.describe(), self.inner.describe())
    }
}

/// Diffeomorphism of the closed domain that is the identity near `Γ̄` and near `∂Ω`.
#[derive(Clone, Debug)]
pub struct Diffeomorphism {
    model: Arc<dyn DiffeoModel>,
    dim: usize,
}

impl Diffeomorphism {
    pub fn new(model: Arc<dyn DiffeoModel>, dim: usize) -> Self {
        Self { model, dim }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(Arc::new(IdentityMap), dim)
    }

    pub fn bump_shift(dim: usize, center: [f64; 2], radius: f64, shift: [f64; 2]) -> Self {
        Self::new(Arc::new(BumpShift { bump: Bump::new(center, radius, 1.0), shift }), dim)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Diffeomorphism) -> Self {
        Self::new(Arc::new(ComposedMap { outer: self.clone(), inner: inner.clone() }), self.dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn describe(&self) -> String {
        format!("{}d:{}", self.dim, self.model.describe())
    }

    pub fn map_jet(&self, x: &[Jet; 2]) -> [Jet; 2] {
        self.model.map(x, self.dim)
    }

    pub fn jacobian_jet(&self, x: &[Jet; 2]) -> JetJacobian {
        self.model.jacobian(x, self.dim)
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        let y = self.map_jet(&seed(x, 0));
        [y[0].value(), y[1].value()]
    }

    pub fn jacobian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let j = self.jacobian_jet(&seed(x, 0));
        [[j[0][0].value(), j[0][1].value()], [j[1][0].value(), j[1][1].value()]]
    }

    pub fn jacobian_det(&self, x: [f64; 2]) -> f64 {
        let j = self.jacobian(x);
        if self.dim == 1 {
            j[0][0]
        } else {
            j[0][0] * j[1][1] - j[0][1] * j[1][0]
        }
    }

    /// `Ψ^{-1}(y)` by Newton iteration from `y`.
    pub fn inverse(&self, y: [f64; 2]) -> Result<[f64; 2]> {
        let mut x = y;
        for _ in 0..60 {
            let fx = self.apply(x);
            let r = [fx[0] - y[0], fx[1] - y[1]];
            if r[0].abs().max(r[1].abs()) < 1e-15 {
                return Ok(x);
            }
            let j = self.jacobian(x);
            if self.dim == 1 {
                x[0] -= r[0] / j[0][0];
            } else {
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                x[0] -= (j[1][1] * r[0] - j[0][1] * r[1]) / det;
                x[1] -= (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
            }
        }
        let fx = self.apply(x);
        if (fx[0] - y[0]).abs().max((fx[1] - y[1]).abs()) < 1e-12 {
            Ok(x)
        } else {
            Err(LabError::InvalidDiffeomorphism(format!("Newton inverse failed at {y:?}")))
        }
    }

    /// Validates the frozen-region, orientation, boundary and inverse invariants
    /// on the grid nodes.
    pub fn check_invariants(&self, grid: &Grid, frozen: &Region) -> Result<()> {
        let lo = frozen.lower();
        let hi = frozen.upper();
        let margin = grid.max_spacing();
        for b in self.model.support() {
            // support ball must avoid the closed frozen box, with one cell of slack
            let mut d2 = 0.0;
            for k in 0..self.dim {
                let c = b.center[k];
                let gap = if c < lo[k] - margin {
                    lo[k] - margin - c
                } else if c > hi[k] + margin {
                    c - hi[k] - margin
                } else {
                    0.0
                };
                d2 += gap * gap;
            }
            if d2.sqrt() < b.radius {
                return Err(LabError::InvalidDiffeomorphism("support meets the frozen region".into()));
            }
            for (k, axis) in grid.axes().iter().enumerate() {
                if b.center[k] - b.radius <= axis.lower || b.center[k] + b.radius >= axis.upper {
                    return Err(LabError::InvalidDiffeomorphism("support reaches the outer boundary".into()));
                }
            }
        }
        for i in 0..grid.node_count() {
            let x = grid.point(i);
            let det = self.jacobian_det(x);
            if !(det > 0.0) {
                return Err(LabError::InvalidDiffeomorphism(format!("det DΨ = {det} at node {i}")));
            }
            if grid.is_boundary(i) || frozen.contains(i) {
                let y = self.apply(x);
                if (y[0] - x[0]).abs().max((y[1] - x[1]).abs()) > 1e-14 {
                    return Err(LabError::InvalidDiffeomorphism(format!("Ψ moves fixed node {i}")));
                }
            }
            let back = self.inverse(self.apply(x))?;
            if (back[0] - x[0]).abs().max((back[1] - x[1]).abs()) > 1e-10 {
                return Err(LabError::InvalidDiffeomorphism(format!("inverse round trip fails at node {i}")));
            }
        }
        Ok(())
    }
}

/// `(Ψ*g, V∘Ψ)`.
pub fn pullback(psi: &Diffeomorphism, g: &MetricField, v: &PotentialField, grid: &Grid) -> Result<(MetricField, PotentialField)> {
    for i in 0..grid.node_count() {
        let det = psi.jacobian_det(grid.point(i));
        if !(det.abs() > 1e-12) {
            return Err(LabError::InvalidDiffeomorphism(format!("singular Jacobian at node {i}")));
        }
    }
    let metric = MetricField::new(Arc::new(PulledBackMetric { inner: g.clone(), psi: psi.clone() }), g.dim());
    let potential = PotentialField::new(Arc::new(ComposedPotential { inner: v.clone(), psi: psi.clone() }), v.dim());
    Ok((metric, potential))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::{build_grid, DomainSpec};
    use std::f64::consts::PI;

    fn grid_1d() -> Grid {
        build_grid(&DomainSpec::interval(0.0, PI), &[65]).unwrap()
    }

    #[test]
    fn identity_pullback_leaves_fields_unchanged() {
        let grid = grid_1d();
        let g = MetricField::diagonal_poly(1, [1.0, 1.0], 0.3, [1.0, 0.0]);
        let v = PotentialField::gaussian(1, 1.0, [1.5, 0.0], 0.4);
        let (pg, pv) = pullback(&Diffeomorphism::identity(1), &g, &v, &grid).unwrap();
        for i in 0..grid.node_count() {
            let x = grid.point(i);
            assert_eq!(pg.g(x)[0][0], g.g(x)[0][0]);
            assert_eq!(pv.value(x), v.value(x));
        }
    }

    #[test]
    fn euclidean_pullback_is_gram_matrix() {
        let grid = build_grid(&DomainSpec::rectangle([0.0, 0.0], [1.0, 1.0]), &[9, 9]).unwrap();
        let psi = Diffeomorphism::bump_shift(2, [0.7, 0.6], 0.2, [0.05, -0.03]);
        let (pg, _) = pullback(&psi, &MetricField::identity(2), &PotentialField::zero(2), &grid).unwrap();
        let x = [0.72, 0.55];
        let j = psi.jacobian(x);
        let g = pg.g(x);
        for a in 0..2 {
            for b in 0..2 {
                let gram = j[0][a] * j[0][b] + j[1][a] * j[1][b];
                assert!((g[a][b] - gram).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn potential_composition_matches_direct_evaluation() {
        let grid = grid_1d();
        let psi = Diffeomorphism::bump_shift(1, [2.5, 0.0], 0.4, [0.1, 0.0]);
        let (_, pv) = pullback(&psi, &MetricField::identity(1), &PotentialField::affine(1, 0.0, [1.0, 0.0]), &grid).unwrap();
        let bump = |x: f64| {
            let s = (x - 2.5) / 0.4;
            if s.abs() < 1.0 {
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        };
        for i in 0..grid.node_count() {
            let x = grid.point(i)[0];
            assert!((pv.value([x, 0.0]) - (x + 0.1 * bump(x))).abs() < 1e-14);
        }
    }

    #[test]
    fn invariants_and_inverse() {
        let grid = grid_1d();
        let gamma = Region::from_box(&grid, &[1.0], &[2.0]).unwrap();
        let psi = Diffeomorphism::bump_shift(1, [2.6, 0.0], 0.35, [0.1, 0.0]);
        psi.check_invariants(&grid, &gamma).unwrap();
        let bad = Diffeomorphism::bump_shift(1, [1.9, 0.0], 0.35, [0.1, 0.0]);
        assert!(bad.check_invariants(&grid, &gamma).is_err());
        let folding = Diffeomorphism::bump_shift(1, [2.6, 0.0], 0.35, [0.5, 0.0]);
        assert!(folding.check_invariants(&grid, &gamma).is_err());
    }

    #[test]
    fn pullback_is_functorial() {
        let grid = build_grid(&DomainSpec::rectangle([0.0, 0.0], [1.0, 1.0]), &[9, 9]).unwrap();
        let g = MetricField::offdiag_bump([1.2, 0.8], 0.2, [0.6, 0.6], 0.3);
        let v = PotentialField::gaussian(2, 1.0, [0.7, 0.4], 0.3);
        let p1 = Diffeomorphism::bump_shift(2, [0.7, 0.7], 0.2, [0.04, 0.02]);
        let p2 = Diffeomorphism::bump_shift(2, [0.65, 0.72], 0.18, [-0.02, 0.03]);
        // (Ψ2∘Ψ1)* = Ψ1* Ψ2*
        let (g21, v21) = pullback(&p2.compose(&p1), &g, &v, &grid).unwrap();
        let (g2, v2) = pullback(&p2, &g, &v, &grid).unwrap();
        let (g12, v12) = pullback(&p1, &g2, &v2, &grid).unwrap();
        for i in 0..grid.node_count() {
            let x = grid.point(i);
            let (a, b) = (g21.g(x), g12.g(x));
            for r in 0..2 {
                for c in 0..2 {
                    assert!((a[r][c] - b[r][c]).abs() < 1e-10);
                }
            }
            assert!((v21.value(x) - v12.value(x)).abs() < 1e-10);
        }
    }
}
