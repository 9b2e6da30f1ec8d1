//! Metric and potential fields.
//!
//! Every field is an analytic expression evaluated on [`Jet`]s, so values and
//! derivatives of any order up to [`MAX_ORDER`] come from one code path.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::geometry::diffeo::Diffeomorphism;
use crate::geometry::grid::Grid;
use crate::jet::{seed, Jet, MAX_ORDER};

/// 2x2 matrix; in 1D only the `[0][0]` entry is meaningful.
pub type Mat2 = [[f64; 2]; 2];
pub type JetMat = [[Jet; 2]; 2];

/// Smooth compactly supported bump `amplitude * exp(1 - 1/(1 - r^2/radius^2))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: [f64; 2], radius: f64, amplitude: f64) -> Self {
        Self { center, radius, amplitude }
    }

    /// Squared scaled distance `|x - c|^2 / r^2` on the first `dim` axes.
    fn scaled_dist2(&self, x: &[Jet; 2], dim: usize) -> Jet {
        let mut q = Jet::zero();
        for k in 0..dim {
            let d = x[k] - self.center[k];
            q += d * d;
        }
        q.scale(1.0 / (self.radius * self.radius))
    }

    fn profile(q: Jet) -> Jet {
        // exp(1 - 1/(1 - q)), flat to all orders at q = 1
        ((-q + 1.0).recip().scale(-1.0) + 1.0).exp()
    }

    pub fn eval_jet(&self, x: &[Jet; 2], dim: usize) -> Jet {
        let q = self.scaled_dist2(x, dim);
        if q.value() >= 1.0 {
            return Jet::zero().truncate(x[0].order());
        }
        Self::profile(q).scale(self.amplitude)
    }

    /// Gradient of the bump as jets.
    pub fn grad_jet(&self, x: &[Jet; 2], dim: usize) -> [Jet; 2] {
        let q = self.scaled_dist2(x, dim);
        let order = x[0].order();
        if q.value() >= 1.0 {
            return [Jet::zero().truncate(order); 2];
        }
        // d/dq exp(1 - 1/(1-q)) = -exp(...) / (1-q)^2
        let one_minus = -q + 1.0;
        let dprofile = -(Self::profile(q) * (one_minus * one_minus).recip());
        let mut out = [Jet::zero().truncate(order); 2];
        for k in 0..dim {
            let dq = (x[k] - self.center[k]).scale(2.0 / (self.radius * self.radius));
            out[k] = (dprofile * dq).scale(self.amplitude);
        }
        out
    }

    pub fn eval(&self, x: [f64; 2], dim: usize) -> f64 {
        self.eval_jet(&seed(x, 0), dim).value()
    }

    /// Whether `x` lies in the open support.
    pub fn support_contains(&self, x: [f64; 2], dim: usize) -> bool {
        let d2: f64 = (0..dim).map(|k| (x[k] - self.center[k]).powi(2)).sum();
        d2 < self.radius * self.radius
    }
}

/// Analytic metric model evaluated on jets.
pub trait MetricModel: Debug + Send + Sync {
    fn eval(&self, x: &[Jet; 2], dim: usize) -> JetMat;
    /// Stable parameter description used for content hashing.
    fn describe(&self) -> String;
}

/// Analytic potential model evaluated on jets.
pub trait PotentialModel: Debug + Send + Sync {
    fn eval(&self, x: &[Jet; 2], dim: usize) -> Jet;
    fn describe(&self) -> String;
}

#[derive(Clone, Copy, Debug)]
pub struct IdentityMetric;

impl MetricModel for IdentityMetric {
    fn eval(&self, x: &[Jet; 2], _dim: usize) -> JetMat {
        let order = x[0].order();
        let one = Jet::constant(1.0).truncate(order);
        let zero = Jet::zero().truncate(order);
        [[one, zero], [zero, one]]
    }

    fn describe(&self) -> String {
        "identity".into()
    }
}

/// `g_ii(x) = scale_i * (1 + curvature * |x - center|^2)`, off-diagonals zero.
#[derive(Clone, Copy, Debug)]
pub struct DiagonalPolyMetric {
    pub scale: [f64; 2],
    pub curvature: f64,
    pub center: [f64; 2],
}

impl MetricModel for DiagonalPolyMetric {
    fn eval(&self, x: &[Jet; 2], dim: usize) -> JetMat {
        let order = x[0].order();
        let mut r2 = Jet::zero().truncate(order);
        for k in 0..dim {
            let d = x[k] - self.center[k];
            r2 += d * d;
        }
        let factor = r2.scale(self.curvature) + 1.0;
        let zero = Jet::zero().truncate(order);
        let diag1 = if dim > 1 { factor.scale(self.scale[1]) } else { Jet::constant(1.0).truncate(order) };
        [[factor.scale(self.scale[0]), zero], [zero, diag1]]
    }

    fn describe(&self) -> String {
        format!("diagonal-poly(scale={:?},curvature={:?},center={:?})", self.scale, self.curvature, self.center)
    }
}

/// Constant diagonal plus a Gaussian off-diagonal bump
/// `g = diag(base) + amplitude * exp(-|x-c|^2/width^2) [[0,1],[1,0]]`.
#[derive(Clone, Copy, Debug)]
pub struct OffdiagBumpMetric {
    pub base: [f64; 2],
    pub amplitude: f64,
    pub center: [f64; 2],
    pub width: f64,
}

impl MetricModel for OffdiagBumpMetric {
    fn eval(&self, x: &[Jet; 2], dim: usize) -> JetMat {
        let order = x[0].order();
        let mut r2 = Jet::zero().truncate(order);
        for k in 0..dim {
            let d = x[k] - self.center[k];
            r2 += d * d;
        }
        let off = r2.scale(-1.0 / (self.width * self.width)).exp().scale(self.amplitude);
        let off = if dim > 1 { off } else { Jet::zero().truncate(order) };
        let d0 = Jet::constant(self.base[0]).truncate(order);
        let d1 = Jet::constant(if dim > 1 { self.base[1] } else { 1.0 }).truncate(order);
        [[d0, off], [off, d1]]
    }

    fn describe(&self) -> String {
        format!(
            "offdiag-bump(base={:?},amplitude={:?},center={:?},width={:?})",
            self.base, self.amplitude, self.center, self.width
        )
    }
}

/// `(Ψ*g)_ij = ∂_i Ψ^k g_kl(Ψ) ∂_j Ψ^l`.
#[derive(Clone, Debug)]
pub struct PulledBackMetric {
    pub inner: MetricField,
    pub psi: Diffeomorphism,
}

impl MetricModel for PulledBackMetric {
    fn eval(&self, x: &[Jet; 2], dim: usize) -> JetMat {
        let y = self.psi.map_jet(x);
        let jac = self.psi.jacobian_jet(x);
        let g = self.inner.model.eval(&y, dim);
        let order = x[0].order();
        let mut out = [[Jet::zero().truncate(order); 2]; 2];
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = Jet::zero().truncate(order);
                for k in 0..dim {
                    for l in 0..dim {
                        acc += jac[k][i] * g[k][l] * jac[l][j];
                    }
                }
                out[i][j] = acc;
            }
        }
        if dim == 1 {
            out[1][1] = Jet::constant(1.0).truncate(order);
        }
        out
    }

    fn describe(&self) -> String {
        format!("pullback({};{})", self.inner.describe(), self.psi.describe())
    }
}

/// Riemannian metric `g(x)` on a 1D or 2D domain.
#[derive(Clone, Debug)]
pub struct MetricField {
    model: Arc<dyn MetricModel>,
    dim: usize,
}

/// Metric, inverse and determinant at a point.
#[derive(Clone, Copy, Debug)]
pub struct MetricPoint {
    pub g: Mat2,
    pub inverse: Mat2,
    pub det: f64,
}

impl MetricField {
    pub fn new(model: Arc<dyn MetricModel>, dim: usize) -> Self {
        assert!((1..=2).contains(&dim));
        Self { model, dim }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(Arc::new(IdentityMetric), dim)
    }

    pub fn diagonal_poly(dim: usize, scale: [f64; 2], curvature: f64, center: [f64; 2]) -> Self {
        Self::new(Arc::new(DiagonalPolyMetric { scale, curvature, center }), dim)
    }

    pub fn constant_diagonal(dim: usize, scale: [f64; 2]) -> Self {
        Self::diagonal_poly(dim, scale, 0.0, [0.0; 2])
    }

    pub fn offdiag_bump(base: [f64; 2], amplitude: f64, center: [f64; 2], width: f64) -> Self {
        Self::new(Arc::new(OffdiagBumpMetric { base, amplitude, center, width }), 2)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn describe(&self) -> String {
        format!("{}d:{}", self.dim, self.model.describe())
    }

    /// Metric entries as jets at arbitrary jet inputs.
    pub fn eval_jet(&self, x: &[Jet; 2]) -> JetMat {
        self.model.eval(x, self.dim)
    }

    /// Metric entries as jets about `x`, truncated at `order`.
    pub fn jet(&self, x: [f64; 2], order: usize) -> JetMat {
        assert!(order <= MAX_ORDER);
        self.eval_jet(&seed(x, order))
    }

    pub fn g(&self, x: [f64; 2]) -> Mat2 {
        let j = self.jet(x, 0);
        [[j[0][0].value(), j[0][1].value()], [j[1][0].value(), j[1][1].value()]]
    }

    /// `∂_k g_ij` as `[k][i][j]`.
    pub fn dg(&self, x: [f64; 2]) -> [Mat2; 2] {
        let j = self.jet(x, 1);
        let mut out = [[[0.0; 2]; 2]; 2];
        for k in 0..self.dim {
            for a in 0..2 {
                for b in 0..2 {
                    out[k][a][b] = j[a][b].grad(k);
                }
            }
        }
        out
    }

    /// `∂_k ∂_l g_ij` as `[k][l][i][j]`.
    pub fn d2g(&self, x: [f64; 2]) -> [[Mat2; 2]; 2] {
        let j = self.jet(x, 2);
        let mut out = [[[[0.0; 2]; 2]; 2]; 2];
        for k in 0..self.dim {
            for l in 0..self.dim {
                for a in 0..2 {
                    for b in 0..2 {
                        out[k][l][a][b] = j[a][b].hess(k, l);
                    }
                }
            }
        }
        out
    }

    pub fn at(&self, x: [f64; 2]) -> MetricPoint {
        let g = self.g(x);
        let (inverse, det) = invert(&g, self.dim);
        MetricPoint { g, inverse, det }
    }

    /// `g^{ij}(x)`.
    pub fn inverse(&self, x: [f64; 2]) -> Mat2 {
        self.at(x).inverse
    }

    /// `|g|(x) = det g(x)`.
    pub fn det(&self, x: [f64; 2]) -> f64 {
        self.at(x).det
    }

    pub fn sqrt_det(&self, x: [f64; 2]) -> f64 {
        self.det(x).sqrt()
    }

    /// Smallest `λ` with `λ|ξ|² <= g(ξ,ξ) <= |ξ|²/λ` over the grid nodes.
    pub fn ellipticity(&self, grid: &Grid) -> f64 {
        let mut lambda: f64 = 1.0;
        for i in 0..grid.node_count() {
            let (lo, hi) = sym_eigen_range(&self.g(grid.point(i)), self.dim);
            lambda = lambda.min(lo).min(1.0 / hi);
        }
        lambda
    }

    /// Checks symmetry, positivity and the ellipticity bound at every node on
    /// a fan of unit covectors; returns the observed ellipticity constant.
    pub fn check_invariants(&self, grid: &Grid) -> Result<f64> {
        let lambda = self.ellipticity(grid);
        if !(lambda > 0.0) {
            return Err(LabError::InvalidField(format!("metric not uniformly elliptic (λ = {lambda})")));
        }
        let dirs: Vec<[f64; 2]> = if self.dim == 1 {
            vec![[1.0, 0.0]]
        } else {
            (0..16)
                .map(|k| {
                    let t = std::f64::consts::PI * k as f64 / 16.0;
                    [t.cos(), t.sin()]
                })
                .collect()
        };
        for i in 0..grid.node_count() {
            let g = self.g(grid.point(i));
            let asym = (g[0][1] - g[1][0]).abs();
            if asym > 1e-14 * g[0][0].abs().max(g[1][1].abs()) {
                return Err(LabError::InvalidField(format!("metric asymmetric at node {i}")));
            }
            for xi in &dirs {
                let q: f64 =
                    (0..self.dim).flat_map(|a| (0..self.dim).map(move |b| (a, b))).map(|(a, b)| g[a][b] * xi[a] * xi[b]).sum();
                if q < lambda * (1.0 - 1e-12) || q > (1.0 + 1e-12) / lambda {
                    return Err(LabError::InvalidField(format!("ellipticity bound fails at node {i}")));
                }
            }
        }
        Ok(lambda)
    }
}

/// Inverse and determinant of the leading `dim x dim` block.
pub fn invert(g: &Mat2, dim: usize) -> (Mat2, f64) {
    if dim == 1 {
        let d = g[0][0];
        ([[1.0 / d, 0.0], [0.0, 1.0]], d)
    } else {
        let d = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        ([[g[1][1] / d, -g[0][1] / d], [-g[1][0] / d, g[0][0] / d]], d)
    }
}

/// Jet-valued inverse and determinant.
pub fn invert_jet(g: &JetMat, dim: usize) -> (JetMat, Jet) {
    let order = g[0][0].order();
    if dim == 1 {
        let zero = Jet::zero().truncate(order);
        let one = Jet::constant(1.0).truncate(order);
        ([[g[0][0].recip(), zero], [zero, one]], g[0][0])
    } else {
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let inv_det = det.recip();
        ([[g[1][1] * inv_det, -(g[0][1] * inv_det)], [-(g[1][0] * inv_det), g[0][0] * inv_det]], det)
    }
}

/// Smallest and largest eigenvalue of a symmetric block.
pub fn sym_eigen_range(g: &Mat2, dim: usize) -> (f64, f64) {
    if dim == 1 {
        return (g[0][0], g[0][0]);
    }
    let tr = g[0][0] + g[1][1];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let disc = ((tr * tr / 4.0) - det).max(0.0).sqrt();
    (tr / 2.0 - disc, tr / 2.0 + disc)
}

/// `|ξ|_g = sqrt(g^{ij} ξ_i ξ_j)`.
pub fn metric_norm(g: &MetricField, x: [f64; 2], xi: [f64; 2]) -> Result<f64> {
    let dim = g.dim();
    if xi[..dim].iter().all(|&v| v == 0.0) {
        return Err(LabError::Precondition("covector must be nonzero".into()));
    }
    let inv = g.inverse(x);
    let mut q = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            q += inv[i][j] * xi[i] * xi[j];
        }
    }
    Ok(q.sqrt())
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantPotential(pub f64);

impl PotentialModel for ConstantPotential {
    fn eval(&self, x: &[Jet; 2], _dim: usize) -> Jet {
        Jet::constant(self.0).truncate(x[0].order())
    }

    fn describe(&self) -> String {
        format!("constant({:?})", self.0)
    }
}

/// `amplitude * exp(-|x - center|^2 / width^2)`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianPotential {
    pub amplitude: f64,
    pub center: [f64; 2],
    pub width: f64,
}

impl PotentialModel for GaussianPotential {
    fn eval(&self, x: &[Jet; 2], dim: usize) -> Jet {
        let mut r2 = Jet::zero().truncate(x[0].order());
        for k in 0..dim {
            let d = x[k] - self.center[k];
            r2 += d * d;
        }
        r2.scale(-1.0 / (self.width * self.width)).exp().scale(self.amplitude)
    }

    fn describe(&self) -> String {
        format!("gaussian(amplitude={:?},center={:?},width={:?})", self.amplitude, self.center, self.width)
    }
}

/// `offset + slope · x`.
#[derive(Clone, Copy, Debug)]
pub struct AffinePotential {
    pub offset: f64,
    pub slope: [f64; 2],
}

impl PotentialModel for AffinePotential {
    fn eval(&self, x: &[Jet; 2], dim: usize) -> Jet {
        let mut v = Jet::constant(self.offset).truncate(x[0].order());
        for k in 0..dim {
            v += x[k].scale(self.slope[k]);
        }
        v
    }

    fn describe(&self) -> String {
        format!("affine(offset={:?},slope={:?})", self.offset, self.slope)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BumpPotential(pub Bump);

impl PotentialModel for BumpPotential {
    fn eval(&self, x: &[Jet; 2], dim: usize) -> Jet {
        self.0.eval_jet(x, dim)
    }

    fn describe(&self) -> String {
        format!("bump(center={:?},radius={:?},amplitude={:?})", self.0.center, self.0.radius, self.0.amplitude)
    }
}

#[derive(Clone, Debug)]
pub struct SumPotential(pub Vec<PotentialField>);

impl PotentialModel for SumPotential {
    fn eval(&self, x: &[Jet; 2], dim: usize) -> Jet {
        let mut acc = Jet::zero().truncate(x[0].order());
        for p in &self.0 {
            acc += p.model.eval(x, dim);
        }
        acc
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(PotentialField::describe).collect();
        format!("sum({})", parts.join(","))
    }
}

/// `V ∘ Ψ`.
#[derive(Clone, Debug)]
pub struct ComposedPotential {
    pub inner: PotentialField,
    pub psi: Diffeomorphism,
}

impl PotentialModel for ComposedPotential {
    fn eval(&self, x: &[Jet; 2], dim: usize) -> Jet {
        self.inner.model.eval(&self.psi.map_jet(x), dim)
    }

    fn describe(&self) -> String {
        format!("compose({};{})", self.inner.describe(), self.psi.describe())
    }
}

/// Nonnegative potential `V(x)`.
#[derive(Clone, Debug)]
pub struct PotentialField {
    model: Arc<dyn PotentialModel>,
    dim: usize,
}

impl PotentialField {
    pub fn new(model: Arc<dyn PotentialModel>, dim: usize) -> Self {
        Self { model, dim }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(Arc::new(ConstantPotential(c)), dim)
    }

    pub fn gaussian(dim: usize, amplitude: f64, center: [f64; 2], width: f64) -> Self {
        Self::new(Arc::new(GaussianPotential { amplitude, center, width }), dim)
    }

    pub fn affine(dim: usize, offset: f64, slope: [f64; 2]) -> Self {
        Self::new(Arc::new(AffinePotential { offset, slope }), dim)
    }

    pub fn bump(dim: usize, bump: Bump) -> Self {
        Self::new(Arc::new(BumpPotential(bump)), dim)
    }

    pub fn plus(&self, other: &PotentialField) -> Self {
        Self::new(Arc::new(SumPotential(vec![self.clone(), other.clone()])), self.dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn describe(&self) -> String {
        format!("{}d:{}", self.dim, self.model.describe())
    }

    pub fn eval_jet(&self, x: &[Jet; 2]) -> Jet {
        self.model.eval(x, self.dim)
    }

    pub fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        self.eval_jet(&seed(x, order))
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.jet(x, 0).value()
    }

    pub fn check_invariants(&self, grid: &Grid) -> Result<()> {
        for i in 0..grid.node_count() {
            let v = self.value(grid.point(i));
            if !(v >= 0.0) {
                return Err(LabError::InvalidField(format!("potential {v} < 0 at node {i}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::{build_grid, DomainSpec};
    use approx::assert_relative_eq;

    #[test]
    fn metric_norm_examples() {
        let id = MetricField::identity(2);
        assert_relative_eq!(metric_norm(&id, [0.3, 0.2], [3.0, 4.0]).unwrap(), 5.0, epsilon = 1e-15);
        let four = MetricField::constant_diagonal(1, [4.0, 1.0]);
        assert_relative_eq!(metric_norm(&four, [0.5, 0.0], [2.0, 0.0]).unwrap(), 1.0, epsilon = 1e-15);
        let poly = MetricField::diagonal_poly(1, [1.0, 1.0], 0.25, [0.0, 0.0]);
        assert_relative_eq!(metric_norm(&poly, [1.0, 0.0], [1.0, 0.0]).unwrap(), 1.0 / 1.25f64.sqrt(), epsilon = 1e-15);
        assert!(metric_norm(&poly, [1.0, 0.0], [0.0, 0.0]).is_err());
    }

    #[test]
    fn supplied_derivatives_match_central_differences() {
        let g = MetricField::offdiag_bump([1.2, 0.9], 0.3, [0.4, 0.6], 0.35);
        let x = [0.52, 0.47];
        let h = 1e-4;
        let dg = g.dg(x);
        let d2g = g.d2g(x);
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (gp, gm) = (g.g(xp), g.g(xm));
            let (dp, dm) = (g.dg(xp), g.dg(xm));
            for a in 0..2 {
                for b in 0..2 {
                    let fd = (gp[a][b] - gm[a][b]) / (2.0 * h);
                    assert!((fd - dg[k][a][b]).abs() < 1e-7, "first derivative");
                    for l in 0..2 {
                        let fd2 = (dp[l][a][b] - dm[l][a][b]) / (2.0 * h);
                        assert!((fd2 - d2g[k][l][a][b]).abs() < 1e-6, "second derivative");
                    }
                }
            }
        }
    }

    #[test]
    fn invariants_hold_for_presets() {
        let grid = build_grid(&DomainSpec::rectangle([0.0, 0.0], [1.0, 1.0]), &[17, 17]).unwrap();
        let g = MetricField::offdiag_bump([1.0, 1.0], 0.4, [0.5, 0.5], 0.2);
        let lambda = g.check_invariants(&grid).unwrap();
        assert!(lambda > 0.5 && lambda < 1.0);
        assert!(PotentialField::gaussian(2, 2.0, [0.5, 0.5], 0.3).check_invariants(&grid).is_ok());
        assert!(PotentialField::affine(2, -1.0, [1.0, 0.0]).check_invariants(&grid).is_err());
    }

    #[test]
    fn polarization_recovers_inverse_metric() {
        let g = MetricField::offdiag_bump([1.3, 0.8], 0.35, [0.5, 0.5], 0.4);
        let x = [0.45, 0.55];
        let q = |xi: [f64; 2]| metric_norm(&g, x, xi).unwrap().powi(2);
        let inv = g.inverse(x);
        let g11 = q([1.0, 0.0]);
        let g22 = q([0.0, 1.0]);
        let g12 = 0.5 * (q([1.0, 1.0]) - g11 - g22);
        assert!((g11 - inv[0][0]).abs() < 1e-12);
        assert!((g22 - inv[1][1]).abs() < 1e-12);
        assert!((g12 - inv[0][1]).abs() < 1e-12);
    }

    #[test]
    fn bump_is_flat_outside_support() {
        let b = Bump::new([0.5, 0.0], 0.2, 1.0);
        assert_eq!(b.eval([0.8, 0.0], 1), 0.0);
        assert_relative_eq!(b.eval([0.5, 0.0], 1), 1.0, epsilon = 1e-15);
        let grad = b.grad_jet(&seed([0.6, 0.0], 1), 1);
        let h = 1e-6;
        let fd = (b.eval([0.6 + h, 0.0], 1) - b.eval([0.6 - h, 0.0], 1)) / (2.0 * h);
        assert_relative_eq!(grad[0].value(), fd, max_relative = 1e-7);
    }

    proptest::proptest! {
        #[test]
        fn metric_norm_is_one_homogeneous(c in -5.0f64..5.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            proptest::prop_assume!(a.abs() + b.abs() > 1e-3 && c.abs() > 1e-3);
            let g = MetricField::offdiag_bump([1.1, 0.7], 0.25, [0.3, 0.3], 0.5);
            let x = [0.2, 0.4];
            let n1 = metric_norm(&g, x, [c * a, c * b]).unwrap();
            let n0 = metric_norm(&g, x, [a, b]).unwrap();
            proptest::prop_assert!((n1 - c.abs() * n0).abs() <= 1e-14 * n1.max(1.0));
        }
    }
}
