//! Boundary determination on the window Γ from oscillating Neumann probes:
//! pairing sequences `N^{-1}⟨φ_N, Λφ_N⟩`, their extrapolated limits, the
//! metric by polarization, and potential differences.

use faer::linalg::solvers::{DenseSolveCore, Solve, SolveLstsq};
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::extension::{mask, nd_map};
use crate::geometry::fields::{Bump, Mat2, MetricField, PotentialField};
use crate::geometry::grid::{Grid, GridFunction};
use crate::geometry::region::Region;
use crate::operator::{assemble, eigendecompose, DiscreteOperator, SpectralDecomposition};
use crate::wkb::OscillatoryProbe;

/// Largest admissible `N |ξ| h`.
pub const ALIASING_LIMIT: f64 = std::f64::consts::FRAC_PI_4;

/// A Neumann-to-Dirichlet map on a window.
pub trait NdMap: Sync {
    fn grid(&self) -> &Grid;
    fn region(&self) -> &Region;
    fn metric(&self) -> &MetricField;
    /// `Λ f`, defined at window nodes and zero elsewhere.
    fn apply(&self, f: &GridFunction) -> Result<GridFunction>;

    fn apply_many(&self, fs: &[GridFunction]) -> Result<Vec<GridFunction>> {
        fs.iter().map(|f| self.apply(f)).collect()
    }
}

/// ND map through a full eigendecomposition.
pub struct SpectralNd {
    spec: SpectralDecomposition,
    region: Region,
    metric: MetricField,
    potential: PotentialField,
}

impl SpectralNd {
    pub fn new(spec: SpectralDecomposition, region: Region, metric: MetricField, potential: PotentialField) -> Self {
        Self { spec, region, metric, potential }
    }

    pub fn build(grid: &Grid, g: &MetricField, v: &PotentialField, region: &Region) -> Result<Self> {
        let op = assemble(grid, g, v)?;
        let spec = eigendecompose(&op, op.size())?;
        Ok(Self::new(spec, region.clone(), g.clone(), v.clone()))
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spec
    }

    pub fn potential(&self) -> &PotentialField {
        &self.potential
    }
}

impl NdMap for SpectralNd {
    fn grid(&self) -> &Grid {
        self.spec.grid()
    }

    fn region(&self) -> &Region {
        &self.region
    }

    fn metric(&self) -> &MetricField {
        &self.metric
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        nd_map(&self.spec, f, &self.region)
    }
}

/// ND map through `P^{-1/2} = (2/π) ∫_0^∞ (P + μ²)^{-1} dμ`, integrated by the
/// trapezoid rule in `u = ln μ` with one sparse Cholesky factorization per
/// node. Needs no eigendecomposition, so non-separable 2D fields stay cheap.
pub struct ResolventNd {
    op: DiscreteOperator,
    region: Region,
    /// `ln μ` nodes.
    nodes: Vec<f64>,
    step: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

struct ShiftedSystem {
    base: SparseColMat<usize, f64>,
    diag: Vec<usize>,
    symbolic: SymbolicLlt<usize>,
}

impl ShiftedSystem {
    fn new(op: &DiscreteOperator) -> Result<Self> {
        let n = op.size();
        let mut trip: Vec<Triplet<usize, usize, f64>> =
            op.stiffness().triplets().into_iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        // explicit zeros keep every diagonal slot in the pattern
        trip.extend((0..n).map(|i| Triplet::new(i, i, 0.0)));
        let base = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| LabError::LinearSolve(format!("{e:?}")))?;
        let sym = base.symbolic();
        let (ptr, rows) = (sym.col_ptr(), sym.row_idx());
        let diag = (0..n).map(|j| (ptr[j]..ptr[j + 1]).find(|&k| rows[k] == j).expect("diagonal present")).collect();
        let symbolic = SymbolicLlt::try_new(sym, Side::Lower).map_err(|e| LabError::LinearSolve(format!("{e:?}")))?;
        Ok(Self { base, diag, symbolic })
    }

    fn factor(&self, shift: f64, mass: &[f64]) -> Result<Llt<usize, f64>> {
        let mut k = self.base.clone();
        let val = k.val_mut();
        for (i, &d) in self.diag.iter().enumerate() {
            val[d] += shift * mass[i];
        }
        Llt::try_new_with_symbolic(self.symbolic.clone(), k.as_ref(), Side::Lower)
            .map_err(|e| LabError::LinearSolve(format!("{e:?}")))
    }
}

impl ResolventNd {
    /// `step` is the trapezoid spacing in `ln μ`; the rule error is about
    /// `e^{-π²/step}`.
    pub fn build(grid: &Grid, g: &MetricField, v: &PotentialField, region: &Region, step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(LabError::Precondition(format!("quadrature step {step} outside (0, 1]")));
        }
        let op = assemble(grid, g, v)?;
        let sys = ShiftedSystem::new(&op)?;
        let llt = sys.factor(0.0, op.mass())?;
        let n = op.size();
        // inverse iteration for the bottom of the spectrum
        let mut x = vec![1.0; n];
        let mut lambda_min = 0.0;
        for _ in 0..30 {
            let mx: Vec<f64> = x.iter().zip(op.mass()).map(|(a, m)| a * m).collect();
            let norm = mx.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().sqrt();
            let rhs = Mat::<f64>::from_fn(n, 1, |i, _| mx[i] / norm);
            let y = llt.solve(&rhs);
            let xn: Vec<f64> = (0..n).map(|i| x[i] / norm).collect();
            let ax = op.stiffness().apply(&xn);
            lambda_min = ax.iter().zip(&xn).map(|(a, b)| a * b).sum::<f64>();
            x = (0..n).map(|i| y[(i, 0)]).collect();
        }
        let lambda_max = crate::transmute::max_eigenvalue_bound(op.stiffness(), op.mass());
        // tails beyond e^{±12} of the spectrum are taken in closed form; the
        // trapezoid endpoint error is O(step² e^{-12})
        let lo = 0.5 * (0.5 * lambda_min).ln() - 12.0;
        let hi = 0.5 * lambda_max.ln() + 12.0;
        let count = ((hi - lo) / step).ceil() as usize;
        let step = (hi - lo) / count as f64;
        let nodes = (0..=count).map(|j| lo + j as f64 * step).collect();
        Ok(Self { op, region: region.clone(), nodes, step, lambda_min, lambda_max })
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// `P^{-1/2} f` on the whole grid, for several right-hand sides.
    pub fn inverse_sqrt_many(&self, fs: &[GridFunction]) -> Result<Vec<GridFunction>> {
        let grid = self.op.grid();
        let n = self.op.size();
        let mass = self.op.mass();
        let cols = fs.len();
        let mut rhs = Mat::<f64>::zeros(n, cols);
        let mut plain = Mat::<f64>::zeros(n, cols);
        for (j, f) in fs.iter().enumerate() {
            if f.len() != grid.node_count() || !f.vanishes_on_boundary(grid, 1e-12) {
                return Err(LabError::Precondition("data must vanish on the outer boundary".into()));
            }
            for (i, v) in f.interior(grid).into_iter().enumerate() {
                rhs[(i, j)] = mass[i] * v;
                plain[(i, j)] = v;
            }
        }
        let sys = ShiftedSystem::new(&self.op)?;
        let two_pi = 2.0 / std::f64::consts::PI;
        let (mu_lo, mu_hi) = (self.nodes[0].exp(), self.nodes[self.nodes.len() - 1].exp());
        // ∫_0^{μ_lo} (P+μ²)^{-1} ≈ μ_lo P^{-1},  ∫_{μ_hi}^∞ ≈ 1/μ_hi
        let p_inv = sys.factor(0.0, mass)?.solve(&rhs);
        let mut acc = Mat::<f64>::from_fn(n, cols, |i, j| two_pi * (mu_lo * p_inv[(i, j)] + plain[(i, j)] / mu_hi));
        let last = self.nodes.len() - 1;
        for (k, &u) in self.nodes.iter().enumerate() {
            let mu = u.exp();
            let w = if k == 0 || k == last { 0.5 } else { 1.0 } * self.step * mu * two_pi;
            let sol = sys.factor(mu * mu, mass)?.solve(&rhs);
            for j in 0..cols {
                for i in 0..n {
                    acc[(i, j)] += w * sol[(i, j)];
                }
            }
        }
        Ok((0..cols).map(|j| GridFunction::from_interior(grid, &(0..n).map(|i| acc[(i, j)]).collect::<Vec<_>>())).collect())
    }
}

impl NdMap for ResolventNd {
    fn grid(&self) -> &Grid {
        self.op.grid()
    }

    fn region(&self) -> &Region {
        &self.region
    }

    fn metric(&self) -> &MetricField {
        self.op.metric()
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        Ok(self.apply_many(std::slice::from_ref(f))?.remove(0))
    }

    fn apply_many(&self, fs: &[GridFunction]) -> Result<Vec<GridFunction>> {
        for f in fs {
            if !self.region.supports(f, 1e-14 * f.max_abs()) {
                return Err(LabError::Precondition("Neumann data must be supported in the window".into()));
            }
        }
        Ok(self.inverse_sqrt_many(fs)?.iter().map(|u| mask(u, &self.region)).collect())
    }
}

/// `N |ξ| h` for the grid's coarsest spacing.
pub fn aliasing_product(grid: &Grid, xi: [f64; 2], n: f64) -> f64 {
    let norm = xi[..grid.dim()].iter().map(|v| v * v).sum::<f64>().sqrt();
    n * norm * grid.max_spacing()
}

/// Largest frequency allowed by the aliasing guard.
pub fn max_frequency(grid: &Grid, xi: [f64; 2]) -> f64 {
    ALIASING_LIMIT / aliasing_product(grid, xi, 1.0)
}

fn check_frequencies(grid: &Grid, xi: [f64; 2], n_list: &[f64]) -> Result<()> {
    if n_list.is_empty() {
        return Err(LabError::Precondition("empty frequency list".into()));
    }
    if n_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::Precondition("frequencies must be strictly increasing".into()));
    }
    for &n in n_list {
        let product = aliasing_product(grid, xi, n);
        if product > ALIASING_LIMIT * (1.0 + 1e-12) {
            return Err(LabError::Aliasing { n, product });
        }
    }
    Ok(())
}

/// `∫ w φ_N conj(Λ_1 φ_N - Λ_2 φ_N)` over the window for each probe, with
/// `Λ_2` optional. All data go through each map in one batch.
fn pair_many(
    first: &dyn NdMap,
    second: Option<&dyn NdMap>,
    probes: &[OscillatoryProbe],
    weight: &[f64],
) -> Result<Vec<Complex64>> {
    let grid = first.grid();
    let data: Vec<GridFunction> = probes
        .iter()
        .flat_map(|p| {
            let (re, im) = p.neumann_data(grid);
            [re, im]
        })
        .collect();
    let mut out = first.apply_many(&data)?;
    if let Some(second) = second {
        for (o, s) in out.iter_mut().zip(second.apply_many(&data)?) {
            *o = o.axpy(-1.0, &s);
        }
    }
    Ok((0..probes.len())
        .map(|k| {
            let (re, im, lre, lim) = (&data[2 * k], &data[2 * k + 1], &out[2 * k], &out[2 * k + 1]);
            first.region().members().iter().fold(Complex64::new(0.0, 0.0), |acc, &p| {
                let phi = Complex64::new(re.0[p], im.0[p]);
                let lphi = Complex64::new(lre.0[p], lim.0[p]);
                acc + phi * lphi.conj() * weight[p]
            })
        })
        .collect())
}

/// `N^{-1} ∫_Γ φ_N conj(Λ φ_N) dx` for each `N`.
pub fn pairing_sequence(nd: &dyn NdMap, probe: &OscillatoryProbe, n_list: &[f64]) -> Result<Vec<Complex64>> {
    Ok(pairing_sequences(nd, std::slice::from_ref(probe), n_list)?.remove(0))
}

/// [`pairing_sequence`] for several probes sharing one batch.
pub fn pairing_sequences(nd: &dyn NdMap, probes: &[OscillatoryProbe], n_list: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    let grid = nd.grid();
    let mut all = Vec::new();
    for probe in probes {
        probe.check_admissible(grid, nd.region())?;
        check_frequencies(grid, probe.xi, n_list)?;
        all.extend(n_list.iter().map(|&n| probe.with_frequency(n)));
    }
    let values = pair_many(nd, None, &all, &grid.weights())?;
    Ok(values.chunks(n_list.len()).map(|c| c.iter().zip(n_list).map(|(v, n)| v / n).collect()).collect())
}

/// Fit of `a + b/N + c/N²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrapolation {
    pub limit: f64,
    pub error: f64,
    pub coefficients: [f64; 3],
}

fn lstsq(n: &[f64], values: &[f64], terms: usize) -> Result<(Vec<f64>, Mat<f64>, f64)> {
    let m = n.len();
    let x = Mat::<f64>::from_fn(m, terms, |i, j| n[i].powi(-(j as i32)));
    // column scaling keeps the conditioning check meaningful
    let scale: Vec<f64> = (0..terms).map(|j| (0..m).map(|i| x[(i, j)].powi(2)).sum::<f64>().sqrt()).collect();
    let xs = Mat::<f64>::from_fn(m, terms, |i, j| x[(i, j)] / scale[j]);
    let sv = xs.singular_values().map_err(|e| LabError::IllConditioned(format!("{e:?}")))?;
    let cond = sv[0] / sv[terms - 1];
    if !(cond < 1e10) {
        return Err(LabError::IllConditioned(format!("extrapolation design condition {cond:e}")));
    }
    let rhs = Mat::<f64>::from_fn(m, 1, |i, _| values[i]);
    let sol = xs.qr().solve_lstsq(&rhs);
    let coeffs: Vec<f64> = (0..terms).map(|j| sol[(j, 0)] / scale[j]).collect();
    let ssr: f64 = (0..m).map(|i| values[i] - (0..terms).map(|j| coeffs[j] * x[(i, j)]).sum::<f64>()).map(|r| r * r).sum();
    let normal = xs.transpose() * &xs;
    let cov = normal.partial_piv_lu().inverse();
    Ok((coeffs, cov, ssr))
}

/// Least-squares fit of `a + b/N + c/N²`; the error bar combines the fit
/// residual with the change against a two-term fit on the last two entries.
pub fn extrapolate_limit(n_list: &[f64], values: &[f64]) -> Result<Extrapolation> {
    if n_list.len() < 3 || n_list.len() != values.len() {
        return Err(LabError::Precondition("need at least three (N, value) pairs".into()));
    }
    let m = n_list.len();
    let (c, cov, ssr) = lstsq(n_list, values, 3)?;
    let stat = if m > 3 {
        let sigma2 = ssr / (m - 3) as f64;
        // the constant column was scaled by sqrt(m)
        (sigma2 * cov[(0, 0)]).sqrt() / (m as f64).sqrt()
    } else {
        0.0
    };
    let (c2, _, _) = lstsq(&n_list[m - 2..], &values[m - 2..], 2)?;
    let model = (c[0] - c2[0]).abs();
    Ok(Extrapolation { limit: c[0], error: stat.max(model), coefficients: [c[0], c[1], c[2]] })
}

/// Extrapolated pairing limit together with the raw sequence.
#[derive(Clone, Debug)]
pub struct PairingLimit {
    pub n: Vec<f64>,
    pub sequence: Vec<Complex64>,
    pub fit: Extrapolation,
    /// `∫_Γ η² dx`.
    pub eta_mass: f64,
}

impl PairingLimit {
    /// `|Im| / |Re limit|` at the largest `N`.
    pub fn imaginary_ratio(&self) -> f64 {
        self.sequence.last().map(|v| v.im.abs()).unwrap_or(0.0) / self.fit.limit.abs()
    }

    /// `|ξ|_g²` under the frozen-coefficient approximation.
    pub fn symbol_sq(&self) -> f64 {
        (self.eta_mass / self.fit.limit).powi(2)
    }

    pub fn symbol_sq_error(&self) -> f64 {
        2.0 * self.symbol_sq() * self.fit.error / self.fit.limit.abs()
    }
}

/// `∫ weight·η² dx` over the window.
pub fn eta_mass(grid: &Grid, region: &Region, eta: &Bump, weight: impl Fn([f64; 2]) -> f64) -> f64 {
    let w = grid.weights();
    region
        .members()
        .iter()
        .map(|&p| {
            let x = grid.point(p);
            w[p] * eta.eval(x, grid.dim()).powi(2) * weight(x)
        })
        .sum()
}

pub fn pairing_limit(nd: &dyn NdMap, probe: &OscillatoryProbe, n_list: &[f64]) -> Result<PairingLimit> {
    Ok(pairing_limits(nd, std::slice::from_ref(probe), n_list)?.remove(0))
}

pub fn pairing_limits(nd: &dyn NdMap, probes: &[OscillatoryProbe], n_list: &[f64]) -> Result<Vec<PairingLimit>> {
    pairing_sequences(nd, probes, n_list)?
        .into_iter()
        .zip(probes)
        .map(|(sequence, probe)| {
            let re: Vec<f64> = sequence.iter().map(|v| v.re).collect();
            let fit = extrapolate_limit(n_list, &re)?;
            let mass = eta_mass(nd.grid(), nd.region(), &probe.eta, |_| 1.0);
            Ok(PairingLimit { n: n_list.to_vec(), sequence, fit, eta_mass: mass })
        })
        .collect()
}

/// `∫_Γ |ξ|_g^{-1} η² dx` by quadrature against the true metric.
pub fn analytic_pairing_limit(grid: &Grid, region: &Region, g: &MetricField, probe: &OscillatoryProbe) -> f64 {
    let dim = grid.dim();
    eta_mass(grid, region, &probe.eta, |x| {
        let ginv = g.inverse(x);
        let mut q = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                q += ginv[i][j] * probe.xi[i] * probe.xi[j];
            }
        }
        1.0 / q.sqrt()
    })
}

/// Covectors `e_i` followed by `e_i + e_j`, `i < j`.
pub fn polarization_covectors(dim: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for i in 0..dim {
        let mut e = [0.0; 2];
        e[i] = 1.0;
        out.push(e);
    }
    for i in 0..dim {
        for j in i + 1..dim {
            let mut e = [0.0; 2];
            e[i] = 1.0;
            e[j] = 1.0;
            out.push(e);
        }
    }
    out
}

/// Recovered inverse metric at one bump center.
#[derive(Clone, Debug)]
pub struct MetricEstimate {
    pub center: [f64; 2],
    pub inverse: Mat2,
    pub error: Mat2,
    /// Per covector: `(ξ, |ξ|_g², error)`.
    pub samples: Vec<([f64; 2], f64, f64)>,
}

impl MetricEstimate {
    pub fn is_positive_definite(&self, dim: usize) -> bool {
        let a = self.inverse;
        if dim == 1 {
            a[0][0] > 0.0
        } else {
            a[0][0] > 0.0 && a[0][0] * a[1][1] - a[0][1] * a[1][0] > 0.0
        }
    }

    /// Largest entrywise relative deviation from `truth`. Entries below 1% of
    /// the largest diagonal entry are measured against that 1% floor.
    pub fn relative_error(&self, truth: &Mat2, dim: usize) -> f64 {
        let diag = (0..dim).map(|i| truth[i][i].abs()).fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let denom = truth[i][j].abs().max(1e-2 * diag);
                worst = worst.max((self.inverse[i][j] - truth[i][j]).abs() / denom);
            }
        }
        worst
    }
}

/// Polarization from `|ξ|_g²` on the covectors of [`polarization_covectors`].
pub fn polarize(dim: usize, q: &[f64], err: &[f64]) -> (Mat2, Mat2) {
    let mut a = [[0.0; 2]; 2];
    let mut e = [[0.0; 2]; 2];
    for i in 0..dim {
        a[i][i] = q[i];
        e[i][i] = err[i];
    }
    let mut k = dim;
    for i in 0..dim {
        for j in i + 1..dim {
            a[i][j] = 0.5 * (q[k] - q[i] - q[j]);
            a[j][i] = a[i][j];
            e[i][j] = 0.5 * (err[k] + err[i] + err[j]);
            e[j][i] = e[i][j];
            k += 1;
        }
    }
    (a, e)
}

pub fn recover_metric_at(nd: &dyn NdMap, center: [f64; 2], width: f64, n_list: &[f64]) -> Result<MetricEstimate> {
    let dim = nd.grid().dim();
    let covectors = polarization_covectors(dim);
    let probes: Vec<OscillatoryProbe> =
        covectors.iter().map(|&xi| OscillatoryProbe::new(Bump::new(center, width, 1.0), xi, n_list[0])).collect();
    let samples: Vec<_> = pairing_limits(nd, &probes, n_list)?
        .iter()
        .zip(&covectors)
        .map(|(lim, &xi)| (xi, lim.symbol_sq(), lim.symbol_sq_error()))
        .collect();
    let q: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let err: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let (inverse, error) = polarize(dim, &q, &err);
    Ok(MetricEstimate { center, inverse, error, samples })
}

/// `g^{ij}` at each bump center, by polarization over `{e_i, e_i + e_j}`.
pub fn recover_metric_on_gamma(nd: &dyn NdMap, centers: &[[f64; 2]], width: f64, n_list: &[f64]) -> Result<Vec<MetricEstimate>> {
    let dim = nd.grid().dim();
    let covectors = polarization_covectors(dim);
    let probes: Vec<OscillatoryProbe> = centers
        .iter()
        .flat_map(|&c| covectors.iter().map(move |&xi| OscillatoryProbe::new(Bump::new(c, width, 1.0), xi, n_list[0])))
        .collect();
    let limits = pairing_limits(nd, &probes, n_list)?;
    Ok(centers
        .iter()
        .zip(limits.chunks(covectors.len()))
        .map(|(&center, lims)| {
            let samples: Vec<_> = lims.iter().zip(&covectors).map(|(l, &xi)| (xi, l.symbol_sq(), l.symbol_sq_error())).collect();
            let q: Vec<f64> = samples.iter().map(|s| s.1).collect();
            let err: Vec<f64> = samples.iter().map(|s| s.2).collect();
            let (inverse, error) = polarize(dim, &q, &err);
            MetricEstimate { center, inverse, error, samples }
        })
        .collect())
}

/// `q(ξ₁+ξ₂) + q(ξ₁−ξ₂) − 2q(ξ₁) − 2q(ξ₂)` with its propagated error bar.
pub fn polarization_defect(
    nd: &dyn NdMap,
    center: [f64; 2],
    width: f64,
    xi1: [f64; 2],
    xi2: [f64; 2],
    n_list: &[f64],
) -> Result<(f64, f64)> {
    let q = |xi: [f64; 2]| -> Result<(f64, f64)> {
        let probe = OscillatoryProbe::new(Bump::new(center, width, 1.0), xi, n_list[0]);
        let lim = pairing_limit(nd, &probe, n_list)?;
        Ok((lim.symbol_sq(), lim.symbol_sq_error()))
    };
    let plus = q([xi1[0] + xi2[0], xi1[1] + xi2[1]])?;
    let minus = q([xi1[0] - xi2[0], xi1[1] - xi2[1]])?;
    let a = q(xi1)?;
    let b = q(xi2)?;
    Ok((plus.0 + minus.0 - 2.0 * a.0 - 2.0 * b.0, plus.1 + minus.1 + 2.0 * a.1 + 2.0 * b.1))
}

/// Potential-difference estimate with its raw sequence.
#[derive(Clone, Debug)]
pub struct PotentialDifference {
    pub n: Vec<f64>,
    /// `N ∫ |g|^{1/2} φ_N conj((Λ_1 − Λ_2)φ_N)` for each `N`.
    pub sequence: Vec<Complex64>,
    pub fit: Extrapolation,
    /// Estimate of `∫ |g|^{1/2}(V_1 − V_2) η² / (2|ξ|_g³) dx`; the raw
    /// sequence converges to its negative.
    pub estimate: f64,
    pub error: f64,
}

fn same_metric(a: &dyn NdMap, b: &dyn NdMap) -> Result<()> {
    let grid = a.grid();
    if grid.node_count() != b.grid().node_count() || grid.describe() != b.grid().describe() {
        return Err(LabError::Precondition("ND maps live on different grids".into()));
    }
    for &p in a.region().members() {
        let x = grid.point(p);
        let (ga, gb) = (a.metric().g(x), b.metric().g(x));
        for i in 0..grid.dim() {
            for j in 0..grid.dim() {
                if (ga[i][j] - gb[i][j]).abs() > 1e-12 * ga[i][j].abs().max(1.0) {
                    return Err(LabError::Precondition("ND maps must share the metric on the window".into()));
                }
            }
        }
    }
    Ok(())
}

pub fn recover_potential_difference(
    nd1: &dyn NdMap,
    nd2: &dyn NdMap,
    probe: &OscillatoryProbe,
    n_list: &[f64],
) -> Result<PotentialDifference> {
    same_metric(nd1, nd2)?;
    let grid = nd1.grid();
    probe.check_admissible(grid, nd1.region())?;
    check_frequencies(grid, probe.xi, n_list)?;
    let w = grid.weights();
    let weighted: Vec<f64> = (0..grid.node_count()).map(|p| w[p] * nd1.metric().sqrt_det(grid.point(p))).collect();
    let probes: Vec<OscillatoryProbe> = n_list.iter().map(|&n| probe.with_frequency(n)).collect();
    let sequence: Vec<Complex64> =
        pair_many(nd1, Some(nd2), &probes, &weighted)?.into_iter().zip(n_list).map(|(v, n)| v * *n).collect();
    let re: Vec<f64> = sequence.iter().map(|v| v.re).collect();
    let fit = extrapolate_limit(n_list, &re)?;
    Ok(PotentialDifference { n: n_list.to_vec(), sequence, fit, estimate: -fit.limit, error: fit.error })
}

/// `∫ |g|^{1/2}(V_1 − V_2) η² / (2|ξ|_g³) dx` by quadrature.
pub fn analytic_potential_difference(
    grid: &Grid,
    region: &Region,
    g: &MetricField,
    v1: &PotentialField,
    v2: &PotentialField,
    probe: &OscillatoryProbe,
) -> f64 {
    eta_mass(grid, region, &probe.eta, |x| {
        let s = crate::geometry::fields::metric_norm(g, x, probe.xi).unwrap_or(f64::NAN);
        g.sqrt_det(x) * (v1.value(x) - v2.value(x)) / (2.0 * s.powi(3))
    })
}

/// Pointwise `V` at bump centers against a reference map with `V ≡ 0` on
/// the same metric: the difference estimate divided by its known weight.
pub fn recover_potential_on_gamma(
    measured: &dyn NdMap,
    reference: &dyn NdMap,
    centers: &[[f64; 2]],
    width: f64,
    xi: [f64; 2],
    n_list: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let grid = measured.grid();
    centers
        .iter()
        .map(|&c| {
            let probe = OscillatoryProbe::new(Bump::new(c, width, 1.0), xi, n_list[0]);
            let d = recover_potential_difference(measured, reference, &probe, n_list)?;
            let weight = analytic_potential_difference(
                grid,
                measured.region(),
                measured.metric(),
                &PotentialField::constant(grid.dim(), 1.0),
                &PotentialField::zero(grid.dim()),
                &probe,
            );
            Ok((d.estimate / weight, d.error / weight))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::{build_grid, DomainSpec};
    use std::f64::consts::PI;

    #[test]
    fn extrapolation_is_exact_on_model() {
        let n = [8.0, 16.0, 32.0, 64.0];
        let v: Vec<f64> = n.iter().map(|n| 2.5 - 3.0 / n + 7.0 / (n * n)).collect();
        let e = extrapolate_limit(&n, &v).unwrap();
        assert!((e.limit - 2.5).abs() < 1e-12);
        let c = extrapolate_limit(&n, &[1.25; 4]).unwrap();
        assert!((c.limit - 1.25).abs() < 1e-12 && c.error < 1e-12);
        assert!(extrapolate_limit(&n[..2], &v[..2]).is_err());
        assert!(extrapolate_limit(&[8.0, 8.0, 8.0], &v[..3]).is_err());
    }

    fn setup(nodes: usize, g: MetricField, v: PotentialField) -> SpectralNd {
        let grid = build_grid(&DomainSpec::interval(0.0, PI), &[nodes]).unwrap();
        let region = Region::from_box(&grid, &[0.3], &[2.85]).unwrap();
        SpectralNd::build(&grid, &g, &v, &region).unwrap()
    }

    #[test]
    fn identity_limit_and_scaling() {
        let nd = setup(513, MetricField::identity(1), PotentialField::zero(1));
        let probe = OscillatoryProbe::new(Bump::new([1.5, 0.0], 0.6, 1.0), [1.0, 0.0], 8.0);
        let ns = [16.0, 24.0, 32.0, 48.0, 64.0];
        let lim = pairing_limit(&nd, &probe, &ns).unwrap();
        let want = analytic_pairing_limit(nd.grid(), nd.region(), nd.metric(), &probe);
        assert!((lim.fit.limit - want).abs() < 0.05 * want, "{} vs {want}", lim.fit.limit);
        assert!(lim.imaginary_ratio() < 0.01);
        let doubled = OscillatoryProbe { xi: [2.0, 0.0], ..probe };
        let lim2 = pairing_limit(&nd, &doubled, &[8.0, 12.0, 16.0, 24.0, 32.0]).unwrap();
        assert!((lim2.fit.limit / lim.fit.limit - 0.5).abs() < 0.02);
        let zero = OscillatoryProbe::new(Bump::new([1.5, 0.0], 0.6, 0.0), [1.0, 0.0], 8.0);
        assert!(pairing_sequence(&nd, &zero, &ns).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn aliasing_guard() {
        let nd = setup(129, MetricField::identity(1), PotentialField::zero(1));
        let probe = OscillatoryProbe::new(Bump::new([1.5, 0.0], 0.6, 1.0), [1.0, 0.0], 8.0);
        let nmax = max_frequency(nd.grid(), probe.xi);
        assert!(matches!(pairing_sequence(&nd, &probe, &[8.0, nmax * 1.1]), Err(LabError::Aliasing { .. })));
        assert!(pairing_sequence(&nd, &probe, &[8.0, nmax]).is_ok());
    }

    #[test]
    fn constant_metric_recovered() {
        let nd = setup(513, MetricField::constant_diagonal(1, [4.0, 1.0]), PotentialField::zero(1));
        let est = recover_metric_at(&nd, [1.5, 0.0], 0.5, &[16.0, 24.0, 32.0, 48.0, 64.0]).unwrap();
        assert!((est.inverse[0][0] - 0.25).abs() < 0.1 * 0.25, "{:?}", est.inverse);
        assert!(est.is_positive_definite(1));
    }

    #[test]
    fn potential_difference_limit() {
        let g = MetricField::identity(1);
        let nd1 = setup(513, g.clone(), PotentialField::constant(1, 1.0));
        let nd2 = setup(513, g, PotentialField::zero(1));
        // low-frequency leakage of the bump transform dominates for narrow bumps
        let probe = OscillatoryProbe::new(Bump::new([1.57, 0.0], 1.2, 1.0), [1.0, 0.0], 8.0);
        let ns = [16.0, 24.0, 32.0, 48.0];
        let d = recover_potential_difference(&nd1, &nd2, &probe, &ns).unwrap();
        let want =
            analytic_potential_difference(nd1.grid(), nd1.region(), nd1.metric(), nd1.potential(), nd2.potential(), &probe);
        assert!((d.estimate - want).abs() < 0.1 * want, "{} vs {want}", d.estimate);
        let same = recover_potential_difference(&nd1, &nd1, &probe, &ns).unwrap();
        assert!(same.estimate.abs() < 1e-12);
        let other = setup(513, MetricField::constant_diagonal(1, [2.0, 1.0]), PotentialField::zero(1));
        assert!(recover_potential_difference(&nd1, &other, &probe, &ns).is_err());
    }
}
