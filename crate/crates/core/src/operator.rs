//! Discrete realization of `P = -Δ_g + V` with Dirichlet conditions, and its
//! generalized eigendecomposition `A φ = λ M φ`.

use std::io::{Read, Write};
use std::path::PathBuf;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::geometry::fields::{invert, MetricField, PotentialField};
use crate::geometry::grid::{Grid, GridFunction};

/// Compressed sparse row matrix over interior unknowns.
#[derive(Clone, Debug)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Builds from unsorted triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        self.triplets().iter().map(|&(r, c, v)| (v - self.get(c, r)).abs()).fold(0.0, f64::max)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

/// Stiffness `A` and lumped mass `M` of `P` on the interior nodes.
///
/// `uᵀ A v` approximates `∫ (g^{ij} ∂_i u ∂_j v + V u v) |g|^{1/2} dx`, and
/// `M_ii = |g|^{1/2}(x_i) h_1 ... h_n`.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    grid: Grid,
    metric: MetricField,
    potential: PotentialField,
    stiffness: Csr,
    mass: Vec<f64>,
    separable: Option<SeparableData>,
}

/// Constant diagonal metric and constant potential: the operator splits into
/// one-dimensional pieces.
#[derive(Clone, Debug)]
struct SeparableData {
    inverse_diag: [f64; 2],
    potential: f64,
}

/// `|g|^{1/2} g^{ij}` at every node as `[a11, a12, a22]`.
fn flux_coefficients(grid: &Grid, g: &MetricField) -> Vec<[f64; 3]> {
    (0..grid.node_count())
        .map(|i| {
            let (inv, det) = invert(&g.g(grid.point(i)), grid.dim());
            let s = det.sqrt();
            [s * inv[0][0], s * inv[0][1], s * inv[1][1]]
        })
        .collect()
}

pub fn assemble(grid: &Grid, g: &MetricField, v: &PotentialField) -> Result<DiscreteOperator> {
    let dim = grid.dim();
    if g.dim() != dim || v.dim() != dim {
        return Err(LabError::Precondition("field dimension differs from grid".into()));
    }
    let coef = flux_coefficients(grid, g);
    for (node, c) in coef.iter().enumerate() {
        if !c.iter().all(|x| x.is_finite()) {
            return Err(LabError::Ellipticity { node, detail: "non-finite metric".into() });
        }
    }
    let vol = grid.cell_volume();
    let n = grid.interior_count();
    let mut entries = Vec::new();
    let idx = |flat: usize| grid.interior_index(flat);

    // second-order diagonal terms: sum over faces of a_face (u_p - u_q)^2 / h^2
    for axis in 0..dim {
        let h = grid.spacing(axis);
        let comp = if axis == 0 { 0 } else { 2 };
        for p in 0..grid.node_count() {
            let Some(q) = grid.neighbor(p, axis, 1) else { continue };
            let (ip, iq) = (idx(p), idx(q));
            if ip.is_none() && iq.is_none() {
                continue;
            }
            let face = 0.5 * (coef[p][comp] + coef[q][comp]);
            if dim == 2 {
                let avg = [0.5 * (coef[p][0] + coef[q][0]), 0.5 * (coef[p][1] + coef[q][1]), 0.5 * (coef[p][2] + coef[q][2])];
                if !(avg[0] > 0.0 && avg[0] * avg[2] - avg[1] * avg[1] > 0.0) {
                    return Err(LabError::Ellipticity {
                        node: p,
                        detail: format!("face coefficient {avg:?} not positive definite"),
                    });
                }
            } else if !(face > 0.0) {
                return Err(LabError::Ellipticity { node: p, detail: format!("face coefficient {face} not positive") });
            }
            let w = vol * face / (h * h);
            if let Some(a) = ip {
                entries.push((a, a, w));
            }
            if let Some(b) = iq {
                entries.push((b, b, w));
            }
            if let (Some(a), Some(b)) = (ip, iq) {
                entries.push((a, b, -w));
                entries.push((b, a, -w));
            }
        }
    }

    // mixed term: symmetric four-point cross stencil
    if dim == 2 {
        let (h1, h2) = (grid.spacing(0), grid.spacing(1));
        let scale = vol / (4.0 * h1 * h2);
        let mut mixed = Vec::new();
        for &p in grid.interior_nodes() {
            let row = idx(p).unwrap();
            let [i, j] = grid.multi_index(p);
            let a = |di: isize, dj: isize| coef[grid.flat_index([(i as isize + di) as usize, (j as isize + dj) as usize])][1];
            for (di, dj) in [(1isize, 1isize), (-1, -1), (1, -1), (-1, 1)] {
                let w = if di == dj { -(a(di, 0) + a(0, dj)) } else { a(di, 0) + a(0, dj) };
                let q = grid.flat_index([(i as isize + di) as usize, (j as isize + dj) as usize]);
                if let Some(col) = idx(q) {
                    mixed.push((row, col, scale * w));
                }
            }
        }
        // (S + Sᵀ)/2
        for &(r, c, w) in &mixed {
            entries.push((r, c, 0.5 * w));
            entries.push((c, r, 0.5 * w));
        }
    }

    let mut mass = Vec::with_capacity(n);
    for (k, &p) in grid.interior_nodes().iter().enumerate() {
        let x = grid.point(p);
        let sd = g.sqrt_det(x);
        let m = sd * vol;
        mass.push(m);
        let vx = v.value(x);
        if vx != 0.0 {
            entries.push((k, k, vx * m));
        }
    }
    let stiffness = Csr::from_triplets(n, entries);
    let separable = separable_data(grid, g, v);
    Ok(DiscreteOperator { grid: grid.clone(), metric: g.clone(), potential: v.clone(), stiffness, mass, separable })
}

fn separable_data(grid: &Grid, g: &MetricField, v: &PotentialField) -> Option<SeparableData> {
    if grid.dim() != 2 {
        return None;
    }
    let x0 = grid.point(0);
    let g0 = g.g(x0);
    let v0 = v.value(x0);
    for p in 0..grid.node_count() {
        let x = grid.point(p);
        let gx = g.g(x);
        if gx != g0 || v.value(x) != v0 {
            return None;
        }
    }
    if g0[0][1] != 0.0 {
        return None;
    }
    Some(SeparableData { inverse_diag: [1.0 / g0[0][0], 1.0 / g0[1][1]], potential: v0 })
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn potential(&self) -> &PotentialField {
        &self.potential
    }

    pub fn stiffness(&self) -> &Csr {
        &self.stiffness
    }

    /// Diagonal of `M`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn size(&self) -> usize {
        self.mass.len()
    }

    /// `A u` on interior vectors.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.stiffness.apply(u)
    }

    /// `M^{-1} A u`, the discrete `P u`.
    pub fn apply_p(&self, u: &[f64]) -> Vec<f64> {
        self.apply(u).iter().zip(&self.mass).map(|(a, m)| a / m).collect()
    }

    pub fn quadratic_form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.apply(v).iter().zip(u).map(|(a, b)| a * b).sum()
    }

    /// Content key of grid and fields, used by the eigendecomposition cache.
    pub fn describe(&self) -> String {
        format!("{}|{}|{}", self.grid.describe(), self.metric.describe(), self.potential.describe())
    }
}

#[derive(Clone, Debug)]
enum Basis {
    /// `Φ` stored densely, columns M-orthonormal.
    Dense(Mat<f64>),
    /// `Φ_{(i,j),(a,b)} = X_{ia} Y_{jb} / sqrt(m)` with `X`, `Y` orthonormal.
    Tensor { x: Mat<f64>, y: Mat<f64>, pairs: Vec<(usize, usize)>, mass: f64 },
}

/// Eigenpairs `(λ_k, φ_k)` of the discrete `P`, ascending, M-orthonormal.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    grid: Grid,
    eigenvalues: Vec<f64>,
    mass: Vec<f64>,
    basis: Basis,
}

pub fn eigendecompose(op: &DiscreteOperator, k: usize) -> Result<SpectralDecomposition> {
    let n = op.size();
    if k == 0 || k > n {
        return Err(LabError::Precondition(format!("K = {k} outside 1..={n}")));
    }
    if let Some(sep) = &op.separable {
        return tensor_decomposition(op, sep, k);
    }
    let cache = Cache::from_env();
    let key = op.describe();
    if let Some(cache) = &cache {
        if let Some(spec) = cache.load(&key, op, k)? {
            return Ok(spec);
        }
    }
    let spec = dense_decomposition(op, k)?;
    if let Some(cache) = &cache {
        cache.store(&key, &spec)?;
    }
    Ok(spec)
}

/// Symmetric eigenproblem of `M^{-1/2} A M^{-1/2}`.
fn dense_decomposition(op: &DiscreteOperator, k: usize) -> Result<SpectralDecomposition> {
    let n = op.size();
    let isqrt: Vec<f64> = op.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut b = Mat::<f64>::zeros(n, n);
    for (r, c, v) in op.stiffness.triplets() {
        b[(r, c)] += v * isqrt[r] * isqrt[c];
    }
    // exact symmetry before the solver sees it
    for r in 0..n {
        for c in 0..r {
            let avg = 0.5 * (b[(r, c)] + b[(c, r)]);
            b[(r, c)] = avg;
            b[(c, r)] = avg;
        }
    }
    let evd = b.self_adjoint_eigen(Side::Lower).map_err(|e| LabError::Eigensolver(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let eigenvalues: Vec<f64> = (0..k).map(|j| s[j]).collect();
    let phi = Mat::from_fn(n, k, |r, c| u[(r, c)] * isqrt[r]);
    if !(eigenvalues[0] > 0.0) {
        return Err(LabError::Eigensolver(format!("smallest eigenvalue {} not positive", eigenvalues[0])));
    }
    Ok(SpectralDecomposition { grid: op.grid.clone(), eigenvalues, mass: op.mass.clone(), basis: Basis::Dense(phi) })
}

/// One-dimensional Dirichlet second-difference eigenpairs (orthonormal).
fn second_difference_eigen(interior: usize, h: f64) -> Result<(Vec<f64>, Mat<f64>)> {
    let t = Mat::from_fn(interior, interior, |r, c| match r.abs_diff(c) {
        0 => 2.0 / (h * h),
        1 => -1.0 / (h * h),
        _ => 0.0,
    });
    let evd = t.self_adjoint_eigen(Side::Lower).map_err(|e| LabError::Eigensolver(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    Ok(((0..interior).map(|j| s[j]).collect(), evd.U().to_owned()))
}

fn tensor_decomposition(op: &DiscreteOperator, sep: &SeparableData, k: usize) -> Result<SpectralDecomposition> {
    let grid = &op.grid;
    let n0 = grid.axes()[0].nodes - 2;
    let n1 = grid.axes()[1].nodes - 2;
    let (l0, x) = second_difference_eigen(n0, grid.spacing(0))?;
    let (l1, y) = second_difference_eigen(n1, grid.spacing(1))?;
    let mut all: Vec<(f64, usize, usize)> = Vec::with_capacity(n0 * n1);
    for (a, la) in l0.iter().enumerate() {
        for (b, lb) in l1.iter().enumerate() {
            all.push((sep.inverse_diag[0] * la + sep.inverse_diag[1] * lb + sep.potential, a, b));
        }
    }
    all.sort_by(|p, q| p.0.total_cmp(&q.0).then((p.1, p.2).cmp(&(q.1, q.2))));
    all.truncate(k);
    let eigenvalues: Vec<f64> = all.iter().map(|e| e.0).collect();
    if !(eigenvalues[0] > 0.0) {
        return Err(LabError::Eigensolver(format!("smallest eigenvalue {} not positive", eigenvalues[0])));
    }
    Ok(SpectralDecomposition {
        grid: grid.clone(),
        eigenvalues,
        mass: op.mass.clone(),
        basis: Basis::Tensor { x, y, pairs: all.iter().map(|e| (e.1, e.2)).collect(), mass: op.mass[0] },
    })
}

impl SpectralDecomposition {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Spectral gap `γ = λ_1`.
    pub fn gap(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn is_tensor(&self) -> bool {
        matches!(self.basis, Basis::Tensor { .. })
    }

    /// Coefficients `Φᵀ M u` of an interior vector.
    pub fn analyze(&self, u: &[f64]) -> Vec<f64> {
        let mu: Vec<f64> = u.iter().zip(&self.mass).map(|(a, m)| a * m).collect();
        match &self.basis {
            Basis::Dense(phi) => {
                let k = phi.ncols();
                let mut out = vec![0.0; k];
                for (c, o) in out.iter_mut().enumerate() {
                    let col = phi.col(c);
                    *o = (0..mu.len()).map(|r| col[r] * mu[r]).sum();
                }
                out
            }
            Basis::Tensor { x, y, pairs, mass } => {
                let (n0, n1) = (x.nrows(), y.nrows());
                let grid_u = Mat::from_fn(n0, n1, |i, j| mu[i + n0 * j]);
                let c = x.transpose() * &grid_u * y;
                let s = 1.0 / mass.sqrt();
                pairs.iter().map(|&(a, b)| c[(a, b)] * s).collect()
            }
        }
    }

    /// `Σ c_k φ_k` as an interior vector.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len());
        match &self.basis {
            Basis::Dense(phi) => {
                let n = phi.nrows();
                let mut out = vec![0.0; n];
                for (c, &w) in coeffs.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let col = phi.col(c);
                    for (r, o) in out.iter_mut().enumerate() {
                        *o += w * col[r];
                    }
                }
                out
            }
            Basis::Tensor { x, y, pairs, mass } => {
                let (n0, n1) = (x.nrows(), y.nrows());
                let mut c = Mat::<f64>::zeros(n0, n1);
                let s = 1.0 / mass.sqrt();
                for (&(a, b), &w) in pairs.iter().zip(coeffs) {
                    c[(a, b)] = w * s;
                }
                let u = x * &c * y.transpose();
                (0..n0 * n1).map(|p| u[(p % n0, p / n0)]).collect()
            }
        }
    }

    /// Applies `f(λ)` spectrally to an interior vector.
    pub fn apply_fn(&self, u: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        let c: Vec<f64> = self.analyze(u).iter().zip(&self.eigenvalues).map(|(c, &l)| c * f(l)).collect();
        self.synthesize(&c)
    }

    /// Interior values of `φ_k` (zero-based `k`).
    pub fn mode(&self, k: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.len()];
        c[k] = 1.0;
        self.synthesize(&c)
    }

    pub fn mode_function(&self, k: usize) -> GridFunction {
        GridFunction::from_interior(&self.grid, &self.mode(k))
    }

    /// Values of `φ_k` at interior unknown `r`, for all `k`.
    pub fn row(&self, r: usize) -> Vec<f64> {
        match &self.basis {
            Basis::Dense(phi) => (0..phi.ncols()).map(|c| phi[(r, c)]).collect(),
            Basis::Tensor { x, y, pairs, mass } => {
                let n0 = x.nrows();
                let (i, j) = (r % n0, r / n0);
                let s = 1.0 / mass.sqrt();
                pairs.iter().map(|&(a, b)| x[(i, a)] * y[(j, b)] * s).collect()
            }
        }
    }

    /// `max |Φᵀ M Φ - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.len();
        let cols: Vec<Vec<f64>> = (0..k).map(|j| self.mode(j)).collect();
        let mut worst: f64 = 0.0;
        for a in 0..k {
            for b in a..k {
                let ip: f64 = cols[a].iter().zip(&cols[b]).zip(&self.mass).map(|((x, y), m)| x * y * m).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    /// `max_k ‖A φ_k − λ_k M φ_k‖ / (λ_k ‖M φ_k‖)`.
    pub fn residual(&self, op: &DiscreteOperator) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.len() {
            let phi = self.mode(k);
            let a = op.apply(&phi);
            let lam = self.eigenvalues[k];
            let mut num = 0.0;
            let mut den = 0.0;
            for r in 0..phi.len() {
                let mp = self.mass[r] * phi[r];
                num += (a[r] - lam * mp).powi(2);
                den += mp * mp;
            }
            worst = worst.max(num.sqrt() / (lam * den.sqrt()));
        }
        worst
    }

    /// M-weighted inner product of interior vectors.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.mass).map(|((a, b), m)| a * b * m).sum()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }
}

/// Cache header stored ahead of the raw little-endian data.
#[derive(Serialize, Deserialize)]
struct CacheHeader {
    hash: String,
    size: usize,
    modes: usize,
}

/// Eigendecomposition cache directory (`TRANSMUTE_LAB_CACHE`).
///
/// File layout: header length as `u64` LE, JSON header, then `λ`, `Φ`
/// (column-major) and the mass diagonal as `f64` LE.
pub struct Cache {
    dir: PathBuf,
}

pub const CACHE_ENV: &str = "TRANSMUTE_LAB_CACHE";

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(Self::new)
    }

    pub fn hash(key: &str) -> String {
        Sha256::digest(key.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.eig"))
    }

    pub fn store(&self, key: &str, spec: &SpectralDecomposition) -> Result<()> {
        let Basis::Dense(phi) = &spec.basis else { return Ok(()) };
        std::fs::create_dir_all(&self.dir)?;
        let hash = Self::hash(key);
        let header = CacheHeader { hash: hash.clone(), size: phi.nrows(), modes: phi.ncols() };
        let json = serde_json::to_vec(&header).map_err(|e| LabError::Cache(e.to_string()))?;
        let mut buf = Vec::with_capacity(8 + json.len() + 8 * (phi.nrows() + 1) * (phi.ncols() + 1));
        buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
        buf.extend_from_slice(&json);
        let mut push = |v: f64| buf.extend_from_slice(&v.to_le_bytes());
        spec.eigenvalues.iter().for_each(|&v| push(v));
        for c in 0..phi.ncols() {
            for r in 0..phi.nrows() {
                push(phi[(r, c)]);
            }
        }
        spec.mass.iter().for_each(|&v| push(v));
        let tmp = self.dir.join(format!("{hash}.tmp{}", std::process::id()));
        std::fs::File::create(&tmp)?.write_all(&buf)?;
        std::fs::rename(tmp, self.path(&hash))?;
        Ok(())
    }

    /// Loads a cached decomposition with at least `k` modes, if present.
    pub fn load(&self, key: &str, op: &DiscreteOperator, k: usize) -> Result<Option<SpectralDecomposition>> {
        let hash = Self::hash(key);
        let Ok(mut file) = std::fs::File::open(self.path(&hash)) else { return Ok(None) };
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;
        let bad = |m: &str| LabError::Cache(m.to_string());
        if buf.len() < 8 {
            return Err(bad("truncated header"));
        }
        let hlen = u64::from_le_bytes(buf[..8].try_into().unwrap()) as usize;
        let header: CacheHeader = serde_json::from_slice(buf.get(8..8 + hlen).ok_or_else(|| bad("truncated header"))?)
            .map_err(|e| bad(&e.to_string()))?;
        if header.hash != hash || header.size != op.size() {
            return Err(bad("header does not match operator"));
        }
        if header.modes < k {
            return Ok(None);
        }
        let (n, kk) = (header.size, header.modes);
        let data = &buf[8 + hlen..];
        if data.len() != 8 * (kk + n * kk + n) {
            return Err(bad("payload length mismatch"));
        }
        let f = |i: usize| f64::from_le_bytes(data[8 * i..8 * i + 8].try_into().unwrap());
        let eigenvalues: Vec<f64> = (0..k).map(f).collect();
        let phi = Mat::from_fn(n, k, |r, c| f(kk + c * n + r));
        let mass: Vec<f64> = (0..n).map(|r| f(kk + n * kk + r)).collect();
        Ok(Some(SpectralDecomposition { grid: op.grid.clone(), eigenvalues, mass, basis: Basis::Dense(phi) }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::{build_grid, DomainSpec};
    use std::f64::consts::PI;

    #[test]
    fn five_node_laplacian() {
        let grid = build_grid(&DomainSpec::interval(0.0, PI), &[5]).unwrap();
        let op = assemble(&grid, &MetricField::identity(1), &PotentialField::zero(1)).unwrap();
        let h = PI / 4.0;
        let a = op.stiffness().to_dense();
        for r in 0..3usize {
            for c in 0..3 {
                let t = match r.abs_diff(c) {
                    0 => 2.0,
                    1 => -1.0,
                    _ => 0.0,
                };
                // stiffness carries the cell volume h
                assert!((a[(r, c)] - t * h / (h * h)).abs() < 1e-14);
            }
            assert!((op.mass()[r] - h).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_potential_adds_mass() {
        let grid = build_grid(&DomainSpec::rectangle([0.0, 0.0], [1.0, 2.0]), &[7, 9]).unwrap();
        let g = MetricField::offdiag_bump([1.0, 1.5], 0.3, [0.5, 1.0], 0.4);
        let a0 = assemble(&grid, &g, &PotentialField::zero(2)).unwrap();
        let a1 = assemble(&grid, &g, &PotentialField::constant(2, 2.5)).unwrap();
        for (r, c, v) in a1.stiffness().triplets() {
            let expect = a0.stiffness().get(r, c) + if r == c { 2.5 * a0.mass()[r] } else { 0.0 };
            assert!((v - expect).abs() <= 1e-13 * v.abs().max(1.0));
        }
    }

    #[test]
    fn five_point_stencil() {
        let grid = build_grid(&DomainSpec::rectangle([0.0, 0.0], [1.0, 1.0]), &[5, 5]).unwrap();
        let op = assemble(&grid, &MetricField::identity(2), &PotentialField::zero(2)).unwrap();
        let h = 0.25;
        let a = op.stiffness();
        // centre unknown is 4 in the 3x3 interior block
        assert!((a.get(4, 4) - 4.0).abs() < 1e-13);
        for nb in [1, 3, 5, 7] {
            assert!((a.get(4, nb) + 1.0).abs() < 1e-13);
        }
        assert_eq!(a.get(4, 0), 0.0);
        assert!((op.mass()[0] - h * h).abs() < 1e-15);
    }

    #[test]
    fn symmetric_with_mixed_terms() {
        let grid = build_grid(&DomainSpec::rectangle([0.0, 0.0], [1.0, 1.0]), &[13, 11]).unwrap();
        let g = MetricField::offdiag_bump([1.0, 1.2], 0.4, [0.4, 0.6], 0.3);
        let op = assemble(&grid, &g, &PotentialField::gaussian(2, 1.0, [0.5, 0.5], 0.2)).unwrap();
        assert!(op.stiffness().asymmetry() <= 1e-12 * op.stiffness().max_abs());
    }

    #[test]
    fn rejects_indefinite_metric() {
        let grid = build_grid(&DomainSpec::rectangle([0.0, 0.0], [1.0, 1.0]), &[9, 9]).unwrap();
        let g = MetricField::offdiag_bump([1.0, 1.0], 1.5, [0.5, 0.5], 0.3);
        assert!(matches!(assemble(&grid, &g, &PotentialField::zero(2)), Err(LabError::Ellipticity { .. })));
    }

    #[test]
    fn dirichlet_spectrum_1d() {
        let grid = build_grid(&DomainSpec::interval(0.0, PI), &[129]).unwrap();
        let op = assemble(&grid, &MetricField::identity(1), &PotentialField::constant(1, 1.0)).unwrap();
        let spec = eigendecompose(&op, 127).unwrap();
        for k in 1..=10 {
            let exact = (k * k) as f64 + 1.0;
            assert!((spec.eigenvalues()[k - 1] - exact).abs() / exact < 5e-3);
        }
        assert!(spec.orthonormality_defect() < 1e-10);
        assert!(spec.residual(&op) < 1e-8);
    }

    #[test]
    fn tensor_backend_matches_dense() {
        let grid = build_grid(&DomainSpec::rectangle([0.0, 0.0], [PI, 2.0]), &[11, 9]).unwrap();
        let g = MetricField::constant_diagonal(2, [1.0, 2.0]);
        let v = PotentialField::constant(2, 0.5);
        let op = assemble(&grid, &g, &v).unwrap();
        let n = op.size();
        let tensor = eigendecompose(&op, n).unwrap();
        assert!(tensor.is_tensor());
        let dense = dense_decomposition(&op, n).unwrap();
        for (a, b) in tensor.eigenvalues().iter().zip(dense.eigenvalues()) {
            assert!((a - b).abs() < 1e-10 * b);
        }
        assert!(tensor.orthonormality_defect() < 1e-10);
        assert!(tensor.residual(&op) < 1e-8);
        let u: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let back = tensor.synthesize(&tensor.analyze(&u));
        for (a, b) in back.iter().zip(&u) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = build_grid(&DomainSpec::interval(0.0, PI), &[33]).unwrap();
        let op = assemble(&grid, &MetricField::diagonal_poly(1, [1.0, 1.0], 0.2, [1.0, 0.0]), &PotentialField::zero(1)).unwrap();
        let spec = dense_decomposition(&op, 31).unwrap();
        let cache = Cache::new(dir.path());
        cache.store(&op.describe(), &spec).unwrap();
        let back = cache.load(&op.describe(), &op, 31).unwrap().unwrap();
        assert_eq!(back.eigenvalues(), spec.eigenvalues());
        assert_eq!(back.mode(3), spec.mode(3));
        assert!(cache.load("other", &op, 31).unwrap().is_none());
    }
}
