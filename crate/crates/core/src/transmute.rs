//! Wave/heat transmutation: the Kannai integral, the wave source-to-solution
//! map on Γ, a leapfrog oracle, the restricted wave DN map on `∂Γ`, and the
//! heat moments that vanish for gauge-equivalent coefficients.

use crate::calculus::{gamma, interior_data, wave_trajectory, Estimated, QuadratureRule, TimeSampled};
use crate::error::{LabError, Result};
use crate::geometry::fields::{MetricField, PotentialField};
use crate::geometry::grid::{Grid, GridFunction};
use crate::geometry::region::Region;
use crate::operator::{assemble, Csr, DiscreteOperator, SpectralDecomposition};

/// `e^{-σ²/(4t)} < e^{-KANNAI_TAIL}` beyond the cutoff.
const KANNAI_TAIL: f64 = 36.0;

fn kannai_cutoff(t: f64) -> f64 {
    (4.0 * t * KANNAI_TAIL).sqrt()
}

fn kannai_prefactor(t: f64) -> f64 {
    1.0 / (4.0 * std::f64::consts::PI.sqrt() * t.powf(1.5))
}

/// `sin(σμ)/μ`, continuous at `μ = 0`.
pub fn sine_symbol(mu: f64, sigma: f64) -> f64 {
    if (sigma * mu).abs() < 1e-8 {
        sigma * (1.0 - (sigma * mu).powi(2) / 6.0)
    } else {
        (sigma * mu).sin() / mu
    }
}

/// Both sides of `e^{-tλ²} = (4√π t^{3/2})^{-1} ∫_0^∞ e^{-τ/(4t)} sin(τ^{1/2}λ)/λ dτ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KannaiValue {
    pub lhs: f64,
    pub rhs: f64,
    pub error: f64,
}

/// The scalar identity, integrated in `σ = τ^{1/2}`.
pub fn scalar_kannai(lambda: f64, t: f64, q: &QuadratureRule) -> Result<KannaiValue> {
    if !(lambda > 0.0 && t > 0.0) {
        return Err(LabError::Precondition(format!("need λ > 0 and t > 0, got λ = {lambda}, t = {t}")));
    }
    let pre = kannai_prefactor(t);
    let (v, err) =
        q.integrate_scalar(|s| 2.0 * s * (-s * s / (4.0 * t)).exp() * sine_symbol(lambda, s), 0.0, kannai_cutoff(t))?;
    Ok(KannaiValue { lhs: (-t * lambda * lambda).exp(), rhs: pre * v, error: pre * err })
}

/// `e^{-tP} f` through the Kannai integral of the sine propagator.
pub fn kannai_heat_from_wave(
    spec: &SpectralDecomposition,
    f: &GridFunction,
    t: f64,
    q: &QuadratureRule,
) -> Result<Estimated<GridFunction>> {
    if !(t > 0.0) {
        return Err(LabError::Precondition(format!("time t = {t} must be positive")));
    }
    let c = spec.analyze(&interior_data(spec, f)?);
    if c.iter().all(|v| *v == 0.0) {
        return Ok(Estimated { value: GridFunction::zeros(spec.grid()), error: 0.0 });
    }
    let mu: Vec<f64> = spec.eigenvalues().iter().map(|l| l.sqrt()).collect();
    let integrand = |s: f64| -> Vec<f64> {
        let gauss = 2.0 * s * (-s * s / (4.0 * t)).exp();
        c.iter().zip(&mu).map(|(ck, m)| if *ck == 0.0 { 0.0 } else { ck * gauss * sine_symbol(*m, s) }).collect()
    };
    let r = q.integrate(&integrand, 0.0, kannai_cutoff(t), &[])?;
    let pre = kannai_prefactor(t);
    let coeffs: Vec<f64> = r.value.iter().map(|v| v * pre).collect();
    Ok(Estimated { value: GridFunction::from_interior(spec.grid(), &spec.synthesize(&coeffs)), error: r.error * pre })
}

/// Values on window nodes over a uniform time mesh.
#[derive(Clone, Debug)]
pub struct WindowTrace {
    pub times: Vec<f64>,
    /// Flat grid indices of the observed nodes.
    pub nodes: Vec<usize>,
    /// `values[j][i]` at `times[j]`, `nodes[i]`.
    pub values: Vec<Vec<f64>>,
}

impl WindowTrace {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self - other| / max |self|` over a shared mesh.
    pub fn relative_discrepancy(&self, other: &WindowTrace) -> Result<f64> {
        if self.nodes != other.nodes || self.times.len() != other.times.len() {
            return Err(LabError::Precondition("traces live on different meshes".into()));
        }
        let diff = self
            .values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        Ok(diff / self.max_abs().max(f64::MIN_POSITIVE))
    }
}

/// `J^Γ F = w^F|_{Γ × [0, T]}` with zero initial data.
pub fn wave_source_to_solution(
    spec: &SpectralDecomposition,
    source: &TimeSampled,
    region: &Region,
    t_end: f64,
) -> Result<WindowTrace> {
    let grid = spec.grid();
    for (j, s) in source.samples.iter().enumerate() {
        let tol = 1e-14 * s.max_abs();
        if !region.supports(s, tol) {
            return Err(LabError::Precondition(format!("source sample {j} leaves the window")));
        }
    }
    let n = (t_end / source.dt).round();
    if (n * source.dt - t_end).abs() > 1e-9 * t_end.max(1.0) || n as usize > source.steps() {
        return Err(LabError::Precondition(format!("T = {t_end} is not on the source time mesh")));
    }
    let steps: Vec<usize> = (0..=n as usize).collect();
    let zero = GridFunction::zeros(grid);
    let states = wave_trajectory(spec, &zero, &zero, Some(source), &steps, None)?;
    let nodes = region.members().to_vec();
    Ok(WindowTrace {
        times: states.iter().map(|s| s.time).collect(),
        values: states.iter().map(|s| nodes.iter().map(|&p| s.value.0[p]).collect()).collect(),
        nodes,
    })
}

/// Upper bound on the largest eigenvalue of `M^{-1} A` (Gershgorin on the rows).
pub fn max_eigenvalue_bound(stiffness: &Csr, mass: &[f64]) -> f64 {
    (0..stiffness.size()).map(|r| stiffness.row(r).map(|(_, v)| v.abs()).sum::<f64>() / mass[r]).fold(0.0, f64::max)
}

/// Largest eigenvalue of `M^{-1} A` by power iteration on `M^{-1/2} A M^{-1/2}`.
pub fn max_eigenvalue_estimate(stiffness: &Csr, mass: &[f64], iterations: usize) -> f64 {
    let n = stiffness.size();
    let isq: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    // alternating start vector overlaps the top of the spectrum
    let mut x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + 1e-3 * i as f64)).collect();
    let mut rq = 0.0;
    for _ in 0..iterations {
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        let y: Vec<f64> = x.iter().zip(&isq).map(|(v, s)| v * s).collect();
        let ay = stiffness.apply(&y);
        let z: Vec<f64> = ay.iter().zip(&isq).map(|(v, s)| v * s).collect();
        rq = x.iter().zip(&z).map(|(a, b)| a * b).sum();
        x = z;
    }
    rq
}

/// Second-order leapfrog for `M ẅ + A w = b(t)` on interior vectors.
struct Leapfrog<'a> {
    stiffness: &'a Csr,
    mass: &'a [f64],
    dt: f64,
}

impl Leapfrog<'_> {
    fn accel(&self, w: &[f64], b: &[f64]) -> Vec<f64> {
        let aw = self.stiffness.apply(w);
        (0..w.len()).map(|i| (b[i] - aw[i]) / self.mass[i]).collect()
    }

    /// Runs `steps` steps, calling `observe(n, w^n)` for every `n`; returns
    /// the staggered energies `E^{n+1/2}`.
    fn run(
        &self,
        w0: &[f64],
        w1: &[f64],
        force: &dyn Fn(usize) -> Vec<f64>,
        steps: usize,
        observe: &mut dyn FnMut(usize, &[f64]),
    ) -> Vec<f64> {
        let dt = self.dt;
        let n = w0.len();
        let mut prev = w0.to_vec();
        observe(0, &prev);
        if steps == 0 {
            return Vec::new();
        }
        let a0 = self.accel(&prev, &force(0));
        let mut cur: Vec<f64> = (0..n).map(|i| prev[i] + dt * w1[i] + 0.5 * dt * dt * a0[i]).collect();
        let mut energy = Vec::with_capacity(steps);
        energy.push(self.energy(&prev, &cur));
        observe(1, &cur);
        for k in 1..steps {
            let a = self.accel(&cur, &force(k));
            let next: Vec<f64> = (0..n).map(|i| 2.0 * cur[i] - prev[i] + dt * dt * a[i]).collect();
            energy.push(self.energy(&cur, &next));
            prev = cur;
            cur = next;
            observe(k + 1, &cur);
        }
        energy
    }

    /// `½|(w^{n+1} - w^n)/dt|²_M + ½ (w^{n+1})ᵀ A w^n`.
    fn energy(&self, w: &[f64], next: &[f64]) -> f64 {
        let dt = self.dt;
        let kin: f64 = (0..w.len()).map(|i| self.mass[i] * ((next[i] - w[i]) / dt).powi(2)).sum();
        let aw = self.stiffness.apply(w);
        let pot: f64 = next.iter().zip(&aw).map(|(a, b)| a * b).sum();
        0.5 * (kin + pot)
    }
}

fn check_dt(dt: f64, lambda_max: f64) -> Result<()> {
    let bound = 0.9 * 2.0 / lambda_max.sqrt();
    if !(dt > 0.0 && dt <= bound) {
        return Err(LabError::UnstableTimeStep { dt, bound });
    }
    Ok(())
}

/// Leapfrog trajectory sampled at every step.
#[derive(Clone, Debug)]
pub struct LeapfrogRun {
    pub dt: f64,
    pub states: Vec<GridFunction>,
    /// Staggered energies `E^{n+1/2}`.
    pub energy: Vec<f64>,
    pub lambda_max: f64,
}

impl LeapfrogRun {
    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|n| n as f64 * self.dt).collect()
    }

    /// `max |E^{n+1/2} - E^{1/2}| / E^{1/2}`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        if e0 == 0.0 {
            return 0.0;
        }
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0
    }
}

/// `M ẅ + A w = M F`, `w(0) = w0`, `ẇ(0) = w1`; the source, if any, must
/// share the step `dt`.
pub fn wave_leapfrog(
    op: &DiscreteOperator,
    w0: &GridFunction,
    w1: &GridFunction,
    source: Option<&TimeSampled>,
    dt: f64,
    t_end: f64,
) -> Result<LeapfrogRun> {
    let grid = op.grid();
    let lambda_max = max_eigenvalue_bound(op.stiffness(), op.mass());
    check_dt(dt, lambda_max)?;
    let steps = (t_end / dt).round();
    if (steps * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(LabError::Precondition(format!("T = {t_end} is not a multiple of dt = {dt}")));
    }
    let steps = steps as usize;
    for u in [w0, w1] {
        if u.len() != grid.node_count() || !u.vanishes_on_boundary(grid, 1e-12) {
            return Err(LabError::Precondition("initial data must vanish on the outer boundary".into()));
        }
    }
    let forcing: Vec<Vec<f64>> = match source {
        Some(f) => {
            if (f.dt - dt).abs() > 1e-12 * dt || f.steps() < steps {
                return Err(LabError::Precondition("source mesh must match the leapfrog step".into()));
            }
            f.samples[..=steps].iter().map(|s| s.interior(grid).iter().zip(op.mass()).map(|(v, m)| v * m).collect()).collect()
        }
        None => Vec::new(),
    };
    let n = op.size();
    let force = |k: usize| forcing.get(k).cloned().unwrap_or_else(|| vec![0.0; n]);
    let lf = Leapfrog { stiffness: op.stiffness(), mass: op.mass(), dt };
    let mut states = Vec::with_capacity(steps + 1);
    let energy = lf.run(&w0.interior(grid), &w1.interior(grid), &force, steps, &mut |_, w| {
        states.push(GridFunction::from_interior(grid, w));
    });
    Ok(LeapfrogRun { dt, states, energy, lambda_max })
}

/// Conormal traces on `∂Γ`.
#[derive(Clone, Debug)]
pub struct DnTrace {
    pub times: Vec<f64>,
    pub nodes: Vec<usize>,
    pub points: Vec<[f64; 2]>,
    /// `values[j][i]` at `times[j]`, `nodes[i]`.
    pub values: Vec<Vec<f64>>,
    pub dt: f64,
}

impl DnTrace {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self - other| / max |self|`, sampling `other` at this trace's
    /// times by linear interpolation and matching nodes by position.
    pub fn relative_discrepancy(&self, other: &DnTrace, tol: f64) -> Result<f64> {
        let mut idx = Vec::with_capacity(self.points.len());
        for p in &self.points {
            let k = other
                .points
                .iter()
                .position(|q| (q[0] - p[0]).abs() <= tol && (q[1] - p[1]).abs() <= tol)
                .ok_or_else(|| LabError::Precondition(format!("no matching node for {p:?}")))?;
            idx.push(k);
        }
        let mut diff: f64 = 0.0;
        for (j, &t) in self.times.iter().enumerate() {
            let s = (t / other.dt).min((other.times.len() - 1) as f64);
            let lo = (s.floor() as usize).min(other.times.len() - 1);
            let hi = (lo + 1).min(other.times.len() - 1);
            let a = s - lo as f64;
            for (i, &k) in idx.iter().enumerate() {
                let v = (1.0 - a) * other.values[lo][k] + a * other.values[hi][k];
                diff = diff.max((self.values[j][i] - v).abs());
            }
        }
        Ok(diff / self.max_abs().max(f64::MIN_POSITIVE))
    }
}

/// One-sided stencil data at an edge node: the axis, the direction pointing
/// away from Γ, and the two nodes behind.
struct EdgeStencil {
    node: usize,
    axis: usize,
    dir: isize,
    first: usize,
    second: usize,
    /// Tangential neighbors (`-`, `+`) along the other axis in 2D.
    tangent: Option<(usize, usize)>,
}

fn edge_stencils(grid: &Grid, region: &Region) -> Result<Vec<EdgeStencil>> {
    let dim = grid.dim();
    let mut out = Vec::new();
    for &p in region.boundary_nodes() {
        let mut found = Vec::new();
        for axis in 0..dim {
            for dir in [-1isize, 1] {
                if let Some(q) = grid.neighbor(p, axis, dir) {
                    if !region.contains(q) {
                        found.push((axis, dir, q));
                    }
                }
            }
        }
        // corners have no single normal
        if found.len() != 1 {
            continue;
        }
        let (axis, dir, first) = found[0];
        let second = grid
            .neighbor(first, axis, dir)
            .ok_or_else(|| LabError::Precondition("exterior region must be at least two cells wide".into()))?;
        let tangent = if dim == 2 {
            let other = 1 - axis;
            match (grid.neighbor(p, other, -1), grid.neighbor(p, other, 1)) {
                (Some(a), Some(b)) if region.contains(a) && region.contains(b) => Some((a, b)),
                _ => continue,
            }
        } else {
            None
        };
        out.push(EdgeStencil { node: p, axis, dir, first, second, tangent });
    }
    if out.is_empty() {
        return Err(LabError::InvalidRegion("window has no usable edge nodes".into()));
    }
    Ok(out)
}

/// `Λ^{w,∂Γ,T} f = ∂_{ν_g} w|_{∂Γ×(0,T)}` for the wave equation on `Ω ∖ Γ̄`
/// with Dirichlet data `f` on `∂Γ`, zero on `∂Ω`, zero Cauchy data.
///
/// `ν` is the outward conormal of `Ω ∖ Γ̄`, i.e. pointing into Γ. Corner
/// nodes of a 2D window are skipped.
#[allow(clippy::too_many_arguments)]
pub fn restricted_dn_wave(
    grid: &Grid,
    g: &MetricField,
    v: &PotentialField,
    region: &Region,
    data: &dyn Fn([f64; 2], f64) -> f64,
    t_end: f64,
    dt: Option<f64>,
) -> Result<DnTrace> {
    let edges = region.boundary_nodes();
    let scale = edges.iter().map(|&p| data(grid.point(p), 0.0).abs()).fold(0.0, f64::max);
    if scale > 1e-14 {
        return Err(LabError::Precondition("boundary data must vanish at t = 0".into()));
    }
    let op = assemble(grid, g, v)?;
    let interior = grid.interior_nodes();
    // unknowns: interior nodes outside the closed window
    let mut local = vec![usize::MAX; op.size()];
    let mut unknowns = Vec::new();
    for (r, &p) in interior.iter().enumerate() {
        if !region.contains(p) {
            local[r] = unknowns.len();
            unknowns.push(r);
        }
    }
    let mut edge_local = vec![usize::MAX; op.size()];
    let edge_rows: Vec<usize> = edges.iter().map(|&p| grid.interior_index(p).expect("window nodes are interior")).collect();
    for (k, &r) in edge_rows.iter().enumerate() {
        edge_local[r] = k;
    }
    let mut inner = Vec::new();
    let mut coupling = vec![Vec::new(); unknowns.len()];
    for (i, &r) in unknowns.iter().enumerate() {
        for (c, val) in op.stiffness().row(r) {
            if local[c] != usize::MAX {
                inner.push((i, local[c], val));
            } else if edge_local[c] != usize::MAX {
                coupling[i].push((edge_local[c], val));
            } else if val != 0.0 {
                return Err(LabError::InvalidRegion("stencil reaches past the window edge".into()));
            }
        }
    }
    let a_uu = Csr::from_triplets(unknowns.len(), inner);
    let mass: Vec<f64> = unknowns.iter().map(|&r| op.mass()[r]).collect();
    let lambda_max = max_eigenvalue_bound(&a_uu, &mass);
    let dt = match dt {
        Some(dt) => {
            check_dt(dt, lambda_max)?;
            dt
        }
        None => 0.5 * 2.0 / lambda_max.sqrt(),
    };
    let steps = (t_end / dt).ceil() as usize;
    let dt = t_end / steps as f64;
    check_dt(dt, lambda_max)?;
    let edge_points: Vec<[f64; 2]> = edges.iter().map(|&p| grid.point(p)).collect();
    let edge_values = |t: f64| -> Vec<f64> { edge_points.iter().map(|&x| data(x, t)).collect() };
    let force = |k: usize| -> Vec<f64> {
        let fd = edge_values(k as f64 * dt);
        coupling.iter().map(|row| -row.iter().map(|&(e, val)| val * fd[e]).sum::<f64>()).collect()
    };
    let stencils = edge_stencils(grid, region)?;
    let dim = grid.dim();
    let frames: Vec<_> = stencils
        .iter()
        .map(|s| {
            let ginv = g.inverse(grid.point(s.node));
            let norm = ginv[s.axis][s.axis].sqrt();
            (ginv, norm)
        })
        .collect();
    let value_at = |w: &[f64], fd: &[f64], p: usize| -> f64 {
        if region.contains(p) {
            fd[edges.iter().position(|&e| e == p).unwrap()]
        } else {
            match grid.interior_index(p) {
                Some(r) if local[r] != usize::MAX => w[local[r]],
                _ => 0.0,
            }
        }
    };
    let lf = Leapfrog { stiffness: &a_uu, mass: &mass, dt };
    let zero = vec![0.0; unknowns.len()];
    let mut values = Vec::with_capacity(steps + 1);
    lf.run(&zero, &zero, &force, steps, &mut |k, w| {
        let fd = edge_values(k as f64 * dt);
        let row = stencils
            .iter()
            .zip(&frames)
            .map(|(s, (ginv, norm))| {
                let h = grid.spacing(s.axis);
                let w0 = value_at(w, &fd, s.node);
                let w1 = value_at(w, &fd, s.first);
                let w2 = value_at(w, &fd, s.second);
                // derivative along dir·e_axis, away from Γ
                let d_out = (-3.0 * w0 + 4.0 * w1 - w2) / (2.0 * h);
                let d_axis = s.dir as f64 * d_out;
                let mut flux = ginv[s.axis][s.axis] * d_axis;
                if let (2, Some((a, b))) = (dim, s.tangent) {
                    let other = 1 - s.axis;
                    let dt_other = (value_at(w, &fd, b) - value_at(w, &fd, a)) / (2.0 * grid.spacing(other));
                    flux += ginv[s.axis][other] * dt_other;
                }
                // outward normal of the exterior is -dir·e_axis
                -(s.dir as f64) * flux / norm
            })
            .collect();
        values.push(row);
    });
    Ok(DnTrace {
        times: (0..=steps).map(|k| k as f64 * dt).collect(),
        nodes: stencils.iter().map(|s| s.node).collect(),
        points: stencils.iter().map(|s| grid.point(s.node)).collect(),
        values,
        dt,
    })
}

/// Heat moments `∫_0^∞ [(e^{-tP_1} − e^{-tP_2}) f](x) t^{-k-1/2} dt` on `O_2`.
#[derive(Clone, Debug)]
pub struct HeatMoments {
    pub k: Vec<usize>,
    /// `max_{O_2}` of the moment difference.
    pub difference: Vec<f64>,
    /// `max_{O_2}` of the first operator's own moment.
    pub reference: Vec<f64>,
    /// `max_{O_2}` of `Γ(1/2−k) (P_1^{k−1/2} − P_2^{k−1/2}) f`.
    pub oracle: Vec<f64>,
    /// `max_{O_2}` deviation of the quadrature from that oracle.
    pub oracle_deviation: Vec<f64>,
    /// Rounding scale of the oracle, `ε |Γ| max|c| Σ |φ_j(x)| λ_j^{k−1/2}`.
    pub oracle_roundoff: Vec<f64>,
    pub quadrature_error: f64,
    pub t_min: f64,
}

impl HeatMoments {
    /// `difference / reference` per `k`.
    pub fn relative(&self) -> Vec<f64> {
        self.difference.iter().zip(&self.reference).map(|(d, r)| d / r.max(f64::MIN_POSITIVE)).collect()
    }
}

fn rows_at(spec: &SpectralDecomposition, nodes: &[usize]) -> Result<Vec<Vec<f64>>> {
    nodes
        .iter()
        .map(|&p| {
            spec.grid()
                .interior_index(p)
                .map(|r| spec.row(r))
                .ok_or_else(|| LabError::InvalidRegion("observation node on the outer boundary".into()))
        })
        .collect()
}

pub fn heat_moment_vanish(
    spec1: &SpectralDecomposition,
    spec2: &SpectralDecomposition,
    f: &GridFunction,
    source_window: &Region,
    observation: &Region,
    k_max: usize,
    q: &QuadratureRule,
) -> Result<HeatMoments> {
    let grid = spec1.grid();
    if grid.describe() != spec2.grid().describe() {
        return Err(LabError::Precondition("spectra live on different grids".into()));
    }
    if !source_window.supports(f, 1e-14 * f.max_abs()) {
        return Err(LabError::Precondition("source must be supported in O_1".into()));
    }
    let src: Vec<[f64; 2]> = source_window.members().iter().map(|&p| grid.point(p)).collect();
    let obs = observation.members();
    let mut d2 = f64::INFINITY;
    for &p in obs {
        let x = grid.point(p);
        for y in &src {
            d2 = d2.min((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2));
        }
    }
    if !(d2 > 0.0) {
        return Err(LabError::Precondition("O_1 and O_2 must be disjoint".into()));
    }
    // the Gaussian bound makes [0, t_min] contribute below e^{-40}
    let t_min = d2 / 160.0;
    let x = interior_data(spec1, f)?;
    let c1 = spec1.analyze(&x);
    let c2 = spec2.analyze(&x);
    let r1 = rows_at(spec1, obs)?;
    let r2 = rows_at(spec2, obs)?;
    let (l1, l2) = (spec1.eigenvalues(), spec2.eigenvalues());
    let m = obs.len();
    let kk = k_max + 1;
    let heat = |t: f64| -> (Vec<f64>, Vec<f64>) {
        let e1: Vec<f64> = c1.iter().zip(l1).map(|(c, l)| c * (-t * l).exp()).collect();
        let e2: Vec<f64> = c2.iter().zip(l2).map(|(c, l)| c * (-t * l).exp()).collect();
        let u1: Vec<f64> = r1.iter().map(|r| r.iter().zip(&e1).map(|(a, b)| a * b).sum()).collect();
        let u2: Vec<f64> = r2.iter().map(|r| r.iter().zip(&e2).map(|(a, b)| a * b).sum()).collect();
        (u1, u2)
    };
    // layout: [k][diff (m) | own (m)], integrated in v = ln t
    let integrand = |v: f64| -> Vec<f64> {
        let t = v.exp();
        let (u1, u2) = heat(t);
        let mut out = Vec::with_capacity(2 * m * kk);
        for k in 0..kk {
            let w = t.powf(0.5 - k as f64);
            out.extend((0..m).map(|i| (u1[i] - u2[i]) * w));
            out.extend((0..m).map(|i| u1[i] * w));
        }
        out
    };
    let lmin = spec1.gap().min(spec2.gap());
    let v_hi = (60.0 / lmin).ln().max(t_min.ln() + 1.0);
    let r = q.integrate(&integrand, t_min.ln(), v_hi, &[])?;
    let mut difference = Vec::with_capacity(kk);
    let mut reference = Vec::with_capacity(kk);
    let mut oracle = Vec::with_capacity(kk);
    let mut deviation = Vec::with_capacity(kk);
    let mut roundoff = Vec::with_capacity(kk);
    for k in 0..kk {
        let base = 2 * m * k;
        let diff = &r.value[base..base + m];
        let own = &r.value[base + m..base + 2 * m];
        difference.push(diff.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        reference.push(own.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        let s = k as f64 - 0.5;
        let g = gamma(0.5 - k as f64);
        let p1: Vec<f64> = c1.iter().zip(l1).map(|(c, l)| c * l.powf(s)).collect();
        let p2: Vec<f64> = c2.iter().zip(l2).map(|(c, l)| c * l.powf(s)).collect();
        let ora: Vec<f64> = (0..m)
            .map(|i| {
                g * (r1[i].iter().zip(&p1).map(|(a, b)| a * b).sum::<f64>()
                    - r2[i].iter().zip(&p2).map(|(a, b)| a * b).sum::<f64>())
            })
            .collect();
        oracle.push(ora.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        deviation.push(ora.iter().zip(diff).fold(0.0f64, |a, (o, d)| a.max((o - d).abs())));
        // each coefficient carries noise of order ε max|c|, amplified by λ^s
        let bound = |rows: &[Vec<f64>], c: &[f64], l: &[f64]| {
            let cmax = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            cmax * rows.iter().map(|r| r.iter().zip(l).map(|(a, l)| a.abs() * l.powf(s)).sum::<f64>()).fold(0.0, f64::max)
        };
        roundoff.push(f64::EPSILON * g.abs() * (bound(&r1, &c1, l1) + bound(&r2, &c2, l2)));
    }
    Ok(HeatMoments {
        k: (0..kk).collect(),
        difference,
        reference,
        oracle,
        oracle_deviation: deviation,
        oracle_roundoff: roundoff,
        quadrature_error: r.error,
        t_min,
    })
}

/// Discrepancies of the forward maps on `Γ` between `(g, V)` and `(Ψ*g, V∘Ψ)`,
/// each `max |difference| / max |reference|`.
#[derive(Clone, Debug)]
pub struct GaugeDiscrepancy {
    pub nd_map: f64,
    pub semigroup: f64,
    /// `(t, discrepancy)` of the heat kernel block on `Γ × Γ`.
    pub heat_kernel: Vec<(f64, f64)>,
    pub source_to_solution: f64,
}

impl GaugeDiscrepancy {
    pub fn worst(&self) -> f64 {
        self.heat_kernel.iter().map(|h| h.1).fold(self.nd_map.max(self.semigroup).max(self.source_to_solution), f64::max)
    }
}

/// Inputs shared by both members of a gauge pair.
pub struct GaugeProbe<'a> {
    /// Neumann data and spatial source profile, supported in `Γ`.
    pub data: &'a GridFunction,
    pub heat_times: &'a [f64],
    /// Temporal profile of the wave source, sampled every `dt` up to `t_end`.
    pub pulse: &'a dyn Fn(f64) -> f64,
    pub dt: f64,
    pub t_end: f64,
    pub quadrature: &'a QuadratureRule,
}

fn relative_max(reference: &[f64], other: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = reference.iter().zip(other).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn gauge_discrepancy(
    first: &SpectralDecomposition,
    second: &SpectralDecomposition,
    region: &Region,
    probe: &GaugeProbe,
) -> Result<GaugeDiscrepancy> {
    let grid = first.grid();
    if grid.describe() != second.grid().describe() {
        return Err(LabError::Precondition("gauge pair lives on different grids".into()));
    }
    let on_gamma = |u: &GridFunction| region.restrict(u);
    let nd = |spec| crate::extension::nd_map(spec, probe.data, region).map(|u| on_gamma(&u));
    let nd_map = relative_max(&nd(first)?, &nd(second)?);
    let sg = |spec| crate::calculus::neg_power_via_semigroup(spec, 0.5, probe.data, probe.quadrature).map(|u| on_gamma(&u.value));
    let semigroup = relative_max(&sg(first)?, &sg(second)?);
    let idx: Vec<usize> = region.members().iter().filter_map(|&p| grid.interior_index(p)).collect();
    let heat_kernel = probe
        .heat_times
        .iter()
        .map(|&t| {
            let a = crate::calculus::heat_kernel_block(first, t, &idx, &idx)?;
            let b = crate::calculus::heat_kernel_block(second, t, &idx, &idx)?;
            let flat = |m: &faer::Mat<f64>| {
                (0..m.ncols()).flat_map(|j| (0..m.nrows()).map(move |i| (i, j))).map(|(i, j)| m[(i, j)]).collect::<Vec<_>>()
            };
            Ok((t, relative_max(&flat(&a), &flat(&b))))
        })
        .collect::<Result<Vec<_>>>()?;
    let steps = (probe.t_end / probe.dt).round() as usize;
    let source = TimeSampled::new(probe.dt, (0..=steps).map(|j| probe.data.scaled((probe.pulse)(j as f64 * probe.dt))).collect());
    let ja = wave_source_to_solution(first, &source, region, probe.t_end)?;
    let jb = wave_source_to_solution(second, &source, region, probe.t_end)?;
    let source_to_solution = ja.relative_discrepancy(&jb)?;
    Ok(GaugeDiscrepancy { nd_map, semigroup, heat_kernel, source_to_solution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{heat_apply, wave_propagate};
    use crate::geometry::grid::{build_grid, DomainSpec};
    use crate::operator::eigendecompose;
    use std::f64::consts::PI;

    fn setup(nodes: usize, v: PotentialField) -> (Grid, DiscreteOperator, SpectralDecomposition) {
        let grid = build_grid(&DomainSpec::interval(0.0, PI), &[nodes]).unwrap();
        let op = assemble(&grid, &MetricField::identity(1), &v).unwrap();
        let spec = eigendecompose(&op, op.size()).unwrap();
        (grid, op, spec)
    }

    #[test]
    fn scalar_identity() {
        let q = QuadratureRule::default();
        for lambda in [1.0, 2.0, 5.0] {
            for t in [0.1, 1.0] {
                let k = scalar_kannai(lambda, t, &q).unwrap();
                assert!((k.lhs - k.rhs).abs() < 1e-8, "λ={lambda} t={t}: {k:?}");
            }
        }
        let big = scalar_kannai(2.0, 7.0, &q).unwrap();
        assert!(big.rhs.abs() < 1e-10);
        assert!((sine_symbol(1e-12, 0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn operator_identity() {
        let (grid, _, spec) = setup(129, PotentialField::zero(1));
        let f = GridFunction::from_fn_interior(&grid, |x| x[0].sin() + 0.3 * (4.0 * x[0]).sin());
        let q = QuadratureRule::adaptive(1e-13, 1e-10);
        for t in [0.1, 0.5, 1.0] {
            let k = kannai_heat_from_wave(&spec, &f, t, &q).unwrap();
            let h = heat_apply(&spec, t, &f).unwrap();
            let err = k.value.axpy(-1.0, &h).max_abs() / h.max_abs();
            assert!(err < 1e-4, "t = {t}: {err}");
        }
    }

    #[test]
    fn leapfrog_matches_spectral() {
        let (grid, op, spec) = setup(257, PotentialField::constant(1, 0.5));
        let w0 = spec.mode_function(0);
        let zero = GridFunction::zeros(&grid);
        let bound = max_eigenvalue_bound(op.stiffness(), op.mass());
        let est = max_eigenvalue_estimate(op.stiffness(), op.mass(), 200);
        let top = spec.eigenvalues().iter().copied().fold(0.0, f64::max);
        assert!(bound >= top * (1.0 - 1e-12) && est <= top * (1.0 + 1e-12) && est > 0.9 * top);
        let dt = 0.9 * 2.0 / bound.sqrt() / 4.0;
        let steps = (5.0 / dt).ceil();
        let dt = 5.0 / steps;
        let run = wave_leapfrog(&op, &w0, &zero, None, dt, 5.0).unwrap();
        let exact = wave_propagate(&spec, &w0, &zero, None, 5.0).unwrap();
        let err = run.states.last().unwrap().axpy(-1.0, &exact.value).max_abs() / w0.max_abs();
        assert!(err < 1e-3, "{err}");
        assert!(run.energy_drift() < 1e-6);
        assert!(wave_leapfrog(&op, &w0, &zero, None, 2.0 / bound.sqrt(), 1.0).is_err());
    }

    #[test]
    fn window_trace_of_single_mode_source() {
        let (grid, _, spec) = setup(129, PotentialField::zero(1));
        let region = Region::from_box(&grid, &[0.5], &[2.6]).unwrap();
        let bump = crate::geometry::fields::Bump::new([1.5, 0.0], 0.8, 1.0);
        let dt = 0.01;
        let src = TimeSampled::from_fn(&grid, dt, 200, |x, tau| if tau < 1.0 { bump.eval(x, 1) } else { 0.0 });
        let tr = wave_source_to_solution(&spec, &src, &region, 2.0).unwrap();
        assert_eq!(tr.times.len(), 201);
        let none = TimeSampled::from_fn(&grid, dt, 200, |_, _| 0.0);
        assert_eq!(wave_source_to_solution(&spec, &none, &region, 2.0).unwrap().max_abs(), 0.0);
        let outside = TimeSampled::from_fn(&grid, dt, 10, |x, _| x[0].sin());
        assert!(wave_source_to_solution(&spec, &outside, &region, 0.1).is_err());
    }

    #[test]
    fn dn_map_self_convergence() {
        let data = |_: [f64; 2], t: f64| (t * t * (3.0 - t)).max(0.0) * (2.0 * t).sin();
        let g = MetricField::identity(1);
        let v = PotentialField::zero(1);
        let run = |n: usize| {
            let grid = build_grid(&DomainSpec::interval(0.0, 3.0), &[n]).unwrap();
            let region = Region::from_box(&grid, &[1.0], &[2.0]).unwrap();
            restricted_dn_wave(&grid, &g, &v, &region, &data, 1.5, None).unwrap()
        };
        let coarse = run(241);
        let fine = run(961);
        assert_eq!(coarse.nodes.len(), 2);
        let rel = coarse.relative_discrepancy(&fine, 1e-9).unwrap();
        assert!(rel < 0.01, "{rel}");
        let zero = restricted_dn_wave(
            &build_grid(&DomainSpec::interval(0.0, 3.0), &[121]).unwrap(),
            &g,
            &v,
            &Region::from_box(&build_grid(&DomainSpec::interval(0.0, 3.0), &[121]).unwrap(), &[1.0], &[2.0]).unwrap(),
            &|_, _| 0.0,
            1.0,
            None,
        )
        .unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn heat_moments_discriminate() {
        let (grid, _, spec) = setup(257, PotentialField::zero(1));
        let (_, _, spec_v) = setup(257, PotentialField::bump(1, crate::geometry::fields::Bump::new([1.5, 0.0], 0.4, 1.0)));
        let o1 = Region::from_box(&grid, &[0.5], &[1.0]).unwrap();
        let o2 = Region::from_box(&grid, &[2.0], &[2.6]).unwrap();
        let bump = crate::geometry::fields::Bump::new([0.75, 0.0], 0.2, 1.0);
        let f = GridFunction::from_fn_interior(&grid, |x| bump.eval(x, 1));
        let q = QuadratureRule::adaptive(1e-14, 1e-10);
        let same = heat_moment_vanish(&spec, &spec, &f, &o1, &o2, 3, &q).unwrap();
        assert!(same.difference.iter().all(|v| *v == 0.0));
        let diff = heat_moment_vanish(&spec, &spec_v, &f, &o1, &o2, 3, &q).unwrap();
        assert!(diff.relative()[0] > 1e-3);
        for k in 0..4 {
            let tol = 1e-6 * diff.oracle[k] + 10.0 * diff.oracle_roundoff[k];
            assert!(diff.oracle_deviation[k] < tol, "k={k} {diff:?}");
        }
    }
}
