//! Spectral functional calculus on a [`SpectralDecomposition`], and the
//! semigroup-integral representations used to cross-check it.

mod gamma;
mod quadrature;

pub use gamma::gamma;
pub use quadrature::{Quadrature, QuadratureRule, Scheme};

use faer::Mat;

use crate::error::{LabError, Result};
use crate::geometry::grid::GridFunction;
use crate::operator::SpectralDecomposition;

/// A value together with its estimated quadrature error.
#[derive(Clone, Debug)]
pub struct Estimated<T> {
    pub value: T,
    pub error: f64,
}

/// Interior values of `u`, which must vanish on the outer boundary.
pub fn interior_data(spec: &SpectralDecomposition, u: &GridFunction) -> Result<Vec<f64>> {
    let grid = spec.grid();
    if u.len() != grid.node_count() {
        return Err(LabError::Precondition(format!(
            "grid function has {} values, grid has {} nodes",
            u.len(),
            grid.node_count()
        )));
    }
    if !u.vanishes_on_boundary(grid, 1e-12) {
        return Err(LabError::Precondition("data must vanish on the outer boundary".into()));
    }
    Ok(u.interior(grid))
}

fn lift(spec: &SpectralDecomposition, interior: &[f64]) -> GridFunction {
    GridFunction::from_interior(spec.grid(), interior)
}

/// `P^s u = Σ λ_k^s u_k φ_k`.
pub fn frac_power_apply(spec: &SpectralDecomposition, s: f64, u: &GridFunction) -> Result<GridFunction> {
    if !(-2.0..=2.0).contains(&s) {
        return Err(LabError::Precondition(format!("power s = {s} outside [-2, 2]")));
    }
    let x = interior_data(spec, u)?;
    Ok(lift(spec, &spec.apply_fn(&x, |l| if s == 0.0 { 1.0 } else { l.powf(s) })))
}

/// `e^{-tP} u`.
pub fn heat_apply(spec: &SpectralDecomposition, t: f64, u: &GridFunction) -> Result<GridFunction> {
    if !(t >= 0.0) {
        return Err(LabError::Precondition(format!("time t = {t} must be nonnegative")));
    }
    let x = interior_data(spec, u)?;
    Ok(lift(spec, &spec.apply_fn(&x, |l| (-t * l).exp())))
}

/// Heat kernel `K_t = Φ diag(e^{-tλ}) Φᵀ` on interior unknowns, so that
/// `e^{-tP} u = K_t M u`.
pub fn heat_kernel(spec: &SpectralDecomposition, t: f64) -> Result<Mat<f64>> {
    let all: Vec<usize> = (0..spec.grid().interior_count()).collect();
    heat_kernel_block(spec, t, &all, &all)
}

/// Rows and columns (interior unknown indices) of the heat kernel.
pub fn heat_kernel_block(spec: &SpectralDecomposition, t: f64, rows: &[usize], cols: &[usize]) -> Result<Mat<f64>> {
    if !(t > 0.0) {
        return Err(LabError::Precondition(format!("kernel time t = {t} must be positive")));
    }
    let decay: Vec<f64> = spec.eigenvalues().iter().map(|l| (-t * l).exp()).collect();
    let rphi: Vec<Vec<f64>> = rows.iter().map(|&r| spec.row(r)).collect();
    let cphi: Vec<Vec<f64>> = cols.iter().map(|&c| spec.row(c)).collect();
    Ok(Mat::from_fn(rows.len(), cols.len(), |i, j| rphi[i].iter().zip(&cphi[j]).zip(&decay).map(|((a, b), d)| a * b * d).sum()))
}

fn check_power(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(LabError::Precondition(format!("integral representation needs s in (0, 1), got {s}")));
    }
    Ok(())
}

/// `P^{-s} u = Γ(s)^{-1} ∫_0^∞ e^{-tP} u t^{s-1} dt`, integrated in `v = ln t`.
pub fn neg_power_via_semigroup(
    spec: &SpectralDecomposition,
    s: f64,
    u: &GridFunction,
    q: &QuadratureRule,
) -> Result<Estimated<GridFunction>> {
    check_power(s)?;
    let x = interior_data(spec, u)?;
    let c = spec.analyze(&x);
    let lam = spec.eigenvalues().to_vec();
    let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if cmax == 0.0 {
        return Ok(Estimated { value: GridFunction::zeros(spec.grid()), error: 0.0 });
    }
    // tails: ∫_0^{t0} t^{s-1} = t0^s/s and e^{-λ_1 T} with T = 50/λ_1
    let v_lo = (1e-17 * s).ln() / s;
    let v_hi = (50.0 / spec.gap()).ln().max(v_lo + 1.0);
    let integrand = |v: f64| -> Vec<f64> {
        let t = v.exp();
        let w = (s * v).exp();
        c.iter().zip(&lam).map(|(ck, l)| if *ck == 0.0 { 0.0 } else { ck * (-t * l).exp() * w }).collect()
    };
    let r = q.integrate(&integrand, v_lo, v_hi, &[])?;
    let norm = gamma(s);
    let coeffs: Vec<f64> = r.value.iter().map(|v| v / norm).collect();
    Ok(Estimated { value: lift(spec, &spec.synthesize(&coeffs)), error: r.error / norm.abs() })
}

/// `P^s u = Γ(-s)^{-1} ∫_0^∞ (e^{-tP} u - u) t^{-1-s} dt`, split at `t = 1`
/// with the `-u` part of the upper piece integrated exactly.
pub fn frac_power_via_semigroup(
    spec: &SpectralDecomposition,
    s: f64,
    u: &GridFunction,
    q: &QuadratureRule,
) -> Result<Estimated<GridFunction>> {
    check_power(s)?;
    let x = interior_data(spec, u)?;
    let c = spec.analyze(&x);
    let lam = spec.eigenvalues().to_vec();
    if c.iter().all(|v| *v == 0.0) {
        return Ok(Estimated { value: GridFunction::zeros(spec.grid()), error: 0.0 });
    }
    let lmax = lam.iter().copied().fold(0.0, f64::max);
    // near t = 0 the integrand is -λ t^{-s}
    let v_lo = (1e-17 * (1.0 - s) / lmax).ln() / (1.0 - s);
    let lower = |v: f64| -> Vec<f64> {
        let t = v.exp();
        let w = (-s * v).exp();
        c.iter().zip(&lam).map(|(ck, l)| if *ck == 0.0 { 0.0 } else { ck * (-t * l).exp_m1() * w }).collect()
    };
    let r1 = q.integrate(&lower, v_lo, 0.0, &[])?;
    let v_hi = (50.0 / spec.gap()).ln();
    let (upper, err2) = if v_hi > 0.0 {
        let f = |v: f64| -> Vec<f64> {
            let t = v.exp();
            let w = (-s * v).exp();
            c.iter().zip(&lam).map(|(ck, l)| if *ck == 0.0 { 0.0 } else { ck * (-t * l).exp() * w }).collect()
        };
        let r = q.integrate(&f, 0.0, v_hi, &[])?;
        (r.value, r.error)
    } else {
        (vec![0.0; c.len()], 0.0)
    };
    let norm = gamma(-s);
    let coeffs: Vec<f64> = (0..c.len()).map(|k| (r1.value[k] + upper[k] - c[k] / s) / norm).collect();
    Ok(Estimated { value: lift(spec, &spec.synthesize(&coeffs)), error: (r1.error + err2) / norm.abs() })
}

/// Source sampled at `τ_j = j dt`, `j = 0..samples.len()`.
#[derive(Clone, Debug)]
pub struct TimeSampled {
    pub dt: f64,
    pub samples: Vec<GridFunction>,
}

impl TimeSampled {
    pub fn new(dt: f64, samples: Vec<GridFunction>) -> Self {
        Self { dt, samples }
    }

    pub fn from_fn(grid: &crate::geometry::grid::Grid, dt: f64, steps: usize, f: impl Fn([f64; 2], f64) -> f64) -> Self {
        let samples = (0..=steps).map(|j| GridFunction::from_fn_interior(grid, |x| f(x, j as f64 * dt))).collect();
        Self { dt, samples }
    }

    pub fn steps(&self) -> usize {
        self.samples.len().saturating_sub(1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples.len()).map(|j| j as f64 * self.dt).collect()
    }
}

/// Composite weights (in units of the step) on `j = 0..=n`: Simpson, with a
/// closing 3/8 panel for odd `n`, trapezoid for `n = 1`.
pub fn composite_weights(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    match n {
        0 => {}
        1 => {
            w[0] = 0.5;
            w[1] = 0.5;
        }
        _ => {
            let simpson_end = if n.is_multiple_of(2) { n } else { n - 3 };
            for p in (0..simpson_end).step_by(2) {
                w[p] += 1.0 / 3.0;
                w[p + 1] += 4.0 / 3.0;
                w[p + 2] += 1.0 / 3.0;
            }
            if n % 2 == 1 {
                let b = n - 3;
                w[b] += 3.0 / 8.0;
                w[b + 1] += 9.0 / 8.0;
                w[b + 2] += 9.0 / 8.0;
                w[b + 3] += 3.0 / 8.0;
            }
        }
    }
    w
}

/// Wave solution at one time.
#[derive(Clone, Debug)]
pub struct WaveState {
    pub time: f64,
    pub value: GridFunction,
    pub velocity: GridFunction,
    /// Estimated error of the Duhamel time quadrature.
    pub quadrature_error: f64,
}

/// `cos(t P^{1/2}) w0` for any real `t`.
pub fn cos_propagate(spec: &SpectralDecomposition, w0: &GridFunction, t: f64) -> Result<GridFunction> {
    let x = interior_data(spec, w0)?;
    Ok(lift(spec, &spec.apply_fn(&x, |l| (t * l.sqrt()).cos())))
}

/// `w(t) = cos(tP^{1/2}) w0 + P^{-1/2} sin(tP^{1/2}) w1 + ∫_0^t P^{-1/2} sin((t-τ)P^{1/2}) F(τ) dτ`.
///
/// `t` must be a node of the source time mesh when a source is given.
pub fn wave_propagate(
    spec: &SpectralDecomposition,
    w0: &GridFunction,
    w1: &GridFunction,
    source: Option<&TimeSampled>,
    t: f64,
) -> Result<WaveState> {
    if !(t >= 0.0) {
        return Err(LabError::Precondition(format!("time t = {t} must be nonnegative")));
    }
    let step = match source {
        Some(f) => {
            let j = (t / f.dt).round();
            if (j * f.dt - t).abs() > 1e-9 * t.max(1.0) || j as usize > f.steps() {
                return Err(LabError::Precondition(format!("t = {t} is not on the source time mesh")));
            }
            Some(j as usize)
        }
        None => None,
    };
    let mut out = wave_trajectory(spec, w0, w1, source, &[step.unwrap_or(0)], Some(t))?;
    Ok(out.pop().unwrap())
}

/// Wave states at the given source mesh indices (or at `single_time` when no
/// source is present).
pub fn wave_trajectory(
    spec: &SpectralDecomposition,
    w0: &GridFunction,
    w1: &GridFunction,
    source: Option<&TimeSampled>,
    steps: &[usize],
    single_time: Option<f64>,
) -> Result<Vec<WaveState>> {
    let c0 = spec.analyze(&interior_data(spec, w0)?);
    let c1 = spec.analyze(&interior_data(spec, w1)?);
    let omega: Vec<f64> = spec.eigenvalues().iter().map(|l| l.sqrt()).collect();
    let k = omega.len();
    let fc: Vec<Vec<f64>> = match source {
        Some(f) => f.samples.iter().map(|s| interior_data(spec, s).map(|x| spec.analyze(&x))).collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let mut states = Vec::with_capacity(steps.len());
    for &n in steps {
        let t = match (source, single_time) {
            (Some(f), _) => n as f64 * f.dt,
            (None, Some(t)) => t,
            (None, None) => return Err(LabError::Precondition("no time given".into())),
        };
        let mut val = vec![0.0; k];
        let mut vel = vec![0.0; k];
        for m in 0..k {
            let (s, c) = (t * omega[m]).sin_cos();
            val[m] = c0[m] * c + c1[m] * s / omega[m];
            vel[m] = -c0[m] * omega[m] * s + c1[m] * c;
        }
        let mut qerr = 0.0;
        if let Some(f) = source {
            if n > 0 {
                let (dv, dvel, err) = duhamel(&fc, &omega, f.dt, n);
                for m in 0..k {
                    val[m] += dv[m];
                    vel[m] += dvel[m];
                }
                let scale: f64 = spec.norm(&spec.synthesize(&dv)).max(f64::MIN_POSITIVE);
                qerr = spec.norm(&spec.synthesize(&err)) / scale.max(1.0);
            }
        }
        states.push(WaveState {
            time: t,
            value: lift(spec, &spec.synthesize(&val)),
            velocity: lift(spec, &spec.synthesize(&vel)),
            quadrature_error: qerr,
        });
    }
    Ok(states)
}

/// Modal Duhamel integrals up to mesh index `n`, their time derivatives, and a
/// per-mode error estimate from a coarser rule.
fn duhamel(fc: &[Vec<f64>], omega: &[f64], dt: f64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let t = n as f64 * dt;
    let w = composite_weights(n);
    let coarse = if n.is_multiple_of(4) && n >= 4 { Some(composite_weights(n / 2)) } else { None };
    let k = omega.len();
    let mut val = vec![0.0; k];
    let mut vel = vec![0.0; k];
    let mut err = vec![0.0; k];
    for m in 0..k {
        let om = omega[m];
        let mut acc = 0.0;
        let mut accv = 0.0;
        let mut acc_coarse = 0.0;
        for j in 0..=n {
            let f = fc[j][m];
            if f == 0.0 {
                continue;
            }
            let (s, c) = ((t - j as f64 * dt) * om).sin_cos();
            acc += w[j] * s * f;
            accv += w[j] * c * f;
            if let Some(cw) = &coarse {
                if j % 2 == 0 {
                    acc_coarse += cw[j / 2] * s * f;
                }
            }
        }
        val[m] = dt * acc / om;
        vel[m] = dt * accv;
        err[m] = match coarse {
            Some(_) => (dt * acc - 2.0 * dt * acc_coarse).abs() / (15.0 * om),
            None => 0.0,
        };
    }
    (val, vel, err)
}

/// `‖∂_t w‖²_M + λ-weighted ‖w‖²`, the discrete wave energy.
pub fn wave_energy(spec: &SpectralDecomposition, state: &WaveState) -> Result<f64> {
    let c = spec.analyze(&interior_data(spec, &state.value)?);
    let v = spec.analyze(&interior_data(spec, &state.velocity)?);
    Ok(c.iter().zip(&v).zip(spec.eigenvalues()).map(|((c, v), l)| v * v + l * c * c).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fields::{MetricField, PotentialField};
    use crate::geometry::grid::{build_grid, DomainSpec};
    use crate::operator::{assemble, eigendecompose};
    use std::f64::consts::PI;

    fn spec_1d(nodes: usize) -> SpectralDecomposition {
        let grid = build_grid(&DomainSpec::interval(0.0, PI), &[nodes]).unwrap();
        let op = assemble(&grid, &MetricField::identity(1), &PotentialField::zero(1)).unwrap();
        eigendecompose(&op, nodes - 2).unwrap()
    }

    #[test]
    fn weights_integrate_cubics() {
        for n in 2..12 {
            let w = composite_weights(n);
            let h = 1.0 / n as f64;
            let s: f64 = w.iter().enumerate().map(|(j, w)| w * h * (j as f64 * h).powi(3)).sum();
            assert!((s - 0.25).abs() < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn single_mode_scalings() {
        let spec = spec_1d(65);
        let phi = spec.mode_function(0);
        let l1 = spec.gap();
        let half = frac_power_apply(&spec, 0.5, &phi).unwrap();
        let heat = heat_apply(&spec, 1.0, &phi).unwrap();
        for i in 0..phi.len() {
            assert!((half.0[i] - l1.sqrt() * phi.0[i]).abs() < 1e-12);
            assert!((heat.0[i] - (-l1).exp() * phi.0[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn semigroup_integrals_match_spectral_powers() {
        let spec = spec_1d(65);
        let q = QuadratureRule::default();
        let u = spec.mode_function(0).axpy(1.0, &spec.mode_function(2));
        let a = neg_power_via_semigroup(&spec, 0.5, &u, &q).unwrap().value;
        let b = frac_power_apply(&spec, -0.5, &u).unwrap();
        let c = frac_power_via_semigroup(&spec, 0.5, &u, &q).unwrap().value;
        let d = frac_power_apply(&spec, 0.5, &u).unwrap();
        for i in 0..u.len() {
            assert!((a.0[i] - b.0[i]).abs() < 1e-10);
            assert!((c.0[i] - d.0[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn duhamel_closed_form() {
        let spec = spec_1d(129);
        let grid = spec.grid().clone();
        let dt = 1.0 / 200.0;
        let src = TimeSampled::from_fn(&grid, dt, 400, |x, tau| if tau < 1.0 { x[0].sin() } else { 0.0 });
        // step discontinuity at τ = 1 sits on the mesh; split the rule there
        let zero = GridFunction::zeros(&grid);
        let state = wave_propagate(&spec, &zero, &zero, Some(&src), 2.0).unwrap();
        let sine = GridFunction::from_fn_interior(&grid, |x| x[0].sin());
        let c = spec.analyze(&state.value.interior(&grid));
        let norm = spec.analyze(&sine.interior(&grid))[0];
        let want = 1f64.cos() - 2f64.cos();
        // the jump costs O(dt) in the composite rule
        assert!((c[0] / norm - want).abs() < 2e-2);
    }
}
