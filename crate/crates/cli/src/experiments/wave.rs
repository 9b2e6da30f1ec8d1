//! Free waves: leapfrog against the spectral propagator, and energy
//! conservation of both.

use serde::Deserialize;
use transmute_core::calculus::{wave_energy, wave_propagate, WaveState};
use transmute_core::operator::{assemble, eigendecompose};
use transmute_core::transmute::wave_leapfrog;
use transmute_core::LabError;

use super::{bump_sum, invalid, lab, max_rel, random_bumps, CaseOutput};
use crate::config::{CaseConfig, ConfigError, ExperimentConfig};
use crate::plots::Plot;
use crate::report::Gate;

pub const HEADER: &[&str] = &["case", "nodes", "t", "dt", "rel_err", "spectral_energy", "leapfrog_energy"];

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Params {
    t_end: f64,
    /// Step as a fraction of the stability limit `2/√λmax`.
    cfl_fraction: f64,
    /// Comparison times, evenly spread over `[0, t_end]`.
    samples: usize,
    /// Every this many nodes go into the traces.
    trace_stride: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self { t_end: 5.0, cfl_fraction: 0.25, samples: 50, trace_stride: 1 }
    }
}

pub fn validate(_cfg: &ExperimentConfig, case: &CaseConfig) -> Result<(), ConfigError> {
    let p: Params = case.params()?;
    if !(p.t_end > 0.0) || !(p.cfl_fraction > 0.0 && p.cfl_fraction <= 0.9) {
        return Err(invalid(case, "t_end must be positive and cfl_fraction in (0, 0.9]"));
    }
    if p.samples == 0 || p.trace_stride == 0 {
        return Err(invalid(case, "samples and trace_stride must be positive"));
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, case: &CaseConfig, out: &mut CaseOutput) -> Result<(), LabError> {
    let p: Params = case.params().map_err(lab)?;
    let dim = case.dim();
    let lo = [case.grid.lower[0], *case.grid.lower.get(1).unwrap_or(&0.0)];
    let hi = [case.grid.upper[0], *case.grid.upper.get(1).unwrap_or(&0.0)];
    let b0 = random_bumps(cfg.seed, 3, lo, hi, dim, (0.4, 0.8));
    let b1 = random_bumps(cfg.seed.wrapping_add(1), 3, lo, hi, dim, (0.4, 0.8));
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes).map_err(lab)?;
        let op = assemble(&grid, &case.metric_field(), &case.potential_field())?;
        let spec = eigendecompose(&op, op.size())?;
        let (w0, w1) = (bump_sum(&grid, &b0), bump_sum(&grid, &b1));

        // largest step under the fraction that lands on t_end
        let lambda_max = spec.eigenvalues().iter().copied().fold(0.0, f64::max);
        let dt_max = p.cfl_fraction * 2.0 / lambda_max.sqrt();
        let steps = (p.t_end / dt_max).ceil().max(p.samples as f64);
        let steps = (steps / p.samples as f64).ceil() as usize * p.samples;
        let dt = p.t_end / steps as f64;
        let lf = wave_leapfrog(&op, &w0, &w1, None, dt, p.t_end)?;

        let stride = steps / p.samples;
        let mut worst: f64 = 0.0;
        let mut energies = Vec::with_capacity(p.samples + 1);
        let id_s = format!("{}@{nodes}/spectral", case.name);
        let id_l = format!("{}@{nodes}/leapfrog", case.name);
        for j in 0..=p.samples {
            let n = j * stride;
            let t = n as f64 * dt;
            let s: WaveState = wave_propagate(&spec, &w0, &w1, None, t)?;
            let e = wave_energy(&spec, &s)?;
            energies.push((t, e));
            let rel = max_rel(&s.value, &lf.states[n]);
            worst = worst.max(rel);
            let le = if n < lf.energy.len() { lf.energy[n] } else { f64::NAN };
            out.rows.push(vec![case.name.clone().into(), nodes.into(), t.into(), dt.into(), rel.into(), e.into(), le.into()]);
            for node in (0..grid.node_count()).step_by(p.trace_stride) {
                out.traces.push(&id_s, t, node, s.value.0[node]);
                out.traces.push(&id_l, t, node, lf.states[n].0[node]);
            }
        }
        let e0 = energies[0].1;
        let drift = energies.iter().map(|(_, e)| (e - e0).abs()).fold(0.0, f64::max) / e0;
        out.gates.push(Gate::at_most(&case.name, &format!("leapfrog_rel@{nodes}"), worst, cfg.tolerance("leapfrog_rel")));
        out.gates.push(Gate::at_most(&case.name, &format!("spectral_drift@{nodes}"), drift, cfg.tolerance("spectral_drift")));
        out.gates.push(Gate::at_most(
            &case.name,
            &format!("leapfrog_drift@{nodes}"),
            lf.energy_drift(),
            cfg.tolerance("leapfrog_drift"),
        ));
        out.notes
            .push(format!("{}@{nodes}: dt {dt:.4e}, λmax {lambda_max:.4e}, Gershgorin bound {:.4e}", case.name, lf.lambda_max));
        out.plots.push(
            Plot::new(&format!("wave-energy-{}-{nodes}", case.name), "wave energy", "t", "relative drift")
                .series("spectral", energies.iter().map(|&(t, e)| (t, (e - e0) / e0)).collect()),
        );
    }
    Ok(())
}
