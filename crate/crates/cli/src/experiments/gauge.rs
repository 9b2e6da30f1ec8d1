//! Forward maps on `Γ` for `(g, V)` and its pullback by a diffeomorphism
//! that fixes `Γ`: identical for the identity, second-order close otherwise.

use std::f64::consts::PI;

use serde::Deserialize;
use transmute_core::calculus::QuadratureRule;
use transmute_core::geometry::{pullback, Grid, GridFunction, Region};
use transmute_core::operator::{assemble, eigendecompose, SpectralDecomposition};
use transmute_core::transmute::{gauge_discrepancy, GaugeDiscrepancy, GaugeProbe};
use transmute_core::LabError;

use super::{invalid, lab, observed_order, CaseOutput};
use crate::config::{BumpConfig, CaseConfig, ConfigError, ExperimentConfig};
use crate::plots::Plot;
use crate::report::Gate;

pub const HEADER: &[&str] = &["case", "nodes", "map", "t", "discrepancy"];

/// Probe inputs shared by the gauge and heat-moment experiments.
#[derive(Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeParams {
    /// Neumann data and wave source profile; must sit inside `Γ`.
    pub data: BumpConfig,
    pub heat_times: Vec<f64>,
    /// The wave source is `sin²(πt/d)` for `t < d`.
    pub pulse_duration: f64,
    pub dt: f64,
    pub t_end: f64,
}

impl Default for ProbeParams {
    fn default() -> Self {
        Self {
            data: BumpConfig { center: [1.5, 0.0], radius: 0.4, amplitude: 1.0 },
            heat_times: vec![0.1, 0.5, 1.0],
            pulse_duration: 1.0,
            dt: 0.01,
            t_end: 2.0,
        }
    }
}

impl ProbeParams {
    pub fn check(&self, case: &CaseConfig) -> Result<(), ConfigError> {
        if self.heat_times.is_empty() || self.heat_times.iter().any(|t| !(*t > 0.0)) {
            return Err(invalid(case, "heat_times must be positive and non-empty"));
        }
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.pulse_duration > 0.0) {
            return Err(invalid(case, "dt, t_end and pulse_duration must be positive"));
        }
        let steps = (self.t_end / self.dt).round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(invalid(case, "t_end must be a multiple of dt"));
        }
        Ok(())
    }
}

/// Spectra of `(g, V)` and of its pullback on one grid.
pub struct GaugePair {
    pub grid: Grid,
    pub gamma: Region,
    pub base: SpectralDecomposition,
    pub gauged: SpectralDecomposition,
}

pub fn spectrum_of(
    grid: &Grid,
    g: &transmute_core::geometry::MetricField,
    v: &transmute_core::geometry::PotentialField,
) -> Result<SpectralDecomposition, LabError> {
    let op = assemble(grid, g, v)?;
    eigendecompose(&op, op.size())
}

pub fn gauge_pair(case: &CaseConfig, nodes: usize) -> Result<GaugePair, LabError> {
    let grid = case.build_grid(nodes).map_err(lab)?;
    let gamma = case.gamma_region(&grid).map_err(lab)?;
    let psi = case.diffeo().map_err(lab)?.map(case.dim());
    psi.check_invariants(&grid, &gamma)?;
    let (g, v) = (case.metric_field(), case.potential_field());
    let (pg, pv) = pullback(&psi, &g, &v, &grid)?;
    let base = spectrum_of(&grid, &g, &v)?;
    let gauged = spectrum_of(&grid, &pg, &pv)?;
    Ok(GaugePair { grid, gamma, base, gauged })
}

pub fn discrepancy(pair: &GaugePair, p: &ProbeParams) -> Result<GaugeDiscrepancy, LabError> {
    let dim = pair.grid.dim();
    let bump = p.data.bump();
    let data = GridFunction::from_fn(&pair.grid, |x| bump.eval(x, dim));
    let d = p.pulse_duration;
    let pulse = move |t: f64| if t < d { (PI * t / d).sin().powi(2) } else { 0.0 };
    let q = QuadratureRule::default();
    let probe = GaugeProbe { data: &data, heat_times: &p.heat_times, pulse: &pulse, dt: p.dt, t_end: p.t_end, quadrature: &q };
    gauge_discrepancy(&pair.base, &pair.gauged, &pair.gamma, &probe)
}

/// `(map, heat time or NaN, discrepancy)`.
type MapRow = (String, f64, f64);

fn maps(d: &GaugeDiscrepancy) -> Vec<MapRow> {
    let mut out = vec![
        ("nd_map".to_string(), f64::NAN, d.nd_map),
        ("semigroup".to_string(), f64::NAN, d.semigroup),
        ("source_to_solution".to_string(), f64::NAN, d.source_to_solution),
    ];
    out.extend(d.heat_kernel.iter().map(|&(t, v)| ("heat_kernel".to_string(), t, v)));
    out
}

pub fn validate(_cfg: &ExperimentConfig, case: &CaseConfig) -> Result<(), ConfigError> {
    let p: ProbeParams = case.params()?;
    p.check(case)?;
    let diffeo = case.diffeo()?;
    if !diffeo.is_identity() && case.resolutions().len() < 2 {
        return Err(invalid(case, "a non-identity gauge needs two resolutions for the order"));
    }
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes)?;
        let gamma = case.gamma_region(&grid)?;
        diffeo.map(case.dim()).check_invariants(&grid, &gamma).map_err(|e| invalid(case, e.to_string()))?;
        let bump = p.data.bump();
        let data = GridFunction::from_fn(&grid, |x| bump.eval(x, case.dim()));
        if !gamma.supports(&data, 0.0) {
            return Err(invalid(case, "probe data must be supported in Γ"));
        }
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, case: &CaseConfig, out: &mut CaseOutput) -> Result<(), LabError> {
    let p: ProbeParams = case.params().map_err(lab)?;
    let identity = case.diffeo().map_err(lab)?.is_identity();
    let mut runs: Vec<(usize, Vec<MapRow>)> = Vec::new();
    for nodes in case.resolutions() {
        let pair = gauge_pair(case, nodes)?;
        let d = discrepancy(&pair, &p)?;
        let m = maps(&d);
        for (name, t, v) in &m {
            out.rows.push(vec![case.name.clone().into(), nodes.into(), name.clone().into(), (*t).into(), (*v).into()]);
        }
        if identity {
            out.gates.push(Gate::at_most(
                &case.name,
                &format!("identity_worst@{nodes}"),
                d.worst(),
                cfg.tolerance("identity_abs"),
            ));
        }
        runs.push((nodes, m));
    }
    if !identity {
        for w in runs.windows(2) {
            let ((nc, coarse), (nf, fine)) = (&w[0], &w[1]);
            let ratio = (*nf - 1) as f64 / (*nc - 1) as f64;
            for ((name, t, a), (_, _, b)) in coarse.iter().zip(fine) {
                let label = if t.is_nan() { name.clone() } else { format!("{name}(t={t})") };
                let order = observed_order(*a, *b, ratio);
                out.gates.push(
                    Gate::at_least(&case.name, &format!("order_{label}@{nc}-{nf}"), order, cfg.tolerance("order_min"))
                        .with_note(format!("{a:.3e} -> {b:.3e}")),
                );
            }
        }
        if let Some((nodes, fine)) = runs.last() {
            let worst = fine.iter().map(|m| m.2).fold(0.0, f64::max);
            out.notes.push(format!("{}: worst discrepancy at {nodes} nodes is {worst:.6e}", case.name));
        }
        let first = &runs[0].1;
        let mut plot = Plot::new(&format!("gauge-{}", case.name), "gauge discrepancy", "nodes", "relative discrepancy").log_log();
        for (k, (name, t, _)) in first.iter().enumerate() {
            let label = if t.is_nan() { name.clone() } else { format!("{name} t={t}") };
            plot = plot.series(&label, runs.iter().map(|(n, m)| (*n as f64, m[k].2)).collect());
        }
        out.plots.push(plot);
    }
    Ok(())
}
