//! Boundary pairing limits of oscillatory probes and metric recovery on `Γ`
//! by polarization.

use serde::Deserialize;
use transmute_core::boundary::{
    analytic_pairing_limit, pairing_limits, polarization_covectors, recover_metric_on_gamma, NdMap, ResolventNd, SpectralNd,
};
use transmute_core::geometry::{Bump, Grid, MetricField, PotentialField, Region};
use transmute_core::wkb::OscillatoryProbe;
use transmute_core::LabError;

use super::{invalid, lab, CaseOutput};
use crate::config::{CaseConfig, ConfigError, ExperimentConfig};
use crate::plots::Plot;
use crate::report::Gate;

pub const HEADER: &[&str] = &[
    "case",
    "mode",
    "nodes",
    "center_x",
    "center_y",
    "xi_x",
    "xi_y",
    "entry",
    "estimate",
    "error_bar",
    "reference",
    "rel_err",
    "imaginary_ratio",
];

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Pairing,
    Metric,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Dense eigendecomposition.
    Spectral,
    /// Sparse resolvent quadrature.
    Resolvent,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub mode: Mode,
    #[serde(default)]
    pub backend: Option<Backend>,
    #[serde(default = "default_step")]
    pub quadrature_step: f64,
}

fn default_step() -> f64 {
    0.5
}

impl Default for Params {
    fn default() -> Self {
        Self { mode: Mode::Pairing, backend: None, quadrature_step: default_step() }
    }
}

/// Spectral in 1D, resolvent in 2D unless the config says otherwise.
pub fn build_nd(
    grid: &Grid,
    g: &MetricField,
    v: &PotentialField,
    region: &Region,
    backend: Option<Backend>,
    step: f64,
) -> Result<Box<dyn NdMap>, LabError> {
    let backend = backend.unwrap_or(if grid.dim() == 1 { Backend::Spectral } else { Backend::Resolvent });
    Ok(match backend {
        Backend::Spectral => Box::new(SpectralNd::build(grid, g, v, region)?),
        Backend::Resolvent => Box::new(ResolventNd::build(grid, g, v, region, step)?),
    })
}

fn directions(case: &CaseConfig, mode: Mode) -> Vec<[f64; 2]> {
    match mode {
        Mode::Pairing => case.probe.as_ref().map(|p| p.xi.clone()).unwrap_or_default(),
        Mode::Metric => polarization_covectors(case.dim()),
    }
}

pub fn validate(cfg: &ExperimentConfig, case: &CaseConfig) -> Result<(), ConfigError> {
    if case.params.is_null() {
        return Err(invalid(case, "params.mode is required"));
    }
    let p: Params = case.params()?;
    let probe = case.probe()?;
    if !(p.quadrature_step > 0.0 && p.quadrature_step <= 1.0) {
        return Err(invalid(case, "quadrature_step must lie in (0, 1]"));
    }
    if probe.n_list.len() < 3 {
        return Err(invalid(case, "the limit fit needs at least three N"));
    }
    if p.mode == Mode::Pairing && probe.xi.is_empty() {
        return Err(invalid(case, "pairing mode needs ξ directions"));
    }
    if p.mode == Mode::Metric && case.resolutions().len() < 2 {
        return Err(invalid(case, "metric mode needs two resolutions"));
    }
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes)?;
        let gamma = case.gamma_region(&grid)?;
        for &c in &probe.centers {
            for xi in directions(case, p.mode) {
                OscillatoryProbe::new(Bump::new(c, probe.width, 1.0), xi, probe.n_list[0])
                    .check_admissible(&grid, &gamma)
                    .map_err(|e| invalid(case, e.to_string()))?;
            }
        }
    }
    cfg.check_aliasing(case, &directions(case, p.mode))
}

pub fn run(cfg: &ExperimentConfig, case: &CaseConfig, out: &mut CaseOutput) -> Result<(), LabError> {
    let p: Params = case.params().map_err(lab)?;
    match p.mode {
        Mode::Pairing => run_pairing(cfg, case, &p, out),
        Mode::Metric => run_metric(cfg, case, &p, out),
    }
}

fn run_pairing(cfg: &ExperimentConfig, case: &CaseConfig, p: &Params, out: &mut CaseOutput) -> Result<(), LabError> {
    let pc = case.probe().map_err(lab)?;
    let (g, v) = (case.metric_field(), case.potential_field());
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes).map_err(lab)?;
        let gamma = case.gamma_region(&grid).map_err(lab)?;
        let nd = build_nd(&grid, &g, &v, &gamma, p.backend, p.quadrature_step)?;
        let probes: Vec<OscillatoryProbe> = pc
            .centers
            .iter()
            .flat_map(|&c| pc.xi.iter().map(move |&xi| OscillatoryProbe::new(Bump::new(c, pc.width, 1.0), xi, pc.n_list[0])))
            .collect();
        let limits = pairing_limits(nd.as_ref(), &probes, &pc.n_list)?;
        let (mut worst, mut worst_im): (f64, f64) = (0.0, 0.0);
        for (probe, lim) in probes.iter().zip(&limits) {
            let want = analytic_pairing_limit(&grid, &gamma, &g, probe);
            let rel = (lim.fit.limit - want).abs() / want.abs();
            let im = lim.imaginary_ratio();
            worst = worst.max(rel);
            worst_im = worst_im.max(im);
            out.rows.push(vec![
                case.name.clone().into(),
                "pairing".into(),
                nodes.into(),
                probe.eta.center[0].into(),
                probe.eta.center[1].into(),
                probe.xi[0].into(),
                probe.xi[1].into(),
                "limit".into(),
                lim.fit.limit.into(),
                lim.fit.error.into(),
                want.into(),
                rel.into(),
                im.into(),
            ]);
            out.plots.push(
                Plot::new(
                    &format!("pairing-{}-{nodes}-{:.2}-{:.2}", case.name, probe.xi[0], probe.xi[1]),
                    "pairing sequence",
                    "1/N",
                    "Re pairing",
                )
                .series("sequence", pc.n_list.iter().zip(&lim.sequence).map(|(n, s)| (1.0 / n, s.re)).collect())
                .series("analytic limit", vec![(0.0, want), (1.0 / pc.n_list[0], want)]),
            );
        }
        out.gates.push(Gate::at_most(&case.name, &format!("limit_rel@{nodes}"), worst, cfg.tolerance("limit_rel")));
        out.gates.push(Gate::at_most(&case.name, &format!("imaginary_rel@{nodes}"), worst_im, cfg.tolerance("imaginary_rel")));
    }
    Ok(())
}

fn run_metric(cfg: &ExperimentConfig, case: &CaseConfig, p: &Params, out: &mut CaseOutput) -> Result<(), LabError> {
    let pc = case.probe().map_err(lab)?;
    let (g, v) = (case.metric_field(), case.potential_field());
    let dim = case.dim();
    let mut worst_by_resolution = Vec::new();
    let mut definite = true;
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes).map_err(lab)?;
        let gamma = case.gamma_region(&grid).map_err(lab)?;
        let nd = build_nd(&grid, &g, &v, &gamma, p.backend, p.quadrature_step)?;
        let estimates = recover_metric_on_gamma(nd.as_ref(), &pc.centers, pc.width, &pc.n_list)?;
        let mut worst: f64 = 0.0;
        for est in &estimates {
            let truth = g.inverse(est.center);
            worst = worst.max(est.relative_error(&truth, dim));
            definite &= est.is_positive_definite(dim);
            for i in 0..dim {
                for j in i..dim {
                    let diag = (0..dim).map(|k| truth[k][k].abs()).fold(0.0, f64::max);
                    let rel = (est.inverse[i][j] - truth[i][j]).abs() / truth[i][j].abs().max(1e-2 * diag);
                    out.rows.push(vec![
                        case.name.clone().into(),
                        "metric".into(),
                        nodes.into(),
                        est.center[0].into(),
                        est.center[1].into(),
                        f64::NAN.into(),
                        f64::NAN.into(),
                        format!("g^{}{}", i + 1, j + 1).into(),
                        est.inverse[i][j].into(),
                        est.error[i][j].into(),
                        truth[i][j].into(),
                        rel.into(),
                        f64::NAN.into(),
                    ]);
                }
            }
        }
        worst_by_resolution.push((nodes, worst));
    }
    let &(finest, worst) = worst_by_resolution.last().expect("validated: two resolutions");
    out.gates.push(Gate::at_most(&case.name, &format!("metric_rel@{finest}"), worst, cfg.tolerance("metric_rel")));
    // each refinement must shrink the worst entrywise error
    let ratio = worst_by_resolution.windows(2).map(|w| w[1].1 / w[0].1).fold(0.0, f64::max);
    out.gates.push(
        Gate::at_most(&case.name, "metric_refinement_ratio", ratio, 1.0)
            .with_note(format!("worst error by resolution: {worst_by_resolution:?}")),
    );
    out.gates.push(Gate::at_least(&case.name, "positive_definite", if definite { 1.0 } else { 0.0 }, 1.0));
    out.plots.push(
        Plot::new(&format!("metric-{}", case.name), "metric recovery", "nodes per axis", "worst entrywise relative error")
            .log_log()
            .series(&case.name, worst_by_resolution.iter().map(|&(n, e)| (n as f64, e)).collect()),
    );
    Ok(())
}
