//! Heat moments between disjoint windows: they vanish up to the gauge
//! discretization level for a gauge pair and stay visible for a perturbed
//! potential.

use serde::Deserialize;
use transmute_core::calculus::QuadratureRule;
use transmute_core::geometry::{GridFunction, PotentialField};
use transmute_core::transmute::{heat_moment_vanish, HeatMoments};
use transmute_core::LabError;

use super::gauge::{discrepancy, gauge_pair, spectrum_of, ProbeParams};
use super::{invalid, lab, CaseOutput};
use crate::config::{region, BoxConfig, BumpConfig, CaseConfig, ConfigError, ExperimentConfig};
use crate::report::Gate;

pub const HEADER: &[&str] = &[
    "case",
    "nodes",
    "pair",
    "k",
    "difference",
    "reference",
    "relative",
    "oracle",
    "oracle_deviation",
    "oracle_roundoff",
    "level",
];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    source: BumpConfig,
    source_window: BoxConfig,
    observation: BoxConfig,
    /// Bump added to `V` for the control pair.
    control: BumpConfig,
    #[serde(default = "default_k_max")]
    k_max: usize,
    #[serde(default)]
    gauge: ProbeParams,
}

fn default_k_max() -> usize {
    3
}

impl Default for Params {
    fn default() -> Self {
        let zero = BoxConfig { lower: [0.0; 2], upper: [0.0; 2] };
        let bump = BumpConfig { center: [0.0; 2], radius: 0.0, amplitude: 0.0 };
        Self { source: bump, source_window: zero, observation: zero, control: bump, k_max: 3, gauge: ProbeParams::default() }
    }
}

pub fn validate(_cfg: &ExperimentConfig, case: &CaseConfig) -> Result<(), ConfigError> {
    if case.params.is_null() {
        return Err(invalid(case, "params.source, source_window, observation and control are required"));
    }
    let p: Params = case.params()?;
    p.gauge.check(case)?;
    if case.diffeo()?.is_identity() {
        return Err(invalid(case, "heat moments need a non-identity gauge"));
    }
    let nodes = *case.resolutions().last().expect("resolutions are non-empty");
    let grid = case.build_grid(nodes)?;
    let dim = case.dim();
    let o1 = region(&grid, &p.source_window, dim).map_err(|e| invalid(case, e))?;
    region(&grid, &p.observation, dim).map_err(|e| invalid(case, e))?;
    let b = p.source.bump();
    if !o1.supports(&GridFunction::from_fn_interior(&grid, |x| b.eval(x, dim)), 0.0) {
        return Err(invalid(case, "source must be supported in the source window"));
    }
    case.gamma_region(&grid)?;
    Ok(())
}

fn rows(case: &str, nodes: usize, pair: &str, m: &HeatMoments, level: f64, out: &mut CaseOutput) {
    let rel = m.relative();
    for k in 0..m.k.len() {
        out.rows.push(vec![
            case.into(),
            nodes.into(),
            pair.into(),
            m.k[k].into(),
            m.difference[k].into(),
            m.reference[k].into(),
            rel[k].into(),
            m.oracle[k].into(),
            m.oracle_deviation[k].into(),
            m.oracle_roundoff[k].into(),
            level.into(),
        ]);
    }
}

/// Runs at the finest resolution only.
pub fn run(cfg: &ExperimentConfig, case: &CaseConfig, out: &mut CaseOutput) -> Result<(), LabError> {
    let p: Params = case.params().map_err(lab)?;
    let nodes = *case.resolutions().last().expect("validated");
    let pair = gauge_pair(case, nodes)?;
    let level = discrepancy(&pair, &p.gauge)?.worst();
    let grid = &pair.grid;
    let dim = grid.dim();
    let o1 = region(grid, &p.source_window, dim).map_err(LabError::Precondition)?;
    let o2 = region(grid, &p.observation, dim).map_err(LabError::Precondition)?;
    let b = p.source.bump();
    let f = GridFunction::from_fn_interior(grid, |x| b.eval(x, dim));
    let q = QuadratureRule::adaptive(1e-14, 1e-10);
    let gauge = heat_moment_vanish(&pair.base, &pair.gauged, &f, &o1, &o2, p.k_max, &q)?;
    let vc = case.potential_field().plus(&PotentialField::bump(dim, p.control.bump()));
    let perturbed = spectrum_of(grid, &case.metric_field(), &vc)?;
    let control = heat_moment_vanish(&pair.base, &perturbed, &f, &o1, &o2, p.k_max, &q)?;
    rows(&case.name, nodes, "gauge", &gauge, level, out);
    rows(&case.name, nodes, "control", &control, level, out);
    let worst = gauge.relative().into_iter().fold(0.0, f64::max);
    out.gates.push(
        Gate::at_most(&case.name, &format!("gauge_moments@{nodes}"), worst, level)
            .with_note("threshold is the worst gauge discrepancy of the forward maps at this resolution"),
    );
    let factor = cfg.tolerance("control_factor");
    out.gates.push(Gate::at_least(&case.name, &format!("control_moment@{nodes}"), control.relative()[0], factor * level));
    out.notes.push(format!(
        "{}@{nodes}: t_min {:.4e}, quadrature error {:.3e} / {:.3e}",
        case.name, gauge.t_min, gauge.quadrature_error, control.quadrature_error
    ));
    Ok(())
}
