//! Residual order of the two-term WKB approximation in the half-cylinder,
//! and the algebraic closure of its coefficient cascade.

use serde::Deserialize;
use transmute_core::geometry::Region;
use transmute_core::wkb::{build_wkb, wkb_residual, OscillatoryProbe};
use transmute_core::LabError;

use super::{invalid, lab, CaseOutput};
use crate::config::{BoxConfig, CaseConfig, ConfigError, ExperimentConfig};
use crate::plots::Plot;
use crate::report::Gate;

pub const HEADER: &[&str] = &["case", "nodes", "n", "fast_norm", "plain_norm", "sup_norm"];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    window: BoxConfig,
    #[serde(default = "default_height")]
    y_max: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self { window: BoxConfig { lower: [0.0; 2], upper: [0.0; 2] }, y_max: 1.0 }
    }
}

fn default_height() -> f64 {
    1.0
}

pub fn validate(_cfg: &ExperimentConfig, case: &CaseConfig) -> Result<(), ConfigError> {
    if case.params.is_null() {
        return Err(invalid(case, "params.window is required"));
    }
    let p: Params = case.params()?;
    let probe = case.probe()?;
    if probe.xi.len() != 1 || probe.centers.len() != 1 || probe.n_list.len() < 2 {
        return Err(invalid(case, "wkb-order needs one center, one ξ and at least two N"));
    }
    if !(p.y_max > 0.0) {
        return Err(invalid(case, "y_max must be positive"));
    }
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes)?;
        let window = crate::config::region(&grid, &p.window, case.dim()).map_err(|e| invalid(case, e))?;
        let probe = OscillatoryProbe::new(
            transmute_core::geometry::Bump::new(probe.centers[0], probe.width, 1.0),
            probe.xi[0],
            probe.n_list[0],
        );
        probe.check_admissible(&grid, &window).map_err(|e| invalid(case, e.to_string()))?;
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, case: &CaseConfig, out: &mut CaseOutput) -> Result<(), LabError> {
    let p: Params = case.params().map_err(lab)?;
    let pc = case.probe().map_err(lab)?;
    let (g, v) = (case.metric_field(), case.potential_field());
    let dim = case.dim();
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes).map_err(lab)?;
        let window: Region = crate::config::region(&grid, &p.window, dim).map_err(LabError::Precondition)?;
        let probe =
            OscillatoryProbe::new(transmute_core::geometry::Bump::new(pc.centers[0], pc.width, 1.0), pc.xi[0], pc.n_list[0]);
        let sol = build_wkb(&grid, &window, &g, &v, &probe)?;
        let r = wkb_residual(&sol, &grid, p.y_max, &pc.n_list)?;
        for k in 0..r.n.len() {
            out.rows.push(vec![
                case.name.clone().into(),
                nodes.into(),
                r.n[k].into(),
                r.fast_norm[k].into(),
                r.plain_norm[k].into(),
                r.sup_norm[k].into(),
            ]);
        }
        let (lo, hi) = (cfg.tolerance("slope_min"), cfg.tolerance("slope_max"));
        out.gates.push(Gate::at_least(&case.name, &format!("slope_min@{nodes}"), r.slope_fast, lo));
        out.gates.push(Gate::at_most(&case.name, &format!("slope_max@{nodes}"), r.slope_fast, hi));
        let (mut closure, mut expansion, mut bands): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for &node in grid.interior_nodes() {
            let x = grid.point(node);
            if probe.eta.eval(x, dim) == 0.0 {
                continue;
            }
            closure = closure.max(sol.closure_defect(x));
            expansion = expansion.max(sol.expansion_defect(x));
            bands = bands.max(sol.cascade_defect(x));
        }
        let tol = cfg.tolerance("closure_abs");
        out.gates.push(Gate::at_most(&case.name, &format!("closure_identities@{nodes}"), closure, tol));
        out.gates.push(Gate::at_most(&case.name, &format!("cascade_expansion@{nodes}"), expansion, tol));
        out.gates.push(Gate::at_most(&case.name, &format!("cascade_bands@{nodes}"), bands, tol));
        out.notes.push(format!(
            "{}@{nodes}: slopes fast {:.4} plain {:.4} sup {:.4}; the fast-variable norm carries the gate",
            case.name, r.slope_fast, r.slope_plain, r.slope_sup
        ));
        let pts = |v: &[f64]| r.n.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
        out.plots.push(
            Plot::new(&format!("wkb-residual-{}-{nodes}", case.name), "WKB residual", "N", "residual norm")
                .log_log()
                .series("fast", pts(&r.fast_norm))
                .series("plain", pts(&r.plain_norm))
                .series("sup", pts(&r.sup_norm)),
        );
    }
    Ok(())
}
