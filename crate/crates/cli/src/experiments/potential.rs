//! Potential differences from two ND maps sharing a metric.

use serde::Deserialize;
use transmute_core::boundary::{analytic_potential_difference, recover_potential_difference, recover_potential_on_gamma};
use transmute_core::geometry::{Bump, PotentialField};
use transmute_core::wkb::OscillatoryProbe;
use transmute_core::LabError;

use super::boundary::{build_nd, Backend};
use super::{invalid, lab, CaseOutput};
use crate::config::{CaseConfig, ConfigError, ExperimentConfig};
use crate::report::Gate;

pub const HEADER: &[&str] = &["case", "nodes", "check", "center_x", "center_y", "estimate", "error_bar", "reference", "rel_err"];

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Params {
    backend: Option<Backend>,
    quadrature_step: f64,
    /// Also divide by the known weight at every probe center.
    pointwise: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self { backend: None, quadrature_step: 0.5, pointwise: true }
    }
}

pub fn validate(cfg: &ExperimentConfig, case: &CaseConfig) -> Result<(), ConfigError> {
    let _: Params = case.params()?;
    let probe = case.probe()?;
    case.alternate_potential()?;
    if probe.xi.len() != 1 || probe.n_list.len() < 3 {
        return Err(invalid(case, "potential-recover needs one ξ and at least three N"));
    }
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes)?;
        let gamma = case.gamma_region(&grid)?;
        for &c in &probe.centers {
            OscillatoryProbe::new(Bump::new(c, probe.width, 1.0), probe.xi[0], probe.n_list[0])
                .check_admissible(&grid, &gamma)
                .map_err(|e| invalid(case, e.to_string()))?;
        }
    }
    cfg.check_aliasing(case, &probe.xi)
}

pub fn run(cfg: &ExperimentConfig, case: &CaseConfig, out: &mut CaseOutput) -> Result<(), LabError> {
    let p: Params = case.params().map_err(lab)?;
    let pc = case.probe().map_err(lab)?;
    let g = case.metric_field();
    let (v1, v2) = (case.potential_field(), case.alternate_potential().map_err(lab)?);
    let dim = case.dim();
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes).map_err(lab)?;
        let gamma = case.gamma_region(&grid).map_err(lab)?;
        let nd1 = build_nd(&grid, &g, &v1, &gamma, p.backend, p.quadrature_step)?;
        let nd2 = build_nd(&grid, &g, &v2, &gamma, p.backend, p.quadrature_step)?;
        let probe = OscillatoryProbe::new(Bump::new(pc.centers[0], pc.width, 1.0), pc.xi[0], pc.n_list[0]);
        let d = recover_potential_difference(nd1.as_ref(), nd2.as_ref(), &probe, &pc.n_list)?;
        let want = analytic_potential_difference(&grid, &gamma, &g, &v1, &v2, &probe);
        let rel = (d.estimate - want).abs() / want.abs();
        let c = pc.centers[0];
        out.rows.push(vec![
            case.name.clone().into(),
            nodes.into(),
            "difference".into(),
            c[0].into(),
            c[1].into(),
            d.estimate.into(),
            d.error.into(),
            want.into(),
            rel.into(),
        ]);
        out.gates.push(Gate::at_most(&case.name, &format!("difference_rel@{nodes}"), rel, cfg.tolerance("difference_rel")));

        // identical maps: the probe scale is the weight of a unit difference
        let same = recover_potential_difference(nd1.as_ref(), nd1.as_ref(), &probe, &pc.n_list)?;
        let scale = analytic_potential_difference(
            &grid,
            &gamma,
            &g,
            &PotentialField::constant(dim, 1.0),
            &PotentialField::zero(dim),
            &probe,
        );
        let zero_rel = same.estimate.abs() / scale.abs();
        out.rows.push(vec![
            case.name.clone().into(),
            nodes.into(),
            "zero".into(),
            c[0].into(),
            c[1].into(),
            same.estimate.into(),
            same.error.into(),
            0.0.into(),
            zero_rel.into(),
        ]);
        out.gates.push(Gate::at_most(&case.name, &format!("zero_rel@{nodes}"), zero_rel, cfg.tolerance("zero_rel")));
        out.notes.push(format!(
            "{}@{nodes}: N·pairing of (Λ1 − Λ2) converges to {:.6e}; the integral of |g|^(1/2) ΔV η²/(2|ξ|³) is {:.6e}, so the estimate is minus the raw limit",
            case.name, d.fit.limit, want
        ));
        if p.pointwise {
            let values = recover_potential_on_gamma(nd1.as_ref(), nd2.as_ref(), &pc.centers, pc.width, pc.xi[0], &pc.n_list)?;
            for (&c, (val, err)) in pc.centers.iter().zip(values) {
                let truth = v1.value(c) - v2.value(c);
                let rel = (val - truth).abs() / truth.abs().max(f64::MIN_POSITIVE);
                out.rows.push(vec![
                    case.name.clone().into(),
                    nodes.into(),
                    "pointwise".into(),
                    c[0].into(),
                    c[1].into(),
                    val.into(),
                    err.into(),
                    truth.into(),
                    rel.into(),
                ]);
            }
        }
    }
    Ok(())
}
