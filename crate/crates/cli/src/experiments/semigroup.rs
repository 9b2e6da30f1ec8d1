//! `P^{±s}` through heat-semigroup integrals against spectral powers on the
//! lowest modes.

use serde::Deserialize;
use transmute_core::calculus::{frac_power_apply, frac_power_via_semigroup, neg_power_via_semigroup, QuadratureRule};
use transmute_core::operator::{assemble, eigendecompose};
use transmute_core::LabError;

use super::{invalid, lab, max_rel, CaseOutput};
use crate::config::{CaseConfig, ConfigError, ExperimentConfig};
use crate::report::Gate;

pub const HEADER: &[&str] = &["case", "nodes", "mode", "eigenvalue", "power", "rel_err", "quadrature_error"];

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Params {
    modes: usize,
    power: f64,
    abs_tol: f64,
    rel_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self { modes: 5, power: 0.5, abs_tol: 1e-14, rel_tol: 1e-12 }
    }
}

pub fn validate(_cfg: &ExperimentConfig, case: &CaseConfig) -> Result<(), ConfigError> {
    let p: Params = case.params()?;
    if !(p.power > 0.0 && p.power < 1.0) {
        return Err(invalid(case, "power must lie in (0, 1)"));
    }
    if p.modes == 0 || !(p.abs_tol > 0.0 && p.rel_tol > 0.0) {
        return Err(invalid(case, "need at least one mode and positive quadrature tolerances"));
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, case: &CaseConfig, out: &mut CaseOutput) -> Result<(), LabError> {
    let p: Params = case.params().map_err(lab)?;
    let q = QuadratureRule::adaptive(p.abs_tol, p.rel_tol);
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes).map_err(lab)?;
        let op = assemble(&grid, &case.metric_field(), &case.potential_field())?;
        let spec = eigendecompose(&op, op.size())?;
        let mut worst: f64 = 0.0;
        for k in 0..p.modes.min(spec.len()) {
            let phi = spec.mode_function(k);
            let lam = spec.eigenvalues()[k];
            for s in [-p.power, p.power] {
                let want = frac_power_apply(&spec, s, &phi)?;
                let got = if s < 0.0 {
                    neg_power_via_semigroup(&spec, -s, &phi, &q)?
                } else {
                    frac_power_via_semigroup(&spec, s, &phi, &q)?
                };
                let rel = max_rel(&want, &got.value);
                worst = worst.max(rel);
                out.rows.push(vec![
                    case.name.clone().into(),
                    nodes.into(),
                    (k + 1).into(),
                    lam.into(),
                    s.into(),
                    rel.into(),
                    got.error.into(),
                ]);
            }
        }
        out.gates.push(Gate::at_most(&case.name, &format!("power_rel@{nodes}"), worst, cfg.tolerance("power_rel")));
    }
    Ok(())
}
