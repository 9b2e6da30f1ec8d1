//! The Kannai heat-from-wave identity: scalar form, and applied to smooth
//! multi-mode data against the spectral heat semigroup.

use serde::Deserialize;
use transmute_core::calculus::{heat_apply, QuadratureRule};
use transmute_core::geometry::GridFunction;
use transmute_core::operator::{assemble, eigendecompose};
use transmute_core::transmute::{kannai_heat_from_wave, scalar_kannai};
use transmute_core::LabError;

use super::{bump_sum, invalid, lab, max_rel, random_bumps, CaseOutput};
use crate::config::{CaseConfig, ConfigError, ExperimentConfig};
use crate::report::Gate;

pub const HEADER: &[&str] = &["case", "nodes", "check", "lambda", "t", "reference", "transmuted", "err", "quadrature_error"];

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Params {
    lambdas: Vec<f64>,
    scalar_times: Vec<f64>,
    operator_times: Vec<f64>,
    /// Zero-based eigenmodes summed into one data set.
    modes: Vec<usize>,
    /// Seeded smooth bump superpositions used as further data sets.
    random_samples: usize,
    abs_tol: f64,
    rel_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            lambdas: vec![1.0, 2.0, 5.0],
            scalar_times: vec![0.1, 1.0],
            operator_times: vec![0.1, 0.5, 1.0],
            modes: vec![0, 3],
            random_samples: 2,
            abs_tol: 1e-13,
            rel_tol: 1e-11,
        }
    }
}

pub fn validate(_cfg: &ExperimentConfig, case: &CaseConfig) -> Result<(), ConfigError> {
    let p: Params = case.params()?;
    let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0);
    if !positive(&p.lambdas) || !positive(&p.scalar_times) || !positive(&p.operator_times) {
        return Err(invalid(case, "λ and t values must be positive"));
    }
    if p.operator_times.is_empty() || (p.modes.is_empty() && p.random_samples == 0) {
        return Err(invalid(case, "operator check needs times and data"));
    }
    for nodes in case.resolutions() {
        let n = case.build_grid(nodes)?.interior_count();
        if p.modes.iter().any(|&m| m >= n) {
            return Err(invalid(case, "mode index exceeds the interior count"));
        }
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, case: &CaseConfig, out: &mut CaseOutput) -> Result<(), LabError> {
    let p: Params = case.params().map_err(lab)?;
    let q = QuadratureRule::adaptive(p.abs_tol, p.rel_tol);
    if !p.lambdas.is_empty() && !p.scalar_times.is_empty() {
        let mut worst: f64 = 0.0;
        for &lambda in &p.lambdas {
            for &t in &p.scalar_times {
                let k = scalar_kannai(lambda, t, &q)?;
                let err = (k.lhs - k.rhs).abs();
                worst = worst.max(err);
                out.rows.push(vec![
                    case.name.clone().into(),
                    0usize.into(),
                    "scalar".into(),
                    lambda.into(),
                    t.into(),
                    k.lhs.into(),
                    k.rhs.into(),
                    err.into(),
                    k.error.into(),
                ]);
            }
        }
        out.gates.push(Gate::at_most(&case.name, "scalar_abs", worst, cfg.tolerance("scalar_abs")));
    }
    let dim = case.dim();
    let lo = [case.grid.lower[0], *case.grid.lower.get(1).unwrap_or(&0.0)];
    let hi = [case.grid.upper[0], *case.grid.upper.get(1).unwrap_or(&0.0)];
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes).map_err(lab)?;
        let op = assemble(&grid, &case.metric_field(), &case.potential_field())?;
        let spec = eigendecompose(&op, op.size())?;
        let mut data: Vec<GridFunction> = Vec::new();
        if !p.modes.is_empty() {
            data.push(p.modes.iter().fold(GridFunction::zeros(&grid), |acc, &m| acc.axpy(1.0, &spec.mode_function(m))));
        }
        for s in 0..p.random_samples {
            data.push(bump_sum(&grid, &random_bumps(cfg.seed.wrapping_add(s as u64), 4, lo, hi, dim, (0.4, 0.9))));
        }
        let mut worst: f64 = 0.0;
        for f in &data {
            for &t in &p.operator_times {
                let k = kannai_heat_from_wave(&spec, f, t, &q)?;
                let h = heat_apply(&spec, t, f)?;
                let rel = max_rel(&h, &k.value);
                worst = worst.max(rel);
                out.rows.push(vec![
                    case.name.clone().into(),
                    nodes.into(),
                    "operator".into(),
                    f64::NAN.into(),
                    t.into(),
                    h.max_abs().into(),
                    k.value.max_abs().into(),
                    rel.into(),
                    k.error.into(),
                ]);
            }
        }
        out.gates.push(Gate::at_most(&case.name, &format!("operator_rel@{nodes}"), worst, cfg.tolerance("operator_rel")));
    }
    Ok(())
}
