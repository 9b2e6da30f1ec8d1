//! Discrete eigenvalues against the closed-form spectrum of a constant
//! coefficient operator on a box.

use serde::Deserialize;
use transmute_core::operator::{assemble, eigendecompose};
use transmute_core::LabError;

use super::{invalid, lab, CaseOutput};
use crate::config::{CaseConfig, ConfigError, ExperimentConfig};
use crate::plots::Plot;
use crate::report::Gate;

pub const HEADER: &[&str] = &["case", "nodes", "k", "eigenvalue", "exact", "rel_err"];

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Params {
    modes: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self { modes: 10 }
    }
}

pub fn validate(_cfg: &ExperimentConfig, case: &CaseConfig) -> Result<(), ConfigError> {
    let p: Params = case.params()?;
    if case.metric.constant_diagonal().is_none() || case.potential.constant_value().is_none() {
        return Err(invalid(case, "closed-form spectrum needs a constant diagonal metric and constant potential"));
    }
    for nodes in case.resolutions() {
        if p.modes == 0 || p.modes > case.build_grid(nodes)?.interior_count() {
            return Err(invalid(case, format!("modes = {} outside 1..=interior count", p.modes)));
        }
    }
    Ok(())
}

/// Lowest `count` values of `Σ g^{ii} (π m_i / L_i)² + c` over `m_i ≥ 1`.
pub fn exact_spectrum(case: &CaseConfig, count: usize) -> Vec<f64> {
    let dim = case.dim();
    let g = case.metric.constant_diagonal().expect("validated");
    let c = case.potential.constant_value().expect("validated");
    let freq: Vec<f64> = (0..dim).map(|k| std::f64::consts::PI / (case.grid.upper[k] - case.grid.lower[k])).collect();
    let mut out = Vec::new();
    match dim {
        1 => out.extend((1..=count).map(|m| (freq[0] * m as f64).powi(2) / g[0] + c)),
        _ => {
            for a in 1..=count {
                for b in 1..=count {
                    out.push((freq[0] * a as f64).powi(2) / g[0] + (freq[1] * b as f64).powi(2) / g[1] + c);
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.truncate(count);
    out
}

pub fn run(cfg: &ExperimentConfig, case: &CaseConfig, out: &mut CaseOutput) -> Result<(), LabError> {
    let p: Params = case.params().map_err(lab)?;
    let exact = exact_spectrum(case, p.modes);
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes).map_err(lab)?;
        let op = assemble(&grid, &case.metric_field(), &case.potential_field())?;
        let spec = eigendecompose(&op, p.modes)?;
        let mut worst: f64 = 0.0;
        let mut points = Vec::new();
        for (k, (&l, &e)) in spec.eigenvalues().iter().zip(&exact).enumerate() {
            let rel = (l - e).abs() / e.abs();
            worst = worst.max(rel);
            points.push(((k + 1) as f64, rel));
            out.rows.push(vec![case.name.clone().into(), nodes.into(), (k + 1).into(), l.into(), e.into(), rel.into()]);
        }
        out.gates.push(Gate::at_most(&case.name, &format!("eigenvalue_rel@{nodes}"), worst, cfg.tolerance("eigenvalue_rel")));
        out.plots.push(
            Plot::new(&format!("spectrum-{}-{nodes}", case.name), "eigenvalue relative error", "k", "relative error")
                .log_y()
                .series(&case.name, points),
        );
    }
    Ok(())
}
