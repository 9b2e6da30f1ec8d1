//! `T² = P` on random data, and the finite-difference cylinder trace against
//! the spectral ND map on `Γ`.

use serde::Deserialize;
use transmute_core::extension::{dn_operator, mask, nd_map, solve_cylinder_direct};
use transmute_core::geometry::GridFunction;
use transmute_core::operator::{assemble, eigendecompose};
use transmute_core::LabError;

use super::{bump_sum, invalid, lab, random_bumps, region_l2_rel, CaseOutput};
use crate::config::{CaseConfig, ConfigError, ExperimentConfig};
use crate::report::Gate;

pub const HEADER: &[&str] = &["case", "nodes", "check", "sample", "height", "height_nodes", "rel_err", "solver_residual"];

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Params {
    /// Random data sets for each check.
    samples: usize,
    bumps_per_sample: usize,
    height_nodes: usize,
    /// The cap height `Y` satisfies `e^{-sqrt(λ_1) Y} = decay`.
    decay: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self { samples: 3, bumps_per_sample: 4, height_nodes: 257, decay: 1e-8 }
    }
}

pub fn validate(_cfg: &ExperimentConfig, case: &CaseConfig) -> Result<(), ConfigError> {
    let p: Params = case.params()?;
    if p.samples == 0 || p.bumps_per_sample == 0 || p.height_nodes < 3 {
        return Err(invalid(case, "need samples, bumps and at least 3 height nodes"));
    }
    if !(p.decay > 0.0 && p.decay < 1e-6) {
        return Err(invalid(case, "decay must lie in (0, 1e-6)"));
    }
    for nodes in case.resolutions() {
        case.gamma_region(&case.build_grid(nodes)?)?;
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, case: &CaseConfig, out: &mut CaseOutput) -> Result<(), LabError> {
    let p: Params = case.params().map_err(lab)?;
    let (g, v) = (case.metric_field(), case.potential_field());
    let dim = case.dim();
    let lo = [case.grid.lower[0], *case.grid.lower.get(1).unwrap_or(&0.0)];
    let hi = [case.grid.upper[0], *case.grid.upper.get(1).unwrap_or(&0.0)];
    for nodes in case.resolutions() {
        let grid = case.build_grid(nodes).map_err(lab)?;
        let gamma = case.gamma_region(&grid).map_err(lab)?;
        let op = assemble(&grid, &g, &v)?;
        let spec = eigendecompose(&op, op.size())?;
        let mut worst_sq: f64 = 0.0;
        for s in 0..p.samples {
            let bumps = random_bumps(cfg.seed.wrapping_add(s as u64), p.bumps_per_sample, lo, hi, dim, (0.3, 0.8));
            let f = bump_sum(&grid, &bumps);
            let tt = dn_operator(&spec, &dn_operator(&spec, &f)?)?;
            let pf = GridFunction::from_interior(&grid, &op.apply_p(&f.interior(&grid)));
            let diff = tt.axpy(-1.0, &pf);
            let norm = |u: &GridFunction| u.0.iter().map(|x| x * x).sum::<f64>().sqrt();
            let rel = norm(&diff) / norm(&pf);
            worst_sq = worst_sq.max(rel);
            out.rows.push(vec![
                case.name.clone().into(),
                nodes.into(),
                "dn_squared".into(),
                s.into(),
                f64::NAN.into(),
                0usize.into(),
                rel.into(),
                f64::NAN.into(),
            ]);
        }
        out.gates.push(Gate::at_most(&case.name, &format!("dn_squared_rel@{nodes}"), worst_sq, cfg.tolerance("dn_squared_rel")));

        let lambda1 = spec.gap();
        let height = (1.0 / p.decay).ln() / lambda1.sqrt();
        let mut worst_cyl: f64 = 0.0;
        let (glo, ghi) = (gamma.lower(), gamma.upper());
        for s in 0..p.samples {
            let seed = cfg.seed.wrapping_add(1000 + s as u64);
            let width = (0..dim).map(|k| ghi[k] - glo[k]).fold(f64::INFINITY, f64::min);
            let bumps = random_bumps(seed, p.bumps_per_sample, glo, ghi, dim, (0.15 * width, 0.4 * width));
            let f = mask(&bump_sum(&grid, &bumps), &gamma);
            let nd = nd_map(&spec, &f, &gamma)?;
            let cyl = solve_cylinder_direct(&grid, &g, &v, &f, height, p.height_nodes, Some(lambda1))?;
            let trace = mask(&cyl.trace(), &gamma);
            let rel = region_l2_rel(&grid, &gamma, &nd, &trace);
            worst_cyl = worst_cyl.max(rel);
            out.rows.push(vec![
                case.name.clone().into(),
                nodes.into(),
                "cylinder_trace".into(),
                s.into(),
                height.into(),
                p.height_nodes.into(),
                rel.into(),
                cyl.residual.into(),
            ]);
        }
        out.gates.push(Gate::at_most(
            &case.name,
            &format!("cylinder_trace_rel@{nodes}"),
            worst_cyl,
            cfg.tolerance("cylinder_trace_rel"),
        ));
    }
    Ok(())
}
