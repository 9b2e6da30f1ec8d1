//! Named experiments. Each validates its parameters up front and then runs
//! case by case; a numerical error fails the case's gates but never stops the
//! report from being written.

mod boundary;
mod extension;
mod gauge;
mod heat;
mod kannai;
mod potential;
mod semigroup;
mod spectrum;
mod wave;
mod wkb;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use transmute_core::geometry::{Bump, Grid, GridFunction, Region};
use transmute_core::LabError;

use crate::config::{CaseConfig, ConfigError, ExperimentConfig, ExperimentName};
use crate::plots::Plot;
use crate::report::{Cell, Gate, Report, Table, Traces};

/// What one case contributes to the report.
#[derive(Default)]
pub struct CaseOutput {
    pub rows: Vec<Vec<Cell>>,
    pub gates: Vec<Gate>,
    pub traces: Traces,
    pub plots: Vec<Plot>,
    pub notes: Vec<String>,
}

type Runner = fn(&ExperimentConfig, &CaseConfig, &mut CaseOutput) -> Result<(), LabError>;
type Validator = fn(&ExperimentConfig, &CaseConfig) -> Result<(), ConfigError>;

struct Spec {
    header: &'static [&'static str],
    validate: Validator,
    run: Runner,
}

fn spec(name: ExperimentName) -> Spec {
    use ExperimentName::*;
    match name {
        SpectrumCheck => Spec { header: spectrum::HEADER, validate: spectrum::validate, run: spectrum::run },
        ExtensionCheck => Spec { header: extension::HEADER, validate: extension::validate, run: extension::run },
        SemigroupCheck => Spec { header: semigroup::HEADER, validate: semigroup::validate, run: semigroup::run },
        KannaiCheck => Spec { header: kannai::HEADER, validate: kannai::validate, run: kannai::run },
        WkbOrder => Spec { header: wkb::HEADER, validate: wkb::validate, run: wkb::run },
        BoundaryRecover => Spec { header: boundary::HEADER, validate: boundary::validate, run: boundary::run },
        PotentialRecover => Spec { header: potential::HEADER, validate: potential::validate, run: potential::run },
        GaugeInvariance => Spec { header: gauge::HEADER, validate: gauge::validate, run: gauge::run },
        WaveCheck => Spec { header: wave::HEADER, validate: wave::validate, run: wave::run },
        HeatMoments => Spec { header: heat::HEADER, validate: heat::validate, run: heat::run },
    }
}

/// Full validation: structure, tolerances, experiment parameters and the
/// aliasing guard. Runs no numerics.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    cfg.validate_common()?;
    let s = spec(cfg.experiment);
    for case in &cfg.cases {
        (s.validate)(cfg, case)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Run cases in parallel on the current rayon pool.
    pub parallel: bool,
}

/// Runs a validated config. Cases are independent and may run in parallel;
/// their outputs are merged in config order, so reports do not depend on
/// scheduling.
pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Report {
    let s = spec(cfg.experiment);
    let one = |case: &CaseConfig| {
        let mut out = CaseOutput::default();
        if let Err(e) = (s.run)(cfg, case, &mut out) {
            out.gates.push(Gate::failed(&case.name, "error", e.to_string()));
        }
        out
    };
    let outputs: Vec<CaseOutput> =
        if opts.parallel { cfg.cases.par_iter().map(one).collect() } else { cfg.cases.iter().map(one).collect() };
    let mut report =
        Report { experiment: cfg.experiment.as_str().to_string(), results: Table::new(s.header), ..Default::default() };
    for out in outputs {
        for row in out.rows {
            report.results.push(row);
        }
        report.gates.extend(out.gates);
        report.traces.extend(out.traces);
        report.plots.extend(out.plots);
        report.notes.extend(out.notes);
    }
    report
}

pub(crate) fn invalid(case: &CaseConfig, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { case: case.name.clone(), message: message.into() }
}

pub(crate) fn lab(e: ConfigError) -> LabError {
    LabError::Precondition(e.to_string())
}

/// Seeded smooth test data: a superposition of `count` bumps with centers in
/// `[lo + r, hi - r]` so that the support stays inside the box.
pub(crate) fn random_bumps(seed: u64, count: usize, lo: [f64; 2], hi: [f64; 2], dim: usize, radius: (f64, f64)) -> Vec<Bump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = rng.gen_range(radius.0..=radius.1);
            let mut c = [0.0; 2];
            for k in 0..dim {
                let (a, b) = (lo[k] + r, hi[k] - r);
                c[k] = if a < b { rng.gen_range(a..b) } else { 0.5 * (lo[k] + hi[k]) };
            }
            let amp = rng.gen_range(-1.0..1.0);
            Bump::new(c, r.min(0.5 * (hi[0] - lo[0])), amp)
        })
        .collect()
}

pub(crate) fn bump_sum(grid: &Grid, bumps: &[Bump]) -> GridFunction {
    let dim = grid.dim();
    GridFunction::from_fn_interior(grid, |x| bumps.iter().map(|b| b.eval(x, dim)).sum())
}

/// Discrete `L²` norm over a set of nodes.
pub(crate) fn l2(grid: &Grid, nodes: &[usize], u: &GridFunction) -> f64 {
    let w = grid.weights();
    nodes.iter().map(|&p| w[p] * u.0[p] * u.0[p]).sum::<f64>().sqrt()
}

pub(crate) fn region_l2_rel(grid: &Grid, region: &Region, reference: &GridFunction, other: &GridFunction) -> f64 {
    let diff = reference.axpy(-1.0, other);
    let scale = l2(grid, region.members(), reference);
    let d = l2(grid, region.members(), &diff);
    if scale == 0.0 {
        d
    } else {
        d / scale
    }
}

pub(crate) fn max_rel(reference: &GridFunction, other: &GridFunction) -> f64 {
    let scale = reference.max_abs();
    let d = reference.axpy(-1.0, other).max_abs();
    if scale == 0.0 {
        d
    } else {
        d / scale
    }
}

/// Observed convergence order between two resolutions whose spacings differ
/// by `ratio`.
pub(crate) fn observed_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}
