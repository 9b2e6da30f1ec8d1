//! The acceptance battery: eleven embedded configs, twelve criteria, each
//! criterion reading the gates of exactly one experiment.

use std::path::Path;
use std::time::Instant;

use crate::config::{ConfigError, ExperimentConfig, ExperimentName};
use crate::experiments::{self, RunOptions};
use crate::report::{Gate, Report};

/// Embedded configs by file name.
pub const CONFIGS: &[(&str, &str)] = &[
    ("spectrum.json", include_str!("../../../configs/spectrum.json")),
    ("extension.json", include_str!("../../../configs/extension.json")),
    ("semigroup.json", include_str!("../../../configs/semigroup.json")),
    ("kannai.json", include_str!("../../../configs/kannai.json")),
    ("wkb.json", include_str!("../../../configs/wkb.json")),
    ("pairing.json", include_str!("../../../configs/pairing.json")),
    ("metric.json", include_str!("../../../configs/metric.json")),
    ("potential.json", include_str!("../../../configs/potential.json")),
    ("gauge.json", include_str!("../../../configs/gauge.json")),
    ("heat.json", include_str!("../../../configs/heat.json")),
    ("wave.json", include_str!("../../../configs/wave.json")),
];

pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    pub experiment: ExperimentName,
    /// Config file this criterion reads.
    pub config: &'static str,
    /// Gate-name prefixes that belong to this criterion; empty takes all.
    pub gates: &'static [&'static str],
    /// Wall-clock limit on the config run, in seconds.
    pub runtime_limit: Option<f64>,
}

pub const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        title: "spectrum oracle",
        experiment: ExperimentName::SpectrumCheck,
        config: "spectrum.json",
        gates: &[],
        runtime_limit: Some(5.0),
    },
    Criterion {
        id: 2,
        title: "extension identity and cylinder trace",
        experiment: ExperimentName::ExtensionCheck,
        config: "extension.json",
        gates: &[],
        runtime_limit: Some(60.0),
    },
    Criterion {
        id: 3,
        title: "semigroup integrals for P^(±1/2)",
        experiment: ExperimentName::SemigroupCheck,
        config: "semigroup.json",
        gates: &[],
        runtime_limit: None,
    },
    Criterion {
        id: 4,
        title: "scalar Kannai identity",
        experiment: ExperimentName::KannaiCheck,
        config: "kannai.json",
        gates: &["scalar_abs"],
        runtime_limit: None,
    },
    Criterion {
        id: 5,
        title: "operator Kannai identity",
        experiment: ExperimentName::KannaiCheck,
        config: "kannai.json",
        gates: &["operator_rel"],
        runtime_limit: None,
    },
    Criterion {
        id: 6,
        title: "WKB residual order and cascade closure",
        experiment: ExperimentName::WkbOrder,
        config: "wkb.json",
        gates: &[],
        runtime_limit: None,
    },
    Criterion {
        id: 7,
        title: "boundary pairing limit",
        experiment: ExperimentName::BoundaryRecover,
        config: "pairing.json",
        gates: &[],
        runtime_limit: None,
    },
    Criterion {
        id: 8,
        title: "metric recovery on Γ",
        experiment: ExperimentName::BoundaryRecover,
        config: "metric.json",
        gates: &[],
        runtime_limit: None,
    },
    Criterion {
        id: 9,
        title: "potential-difference limit",
        experiment: ExperimentName::PotentialRecover,
        config: "potential.json",
        gates: &[],
        runtime_limit: None,
    },
    Criterion {
        id: 10,
        title: "gauge invariance of the forward maps",
        experiment: ExperimentName::GaugeInvariance,
        config: "gauge.json",
        gates: &[],
        runtime_limit: None,
    },
    Criterion {
        id: 11,
        title: "heat-moment vanishing",
        experiment: ExperimentName::HeatMoments,
        config: "heat.json",
        gates: &[],
        runtime_limit: None,
    },
    Criterion {
        id: 12,
        title: "wave cross-validation",
        experiment: ExperimentName::WaveCheck,
        config: "wave.json",
        gates: &[],
        runtime_limit: None,
    },
];

/// Whole-suite wall-clock budget in seconds.
pub const SUITE_LIMIT: f64 = 600.0;

pub fn embedded(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let (_, text) = CONFIGS.iter().find(|(n, _)| *n == name).unwrap_or_else(|| panic!("no embedded config {name}"));
    ExperimentConfig::from_json(text)
}

pub struct ConfigRun {
    pub name: &'static str,
    pub report: Report,
    pub seconds: f64,
}

pub struct CriterionOutcome {
    pub id: usize,
    pub title: &'static str,
    pub gates: Vec<Gate>,
    pub seconds: f64,
    pub runtime_limit: Option<f64>,
}

impl CriterionOutcome {
    pub fn runtime_ok(&self) -> bool {
        self.runtime_limit.is_none_or(|l| self.seconds < l)
    }

    pub fn evaluated(&self) -> bool {
        !self.gates.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.evaluated() && self.gates.iter().all(|g| g.passed) && self.runtime_ok()
    }

    pub fn line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let failing: Vec<String> = self.gates.iter().filter(|g| !g.passed).map(Gate::describe).collect();
        let mut s =
            format!("criterion {:>2} {status}  {} ({} gates, {:.1} s", self.id, self.title, self.gates.len(), self.seconds);
        if let Some(l) = self.runtime_limit {
            s.push_str(&format!(", limit {l} s"));
        }
        s.push(')');
        if !failing.is_empty() {
            s.push_str(&format!("; failing: {}", failing.join("; ")));
        }
        s
    }
}

pub struct SuiteReport {
    pub runs: Vec<ConfigRun>,
    pub criteria: Vec<CriterionOutcome>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(CriterionOutcome::passed) && self.seconds < SUITE_LIMIT
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.criteria.iter().map(CriterionOutcome::line).collect();
        let status = if self.seconds < SUITE_LIMIT { "PASS" } else { "FAIL" };
        out.push(format!("suite runtime {status}  {:.1} s (limit {SUITE_LIMIT} s)", self.seconds));
        out
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        for run in &self.runs {
            run.report.write(&dir.join(run.name.trim_end_matches(".json")))?;
        }
        Ok(())
    }
}

/// Runs every embedded config once, sequentially, and grades the criteria.
pub fn run_suite(opts: RunOptions, mut progress: impl FnMut(&str)) -> Result<SuiteReport, ConfigError> {
    let start = Instant::now();
    let mut runs = Vec::with_capacity(CONFIGS.len());
    for &(name, _) in CONFIGS {
        let cfg = embedded(name)?;
        experiments::validate(&cfg)?;
        let t = Instant::now();
        let report = experiments::run(&cfg, opts);
        let seconds = t.elapsed().as_secs_f64();
        progress(&format!("{name}: {} gates, {seconds:.1} s", report.gates.len()));
        runs.push(ConfigRun { name, report, seconds });
    }
    let criteria = CRITERIA
        .iter()
        .map(|c| {
            let run = runs.iter().find(|r| r.name == c.config).expect("criterion config is embedded");
            assert_eq!(run.report.experiment, c.experiment.as_str(), "criterion {} reads the wrong experiment", c.id);
            let gates = run
                .report
                .gates
                .iter()
                .filter(|g| c.gates.is_empty() || g.name == "error" || c.gates.iter().any(|p| g.name.starts_with(p)))
                .cloned()
                .collect();
            CriterionOutcome { id: c.id, title: c.title, gates, seconds: run.seconds, runtime_limit: c.runtime_limit }
        })
        .collect();
    Ok(SuiteReport { runs, criteria, seconds: start.elapsed().as_secs_f64() })
}
