//! Experiment configuration: one JSON document per run, validated in full
//! before any numerics start.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use transmute_core::boundary::{aliasing_product, ALIASING_LIMIT};
use transmute_core::geometry::{build_grid, Bump, Diffeomorphism, DomainSpec, Grid, MetricField, PotentialField, Region};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("case `{case}`: {message}")]
    Invalid { case: String, message: String },
    #[error("case `{case}`: aliasing guard violated, N |ξ| h = {product:.4} > π/4 at N = {n} on {nodes} nodes per axis")]
    Aliasing { case: String, n: f64, nodes: usize, product: f64 },
}

fn invalid(case: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { case: case.to_string(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    SpectrumCheck,
    ExtensionCheck,
    SemigroupCheck,
    KannaiCheck,
    WkbOrder,
    BoundaryRecover,
    PotentialRecover,
    GaugeInvariance,
    WaveCheck,
    HeatMoments,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 10] = [
        Self::SpectrumCheck,
        Self::ExtensionCheck,
        Self::SemigroupCheck,
        Self::KannaiCheck,
        Self::WkbOrder,
        Self::BoundaryRecover,
        Self::PotentialRecover,
        Self::GaugeInvariance,
        Self::WaveCheck,
        Self::HeatMoments,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SpectrumCheck => "spectrum-check",
            Self::ExtensionCheck => "extension-check",
            Self::SemigroupCheck => "semigroup-check",
            Self::KannaiCheck => "kannai-check",
            Self::WkbOrder => "wkb-order",
            Self::BoundaryRecover => "boundary-recover",
            Self::PotentialRecover => "potential-recover",
            Self::GaugeInvariance => "gauge-invariance",
            Self::WaveCheck => "wave-check",
            Self::HeatMoments => "heat-moments",
        }
    }

    /// Tolerances every config of this experiment must provide (defaults
    /// apply when omitted).
    pub fn default_tolerances(&self) -> &'static [(&'static str, f64)] {
        match self {
            Self::SpectrumCheck => &[("eigenvalue_rel", 5e-3)],
            Self::ExtensionCheck => &[("dn_squared_rel", 1e-10), ("cylinder_trace_rel", 2e-2)],
            Self::SemigroupCheck => &[("power_rel", 1e-6)],
            Self::KannaiCheck => &[("scalar_abs", 1e-8), ("operator_rel", 1e-4)],
            Self::WkbOrder => &[("slope_min", -1.3), ("slope_max", -0.7), ("closure_abs", 1e-12)],
            Self::BoundaryRecover => &[("limit_rel", 5e-2), ("imaginary_rel", 1e-2), ("metric_rel", 1e-1)],
            Self::PotentialRecover => &[("difference_rel", 1e-1), ("zero_rel", 1e-3)],
            Self::GaugeInvariance => &[("order_min", 1.5), ("identity_abs", 1e-12)],
            Self::WaveCheck => &[("leapfrog_rel", 1e-3), ("spectral_drift", 1e-8), ("leapfrog_drift", 1e-6)],
            Self::HeatMoments => &[("control_factor", 10.0)],
        }
    }
}

impl std::fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    #[serde(default)]
    pub description: String,
    pub cases: Vec<CaseConfig>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Nodes per axis; refinement experiments override this with `resolutions`.
    pub nodes: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl BumpConfig {
    pub fn bump(&self) -> Bump {
        Bump::new(self.center, self.radius, self.amplitude)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum MetricPreset {
    #[default]
    Identity,
    ConstantDiagonal {
        scale: [f64; 2],
    },
    DiagonalPoly {
        scale: [f64; 2],
        curvature: f64,
        center: [f64; 2],
    },
    OffdiagBump {
        base: [f64; 2],
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
}

impl MetricPreset {
    pub fn field(&self, dim: usize) -> MetricField {
        match *self {
            Self::Identity => MetricField::identity(dim),
            Self::ConstantDiagonal { scale } => MetricField::constant_diagonal(dim, scale),
            Self::DiagonalPoly { scale, curvature, center } => MetricField::diagonal_poly(dim, scale, curvature, center),
            Self::OffdiagBump { base, amplitude, center, width } => MetricField::offdiag_bump(base, amplitude, center, width),
        }
    }

    /// Constant diagonal entries `g_ii`, if the field has them.
    pub fn constant_diagonal(&self) -> Option<[f64; 2]> {
        match *self {
            Self::Identity => Some([1.0, 1.0]),
            Self::ConstantDiagonal { scale } => Some(scale),
            Self::DiagonalPoly { scale, curvature: 0.0, .. } => Some(scale),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum PotentialPreset {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
    Affine {
        offset: f64,
        slope: [f64; 2],
    },
    Bump {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
    Sum {
        terms: Vec<PotentialPreset>,
    },
}

impl PotentialPreset {
    pub fn field(&self, dim: usize) -> PotentialField {
        match self {
            Self::Zero => PotentialField::zero(dim),
            Self::Constant { value } => PotentialField::constant(dim, *value),
            Self::Gaussian { amplitude, center, width } => PotentialField::gaussian(dim, *amplitude, *center, *width),
            Self::Affine { offset, slope } => PotentialField::affine(dim, *offset, *slope),
            Self::Bump { center, radius, amplitude } => PotentialField::bump(dim, Bump::new(*center, *radius, *amplitude)),
            Self::Sum { terms } => terms.iter().fold(PotentialField::zero(dim), |acc, t| acc.plus(&t.field(dim))),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Self::Zero => Some(0.0),
            Self::Constant { value } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiffeoPreset {
    Identity,
    BumpShift { center: [f64; 2], radius: f64, shift: [f64; 2] },
}

impl DiffeoPreset {
    pub fn map(&self, dim: usize) -> Diffeomorphism {
        match *self {
            Self::Identity => Diffeomorphism::identity(dim),
            Self::BumpShift { center, radius, shift } => Diffeomorphism::bump_shift(dim, center, radius, shift),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Self::Identity)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub centers: Vec<[f64; 2]>,
    pub width: f64,
    #[serde(default)]
    pub xi: Vec<[f64; 2]>,
    pub n_list: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    pub grid: GridConfig,
    /// Nodes per axis for refinement studies, coarse to fine.
    #[serde(default)]
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub metric: MetricPreset,
    #[serde(default)]
    pub potential: PotentialPreset,
    /// Second potential: the other map of a difference, or a control run.
    #[serde(default)]
    pub alternate_potential: Option<PotentialPreset>,
    #[serde(default)]
    pub gamma: Option<BoxConfig>,
    #[serde(default)]
    pub probe: Option<ProbeConfig>,
    #[serde(default)]
    pub diffeo: Option<DiffeoPreset>,
    /// Experiment-specific parameters, checked against the experiment's schema.
    #[serde(default)]
    pub params: serde_json::Value,
}

impl CaseConfig {
    pub fn dim(&self) -> usize {
        self.grid.lower.len()
    }

    pub fn resolutions(&self) -> Vec<usize> {
        if self.resolutions.is_empty() {
            vec![self.grid.nodes]
        } else {
            self.resolutions.clone()
        }
    }

    pub fn build_grid(&self, nodes: usize) -> Result<Grid, ConfigError> {
        let domain = match self.dim() {
            1 => DomainSpec::interval(self.grid.lower[0], self.grid.upper[0]),
            _ => DomainSpec::rectangle([self.grid.lower[0], self.grid.lower[1]], [self.grid.upper[0], self.grid.upper[1]]),
        };
        build_grid(&domain, &vec![nodes; self.dim()]).map_err(|e| invalid(&self.name, e.to_string()))
    }

    pub fn metric_field(&self) -> MetricField {
        self.metric.field(self.dim())
    }

    pub fn potential_field(&self) -> PotentialField {
        self.potential.field(self.dim())
    }

    pub fn gamma_region(&self, grid: &Grid) -> Result<Region, ConfigError> {
        let b = self.gamma.ok_or_else(|| invalid(&self.name, "missing `gamma`"))?;
        region(grid, &b, self.dim()).map_err(|e| invalid(&self.name, e))
    }

    pub fn probe(&self) -> Result<&ProbeConfig, ConfigError> {
        self.probe.as_ref().ok_or_else(|| invalid(&self.name, "missing `probe`"))
    }

    pub fn diffeo(&self) -> Result<&DiffeoPreset, ConfigError> {
        self.diffeo.as_ref().ok_or_else(|| invalid(&self.name, "missing `diffeo`"))
    }

    pub fn alternate_potential(&self) -> Result<PotentialField, ConfigError> {
        self.alternate_potential
            .as_ref()
            .map(|p| p.field(self.dim()))
            .ok_or_else(|| invalid(&self.name, "missing `alternate_potential`"))
    }

    /// Parses `params` into the experiment's typed parameter block.
    pub fn params<T: serde::de::DeserializeOwned + Default>(&self) -> Result<T, ConfigError> {
        if self.params.is_null() {
            return Ok(T::default());
        }
        serde_json::from_value(self.params.clone()).map_err(|e| invalid(&self.name, format!("params: {e}")))
    }
}

pub fn region(grid: &Grid, b: &BoxConfig, dim: usize) -> Result<Region, String> {
    Region::from_box(grid, &b.lower[..dim], &b.upper[..dim]).map_err(|e| e.to_string())
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn tolerance(&self, key: &str) -> f64 {
        self.tolerances.get(key).copied().unwrap_or_else(|| {
            self.experiment
                .default_tolerances()
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .unwrap_or_else(|| panic!("no tolerance `{key}` for {}", self.experiment))
        })
    }

    /// Structural checks shared by all experiments; experiment-specific
    /// parameter checks live with the experiments.
    pub fn validate_common(&self) -> Result<(), ConfigError> {
        let top = "<config>";
        if self.cases.is_empty() {
            return Err(invalid(top, "no cases"));
        }
        let known = self.experiment.default_tolerances();
        for (k, v) in &self.tolerances {
            if !known.iter().any(|(n, _)| n == k) {
                return Err(invalid(top, format!("unknown tolerance `{k}` for {}", self.experiment)));
            }
            // slope bounds are signed; everything else is a positive threshold
            if !v.is_finite() || (!k.starts_with("slope_") && *v <= 0.0) {
                return Err(invalid(top, format!("tolerance `{k}` must be positive, got {v}")));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for case in &self.cases {
            if !names.insert(case.name.as_str()) {
                return Err(invalid(&case.name, "duplicate case name"));
            }
            let dim = case.dim();
            if !(dim == 1 || dim == 2) || case.grid.upper.len() != dim {
                return Err(invalid(&case.name, "grid must be 1D or 2D with matching bounds"));
            }
            if case.grid.lower.iter().zip(&case.grid.upper).any(|(a, b)| !(a < b)) {
                return Err(invalid(&case.name, "grid bounds must satisfy lower < upper"));
            }
            if case.resolutions.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(&case.name, "resolutions must increase"));
            }
            for nodes in case.resolutions() {
                case.build_grid(nodes)?;
            }
            if dim == 1 && matches!(case.metric, MetricPreset::OffdiagBump { .. }) {
                return Err(invalid(&case.name, "off-diagonal metric needs a 2D grid"));
            }
            if let Some(p) = &case.probe {
                if p.width <= 0.0 || p.centers.is_empty() || p.n_list.is_empty() {
                    return Err(invalid(&case.name, "probe needs centers, a positive width and an N list"));
                }
                if p.n_list.iter().any(|n| !(*n > 0.0)) || p.n_list.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid(&case.name, "probe N list must be positive and increasing"));
                }
            }
        }
        Ok(())
    }

    /// `N |ξ| h ≤ π/4` for every probe direction, N and resolution.
    pub fn check_aliasing(&self, case: &CaseConfig, directions: &[[f64; 2]]) -> Result<(), ConfigError> {
        let probe = case.probe()?;
        for nodes in case.resolutions() {
            let grid = case.build_grid(nodes)?;
            for &xi in directions {
                for &n in &probe.n_list {
                    let product = aliasing_product(&grid, xi, n);
                    if product > ALIASING_LIMIT * (1.0 + 1e-12) {
                        return Err(ConfigError::Aliasing { case: case.name.clone(), n, nodes, product });
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        let text = r#"{
            "experiment": "spectrum-check",
            "cases": [{"name": "a", "grid": {"lower": [0], "upper": [3.14], "nodes": 65},
                       "metric": {"preset": "diagonal-poly", "scale": [1, 1], "curvature": 0.3, "center": [1, 0]},
                       "potential": {"preset": "sum", "terms": [{"preset": "constant", "value": 1}]}}]
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.experiment, ExperimentName::SpectrumCheck);
        cfg.validate_common().unwrap();
        assert_eq!(cfg.tolerance("eigenvalue_rel"), 5e-3);
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"experiment": "spectrum-check", "cases": [], "bogus": 1}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
        let text = r#"{"experiment": "no-such", "cases": []}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn bad_tolerance_rejected() {
        let text = r#"{"experiment": "spectrum-check", "tolerances": {"eigenvalue_rel": -1},
            "cases": [{"name": "a", "grid": {"lower": [0], "upper": [1], "nodes": 33}}]}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert!(cfg.validate_common().is_err());
    }
}
