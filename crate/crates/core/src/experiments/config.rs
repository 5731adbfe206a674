use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SystemConfig, SystemParams};

use super::methods::MethodRegistry;

/// Which family of user layouts and methods a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// One antenna on one waveguide, users on a common line parallel to it.
    SinglePaLinear,
    SingleWaveguide,
    MultiWaveguide,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::SinglePaLinear => "single-pa-linear",
            Scenario::SingleWaveguide => "single-waveguide",
            Scenario::MultiWaveguide => "multi-waveguide",
        }
    }

    pub fn default_methods(self) -> &'static [&'static str] {
        match self {
            Scenario::SinglePaLinear => &["pass-single-pa", "fixed-center"],
            Scenario::SingleWaveguide => &["pass-single", "conventional", "analog"],
            Scenario::MultiWaveguide => &["pass-multi", "conventional", "massive", "hybrid"],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVar {
    /// Region length along the waveguides (m).
    Dx,
    /// Antennas per waveguide.
    N,
    /// Users.
    K,
    /// Transmit power (dBm).
    Pt,
    /// Grid points per waveguide.
    L,
    /// Outer-iteration cap of the joint optimizer.
    Iteration,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::Dx => "dx",
            SweepVar::N => "n",
            SweepVar::K => "k",
            SweepVar::Pt => "pt",
            SweepVar::L => "l",
            SweepVar::Iteration => "iteration",
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVar,
    pub values: Vec<f64>,
}

fn default_trials() -> usize {
    200
}

fn default_grid_points() -> usize {
    1000
}

fn default_max_iters() -> usize {
    50
}

/// One experiment, read from a single JSON document. Unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub sweep: Sweep,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub system: SystemConfig,
    /// Grid points per waveguide for the element-wise searches.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Outer-iteration cap of the joint optimizer.
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Method names; the scenario's defaults when absent.
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    /// Common y of the users in the linear scenario; `Dy/2` when absent.
    #[serde(default)]
    pub linear_y: Option<f64>,
    /// Record wall-clock times. Off by default so output bytes depend only
    /// on the configuration.
    #[serde(default)]
    pub timing: bool,
    /// Output directory; the CLI flag overrides it.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Everything one sweep point needs.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub params: SystemParams,
    pub grid_points: usize,
    pub max_iters: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn method_names(&self) -> Vec<String> {
        match &self.methods {
            Some(m) => m.clone(),
            None => self
                .scenario
                .default_methods()
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    /// System configuration with the scenario's array shape imposed.
    fn base_system(&self) -> SystemConfig {
        let mut sys = self.system.clone();
        match self.scenario {
            Scenario::SinglePaLinear => {
                sys.waveguides = 1;
                sys.pas_per_waveguide = 1;
            }
            Scenario::SingleWaveguide => sys.waveguides = 1,
            Scenario::MultiWaveguide => {}
        }
        sys
    }

    /// Resolves one sweep value into concrete parameters.
    pub fn point(&self, value: f64) -> Result<SweepPoint> {
        let var = self.sweep.variable;
        if !value.is_finite() {
            return Err(Error::Config(format!("sweep value {value} is not finite")));
        }
        let count = || -> Result<usize> {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!(
                    "sweep over `{var}` needs positive integers, got {value}"
                )));
            }
            Ok(value as usize)
        };
        let mut sys = self.base_system();
        let mut grid_points = self.grid_points;
        let mut max_iters = self.max_iters;
        match var {
            SweepVar::Dx => sys.dx = value,
            SweepVar::Pt => sys.pt_dbm = value,
            SweepVar::N => sys.pas_per_waveguide = count()?,
            SweepVar::K => sys.users = count()?,
            SweepVar::L => grid_points = count()?,
            SweepVar::Iteration => max_iters = count()?,
        }
        let params = SystemParams::derive(&sys).map_err(|e| Error::Config(format!("at {var} = {value}: {e}")))?;
        Ok(SweepPoint {
            value,
            params,
            grid_points,
            max_iters,
        })
    }

    /// Checks everything that can be checked without running a trial.
    pub fn validate(&self, registry: &MethodRegistry) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep values must be non-empty".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::Config("grid_points must be >= 2".into()));
        }
        let var = self.sweep.variable;
        match (self.scenario, var) {
            (Scenario::SinglePaLinear, SweepVar::N | SweepVar::L | SweepVar::Iteration) => {
                return Err(Error::Config(format!("sweep over `{var}` does not apply to {}", self.scenario)));
            }
            (Scenario::SingleWaveguide, SweepVar::Iteration) => {
                return Err(Error::Config(format!("sweep over `{var}` does not apply to {}", self.scenario)));
            }
            _ => {}
        }
        if self.scenario == Scenario::MultiWaveguide && self.system.waveguides < 2 {
            return Err(Error::Config("multi-waveguide scenario needs system.waveguides >= 2".into()));
        }
        if let Some(y) = self.linear_y {
            if !y.is_finite() {
                return Err(Error::Config("linear_y must be finite".into()));
            }
        }
        let names = self.method_names();
        if names.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        for name in &names {
            let method = registry.get(name).map_err(|e| Error::Config(e.to_string()))?;
            if !method.supports(self.scenario) {
                return Err(Error::Config(format!("method `{name}` does not support {}", self.scenario)));
            }
        }
        for &v in &self.sweep.values {
            self.point(v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> MethodRegistry {
        MethodRegistry::with_defaults()
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"scenario": "single-waveguide", "sweep": {"variable": "dx", "values": [10, 20]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.trials, 200);
        assert_eq!(cfg.grid_points, 1000);
        assert_eq!(cfg.method_names(), ["pass-single", "conventional", "analog"]);
        cfg.validate(&reg()).unwrap();
        let p = cfg.point(20.0).unwrap();
        assert_eq!(p.params.dx, 20.0);
        assert_eq!(p.params.waveguides, 1);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_json(
            r#"{"scenario": "single-waveguide", "sweep": {"variable": "dx", "values": [10]}, "trails": 3}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(ExperimentConfig::from_json(
            r#"{"scenario": "single-waveguide", "sweep": {"variable": "dx", "values": [10]}, "system": {"hieght": 3}}"#
        )
        .is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = |extra: &str| {
            ExperimentConfig::from_json(&format!(
                r#"{{"scenario": "single-waveguide", "sweep": {{"variable": "k", "values": [2, 4]}}{extra}}}"#
            ))
            .unwrap()
        };
        assert!(base(r#", "trials": 0"#).validate(&reg()).is_err());
        assert!(base(r#", "methods": ["pass-multi"]"#).validate(&reg()).is_err());
        assert!(base(r#", "methods": ["teleport"]"#).validate(&reg()).is_err());
        assert!(base(r#", "system": {"height": -1}"#).validate(&reg()).is_err());
        let frac = ExperimentConfig::from_json(
            r#"{"scenario": "single-waveguide", "sweep": {"variable": "n", "values": [2.5]}}"#,
        )
        .unwrap();
        assert!(frac.validate(&reg()).is_err());
        let empty = ExperimentConfig::from_json(
            r#"{"scenario": "single-waveguide", "sweep": {"variable": "n", "values": []}}"#,
        )
        .unwrap();
        assert!(empty.validate(&reg()).is_err());
        let multi = ExperimentConfig::from_json(
            r#"{"scenario": "multi-waveguide", "sweep": {"variable": "n", "values": [4]}}"#,
        )
        .unwrap();
        assert!(multi.validate(&reg()).is_err());
    }

    #[test]
    fn scenario_imposes_array_shape() {
        let cfg = ExperimentConfig::from_json(
            r#"{"scenario": "single-pa-linear", "sweep": {"variable": "pt", "values": [0, 10]},
                "system": {"waveguides": 3, "pas_per_waveguide": 5}}"#,
        )
        .unwrap();
        cfg.validate(&reg()).unwrap();
        let p = cfg.point(0.0).unwrap();
        assert_eq!((p.params.waveguides, p.params.pas_per_waveguide), (1, 1));
        assert!((p.params.pt - 1e-3).abs() < 1e-15);
    }
}
