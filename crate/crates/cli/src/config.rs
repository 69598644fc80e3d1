//! JSON experiment configuration.
//!
//! Every key is optional except where a runner needs it; missing values fall
//! back to the defaults of the chosen experiment. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ftrl_core::engine::ScheduleKind;
use ftrl_core::environments::SemiAdvVariant;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Quantile,
    Semiadv,
    Lowerbound,
    Custom,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Quantile => "quantile",
            ExperimentKind::Semiadv => "semiadv",
            ExperimentKind::Lowerbound => "lowerbound",
            ExperimentKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    /// Root-log FTRL with a uniform prior.
    Abnormal,
    /// Shannon FTRL (Hedge) with a uniform prior.
    Hedge,
    /// χ² FTRL with a uniform prior.
    ChiSquared,
    /// FTRL-CARL with the counting measure.
    Carl,
    Normalhedge,
}

impl AlgorithmName {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmName::Abnormal => "abnormal",
            AlgorithmName::Hedge => "hedge",
            AlgorithmName::ChiSquared => "chi_squared",
            AlgorithmName::Carl => "carl",
            AlgorithmName::Normalhedge => "normalhedge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub name: AlgorithmName,
    /// Name used in output files; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Learning-rate schedule; ignored by NormalHedge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleKind>,
}

impl AlgorithmSpec {
    pub fn new(name: AlgorithmName) -> Self {
        Self {
            name,
            label: None,
            schedule: None,
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.name.as_str().to_owned())
    }
}

/// Comparator for the `custom` experiment's regret columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ComparatorSpec {
    /// The best expert by final cumulative loss.
    Best,
    /// A fixed expert (0-based index).
    Expert(usize),
    /// The `i`-th best expert by final cumulative loss (1-based).
    Quantile(usize),
    /// Uniform over the `i` best experts by final cumulative loss.
    UniformTop(usize),
    /// A fixed distribution over experts.
    Distribution(Vec<f64>),
}

impl ComparatorSpec {
    pub fn column_name(&self) -> String {
        match self {
            ComparatorSpec::Best => "regret_best".into(),
            ComparatorSpec::Expert(i) => format!("regret_expert_{i}"),
            ComparatorSpec::Quantile(i) => format!("regret_quantile_{i}"),
            ComparatorSpec::UniformTop(i) => format!("regret_uniform_top_{i}"),
            ComparatorSpec::Distribution(_) => "regret_distribution".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    /// Hadamard: number of shifted rows `K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub good_rows: Option<usize>,
    /// Hadamard: replication factors `r`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<Vec<usize>>,
    /// Number of experts (semiadv, lowerbound).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experts: Option<usize>,
    /// Horizon `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variants: Option<Vec<SemiAdvVariant>>,
    /// Rounds at which regret is reported (semiadv, lowerbound).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    /// Lower bound: comparator rank `i_ε`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_eps: Option<usize>,
    /// Lower bound: Monte-Carlo repetitions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    /// Lower bound: Bernoulli parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Custom: CSV file of losses, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Custom: clip out-of-range losses instead of rejecting them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lenient: Option<bool>,
    /// Custom: write the played weights every this many rounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    /// Empty means the experiment's default algorithm set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparators: Vec<ComparatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Residual tolerance of the normalization solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Write SVG charts next to the CSV files.
    #[serde(default = "yes")]
    pub plots: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind: Some(kind),
            algorithms: Vec::new(),
            environment: EnvironmentConfig::default(),
            comparators: Vec::new(),
            out_dir: None,
            seed: 0,
            solver_tolerance: None,
            threads: None,
            plots: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// Reads a config file; a relative CSV `path` is resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let (Some(csv), Some(dir)) = (&cfg.environment.path, path.parent()) {
            if csv.is_relative() {
                cfg.environment.path = Some(dir.join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks the declared kind against the one being run.
    pub fn check_kind(&self, kind: ExperimentKind) -> Result<(), CliError> {
        match self.kind {
            Some(k) if k != kind => Err(CliError::Config(format!(
                "config is for `{}` but `{}` was requested",
                k.as_str(),
                kind.as_str()
            ))),
            _ => Ok(()),
        }
    }

    pub fn algorithms_or(&self, defaults: &[AlgorithmName]) -> Vec<AlgorithmSpec> {
        if self.algorithms.is_empty() {
            defaults.iter().map(|&n| AlgorithmSpec::new(n)).collect()
        } else {
            self.algorithms.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_full() {
        let cfg = ExperimentConfig::from_json(r#"{"kind": "semiadv"}"#).unwrap();
        assert_eq!(cfg.kind, Some(ExperimentKind::Semiadv));
        assert!(cfg.plots);

        let text = r#"{
            "kind": "quantile",
            "algorithms": [
                {"name": "abnormal"},
                {"name": "hedge", "label": "hedge-2", "schedule": {"kind": "hedge_default", "multiplier": 2.0}},
                {"name": "chi_squared", "schedule": {"kind": "variance_adaptive", "c": 0.5, "mode": "prior"}},
                {"name": "normalhedge"}
            ],
            "environment": {"good_rows": 10, "replications": [1, 2], "rounds": 128},
            "comparators": ["best", {"quantile": 3}, {"distribution": [0.5, 0.5]}],
            "seed": 7,
            "solver_tolerance": 1e-12,
            "plots": false
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.algorithms[1].label(), "hedge-2");
        assert_eq!(cfg.algorithms[3].label(), "normalhedge");
        assert_eq!(cfg.comparators[1], ComparatorSpec::Quantile(3));
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys() {
        for text in [
            r#"{"kind": "quantile", "bogus": 1}"#,
            r#"{"environment": {"K": 3}}"#,
            r#"{"algorithms": [{"name": "hedge", "eta": 1}]}"#,
            r#"{"algorithms": [{"name": "hedge", "schedule": {"kind": "carl_default", "c": 1}}]}"#,
            r#"{"algorithms": [{"name": "squint"}]}"#,
        ] {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn kind_mismatch() {
        let cfg = ExperimentConfig::new(ExperimentKind::Quantile);
        assert!(cfg.check_kind(ExperimentKind::Quantile).is_ok());
        assert!(cfg.check_kind(ExperimentKind::Custom).is_err());
    }
}
