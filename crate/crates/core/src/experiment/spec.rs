use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sim::SimulationConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Fig2aComponents,
    Table1Repair,
    AblationInterventionCost,
    AblationMergePairs,
    SamplingRatio,
    ProbEstimateGrid,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Fig2aComponents,
        Scenario::Table1Repair,
        Scenario::AblationInterventionCost,
        Scenario::AblationMergePairs,
        Scenario::SamplingRatio,
        Scenario::ProbEstimateGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig2aComponents => "fig2a_components",
            Scenario::Table1Repair => "table1_repair",
            Scenario::AblationInterventionCost => "ablation_intervention_cost",
            Scenario::AblationMergePairs => "ablation_merge_pairs",
            Scenario::SamplingRatio => "sampling_ratio",
            Scenario::ProbEstimateGrid => "prob_estimate_grid",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::Fig2aComponents => {
                "ranking quality of the plain click model versus click budget for K = 1..4 components"
            }
            Scenario::Table1Repair => {
                "no debias / click model / node intervention / node merging on a K = 2 dataset"
            }
            Scenario::AblationInterventionCost => {
                "node intervention with min-cost versus random-cost swap selection"
            }
            Scenario::AblationMergePairs => "node merging with fixed position pairs 1&4, 2&4, 3&4",
            Scenario::SamplingRatio => "connectivity of randomly subsampled logs per sampling ratio",
            Scenario::ProbEstimateGrid => {
                "Monte-Carlo connectivity frequency next to the closed-form estimate"
            }
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Grid axes for the connectivity-probability scenario; every combination
/// is one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbGrid {
    pub dsizes: Vec<usize>,
    pub xsizes: Vec<usize>,
    pub tsizes: Vec<usize>,
}

impl Default for ProbGrid {
    fn default() -> Self {
        ProbGrid {
            dsizes: vec![10, 20, 30, 50, 100, 200, 500, 1_000, 2_000],
            xsizes: vec![10, 100],
            tsizes: vec![20, 50],
        }
    }
}

impl ProbGrid {
    pub fn cells(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for &x in &self.xsizes {
            for &t in &self.tsizes {
                for &d in &self.dsizes {
                    out.push((d, x, t));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub repeats: usize,
    pub seed: u64,
    /// Total click budgets; the scenario default when empty.
    pub budgets: Vec<u64>,
    /// Component counts swept by `fig2a_components`.
    pub components: Vec<usize>,
    pub simulation: SimulationConfig,
    pub train: TrainConfig,
    /// Bias-id pairs merged by `ablation_merge_pairs`.
    pub merge_pairs: Vec<(String, String)>,
    /// Sampling ratios for `sampling_ratio`.
    pub ratios: Vec<f64>,
    /// Monte-Carlo trials per ratio or grid cell.
    pub trials: usize,
    /// Click log subsampled by `sampling_ratio`; a simulated log otherwise.
    pub dataset: Option<PathBuf>,
    pub grid: ProbGrid,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec::preset(Scenario::Table1Repair)
    }
}

/// Simulation defaults sized for a single machine: a small document
/// collection so a million clicks cover every displayed pair many times.
pub fn desk_simulation(components: usize) -> SimulationConfig {
    SimulationConfig {
        n_documents: 100,
        n_queries: 1_150,
        target_components: components,
        ..SimulationConfig::default()
    }
}

const SWEEP_BUDGETS: [u64; 5] = [100_000, 300_000, 1_000_000, 3_000_000, 10_000_000];

impl ExperimentSpec {
    pub fn preset(scenario: Scenario) -> Self {
        let budgets = match scenario {
            Scenario::Table1Repair => vec![1_000_000],
            Scenario::Fig2aComponents
            | Scenario::AblationInterventionCost
            | Scenario::AblationMergePairs => SWEEP_BUDGETS.to_vec(),
            Scenario::SamplingRatio => vec![1_000_000],
            Scenario::ProbEstimateGrid => Vec::new(),
        };
        let k = match scenario {
            Scenario::SamplingRatio => 1,
            _ => 2,
        };
        ExperimentSpec {
            scenario,
            repeats: 10,
            seed: 0,
            budgets,
            components: vec![1, 2, 3, 4],
            simulation: desk_simulation(k),
            train: TrainConfig::default(),
            merge_pairs: vec![
                ("p1".into(), "p4".into()),
                ("p2".into(), "p4".into()),
                ("p3".into(), "p4".into()),
            ],
            ratios: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            trials: match scenario {
                Scenario::ProbEstimateGrid => 2_000,
                _ => 20,
            },
            dataset: None,
            grid: ProbGrid::default(),
            output_dir: None,
        }
    }

    /// Parses a TOML spec. Keys left out take the preset of the named
    /// scenario.
    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let scenario: Scenario = match value.get("scenario") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(Error::Config("`scenario` must be a string".into())),
            None => return Err(Error::Config("missing `scenario`".into())),
        };
        let mut merged = toml::Table::try_from(Self::preset(scenario))
            .map_err(|e| Error::Serialize(e.to_string()))?;
        merge_tables(&mut merged, value);
        let spec: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.train.max_steps == 0 {
            return Err(Error::Config("train.max_steps must be at least 1".into()));
        }
        if self.budgets.contains(&0) {
            return Err(Error::Config("click budgets must be positive".into()));
        }
        match self.scenario {
            Scenario::SamplingRatio | Scenario::ProbEstimateGrid => {
                if self.trials == 0 {
                    return Err(Error::Config("trials must be at least 1".into()));
                }
            }
            _ => {
                if self.budgets.is_empty() {
                    return Err(Error::Config("at least one click budget is required".into()));
                }
            }
        }
        if let Some(r) = self.ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::OutOfRange {
                name: "ratio",
                value: *r,
                range: "(0, 1]",
            });
        }
        if self.scenario == Scenario::Fig2aComponents {
            for &k in &self.components {
                let mut sim = self.simulation.clone();
                sim.target_components = k;
                sim.component_blocks = None;
                sim.validate()?;
            }
        } else if self.scenario != Scenario::ProbEstimateGrid {
            self.simulation.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the spec, hex encoded.
    pub fn config_hash(&self) -> String {
        let mut spec = self.clone();
        spec.output_dir = None;
        let json = serde_json::to_string(&spec).expect("spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }
}

fn merge_tables(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
