use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, subsample, Dataset};
use crate::error::{Error, Result};
use crate::experiment::spec::{ExperimentSpec, Scenario};
use crate::graph::is_identifiable;
use crate::metrics::{evaluate, EvalReport, NDCG_CUTOFFS};
use crate::repair::{
    apply_merge, derive_guesses, plan_intervention, plan_merge, CostStrategy, MergePlan,
};
use crate::seed;
use crate::sim::{apply_intervention, generate_synthetic, sample_clicks, GroundTruth, SimulationConfig};
use crate::theory::{connected_frequency, identifiability_probability};
use crate::train::{fit, ModelParams, TrainConfig};

pub const NO_DEBIAS: &str = "No debias";
pub const EXAMINATION: &str = "Examination hypothesis";
pub const INTERVENTION: &str = "+ Node intervention";
pub const MERGING: &str = "+ Node merging";
pub const MIN_COST: &str = "min cost";
pub const RANDOM_COST: &str = "random cost";

const TAG_DATA: u64 = 11;
const TAG_CLICKS: u64 = 12;
const TAG_REPEAT: u64 = 13;
const TAG_PLAN: u64 = 1;
const TAG_SWAP: u64 = 2;
const TAG_SUBSAMPLE: u64 = 14;
const TAG_GRID: u64 = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

/// Mean or standard deviation of every metric.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mcc: f64,
    pub ndcg: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub condition: String,
    pub components: usize,
    pub budget: u64,
    pub repeats: Vec<RepeatResult>,
    pub mean: MetricStats,
    /// Population standard deviation over successful repeats.
    pub std: MetricStats,
}

impl CellResult {
    fn new(condition: &str, components: usize, budget: u64, repeats: Vec<RepeatResult>) -> Self {
        let reports: Vec<&EvalReport> = repeats.iter().filter_map(|r| r.report.as_ref()).collect();
        let (mean_mcc, std_mcc) = mean_std(reports.iter().map(|r| r.mcc));
        let mut mean = MetricStats {
            mcc: mean_mcc,
            ndcg: BTreeMap::new(),
        };
        let mut std = MetricStats {
            mcc: std_mcc,
            ndcg: BTreeMap::new(),
        };
        for k in NDCG_CUTOFFS {
            let (m, s) = mean_std(reports.iter().map(|r| r.ndcg[&k]));
            mean.ndcg.insert(k, m);
            std.ndcg.insert(k, s);
        }
        CellResult {
            condition: condition.to_string(),
            components,
            budget,
            repeats,
            mean,
            std,
        }
    }

    pub fn failures(&self) -> usize {
        self.repeats.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Mean and population standard deviation; NaN for no values.
pub fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub dsize: usize,
    pub xsize: usize,
    pub tsize: usize,
    pub trials: usize,
    pub frequency: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub ratio: f64,
    pub trials: usize,
    pub frequency: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: Scenario,
    pub config_hash: String,
    pub seed: u64,
    pub cells: Vec<CellResult>,
    pub grid: Vec<GridRow>,
    pub ratios: Vec<RatioRow>,
}

impl RunResult {
    pub fn failures(&self) -> usize {
        self.cells.iter().map(CellResult::failures).sum()
    }

    /// Cell for a condition, component count and budget.
    pub fn cell(&self, condition: &str, components: usize, budget: u64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.condition == condition && c.components == components && c.budget == budget)
    }

    /// Distinct per-repeat seeds in order of first use.
    pub fn seeds(&self) -> Vec<u64> {
        let mut seen = std::collections::BTreeSet::new();
        self.cells
            .iter()
            .flat_map(|c| c.repeats.iter().map(|r| r.seed))
            .filter(|s| seen.insert(*s))
            .collect()
    }
}

/// Connectivity frequency next to the closed-form estimate for each cell.
pub fn run_prob_grid(cells: &[(usize, usize, usize)], trials: usize, seed: u64) -> Result<Vec<GridRow>> {
    cells
        .iter()
        .enumerate()
        .map(|(i, &(d, x, t))| {
            Ok(GridRow {
                dsize: d,
                xsize: x,
                tsize: t,
                trials,
                frequency: connected_frequency(d, x, t, trials, seed::derive(seed, &[TAG_GRID, i as u64]))?,
                estimate: identifiability_probability(d as f64, x as f64, t as f64)?,
            })
        })
        .collect()
}

/// Whether a subsample keeps every bias factor of the full log connected;
/// bias factors that lose all their records count as isolated nodes.
fn subsample_connected(full: &Dataset, part: &Dataset) -> Result<bool> {
    if part.is_empty() || part.bias_count() < full.bias_count() {
        return Ok(false);
    }
    Ok(is_identifiable(part)?.0)
}

/// Fraction of random subsamples with a connected graph per sampling ratio.
pub fn run_sampling_ratio(d: &Dataset, ratios: &[f64], trials: usize, seed: u64) -> Result<Vec<RatioRow>> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    ratios
        .iter()
        .enumerate()
        .map(|(i, &ratio)| {
            let hits = (0..trials)
                .into_par_iter()
                .map(|j| {
                    let s = seed::derive(seed, &[TAG_SUBSAMPLE, i as u64, j as u64]);
                    let part = subsample(d, ratio, s)?;
                    subsample_connected(d, &part)
                })
                .collect::<Result<Vec<bool>>>()?
                .into_iter()
                .filter(|&c| c)
                .count();
            let frequency = hits as f64 / trials as f64;
            Ok(RatioRow {
                ratio,
                trials,
                frequency,
                stderr: (frequency * (1.0 - frequency) / trials as f64).sqrt(),
            })
        })
        .collect()
}

/// A simulated log with clicks and its ground truth.
struct World {
    display: Dataset,
    truth: GroundTruth,
}

impl World {
    fn new(sim: &SimulationConfig, base: u64) -> Result<Self> {
        let mut cfg = sim.clone();
        cfg.seed = seed::derive(base, &[TAG_DATA, cfg.target_components as u64]);
        let (display, truth) = generate_synthetic(&cfg)?;
        Ok(World {
            display,
            truth,
        })
    }

    fn clicks(&self, budget: u64, seed: u64) -> Result<Dataset> {
        sample_clicks(&self.display, &self.truth, budget, seed)
    }

    fn evaluate(&self, m: &ModelParams) -> Result<EvalReport> {
        let predicted: BTreeMap<String, f64> = m
            .features()
            .names()
            .iter()
            .cloned()
            .zip(m.relevance().iter().copied())
            .collect();
        evaluate(
            &predicted,
            &self.truth.relevance,
            &self.truth.queries,
            Some(self.display.features().names()),
        )
    }
}

/// Everything one repeat of one condition needs.
struct Job<'a> {
    world: &'a World,
    clicked: &'a Dataset,
    budget: u64,
    repeat_seed: u64,
}

impl Job<'_> {
    fn train_cfg(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            seed: self.repeat_seed,
            ..base.clone()
        }
    }

    fn run(&self, condition: &Condition, spec: &ExperimentSpec) -> Result<EvalReport> {
        let cfg = self.train_cfg(&spec.train);
        let d = self.clicked;
        let model = match condition {
            Condition::NoDebias => {
                let cfg = TrainConfig {
                    freeze_observation: true,
                    ..cfg
                };
                fit(d, &cfg)?.params
            }
            Condition::Examination => fit(d, &cfg)?.params,
            Condition::Intervention(strategy) => {
                let bf = &self.world.truth.bias_features;
                let guesses = derive_guesses(d, bf, &cfg)?;
                let plan = plan_intervention(
                    d,
                    &guesses,
                    *strategy,
                    seed::derive(self.repeat_seed, &[TAG_PLAN]),
                )?;
                let per_record = (self.budget / d.len() as u64).max(1);
                let augmented = apply_intervention(
                    d,
                    &plan,
                    &self.world.truth,
                    per_record,
                    seed::derive(self.repeat_seed, &[TAG_SWAP]),
                )?;
                fit(&augmented, &cfg)?.params
            }
            Condition::Merge(pairs) => {
                let plan = match pairs {
                    None => plan_merge(d, &self.world.truth.bias_features)?,
                    Some(p) => MergePlan::from_pairs(p, Some(&self.world.truth.bias_features))?,
                };
                fit(&apply_merge(d, &plan)?, &cfg)?.params
            }
        };
        self.world.evaluate(&model)
    }
}

enum Condition {
    NoDebias,
    Examination,
    Intervention(CostStrategy),
    Merge(Option<Vec<(String, String)>>),
}

fn conditions(spec: &ExperimentSpec) -> Vec<(String, Condition)> {
    match spec.scenario {
        Scenario::Fig2aComponents => vec![(EXAMINATION.into(), Condition::Examination)],
        Scenario::Table1Repair => vec![
            (NO_DEBIAS.into(), Condition::NoDebias),
            (EXAMINATION.into(), Condition::Examination),
            (INTERVENTION.into(), Condition::Intervention(CostStrategy::MinCost)),
            (MERGING.into(), Condition::Merge(None)),
        ],
        Scenario::AblationInterventionCost => vec![
            (MIN_COST.into(), Condition::Intervention(CostStrategy::MinCost)),
            (RANDOM_COST.into(), Condition::Intervention(CostStrategy::RandomCost)),
        ],
        Scenario::AblationMergePairs => spec
            .merge_pairs
            .iter()
            .map(|(a, b)| {
                (
                    format!("{} & {}", a.trim_start_matches('p'), b.trim_start_matches('p')),
                    Condition::Merge(Some(vec![(a.clone(), b.clone())])),
                )
            })
            .collect(),
        Scenario::SamplingRatio | Scenario::ProbEstimateGrid => Vec::new(),
    }
}

/// Runs every condition, budget and repeat of `spec`.
///
/// Failures of single repeats are recorded in the result rather than
/// aborting the run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunResult> {
    spec.validate()?;
    let mut result = RunResult {
        scenario: spec.scenario,
        config_hash: spec.config_hash(),
        seed: spec.seed,
        cells: Vec::new(),
        grid: Vec::new(),
        ratios: Vec::new(),
    };
    match spec.scenario {
        Scenario::ProbEstimateGrid => {
            result.grid = run_prob_grid(&spec.grid.cells(), spec.trials, spec.seed)?;
            return Ok(result);
        }
        Scenario::SamplingRatio => {
            let d = match &spec.dataset {
                Some(path) => load_dataset(path)?,
                None => {
                    let world = World::new(&spec.simulation, spec.seed)?;
                    let budget = spec.budgets.first().copied().unwrap_or(1_000_000);
                    world.clicks(budget, seed::derive(spec.seed, &[TAG_CLICKS, 1, budget]))?
                }
            };
            result.ratios = run_sampling_ratio(&d, &spec.ratios, spec.trials, spec.seed)?;
            return Ok(result);
        }
        _ => {}
    }

    let ks: Vec<usize> = match spec.scenario {
        Scenario::Fig2aComponents => spec.components.clone(),
        _ => vec![spec.simulation.target_components],
    };
    let conds = conditions(spec);
    for k in ks {
        let mut sim = spec.simulation.clone();
        if sim.target_components != k {
            sim.target_components = k;
            sim.component_blocks = None;
        }
        let world = World::new(&sim, spec.seed)?;
        for &budget in &spec.budgets {
            // Every repeat draws its own clicks; conditions within a repeat
            // share them.
            let clicked: Vec<Result<Dataset>> = (0..spec.repeats)
                .into_par_iter()
                .map(|r| {
                    let s = seed::derive(spec.seed, &[TAG_CLICKS, k as u64, budget, r as u64]);
                    world.clicks(budget, s)
                })
                .collect();
            let jobs: Vec<(usize, usize)> = (0..conds.len())
                .flat_map(|c| (0..spec.repeats).map(move |r| (c, r)))
                .collect();
            let outcomes: Vec<RepeatResult> = jobs
                .par_iter()
                .map(|&(c, r)| {
                    let repeat_seed = seed::derive(spec.seed, &[TAG_REPEAT, k as u64, budget, r as u64]);
                    let outcome = match &clicked[r] {
                        Ok(d) => Job {
                            world: &world,
                            clicked: d,
                            budget,
                            repeat_seed,
                        }
                        .run(&conds[c].1, spec)
                        .map_err(|e| e.to_string()),
                        Err(e) => Err(e.to_string()),
                    };
                    match outcome {
                        Ok(report) => RepeatResult {
                            repeat: r,
                            seed: repeat_seed,
                            report: Some(report),
                            error: None,
                        },
                        Err(e) => {
                            log::warn!("{} K={k} budget={budget} repeat {r}: {e}", conds[c].0);
                            RepeatResult {
                                repeat: r,
                                seed: repeat_seed,
                                report: None,
                                error: Some(e),
                            }
                        }
                    }
                })
                .collect();
            for (c, chunk) in outcomes.chunks(spec.repeats).enumerate() {
                result
                    .cells
                    .push(CellResult::new(&conds[c].0, k, budget, chunk.to_vec()));
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(scenario: Scenario) -> ExperimentSpec {
        let mut spec = ExperimentSpec::preset(scenario);
        spec.repeats = 2;
        spec.budgets = vec![20_000];
        spec.components = vec![1, 2];
        spec.simulation.n_documents = 40;
        spec.simulation.n_queries = 60;
        spec.train.max_steps = 200;
        spec
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std([1.0, 3.0].into_iter());
        assert_eq!((m, s), (2.0, 1.0));
        assert!(mean_std(std::iter::empty()).0.is_nan());
    }

    #[test]
    fn table_conditions_in_order() {
        let r = run_experiment(&tiny(Scenario::Table1Repair)).unwrap();
        let names: Vec<&str> = r.cells.iter().map(|c| c.condition.as_str()).collect();
        assert_eq!(names, [NO_DEBIAS, EXAMINATION, INTERVENTION, MERGING]);
        assert_eq!(r.failures(), 0);
        for c in &r.cells {
            assert_eq!(c.repeats.len(), 2);
            let (m, _) = mean_std(c.repeats.iter().map(|x| x.report.as_ref().unwrap().mcc));
            assert_eq!(m, c.mean.mcc);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let spec = tiny(Scenario::Fig2aComponents);
        assert_eq!(run_experiment(&spec).unwrap(), run_experiment(&spec).unwrap());
    }

    #[test]
    fn merge_pair_labels() {
        let r = run_experiment(&tiny(Scenario::AblationMergePairs)).unwrap();
        let names: Vec<&str> = r.cells.iter().map(|c| c.condition.as_str()).collect();
        assert_eq!(names, ["1 & 4", "2 & 4", "3 & 4"]);
    }

    #[test]
    fn grid_rows() {
        let rows = run_prob_grid(&[(5_000, 5, 5), (30, 10, 20)], 200, 3).unwrap();
        assert_eq!(rows[0].frequency, 1.0);
        assert!((rows[1].estimate - 0.603).abs() < 1e-3);
    }

    #[test]
    fn sampling_ratio_extremes() {
        let d = Dataset::from_counts((0..50).flat_map(|i| {
            [(format!("x{i}"), format!("t{}", i % 5), 1u64, 2u64), (format!("x{i}"), format!("t{}", (i + 1) % 5), 1, 2)]
        }))
        .unwrap();
        let rows = run_sampling_ratio(&d, &[0.01, 1.0], 20, 0).unwrap();
        assert_eq!(rows[0].frequency, 0.0);
        assert_eq!(rows[1].frequency, 1.0);
    }
}
