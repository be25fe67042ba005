use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BiasFactorId, BiasFeatureTable, Dataset, FeatureId};
use crate::error::{Error, Result};
use crate::graph::{build_ig, components, ComponentDecomposition};
use crate::repair::merge::{apply_merge, plan_merge, MergePlan};
use crate::repair::mst::prim;
use crate::seed;
use crate::train::{fit, ModelParams, ParamTables, TrainConfig};

/// Lower bound applied to guesses before the cost is evaluated; the cost
/// diverges as either guess approaches zero.
pub const GUESS_FLOOR: f64 = 1e-6;

/// Maximum swap candidates enumerated per component pair and direction.
pub const DEFAULT_CANDIDATE_CAP: usize = 10_000;

/// Prior estimates of relevance and observation used to price swaps.
#[derive(Debug, Clone, PartialEq)]
pub struct GuessModels {
    relevance: Vec<f64>,
    observation: Vec<f64>,
}

impl GuessModels {
    /// Values must be finite and non-negative; anything below
    /// [`GUESS_FLOOR`] is raised to it.
    pub fn new(relevance: Vec<f64>, observation: Vec<f64>) -> Result<Self> {
        let check = |what: &'static str, v: Vec<f64>| -> Result<Vec<f64>> {
            v.into_iter()
                .map(|x| {
                    if x.is_finite() && x >= 0.0 {
                        Ok(x.max(GUESS_FLOOR))
                    } else {
                        Err(Error::NonPositive(what, x))
                    }
                })
                .collect()
        };
        Ok(GuessModels {
            relevance: check("relevance guess", relevance)?,
            observation: check("observation guess", observation)?,
        })
    }

    pub fn uniform(d: &Dataset, value: f64) -> Result<Self> {
        Self::new(vec![value; d.feature_count()], vec![value; d.bias_count()])
    }

    /// Looks up every feature and bias factor of `d` by name.
    pub fn from_tables(d: &Dataset, t: &ParamTables) -> Result<Self> {
        let relevance = d
            .features()
            .names()
            .iter()
            .map(|n| {
                t.relevance.get(n).copied().ok_or_else(|| Error::MissingGuess {
                    kind: "feature",
                    id: n.clone(),
                })
            })
            .collect::<Result<_>>()?;
        let observation = d
            .biases()
            .names()
            .iter()
            .map(|n| {
                t.observation.get(n).copied().ok_or_else(|| Error::MissingGuess {
                    kind: "bias factor",
                    id: n.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Self::new(relevance, observation)
    }

    /// Guesses from a model trained on the merged version of `d`: each bias
    /// factor takes the observation of the node it was merged into.
    pub fn from_merged_model(d: &Dataset, plan: &MergePlan, m: &ModelParams) -> Result<Self> {
        let mut tables = ParamTables::default();
        for (i, name) in m.features().names().iter().enumerate() {
            tables.relevance.insert(name.clone(), m.relevance()[i]);
        }
        for name in d.biases().names() {
            let merged = plan.relabel.get(name).unwrap_or(name);
            if let Some(v) = m.observation_of(merged) {
                tables.observation.insert(name.clone(), v);
            }
        }
        Self::from_tables(d, &tables)
    }

    pub fn relevance(&self, x: FeatureId) -> f64 {
        self.relevance[x.index()]
    }

    pub fn observation(&self, t: BiasFactorId) -> f64 {
        self.observation[t.index()]
    }

    fn check_shape(&self, d: &Dataset) -> Result<()> {
        if self.relevance.len() != d.feature_count() {
            return Err(Error::MissingGuess {
                kind: "feature",
                id: format!("#{}", self.relevance.len().min(d.feature_count())),
            });
        }
        if self.observation.len() != d.bias_count() {
            return Err(Error::MissingGuess {
                kind: "bias factor",
                id: format!("#{}", self.observation.len().min(d.bias_count())),
            });
        }
        Ok(())
    }
}

/// Default guesses: merge nodes, fit the merged dataset, and read the fitted
/// tables back onto the original ids.
pub fn derive_guesses(d: &Dataset, bf: &BiasFeatureTable, cfg: &TrainConfig) -> Result<GuessModels> {
    let plan = plan_merge(d, bf)?;
    let merged = apply_merge(d, &plan)?;
    let model = fit(&merged, cfg)?.params;
    GuessModels::from_merged_model(d, &plan, &model)
}

/// Variance proxy of swapping a feature with relevance `r` between bias
/// factors with observations `o1` and `o2`: `1/(r·o1) + 1/(r·o2) - 2`.
pub fn intervention_cost(r: f64, o1: f64, o2: f64) -> Result<f64> {
    for (name, v) in [("relevance guess", r), ("observation guess", o1), ("observation guess", o2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositive(name, v));
        }
    }
    Ok(swap_cost(r, o1, o2))
}

fn swap_cost(r: f64, o1: f64, o2: f64) -> f64 {
    let r = r.max(GUESS_FLOOR);
    1.0 / (r * o1.max(GUESS_FLOOR)) + 1.0 / (r * o2.max(GUESS_FLOOR)) - 2.0
}

/// Predicted variance of `o'(t1)/o(t1) - o'(t2)/o(t2)` when both click rates
/// are averages of `n` Bernoulli draws and `big_r = r'(x)^2 / r(x)^2`.
pub fn predicted_swap_variance(r: f64, o1: f64, o2: f64, n: u64, big_r: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::NonPositive("N", 0.0));
    }
    if !(big_r > 0.0) {
        return Err(Error::NonPositive("R", big_r));
    }
    Ok(intervention_cost(r, o1, o2)? / (n as f64 * big_r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostStrategy {
    /// Minimize the swap variance proxy.
    MinCost,
    /// Draw every candidate's cost uniformly from `[0, 1]`.
    RandomCost,
}

impl std::str::FromStr for CostStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" | "min_cost" => Ok(CostStrategy::MinCost),
            "random" | "random_cost" => Ok(CostStrategy::RandomCost),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Show `feature` (currently logged with `source_bias`) under `target_bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionEntry {
    pub feature: String,
    pub source_bias: String,
    pub target_bias: String,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InterventionPlan {
    pub entries: Vec<InterventionEntry>,
    pub total_cost: f64,
}

impl InterventionPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# feature_id\tsource_bias\ttarget_bias\tcost\n");
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}\t{:?}", e.feature, e.source_bias, e.target_bias, e.cost);
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Swap {
    feature: FeatureId,
    source: BiasFactorId,
    target: BiasFactorId,
}

/// Plans `K - 1` swaps that connect the identifiability graph of `d`.
pub fn plan_intervention(
    d: &Dataset,
    g: &GuessModels,
    strategy: CostStrategy,
    seed: u64,
) -> Result<InterventionPlan> {
    plan_intervention_capped(d, g, strategy, seed, DEFAULT_CANDIDATE_CAP)
}

pub fn plan_intervention_capped(
    d: &Dataset,
    g: &GuessModels,
    strategy: CostStrategy,
    seed: u64,
    cap: usize,
) -> Result<InterventionPlan> {
    g.check_shape(d)?;
    let graph = build_ig(d)?;
    let cc = components(&graph);
    let tree = prim(cc.count(), |i, j| {
        best_swap(&cc, &graph, g, strategy, seed, cap, i, j)
    });
    let entries: Vec<InterventionEntry> = tree
        .into_iter()
        .map(|(_, _, cost, s)| InterventionEntry {
            feature: d.feature_name(s.feature).to_string(),
            source_bias: d.bias_name(s.source).to_string(),
            target_bias: d.bias_name(s.target).to_string(),
            cost,
        })
        .collect();
    let total_cost = entries.iter().map(|e| e.cost).sum();
    Ok(InterventionPlan { entries, total_cost })
}

/// Cheapest swap between components `a` (not yet in the tree) and `b`,
/// comparing moving a feature of `a` into `b` against the reverse and keeping
/// the first on ties.
#[allow(clippy::too_many_arguments)]
fn best_swap(
    cc: &ComponentDecomposition,
    graph: &crate::graph::IdentifiabilityGraph,
    g: &GuessModels,
    strategy: CostStrategy,
    seed: u64,
    cap: usize,
    a: usize,
    b: usize,
) -> (f64, Swap) {
    let mut rng = seed::child_rng(seed, &[a as u64, b as u64]);
    let mut direction = |from: usize, to: usize| -> (f64, Swap) {
        let mut best: Option<(f64, Swap)> = None;
        let mut seen = 0;
        'outer: for &x in cc.features(from) {
            for &source in graph.biases_of(x) {
                for &target in cc.nodes(to) {
                    if seen == cap {
                        break 'outer;
                    }
                    seen += 1;
                    let cost = match strategy {
                        CostStrategy::MinCost => {
                            swap_cost(g.relevance(x), g.observation(source), g.observation(target))
                        }
                        CostStrategy::RandomCost => rng.random::<f64>(),
                    };
                    if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                        best = Some((cost, Swap { feature: x, source, target }));
                    }
                }
            }
        }
        best.expect("every component has at least one feature and one node")
    };
    let forward = direction(a, b);
    let backward = direction(b, a);
    if forward.0 <= backward.0 {
        forward
    } else {
        backward
    }
}
