//! Synthetic click logs with a prescribed number of graph components.
//!
//! Documents are one-hot (the document id is the ranking feature) and each
//! query displays `list_size` documents. Positions are split into contiguous
//! blocks and every block draws its documents from a private pool, so the
//! position nodes of different blocks never share a feature.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BiasFeatureTable, Dataset};
use crate::error::{Error, Result};
use crate::graph::is_identifiable;
use crate::repair::InterventionPlan;
use crate::seed;
use crate::train::{parse_param_tables, write_tables};

const CONTEXT_DIM: usize = 10;
const MAX_ATTEMPTS: u64 = 16;

const TAG_LEVELS: u64 = 1;
const TAG_QUERIES: u64 = 2;
const TAG_CONTEXTS: u64 = 3;
const TAG_WEIGHTS: u64 = 4;
const TAG_ASSIGN: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpbmConfig {
    pub context_count: usize,
    pub context_std: f64,
    /// Drawn uniformly from `[-1, 1]` when absent.
    pub weights: Option<Vec<f64>>,
}

impl Default for CpbmConfig {
    fn default() -> Self {
        CpbmConfig {
            context_count: 10,
            context_std: 0.35,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_documents: usize,
    pub n_queries: usize,
    pub list_size: usize,
    /// Number of relevance levels, `y_max + 1`.
    pub relevance_levels: u32,
    pub noise: f64,
    /// `o(p)` for positions `1..=list_size`; `1/p` when absent.
    pub observation_curve: Option<Vec<f64>>,
    pub cpbm: Option<CpbmConfig>,
    pub target_components: usize,
    /// Widths of the position blocks, top to bottom. See [`block_widths`].
    pub component_blocks: Option<Vec<usize>>,
    pub total_clicks: u64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_documents: 10_000,
            n_queries: 1_150,
            list_size: 10,
            relevance_levels: 5,
            noise: 0.1,
            observation_curve: None,
            cpbm: None,
            target_components: 1,
            component_blocks: None,
            total_clicks: 1_000_000,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn y_max(&self) -> u32 {
        self.relevance_levels - 1
    }

    pub fn observation_curve(&self) -> Vec<f64> {
        match &self.observation_curve {
            Some(c) => c.clone(),
            None => (1..=self.list_size).map(|p| 1.0 / p as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.list_size == 0 || self.n_queries == 0 {
            return bad("list_size and n_queries must be positive".into());
        }
        if self.relevance_levels < 2 {
            return bad("relevance_levels must be at least 2".into());
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::OutOfRange {
                name: "noise",
                value: self.noise,
                range: "[0, 1)",
            });
        }
        let curve = self.observation_curve();
        if curve.len() != self.list_size {
            return bad(format!(
                "observation_curve has {} values for list_size {}",
                curve.len(),
                self.list_size
            ));
        }
        if let Some(v) = curve.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return Err(Error::OutOfRange {
                name: "observation_curve",
                value: *v,
                range: "(0, 1]",
            });
        }
        if self.target_components == 0 || self.target_components > self.list_size {
            return Err(Error::InfeasibleComponents {
                requested: self.target_components,
                list_size: self.list_size,
            });
        }
        let widths = block_widths(self)?;
        let pools = pool_sizes(self.n_documents, &widths);
        if pools.iter().zip(&widths).any(|(p, w)| p < w) {
            return bad(format!(
                "{} documents cannot fill position blocks {widths:?}",
                self.n_documents
            ));
        }
        if let Some(c) = &self.cpbm {
            if c.context_count == 0 {
                return bad("cpbm.context_count must be positive".into());
            }
            if !(c.context_std >= 0.0) {
                return bad("cpbm.context_std must be non-negative".into());
            }
            if let Some(w) = &c.weights {
                if w.len() != CONTEXT_DIM {
                    return bad(format!("cpbm.weights must have {CONTEXT_DIM} values"));
                }
            }
        }
        Ok(())
    }
}

/// Position block widths. Unless configured, the first `K - 1` blocks are
/// `min(3, list_size / K)` wide and the last block takes the rest, so `K = 2`
/// splits ten positions into `1-3` and `4-10`.
pub fn block_widths(cfg: &SimulationConfig) -> Result<Vec<usize>> {
    let k = cfg.target_components;
    let infeasible = Error::InfeasibleComponents {
        requested: k,
        list_size: cfg.list_size,
    };
    if k == 0 || k > cfg.list_size {
        return Err(infeasible);
    }
    if let Some(w) = &cfg.component_blocks {
        if w.len() != k || w.contains(&0) || w.iter().sum::<usize>() != cfg.list_size {
            return Err(Error::Config(format!(
                "component_blocks {w:?} must hold {k} positive widths summing to {}",
                cfg.list_size
            )));
        }
        return Ok(w.clone());
    }
    let lead = (cfg.list_size / k).min(3);
    let mut w = vec![lead; k - 1];
    w.push(cfg.list_size - lead * (k - 1));
    Ok(w)
}

fn pool_sizes(n_documents: usize, widths: &[usize]) -> Vec<usize> {
    let total: usize = widths.iter().sum();
    let mut pools: Vec<usize> = widths.iter().map(|w| n_documents * w / total).collect();
    let assigned: usize = pools.iter().sum();
    if let Some(last) = pools.last_mut() {
        *last += n_documents - assigned;
    }
    pools
}

/// `ε + (1 - ε)(2^y - 1)/(2^y_max - 1)`.
pub fn relevance_from_level(y: u32, y_max: u32, noise: f64) -> Result<f64> {
    if y_max == 0 || y > y_max || y_max >= 63 {
        return Err(Error::OutOfRange {
            name: "relevance level",
            value: y as f64,
            range: "[0, y_max] with 0 < y_max < 63",
        });
    }
    let num = ((1u64 << y) - 1) as f64;
    let den = ((1u64 << y_max) - 1) as f64;
    Ok(noise + (1.0 - noise) * num / den)
}

/// `o(p)^max(wᵀX + 1, 0)` for a context with projection `wx = wᵀX`.
pub fn contextual_observation(o_p: f64, wx: f64) -> f64 {
    o_p.powf((wx + 1.0).max(0.0))
}

/// Context vectors and weight vector of a contextual position model.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextModel {
    contexts: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl ContextModel {
    pub fn new(cfg: &CpbmConfig, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, cfg.context_std)
            .map_err(|e| Error::Config(format!("context_std: {e}")))?;
        let mut rng = seed::child_rng(seed, &[TAG_CONTEXTS]);
        let contexts = (0..cfg.context_count)
            .map(|_| (0..CONTEXT_DIM).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let weights = match &cfg.weights {
            Some(w) => w.clone(),
            None => {
                let mut rng = seed::child_rng(seed, &[TAG_WEIGHTS]);
                (0..CONTEXT_DIM).map(|_| rng.random_range(-1.0..=1.0)).collect()
            }
        };
        Ok(ContextModel { contexts, weights })
    }

    pub fn context_count(&self) -> usize {
        self.contexts.len()
    }

    pub fn context(&self, t: usize) -> Result<&[f64]> {
        self.contexts
            .get(t)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownContext(t))
    }

    pub fn projection(&self, t: usize) -> Result<f64> {
        Ok(self.context(t)?.iter().zip(&self.weights).map(|(x, w)| x * w).sum())
    }

    /// Observation at a position with base probability `o_p` under context `t`.
    pub fn observation(&self, o_p: f64, t: usize) -> Result<f64> {
        Ok(contextual_observation(o_p, self.projection(t)?))
    }
}

/// Bias id of a position, optionally qualified by a context.
pub fn bias_id(position: usize, context: Option<usize>) -> String {
    match context {
        Some(c) => format!("p{position}c{c}"),
        None => format!("p{position}"),
    }
}

pub fn document_id(i: usize) -> String {
    format!("d{i:05}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedList {
    pub id: String,
    /// Displayed documents, top first, with their relevance levels.
    pub docs: Vec<(String, u32)>,
}

/// True parameters behind a synthetic click log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub relevance: BTreeMap<String, f64>,
    pub observation: BTreeMap<String, f64>,
    pub queries: Vec<RankedList>,
    pub bias_features: BiasFeatureTable,
}

impl GroundTruth {
    pub fn relevance_of(&self, feature: &str) -> Result<f64> {
        self.relevance
            .get(feature)
            .copied()
            .ok_or_else(|| Error::UnknownFeature(feature.to_string()))
    }

    pub fn observation_of(&self, bias: &str) -> Result<f64> {
        self.observation
            .get(bias)
            .copied()
            .ok_or_else(|| Error::UnknownBias(bias.to_string()))
    }

    pub fn click_probability(&self, feature: &str, bias: &str) -> Result<f64> {
        Ok(self.relevance_of(feature)? * self.observation_of(bias)?)
    }

    /// `r`/`o` tables in the model file format.
    pub fn tables_tsv(&self) -> String {
        write_tables(
            self.relevance.iter().map(|(k, v)| (k.as_str(), *v)),
            self.observation.iter().map(|(k, v)| (k.as_str(), *v)),
        )
    }

    pub fn queries_tsv(&self) -> String {
        queries_to_tsv(&self.queries)
    }
}

pub fn queries_to_tsv(queries: &[RankedList]) -> String {
    let mut out = String::from("# query_id\tfeature_id\tlevel\n");
    for q in queries {
        for (doc, y) in &q.docs {
            let _ = writeln!(out, "{}\t{doc}\t{y}", q.id);
        }
    }
    out
}

/// Reads ranked lists; consecutive lines of one query keep their order.
pub fn parse_queries(text: &str) -> Result<Vec<RankedList>> {
    let mut out: Vec<RankedList> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = s.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        if f.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", f.len())));
        }
        let y: u32 = f[2]
            .parse()
            .map_err(|_| parse_err(format!("invalid level `{}`", f[2])))?;
        match out.last_mut() {
            Some(q) if q.id == f[0] => q.docs.push((f[1].to_string(), y)),
            _ => out.push(RankedList {
                id: f[0].to_string(),
                docs: vec![(f[1].to_string(), y)],
            }),
        }
    }
    if out.is_empty() {
        return Err(Error::Empty);
    }
    Ok(out)
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<RankedList>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_queries(&text)
}

/// Reads a `r`/`o` table file as ground truth without query lists.
pub fn parse_ground_truth(text: &str) -> Result<GroundTruth> {
    let t = parse_param_tables(text)?;
    Ok(GroundTruth {
        relevance: t.relevance,
        observation: t.observation,
        ..GroundTruth::default()
    })
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(&text)
}

/// Generates the display log (one impression per displayed document, no
/// clicks) and its ground truth.
///
/// Under the plain position model the graph has exactly
/// `target_components` components; generation is retried with derived seeds
/// when sparse sampling leaves a block disconnected.
pub fn generate_synthetic(cfg: &SimulationConfig) -> Result<(Dataset, GroundTruth)> {
    cfg.validate()?;
    let k = cfg.target_components;
    let mut found = 0;
    for attempt in 0..MAX_ATTEMPTS {
        let s = if attempt == 0 { cfg.seed } else { seed::derive(cfg.seed, &[attempt]) };
        let (d, gt) = generate_once(cfg, s)?;
        if cfg.cpbm.is_some() {
            return Ok((d, gt));
        }
        let (_, cc) = is_identifiable(&d)?;
        found = cc.count();
        if found == k {
            return Ok((d, gt));
        }
        log::debug!("attempt {attempt}: {found} components, expected {k}");
    }
    Err(Error::ComponentMismatch {
        expected: k,
        found,
        attempts: MAX_ATTEMPTS as usize,
    })
}

fn generate_once(cfg: &SimulationConfig, s: u64) -> Result<(Dataset, GroundTruth)> {
    let y_max = cfg.y_max();
    let mut rng = seed::child_rng(s, &[TAG_LEVELS]);
    let levels: Vec<u32> = (0..cfg.n_documents).map(|_| rng.random_range(0..=y_max)).collect();

    let widths = block_widths(cfg)?;
    let pools = pool_sizes(cfg.n_documents, &widths);
    let mut pool_start = Vec::with_capacity(pools.len());
    let mut acc = 0;
    for p in &pools {
        pool_start.push(acc);
        acc += p;
    }

    let curve = cfg.observation_curve();
    let contexts = match &cfg.cpbm {
        Some(c) => Some(ContextModel::new(c, cfg.seed)?),
        None => None,
    };

    let mut rng = seed::child_rng(s, &[TAG_QUERIES]);
    let mut assign = seed::child_rng(s, &[TAG_ASSIGN]);
    let mut queries = Vec::with_capacity(cfg.n_queries);
    let mut events: BTreeMap<(usize, String), u64> = BTreeMap::new();
    for q in 0..cfg.n_queries {
        let mut docs = Vec::with_capacity(cfg.list_size);
        let mut position = 1;
        for (b, &w) in widths.iter().enumerate() {
            let mut chosen: Vec<usize> = index::sample(&mut rng, pools[b], w)
                .into_iter()
                .map(|i| pool_start[b] + i)
                .collect();
            chosen.shuffle(&mut rng);
            for doc in chosen {
                let ctx = contexts
                    .as_ref()
                    .map(|m| assign.random_range(0..m.context_count()));
                *events.entry((doc, bias_id(position, ctx))).or_insert(0) += 1;
                docs.push((document_id(doc), levels[doc]));
                position += 1;
            }
        }
        queries.push(RankedList {
            id: format!("q{q:04}"),
            docs,
        });
    }

    let d = Dataset::from_counts(
        events
            .iter()
            .map(|((doc, t), &n)| (document_id(*doc), t.clone(), 0u64, n)),
    )?;

    let mut relevance = BTreeMap::new();
    for x in d.features().names() {
        let doc: usize = x[1..].parse().expect("generated document id");
        relevance.insert(x.clone(), relevance_from_level(levels[doc], y_max, cfg.noise)?);
    }
    let mut observation = BTreeMap::new();
    let mut bias_features = BiasFeatureTable::new();
    for p in 1..=cfg.list_size {
        match &contexts {
            None => {
                let t = bias_id(p, None);
                if d.bias_id(&t).is_some() {
                    observation.insert(t.clone(), curve[p - 1]);
                    bias_features.insert(t, vec![p as f64])?;
                }
            }
            Some(m) => {
                for c in 0..m.context_count() {
                    let t = bias_id(p, Some(c));
                    if d.bias_id(&t).is_some() {
                        observation.insert(t.clone(), m.observation(curve[p - 1], c)?);
                        let mut v = m.context(c)?.to_vec();
                        v.push(10.0 * p as f64);
                        bias_features.insert(t, v)?;
                    }
                }
            }
        }
    }
    Ok((
        d,
        GroundTruth {
            relevance,
            observation,
            queries,
            bias_features,
        },
    ))
}

/// Spreads `total_clicks` impressions uniformly over the display events of
/// `d` (its impression counts) and samples clicks with probability `r·o`.
///
/// Records left with no impressions are dropped.
pub fn sample_clicks(d: &Dataset, gt: &GroundTruth, total_clicks: u64, seed: u64) -> Result<Dataset> {
    if total_clicks == 0 {
        return Err(Error::NonPositive("total_clicks", 0.0));
    }
    let events = d.total_impressions();
    if events == 0 {
        return Err(Error::EmptyDataset);
    }
    let base = total_clicks / events;
    let rem = (total_clicks % events) as usize;
    let mut extra = vec![0u64; d.len()];
    if rem > 0 {
        let mut picks: Vec<usize> = index::sample(&mut seed::child_rng(seed, &[0]), events as usize, rem).into_vec();
        picks.sort_unstable();
        let mut it = picks.into_iter().peekable();
        let mut start = 0usize;
        for (i, r) in d.records().iter().enumerate() {
            let end = start + r.impressions as usize;
            while it.peek().is_some_and(|&e| e < end) {
                extra[i] += 1;
                it.next();
            }
            start = end;
        }
    }
    let probs = record_probabilities(d, gt)?;
    let rows: Vec<(&str, &str, u64, u64)> = d
        .records()
        .par_iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let imps = r.impressions * base + extra[i];
            (imps > 0).then(|| {
                let mut rng = seed::child_rng(seed, &[1, i as u64]);
                let c = binomial(&mut rng, imps, probs[i]);
                (d.feature_name(r.feature), d.bias_name(r.bias), c, imps)
            })
        })
        .collect();
    Dataset::from_counts(rows)
}

fn binomial<R: Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    Binomial::new(n, p.clamp(0.0, 1.0))
        .expect("probability clamped to [0, 1]")
        .sample(rng)
}

fn record_probabilities(d: &Dataset, gt: &GroundTruth) -> Result<Vec<f64>> {
    d.named_records()
        .map(|(x, t, _, _)| gt.click_probability(x, t))
        .collect()
}

/// Noise-free click rates `r(x)·o(t)` for every record of `d`.
pub fn exact_rates(d: &Dataset, gt: &GroundTruth) -> Result<Vec<f64>> {
    record_probabilities(d, gt)
}

/// Adds one record per plan entry with `clicks_per_swap` impressions and
/// clicks sampled at the target bias factor's rate.
pub fn apply_intervention(
    d: &Dataset,
    plan: &InterventionPlan,
    gt: &GroundTruth,
    clicks_per_swap: u64,
    seed: u64,
) -> Result<Dataset> {
    if plan.is_empty() {
        return Ok(d.clone());
    }
    if clicks_per_swap == 0 {
        return Err(Error::NonPositive("clicks_per_swap", 0.0));
    }
    let mut rows: Vec<(String, String, u64, u64)> = d
        .named_records()
        .map(|(x, t, c, n)| (x.to_string(), t.to_string(), c, n))
        .collect();
    for (i, e) in plan.entries.iter().enumerate() {
        if d.feature_id(&e.feature).is_none() {
            return Err(Error::UnknownFeature(e.feature.clone()));
        }
        let p = gt.click_probability(&e.feature, &e.target_bias)?;
        let mut rng = seed::child_rng(seed, &[i as u64]);
        let c = binomial(&mut rng, clicks_per_swap, p);
        rows.push((e.feature.clone(), e.target_bias.clone(), c, clicks_per_swap));
    }
    Dataset::from_counts(rows)
}

/// Draws `trials` values of `o'(t1)/o(t1) - o'(t2)/o(t2)` where each
/// `o'(t)` is an `n`-impression click average at rate `r·o(t)` divided by the
/// relevance estimate `r' = r·sqrt(big_r)`.
pub fn swap_statistic_samples(
    r: f64,
    o1: f64,
    o2: f64,
    n: u64,
    big_r: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    for (name, v) in [("r", r), ("o1", o1), ("o2", o2), ("R", big_r)] {
        if !(v > 0.0) {
            return Err(Error::NonPositive(name, v));
        }
    }
    if n == 0 {
        return Err(Error::NonPositive("N", 0.0));
    }
    let r_est = r * big_r.sqrt();
    Ok((0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::child_rng(seed, &[i as u64]);
            let c1 = binomial(&mut rng, n, r * o1) as f64 / n as f64;
            let c2 = binomial(&mut rng, n, r * o2) as f64 / n as f64;
            c1 / (r_est * o1) - c2 / (r_est * o2)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::components;

    fn small(k: usize) -> SimulationConfig {
        SimulationConfig {
            n_documents: 100,
            n_queries: 200,
            target_components: k,
            seed: 7,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn relevance_levels() {
        assert_eq!(relevance_from_level(4, 4, 0.1).unwrap(), 1.0);
        assert_eq!(relevance_from_level(0, 4, 0.1).unwrap(), 0.1);
        assert!((relevance_from_level(2, 4, 0.1).unwrap() - 0.28).abs() < 1e-15);
        assert!(relevance_from_level(5, 4, 0.1).is_err());
    }

    #[test]
    fn contextual_exponent() {
        assert_eq!(contextual_observation(0.3, 0.0), 0.3);
        assert_eq!(contextual_observation(0.3, -1.5), 1.0);
        assert_eq!(contextual_observation(0.5, 1.0), 0.25);
        let m = ContextModel::new(&CpbmConfig::default(), 3).unwrap();
        assert!(matches!(m.observation(0.5, 10), Err(Error::UnknownContext(10))));
        let wx = m.projection(2).unwrap();
        assert_eq!(m.observation(0.5, 2).unwrap(), contextual_observation(0.5, wx));
    }

    #[test]
    fn default_blocks() {
        let w = |k| block_widths(&small(k)).unwrap();
        assert_eq!(w(1), [10]);
        assert_eq!(w(2), [3, 7]);
        assert_eq!(w(3), [3, 3, 4]);
        assert_eq!(w(4), [2, 2, 2, 4]);
        let mut cfg = small(11);
        assert!(matches!(cfg.validate(), Err(Error::InfeasibleComponents { .. })));
        cfg.target_components = 2;
        cfg.component_blocks = Some(vec![5, 4]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn component_count_matches_target() {
        for k in 1..=4 {
            let (d, gt) = generate_synthetic(&small(k)).unwrap();
            let (_, cc) = is_identifiable(&d).unwrap();
            assert_eq!(cc.count(), k);
            assert_eq!(d.total_clicks(), 0);
            assert_eq!(d.total_impressions(), 200 * 10);
            assert_eq!(gt.queries.len(), 200);
            assert!(gt.queries.iter().all(|q| q.docs.len() == 10));
            assert_eq!(gt.bias_features.len(), d.bias_count());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let (d1, g1) = generate_synthetic(&small(3)).unwrap();
        let (d2, g2) = generate_synthetic(&small(3)).unwrap();
        assert_eq!(d1.to_tsv(), d2.to_tsv());
        assert_eq!(g1.tables_tsv(), g2.tables_tsv());
        assert_eq!(g1.queries_tsv(), g2.queries_tsv());
        let s1 = sample_clicks(&d1, &g1, 12_345, 9).unwrap();
        let s2 = sample_clicks(&d2, &g2, 12_345, 9).unwrap();
        assert_eq!(s1.to_tsv(), s2.to_tsv());
    }

    #[test]
    fn budget_is_spent_exactly() {
        let (d, gt) = generate_synthetic(&small(2)).unwrap();
        for budget in [1_000, 12_345, 100_000] {
            let s = sample_clicks(&d, &gt, budget, 1).unwrap();
            assert_eq!(s.total_impressions(), budget);
            assert!(s.records().iter().all(|r| r.clicks <= r.impressions));
        }
    }

    #[test]
    fn extreme_probabilities() {
        let d = Dataset::from_counts([("x", "t", 0u64, 1u64), ("y", "t", 0, 1)]).unwrap();
        let mut gt = GroundTruth::default();
        gt.relevance.insert("x".into(), 1.0);
        gt.relevance.insert("y".into(), 0.0);
        gt.observation.insert("t".into(), 1.0);
        let s = sample_clicks(&d, &gt, 1_000, 0).unwrap();
        let r = s.records();
        assert_eq!((r[0].clicks, r[0].impressions), (500, 500));
        assert_eq!(r[1].clicks, 0);
    }

    #[test]
    fn click_rate_concentrates() {
        let d = Dataset::from_counts([("x", "t", 0u64, 1u64)]).unwrap();
        let mut gt = GroundTruth::default();
        gt.relevance.insert("x".into(), 0.5);
        gt.observation.insert("t".into(), 1.0);
        let s = sample_clicks(&d, &gt, 1_000_000, 4).unwrap();
        assert!((s.records()[0].click_rate() - 0.5).abs() <= 4.0 * 0.0005);
    }

    #[test]
    fn cpbm_ids_and_features() {
        let cfg = SimulationConfig {
            cpbm: Some(CpbmConfig {
                context_count: 3,
                ..CpbmConfig::default()
            }),
            ..small(1)
        };
        let (d, gt) = generate_synthetic(&cfg).unwrap();
        assert!(d.bias_count() <= 30);
        assert_eq!(gt.bias_features.dim(), CONTEXT_DIM + 1);
        for t in d.biases().names() {
            let o = gt.observation_of(t).unwrap();
            assert!(o > 0.0 && o <= 1.0);
        }
    }

    #[test]
    fn intervention_records() {
        let (d, gt) = generate_synthetic(&small(2)).unwrap();
        let s = sample_clicks(&d, &gt, 50_000, 2).unwrap();
        let cc = components(&crate::graph::build_ig(&s).unwrap());
        let x = s.feature_name(cc.features(1)[0]).to_string();
        let src = s.bias_name(cc.nodes(1)[0]).to_string();
        let plan = InterventionPlan {
            entries: vec![crate::repair::InterventionEntry {
                feature: x,
                source_bias: src,
                target_bias: "p1".into(),
                cost: 0.0,
            }],
            total_cost: 0.0,
        };
        let out = apply_intervention(&s, &plan, &gt, 100, 3).unwrap();
        assert_eq!(out.len(), s.len() + 1);
        assert!(is_identifiable(&out).unwrap().0);
        assert_eq!(apply_intervention(&s, &InterventionPlan::default(), &gt, 100, 3).unwrap(), s);
    }

    #[test]
    fn round_trip_files() {
        let (_, gt) = generate_synthetic(&small(2)).unwrap();
        let back = parse_queries(&gt.queries_tsv()).unwrap();
        assert_eq!(back, gt.queries);
        let t = parse_ground_truth(&gt.tables_tsv()).unwrap();
        assert_eq!(t.relevance, gt.relevance);
        assert_eq!(t.observation, gt.observation);
    }

    #[test]
    fn toml_config() {
        let cfg = SimulationConfig::from_toml(
            "n_documents = 50\nn_queries = 20\ntarget_components = 2\nobservation_curve = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1]\n",
        )
        .unwrap();
        assert_eq!(cfg.n_documents, 50);
        assert_eq!(cfg.observation_curve()[9], 0.1);
        assert!(SimulationConfig::from_toml("noise = 1.0\n").is_err());
        assert!(SimulationConfig::from_toml("bogus = 1\n").is_err());
    }
}
