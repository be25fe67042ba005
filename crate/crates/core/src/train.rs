//! Dual alternating minimization of the click-fitting objective.
//!
//! Each step solves the impression-weighted least-squares problem for every
//! relevance coordinate with observation held fixed, then for every
//! observation coordinate with the fresh relevance values, clipping both to
//! `[0, 1]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Interner};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_steps: usize,
    pub loss_tolerance: f64,
    pub seed: u64,
    /// Keep every observation parameter at 1 (fit relevance to raw click rates).
    pub freeze_observation: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_steps: 20_000,
            loss_tolerance: 1e-10,
            seed: 0,
            freeze_observation: false,
        }
    }
}

/// Fitted relevance and observation tables, keyed by the ids of the training
/// dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    features: Interner,
    biases: Interner,
    relevance: Vec<f64>,
    observation: Vec<f64>,
}

impl ModelParams {
    pub fn relevance(&self) -> &[f64] {
        &self.relevance
    }

    pub fn observation(&self) -> &[f64] {
        &self.observation
    }

    pub fn features(&self) -> &Interner {
        &self.features
    }

    pub fn biases(&self) -> &Interner {
        &self.biases
    }

    pub fn observation_of(&self, bias: &str) -> Option<f64> {
        self.biases.get(bias).map(|i| self.observation[i as usize])
    }

    pub fn to_tsv(&self) -> String {
        write_tables(
            self.features.names().iter().map(String::as_str).zip(self.relevance.iter().copied()),
            self.biases.names().iter().map(String::as_str).zip(self.observation.iter().copied()),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn from_tables(tables: &ParamTables) -> Self {
        ModelParams {
            features: Interner::from_sorted(tables.relevance.keys().cloned()),
            biases: Interner::from_sorted(tables.observation.keys().cloned()),
            relevance: tables.relevance.values().copied().collect(),
            observation: tables.observation.values().copied().collect(),
        }
    }
}

pub fn predict_relevance(m: &ModelParams, feature: &str) -> Result<f64> {
    m.features
        .get(feature)
        .map(|i| m.relevance[i as usize])
        .ok_or_else(|| Error::UnknownFeature(feature.to_string()))
}

/// Named `r`/`o` tables as stored in model and ground-truth files:
///
/// ```text
/// r	<feature_id>	<value>
/// o	<bias_id>	<value>
/// ```
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamTables {
    pub relevance: BTreeMap<String, f64>,
    pub observation: BTreeMap<String, f64>,
}

pub(crate) fn write_tables<'a>(
    r: impl Iterator<Item = (&'a str, f64)>,
    o: impl Iterator<Item = (&'a str, f64)>,
) -> String {
    let mut out = String::from("# kind\tid\tvalue\n");
    for (k, v) in r {
        let _ = writeln!(out, "r\t{k}\t{v:?}");
    }
    for (k, v) in o {
        let _ = writeln!(out, "o\t{k}\t{v:?}");
    }
    out
}

pub fn parse_param_tables(text: &str) -> Result<ParamTables> {
    let mut t = ParamTables::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = s.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let value: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid value `{}`", fields[2]),
        })?;
        let table = match fields[0] {
            "r" => &mut t.relevance,
            "o" => &mut t.observation,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown table `{other}`"),
                })
            }
        };
        table.insert(fields[1].to_string(), value);
    }
    if t.relevance.is_empty() && t.observation.is_empty() {
        return Err(Error::Empty);
    }
    Ok(t)
}

pub fn load_param_tables(path: impl AsRef<Path>) -> Result<ParamTables> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_param_tables(&text)
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    /// Loss after each full sweep.
    pub loss_trace: Vec<f64>,
    /// Coordinates re-drawn because every paired parameter was zero.
    pub rerandomized: usize,
    pub steps: usize,
}

impl FitResult {
    pub fn final_loss(&self) -> f64 {
        self.loss_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Fits observed click rates with impression weights.
pub fn fit(d: &Dataset, cfg: &TrainConfig) -> Result<FitResult> {
    let rates: Vec<f64> = d.records().iter().map(|r| r.click_rate()).collect();
    fit_rates(d, &rates, cfg)
}

/// Fits caller-supplied click rates (one per record of `d`, e.g. exact
/// `r(x)·o(t)` values) with the record impressions as weights.
pub fn fit_rates(d: &Dataset, rates: &[f64], cfg: &TrainConfig) -> Result<FitResult> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rates.len() != d.len() {
        return Err(Error::LengthMismatch(rates.len(), d.len()));
    }
    if cfg.max_steps == 0 {
        return Err(Error::Config("max_steps must be at least 1".into()));
    }
    let problem = Problem::new(d, rates);
    let mut rng = seed::rng(cfg.seed);
    let mut r: Vec<f64> = (0..d.feature_count()).map(|_| rng.random::<f64>()).collect();
    let mut o: Vec<f64> = if cfg.freeze_observation {
        vec![1.0; d.bias_count()]
    } else {
        (0..d.bias_count()).map(|_| rng.random::<f64>()).collect()
    };

    let mut trace = Vec::new();
    let mut rerandomized = 0;
    let mut steps = 0;
    while steps < cfg.max_steps {
        rerandomized += problem.update(&problem.by_feature, &problem.bias_of, &o, &mut r, &mut rng);
        if !cfg.freeze_observation {
            rerandomized += problem.update(&problem.by_bias, &problem.feature_of, &r, &mut o, &mut rng);
        }
        steps += 1;
        let loss = problem.loss(&r, &o);
        let done = trace
            .last()
            .is_some_and(|&prev: &f64| (prev - loss).abs() < cfg.loss_tolerance);
        trace.push(loss);
        if done {
            break;
        }
    }

    Ok(FitResult {
        params: ModelParams {
            features: d.features().clone(),
            biases: d.biases().clone(),
            relevance: r,
            observation: o,
        },
        loss_trace: trace,
        rerandomized,
        steps,
    })
}

/// Record arrays grouped by feature and by bias factor (CSR layout).
struct Problem {
    feature_of: Vec<usize>,
    bias_of: Vec<usize>,
    rate: Vec<f64>,
    weight: Vec<f64>,
    by_feature: Csr,
    by_bias: Csr,
}

struct Csr {
    offsets: Vec<usize>,
    items: Vec<usize>,
}

impl Csr {
    fn build(keys: &[usize], n: usize) -> Csr {
        let mut offsets = vec![0; n + 1];
        for &k in keys {
            offsets[k + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut items = vec![0; keys.len()];
        for (rec, &k) in keys.iter().enumerate() {
            items[fill[k]] = rec;
            fill[k] += 1;
        }
        Csr { offsets, items }
    }

    fn group(&self, k: usize) -> &[usize] {
        &self.items[self.offsets[k]..self.offsets[k + 1]]
    }

    fn groups(&self) -> usize {
        self.offsets.len() - 1
    }
}

impl Problem {
    fn new(d: &Dataset, rates: &[f64]) -> Problem {
        let feature_of: Vec<usize> = d.records().iter().map(|r| r.feature.index()).collect();
        let bias_of: Vec<usize> = d.records().iter().map(|r| r.bias.index()).collect();
        let by_feature = Csr::build(&feature_of, d.feature_count());
        let by_bias = Csr::build(&bias_of, d.bias_count());
        Problem {
            feature_of,
            bias_of,
            rate: rates.to_vec(),
            weight: d.records().iter().map(|r| r.impressions as f64).collect(),
            by_feature,
            by_bias,
        }
    }

    /// Closed-form weighted least squares for every coordinate of `target`
    /// given the fixed partner values `other`.
    fn update(
        &self,
        groups: &Csr,
        partner_of: &[usize],
        other: &[f64],
        target: &mut [f64],
        rng: &mut impl Rng,
    ) -> usize {
        let mut redrawn = 0;
        for k in 0..groups.groups() {
            let (mut num, mut den) = (0.0, 0.0);
            for &rec in groups.group(k) {
                let p = other[partner_of[rec]];
                num += self.weight[rec] * self.rate[rec] * p;
                den += self.weight[rec] * p * p;
            }
            target[k] = if den > 0.0 {
                (num / den).clamp(0.0, 1.0)
            } else {
                redrawn += 1;
                rng.random::<f64>()
            };
        }
        redrawn
    }

    fn loss(&self, r: &[f64], o: &[f64]) -> f64 {
        (0..self.rate.len())
            .map(|i| {
                let e = self.rate[i] - r[self.feature_of[i]] * o[self.bias_of[i]];
                self.weight[i] * e * e
            })
            .sum()
    }
}
