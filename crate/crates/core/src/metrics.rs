//! Ranking-quality metrics against known relevance.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::RankedList;

/// Cutoffs reported by [`evaluate`].
pub const NDCG_CUTOFFS: [usize; 4] = [1, 3, 5, 10];

/// Pearson correlation between true and predicted relevance.
pub fn mcc(true_r: &[f64], pred_r: &[f64]) -> Result<f64> {
    if true_r.len() != pred_r.len() {
        return Err(Error::LengthMismatch(true_r.len(), pred_r.len()));
    }
    if true_r.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let n = true_r.len() as f64;
    let mt = true_r.iter().sum::<f64>() / n;
    let mp = pred_r.iter().sum::<f64>() / n;
    let (mut num, mut vt, mut vp) = (0.0, 0.0, 0.0);
    for (t, p) in true_r.iter().zip(pred_r) {
        let (dt, dp) = (t - mt, p - mp);
        num += dt * dp;
        vt += dt * dt;
        vp += dp * dp;
    }
    if vt == 0.0 || vp == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((num / (vt.sqrt() * vp.sqrt())).clamp(-1.0, 1.0))
}

/// One document of a query list: its feature index (used to break score
/// ties), true relevance level and predicted score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredDoc {
    pub feature: usize,
    pub level: u32,
    pub score: f64,
}

fn gain(level: u32) -> f64 {
    2f64.powi(level as i32) - 1.0
}

fn dcg(levels: impl Iterator<Item = u32>, k: usize) -> f64 {
    levels
        .take(k)
        .enumerate()
        .map(|(i, y)| gain(y) / ((i + 2) as f64).log2())
        .sum()
}

/// nDCG@k of one list; a list without any relevant document scores 1.
pub fn ndcg_list(docs: &[ScoredDoc], k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::OutOfRange {
            name: "k",
            value: k as f64,
            range: "[1, inf)",
        });
    }
    if docs.is_empty() {
        return Err(Error::Empty);
    }
    let mut pred = docs.to_vec();
    pred.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then(a.feature.cmp(&b.feature))
    });
    let mut ideal: Vec<u32> = docs.iter().map(|d| d.level).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal.into_iter(), k);
    if idcg == 0.0 {
        return Ok(1.0);
    }
    Ok(dcg(pred.iter().map(|d| d.level), k) / idcg)
}

/// Mean nDCG@k over query lists.
pub fn ndcg_at_k(queries: &[Vec<ScoredDoc>], k: usize) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::Empty);
    }
    let mut total = 0.0;
    for q in queries {
        total += ndcg_list(q, k)?;
    }
    Ok(total / queries.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mcc: f64,
    pub ndcg: BTreeMap<usize, f64>,
}

/// Scores predicted relevance against ground truth.
///
/// MCC runs over `features` (every feature with a true value when `None`).
/// Features without a prediction score 0.
pub fn evaluate(
    predicted: &BTreeMap<String, f64>,
    truth: &BTreeMap<String, f64>,
    queries: &[RankedList],
    features: Option<&[String]>,
) -> Result<EvalReport> {
    let names: Vec<&String> = match features {
        Some(f) => f.iter().collect(),
        None => truth.keys().collect(),
    };
    let mut t = Vec::with_capacity(names.len());
    let mut p = Vec::with_capacity(names.len());
    for n in names {
        t.push(*truth.get(n).ok_or_else(|| Error::UnknownFeature(n.clone()))?);
        p.push(predicted.get(n).copied().unwrap_or(0.0));
    }
    let mcc = mcc(&t, &p)?;

    // Feature indices follow sorted id order, like dataset interning.
    let index: BTreeMap<&str, usize> = queries
        .iter()
        .flat_map(|q| q.docs.iter().map(|(d, _)| d.as_str()))
        .chain(predicted.keys().map(String::as_str))
        .map(|d| (d, 0))
        .collect::<BTreeMap<_, _>>()
        .into_keys()
        .enumerate()
        .map(|(i, d)| (d, i))
        .collect();
    let lists: Vec<Vec<ScoredDoc>> = queries
        .iter()
        .map(|q| {
            q.docs
                .iter()
                .map(|(d, y)| ScoredDoc {
                    feature: index[d.as_str()],
                    level: *y,
                    score: predicted.get(d).copied().unwrap_or(0.0),
                })
                .collect()
        })
        .collect();
    let mut ndcg = BTreeMap::new();
    for k in NDCG_CUTOFFS {
        ndcg.insert(k, ndcg_at_k(&lists, k)?);
    }
    Ok(EvalReport { mcc, ndcg })
}
