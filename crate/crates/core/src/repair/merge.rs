use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{BiasFactorId, BiasFeatureTable, Dataset};
use crate::error::{Error, Result};
use crate::graph::{build_ig, components};
use crate::repair::mst::prim;
use crate::unionfind::UnionFind;

/// Euclidean distance between the bias features of `t1` and `t2`.
pub fn merging_cost(t1: &str, t2: &str, bf: &BiasFeatureTable) -> Result<f64> {
    let a = bf.get(t1).ok_or_else(|| Error::MissingBiasFeature(t1.to_string()))?;
    let b = bf.get(t2).ok_or_else(|| Error::MissingBiasFeature(t2.to_string()))?;
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            bias: t2.to_string(),
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(distance(a, b))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Treat `bias_a` and `bias_b` as one bias factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEntry {
    pub bias_a: String,
    pub bias_b: String,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergePlan {
    pub entries: Vec<MergeEntry>,
    pub total_cost: f64,
    /// Bias ids that change name, mapped to their merged id. Ids absent
    /// from the map keep their name.
    pub relabel: BTreeMap<String, String>,
}

impl MergePlan {
    /// Builds a plan from explicit pairs, chaining merges that share an id.
    /// Costs are taken from `bf` when given and are zero otherwise.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, S)], bf: Option<&BiasFeatureTable>) -> Result<Self> {
        let mut entries = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let (a, b) = (a.as_ref(), b.as_ref());
            let cost = match bf {
                Some(bf) => merging_cost(a, b, bf)?,
                None => 0.0,
            };
            entries.push(MergeEntry {
                bias_a: a.to_string(),
                bias_b: b.to_string(),
                cost,
            });
        }
        Ok(Self::from_entries(entries))
    }

    fn from_entries(entries: Vec<MergeEntry>) -> Self {
        let mut names: Vec<String> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut id = |n: &str, names: &mut Vec<String>| -> usize {
            *index.entry(n.to_string()).or_insert_with(|| {
                names.push(n.to_string());
                names.len() - 1
            })
        };
        let pairs: Vec<(usize, usize)> = entries
            .iter()
            .map(|e| (id(&e.bias_a, &mut names), id(&e.bias_b, &mut names)))
            .collect();
        let mut uf = UnionFind::new(names.len());
        // Current label of each group, keyed by the group's root.
        let mut label: Vec<String> = names.clone();
        for (a, b) in pairs {
            let (ra, rb) = (uf.find(a), uf.find(b));
            if ra == rb {
                continue;
            }
            let (la, lb) = (&label[ra], &label[rb]);
            let merged = if la <= lb {
                format!("merge({la},{lb})")
            } else {
                format!("merge({lb},{la})")
            };
            uf.union(ra, rb);
            let root = uf.find(ra);
            label[root] = merged;
        }
        let mut relabel = BTreeMap::new();
        for (i, n) in names.iter().enumerate() {
            let root = uf.find(i);
            if &label[root] != n {
                relabel.insert(n.clone(), label[root].clone());
            }
        }
        let total_cost = entries.iter().map(|e| e.cost).sum();
        MergePlan {
            entries,
            total_cost,
            relabel,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Name of `bias` after the merge.
    pub fn target<'a>(&'a self, bias: &'a str) -> &'a str {
        self.relabel.get(bias).map(String::as_str).unwrap_or(bias)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# bias_a\tbias_b\tcost\tmerged_id\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{:?}\t{}",
                e.bias_a,
                e.bias_b,
                e.cost,
                self.target(&e.bias_a)
            );
        }
        out
    }
}

/// Plans `K - 1` merges that connect the identifiability graph of `d`.
pub fn plan_merge(d: &Dataset, bf: &BiasFeatureTable) -> Result<MergePlan> {
    let vectors: Vec<&[f64]> = d
        .biases()
        .names()
        .iter()
        .map(|n| bf.get(n).ok_or_else(|| Error::MissingBiasFeature(n.clone())))
        .collect::<Result<_>>()?;
    let graph = build_ig(d)?;
    let cc = components(&graph);
    let tree = prim(cc.count(), |i, j| {
        let mut best: Option<(f64, (BiasFactorId, BiasFactorId))> = None;
        for &a in cc.nodes(i) {
            for &b in cc.nodes(j) {
                let c = distance(vectors[a.index()], vectors[b.index()]);
                if best.is_none_or(|(bc, _)| c < bc) {
                    best = Some((c, (a, b)));
                }
            }
        }
        best.expect("components are non-empty")
    });
    let entries = tree
        .into_iter()
        .map(|(_, _, cost, (a, b))| {
            let (a, b) = (d.bias_name(a), d.bias_name(b));
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            MergeEntry {
                bias_a: a.to_string(),
                bias_b: b.to_string(),
                cost,
            }
        })
        .collect();
    Ok(MergePlan::from_entries(entries))
}

/// Relabels the bias ids of `d` and aggregates records that now coincide.
pub fn apply_merge(d: &Dataset, plan: &MergePlan) -> Result<Dataset> {
    for target in plan.relabel.values() {
        if d.bias_id(target).is_some() && !plan.relabel.contains_key(target) {
            return Err(Error::RelabelCollision(target.clone()));
        }
    }
    d.map_records(|x, t, c, n| Some((x.to_string(), plan.target(t).to_string(), c, n)))
}
