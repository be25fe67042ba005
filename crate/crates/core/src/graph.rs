//! Identifiability graph: one node per bias factor, an edge whenever two bias
//! factors were observed with a common feature. Relevance is recoverable up to
//! a global scale exactly when this graph is connected.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::data::{BiasFactorId, Dataset, FeatureId};
use crate::error::{Error, Result};
use crate::unionfind::UnionFind;

pub const DEFAULT_WITNESS_CAP: usize = 8;

/// Features co-occurring with more bias factors than this trigger a warning,
/// since each one materializes a quadratic clique.
pub const CLIQUE_WARN_THRESHOLD: usize = 1_000;

#[derive(Debug, Clone)]
pub struct IdentifiabilityGraph {
    node_count: usize,
    /// Keyed by `(s, t)` with `s < t`; values are witness features, capped.
    edges: BTreeMap<(BiasFactorId, BiasFactorId), Vec<FeatureId>>,
    /// Bias factors seen with each feature, sorted.
    feature_biases: Vec<Vec<BiasFactorId>>,
}

impl IdentifiabilityGraph {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_biases.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (BiasFactorId, BiasFactorId)> + '_ {
        self.edges.keys().copied()
    }

    pub fn has_edge(&self, s: BiasFactorId, t: BiasFactorId) -> bool {
        self.edges.contains_key(&ordered(s, t))
    }

    pub fn witnesses(&self, s: BiasFactorId, t: BiasFactorId) -> Option<&[FeatureId]> {
        self.edges.get(&ordered(s, t)).map(Vec::as_slice)
    }

    /// Bias factors co-occurring with `x`.
    pub fn biases_of(&self, x: FeatureId) -> &[BiasFactorId] {
        &self.feature_biases[x.index()]
    }

    /// Graphviz rendering with bias-factor names as labels.
    pub fn to_dot(&self, d: &Dataset) -> String {
        let mut out = String::from("graph ig {\n");
        for i in 0..self.node_count {
            let name = d.bias_name(BiasFactorId(i as u32));
            let _ = writeln!(out, "  n{i} [label=\"{}\"];", name.replace('"', "\\\""));
        }
        for ((s, t), w) in &self.edges {
            let _ = writeln!(out, "  n{} -- n{} [weight={}];", s.0, t.0, w.len());
        }
        out.push_str("}\n");
        out
    }
}

fn ordered(s: BiasFactorId, t: BiasFactorId) -> (BiasFactorId, BiasFactorId) {
    if s <= t {
        (s, t)
    } else {
        (t, s)
    }
}

pub fn build_ig(d: &Dataset) -> Result<IdentifiabilityGraph> {
    build_ig_with(d, DEFAULT_WITNESS_CAP)
}

/// Builds the graph keeping at most `witness_cap` witness features per edge.
pub fn build_ig_with(d: &Dataset, witness_cap: usize) -> Result<IdentifiabilityGraph> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut feature_biases = vec![Vec::new(); d.feature_count()];
    for r in d.records() {
        feature_biases[r.feature.index()].push(r.bias);
    }
    for list in &mut feature_biases {
        list.sort_unstable();
        list.dedup();
    }

    let mut edges: BTreeMap<(BiasFactorId, BiasFactorId), Vec<FeatureId>> = BTreeMap::new();
    for (x, biases) in feature_biases.iter().enumerate() {
        if biases.len() > CLIQUE_WARN_THRESHOLD {
            log::warn!(
                "feature `{}` co-occurs with {} bias factors; its clique has {} edges",
                d.feature_name(FeatureId(x as u32)),
                biases.len(),
                biases.len() * (biases.len() - 1) / 2
            );
        }
        for (i, &s) in biases.iter().enumerate() {
            for &t in &biases[i + 1..] {
                let w = edges.entry((s, t)).or_default();
                if w.len() < witness_cap {
                    w.push(FeatureId(x as u32));
                }
            }
        }
    }

    Ok(IdentifiabilityGraph {
        node_count: d.bias_count(),
        edges,
        feature_biases,
    })
}

/// Connected components of an identifiability graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentDecomposition {
    component_of: Vec<usize>,
    nodes: Vec<Vec<BiasFactorId>>,
    features: Vec<Vec<FeatureId>>,
}

impl ComponentDecomposition {
    pub fn count(&self) -> usize {
        self.nodes.len()
    }

    pub fn component_of(&self, t: BiasFactorId) -> usize {
        self.component_of[t.index()]
    }

    pub fn nodes(&self, c: usize) -> &[BiasFactorId] {
        &self.nodes[c]
    }

    /// Features observed with any bias factor of component `c`.
    pub fn features(&self, c: usize) -> &[FeatureId] {
        &self.features[c]
    }

    /// Component sizes, largest first.
    pub fn sizes_desc(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.nodes.iter().map(Vec::len).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Component holding feature `x`, if any.
    pub fn component_of_feature(&self, x: FeatureId) -> Option<usize> {
        self.features.iter().position(|fs| fs.binary_search(&x).is_ok())
    }
}

/// Components numbered in order of their smallest bias-factor index.
pub fn components(g: &IdentifiabilityGraph) -> ComponentDecomposition {
    let mut uf = UnionFind::new(g.node_count);
    for (s, t) in g.edges() {
        uf.union(s.index(), t.index());
    }
    let mut label_of_root = vec![usize::MAX; g.node_count];
    let mut component_of = vec![0; g.node_count];
    let mut nodes: Vec<Vec<BiasFactorId>> = Vec::new();
    for i in 0..g.node_count {
        let root = uf.find(i);
        if label_of_root[root] == usize::MAX {
            label_of_root[root] = nodes.len();
            nodes.push(Vec::new());
        }
        let c = label_of_root[root];
        component_of[i] = c;
        nodes[c].push(BiasFactorId(i as u32));
    }
    let mut features = vec![Vec::new(); nodes.len()];
    for (x, biases) in g.feature_biases.iter().enumerate() {
        if let Some(t) = biases.first() {
            features[component_of[t.index()]].push(FeatureId(x as u32));
        }
    }
    ComponentDecomposition {
        component_of,
        nodes,
        features,
    }
}

/// Connectivity verdict plus the decomposition used to reach it.
pub fn is_identifiable(d: &Dataset) -> Result<(bool, ComponentDecomposition)> {
    let g = build_ig(d)?;
    let cc = components(&g);
    Ok((cc.count() == 1, cc))
}

/// Builds an alternative parameterization that reproduces every click rate of
/// `(relevance, observation)` on `d` while scaling relevance by `alpha` on the
/// features of component 0 and by `beta` elsewhere. Observation is scaled
/// reciprocally per component.
///
/// When the graph has two or more components and `alpha != beta`, the result
/// fits the data exactly yet is not a global rescaling of `relevance`.
pub fn scaling_counterexample(
    cc: &ComponentDecomposition,
    relevance: &[f64],
    observation: &[f64],
    alpha: f64,
    beta: f64,
) -> (Vec<f64>, Vec<f64>) {
    let scale = |c: usize| if c == 0 { alpha } else { beta };
    let mut r = relevance.to_vec();
    for c in 0..cc.count() {
        for x in cc.features(c) {
            r[x.index()] *= scale(c);
        }
    }
    let o = observation
        .iter()
        .enumerate()
        .map(|(t, &v)| v / scale(cc.component_of(BiasFactorId(t as u32))))
        .collect();
    (r, o)
}
