//! Click-log dataset model, identifier interning and the TSV file formats.
//!
//! A dataset file holds one aggregated observation per line:
//!
//! ```text
//! # feature_id <TAB> bias_id <TAB> clicks <TAB> impressions
//! d17	p3	4	20
//! ```
//!
//! A bias-feature file maps each bias factor to a comma-separated vector:
//!
//! ```text
//! p3	3.0
//! ```
//!
//! Lines starting with `#` and blank lines are ignored in both formats.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Dense index of an interned ranking feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureId(pub u32);

/// Dense index of an interned bias factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BiasFactorId(pub u32);

impl FeatureId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl BiasFactorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Bijection between opaque string ids and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    /// Interns names in sorted order so the numbering is canonical.
    pub fn from_sorted<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = Interner::default();
        for name in names {
            out.intern(name.into());
        }
        out
    }

    fn intern(&mut self, name: String) -> u32 {
        if let Some(&i) = self.index.get(&name) {
            return i;
        }
        let i = self.names.len() as u32;
        self.index.insert(name.clone(), i);
        self.names.push(name);
        i
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: u32) -> &str {
        &self.names[i as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Aggregated clicks of one (feature, bias factor) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteractionRecord {
    pub feature: FeatureId,
    pub bias: BiasFactorId,
    pub clicks: u64,
    pub impressions: u64,
}

impl InteractionRecord {
    pub fn click_rate(&self) -> f64 {
        self.clicks as f64 / self.impressions as f64
    }
}

/// Immutable, canonical click log.
///
/// Records are unique per (feature, bias) key and sorted by it; identifiers are
/// interned in lexicographic order, so two datasets built from the same
/// observations in any order compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    features: Interner,
    biases: Interner,
    records: Vec<InteractionRecord>,
}

impl Dataset {
    /// Builds a dataset from named counts, summing duplicate keys.
    ///
    /// Every entry must satisfy `clicks <= impressions` and `impressions > 0`;
    /// the position of the first offending entry (1-based) is reported.
    pub fn from_counts<I, F, B>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (F, B, u64, u64)>,
        F: AsRef<str>,
        B: AsRef<str>,
    {
        let mut agg: BTreeMap<(String, String), (u64, u64)> = BTreeMap::new();
        for (n, (f, b, clicks, impressions)) in entries.into_iter().enumerate() {
            check_counts(n + 1, clicks, impressions)?;
            let slot = agg
                .entry((f.as_ref().to_string(), b.as_ref().to_string()))
                .or_insert((0, 0));
            slot.0 += clicks;
            slot.1 += impressions;
        }
        Ok(Self::from_aggregated(agg))
    }

    fn from_aggregated(agg: BTreeMap<(String, String), (u64, u64)>) -> Self {
        let feature_names: BTreeSet<&str> = agg.keys().map(|(f, _)| f.as_str()).collect();
        let bias_names: BTreeSet<&str> = agg.keys().map(|(_, b)| b.as_str()).collect();
        let features = Interner::from_sorted(feature_names);
        let biases = Interner::from_sorted(bias_names);
        let records = agg
            .iter()
            .map(|((f, b), &(clicks, impressions))| InteractionRecord {
                feature: FeatureId(features.get(f).unwrap()),
                bias: BiasFactorId(biases.get(b).unwrap()),
                clicks,
                impressions,
            })
            .collect();
        Dataset {
            features,
            biases,
            records,
        }
    }

    pub fn records(&self) -> &[InteractionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn bias_count(&self) -> usize {
        self.biases.len()
    }

    pub fn features(&self) -> &Interner {
        &self.features
    }

    pub fn biases(&self) -> &Interner {
        &self.biases
    }

    pub fn feature_name(&self, id: FeatureId) -> &str {
        self.features.name(id.0)
    }

    pub fn bias_name(&self, id: BiasFactorId) -> &str {
        self.biases.name(id.0)
    }

    pub fn feature_id(&self, name: &str) -> Option<FeatureId> {
        self.features.get(name).map(FeatureId)
    }

    pub fn bias_id(&self, name: &str) -> Option<BiasFactorId> {
        self.biases.get(name).map(BiasFactorId)
    }

    pub fn total_impressions(&self) -> u64 {
        self.records.iter().map(|r| r.impressions).sum()
    }

    pub fn total_clicks(&self) -> u64 {
        self.records.iter().map(|r| r.clicks).sum()
    }

    /// Records as `(feature name, bias name, clicks, impressions)`.
    pub fn named_records(&self) -> impl Iterator<Item = (&str, &str, u64, u64)> + '_ {
        self.records.iter().map(move |r| {
            (
                self.feature_name(r.feature),
                self.bias_name(r.bias),
                r.clicks,
                r.impressions,
            )
        })
    }

    /// Rebuilds the dataset from a transformed view of its named records.
    ///
    /// Ids that no longer occur are dropped from interning.
    pub fn map_records<F>(&self, mut f: F) -> Result<Dataset>
    where
        F: FnMut(&str, &str, u64, u64) -> Option<(String, String, u64, u64)>,
    {
        let rows: Vec<_> = self
            .named_records()
            .filter_map(|(x, t, c, n)| f(x, t, c, n))
            .collect();
        Dataset::from_counts(rows)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# feature_id\tbias_id\tclicks\timpressions\n");
        for (f, b, c, n) in self.named_records() {
            let _ = writeln!(out, "{f}\t{b}\t{c}\t{n}");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

fn check_counts(line: usize, clicks: u64, impressions: u64) -> Result<()> {
    if impressions == 0 {
        return Err(Error::Parse {
            line,
            message: "impressions must be positive".into(),
        });
    }
    if clicks > impressions {
        return Err(Error::ClicksExceedImpressions {
            line,
            clicks,
            impressions,
        });
    }
    Ok(())
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
}

/// Parses the dataset TSV format. Fields may be separated by tabs or runs of
/// spaces.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut agg: BTreeMap<(String, String), (u64, u64)> = BTreeMap::new();
    for (line, raw) in content_lines(text) {
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let count = |s: &str, what: &str| {
            s.parse::<u64>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid {what} `{s}`"),
            })
        };
        let clicks = count(fields[2], "click count")?;
        let impressions = count(fields[3], "impression count")?;
        check_counts(line, clicks, impressions)?;
        let slot = agg
            .entry((fields[0].to_string(), fields[1].to_string()))
            .or_insert((0, 0));
        slot.0 += clicks;
        slot.1 += impressions;
    }
    if agg.is_empty() {
        return Err(Error::Empty);
    }
    Ok(Dataset::from_aggregated(agg))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

/// Keeps each record independently with probability `ratio`.
pub fn subsample(d: &Dataset, ratio: f64, seed: u64) -> Result<Dataset> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::OutOfRange {
            name: "ratio",
            value: ratio,
            range: "(0, 1]",
        });
    }
    if ratio == 1.0 {
        return Ok(d.clone());
    }
    let mut rng = seed::rng(seed);
    d.map_records(|x, t, c, n| {
        rng.random_bool(ratio)
            .then(|| (x.to_string(), t.to_string(), c, n))
    })
}

/// F-dimensional descriptors of bias factors, used as merge distances.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BiasFeatureTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl BiasFeatureTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, bias: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let bias = bias.into();
        if vector.is_empty() {
            return Err(Error::DimensionMismatch {
                bias,
                expected: self.dim.max(1),
                found: 0,
            });
        }
        if let Some(v) = vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::OutOfRange {
                name: "bias feature",
                value: *v,
                range: "finite values",
            });
        }
        if self.vectors.is_empty() {
            self.dim = vector.len();
        } else if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                bias,
                expected: self.dim,
                found: vector.len(),
            });
        }
        self.vectors.insert(bias, vector);
        Ok(())
    }

    /// Rank as a 1-dimensional feature for position ids of the form `p<k>`.
    pub fn from_position_ids<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut table = Self::new();
        for id in ids {
            let id = id.as_ref();
            let rank: f64 = id
                .strip_prefix('p')
                .and_then(|r| r.parse::<u32>().ok())
                .ok_or_else(|| Error::Config(format!("`{id}` is not a position id")))?
                .into();
            table.insert(id, vec![rank])?;
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, bias: &str) -> Option<&[f64]> {
        self.vectors.get(bias).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Ids present in the table but absent from `d`.
    pub fn unknown_ids<'a>(&'a self, d: &Dataset) -> Vec<&'a str> {
        self.vectors
            .keys()
            .filter(|k| d.bias_id(k).is_none())
            .map(String::as_str)
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# bias_id\tv1,v2,...\n");
        for (k, v) in &self.vectors {
            let joined: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "{k}\t{}", joined.join(","));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

pub fn parse_bias_features(text: &str) -> Result<BiasFeatureTable> {
    let mut table = BiasFeatureTable::new();
    for (line, raw) in content_lines(text) {
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let vector = fields[1]
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("non-numeric value `{s}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        table.insert(fields[0], vector).map_err(|e| match e {
            Error::DimensionMismatch { .. } | Error::OutOfRange { .. } => Error::Parse {
                line,
                message: e.to_string(),
            },
            other => other,
        })?;
    }
    if table.is_empty() {
        return Err(Error::Empty);
    }
    Ok(table)
}

pub fn load_bias_features(path: impl AsRef<Path>) -> Result<BiasFeatureTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bias_features(&text)
}
