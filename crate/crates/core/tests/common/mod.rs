//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use idlab_core::seed;
use idlab_core::{BiasFeatureTable, Dataset, GroundTruth};
use rand::Rng;

/// Rank of a dense matrix by Gaussian elimination with partial pivoting.
pub fn rank(mut m: Vec<Vec<f64>>) -> usize {
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())) else {
            break;
        };
        if m[p][c].abs() < 1e-9 {
            continue;
        }
        m.swap(r, p);
        for i in 0..m.len() {
            if i != r {
                let f = m[i][c] / m[r][c];
                if f != 0.0 {
                    for j in c..cols {
                        m[i][j] -= f * m[r][j];
                    }
                }
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

/// Log-linear identifiability oracle. Each record `(x, t)` constrains
/// `log r(x) + log o(t)`; relevance is identifiable up to one scale exactly
/// when every difference `log r(x1) - log r(x2)` lies in the row space of
/// those constraints.
pub fn null_space_identifiable(records: &[(usize, usize)], nx: usize, nt: usize) -> bool {
    let rows: Vec<Vec<f64>> = records
        .iter()
        .map(|&(x, t)| {
            let mut row = vec![0.0; nx + nt];
            row[x] = 1.0;
            row[nx + t] = 1.0;
            row
        })
        .collect();
    let base = rank(rows.clone());
    let features: BTreeSet<usize> = records.iter().map(|r| r.0).collect();
    let features: Vec<usize> = features.into_iter().collect();
    features.windows(2).all(|w| {
        let mut v = vec![0.0; nx + nt];
        v[w[0]] = 1.0;
        v[w[1]] = -1.0;
        let mut aug = rows.clone();
        aug.push(v);
        rank(aug) == base
    })
}

/// Record index pairs of a dataset.
pub fn index_pairs(d: &Dataset) -> Vec<(usize, usize)> {
    d.records().iter().map(|r| (r.feature.index(), r.bias.index())).collect()
}

/// Bias-factor components by breadth-first search over the bipartite
/// feature/bias graph, each sorted, ordered by smallest member.
pub fn oracle_components(d: &Dataset) -> Vec<Vec<usize>> {
    let nx = d.feature_count();
    let nt = d.bias_count();
    let mut adj = vec![Vec::new(); nx + nt];
    for (x, t) in index_pairs(d) {
        adj[x].push(nx + t);
        adj[nx + t].push(x);
    }
    let mut seen = vec![false; nx + nt];
    let mut out = Vec::new();
    for start in nx..nx + nt {
        if seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            if v >= nx {
                comp.push(v - nx);
            }
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Minimum spanning-tree weight by enumerating every labelled tree on `k`
/// vertices through its Prüfer sequence.
pub fn brute_force_mst(k: usize, w: impl Fn(usize, usize) -> f64) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    if k == 2 {
        return w(0, 1);
    }
    let len = k - 2;
    let total = k.pow(len as u32);
    let mut best = f64::INFINITY;
    let mut seq = vec![0usize; len];
    for code in 0..total {
        let mut c = code;
        for s in seq.iter_mut() {
            *s = c % k;
            c /= k;
        }
        let mut degree = vec![1usize; k];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut sum = 0.0;
        for &s in &seq {
            let leaf = (0..k).find(|&v| degree[v] == 1).unwrap();
            sum += w(leaf, s);
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..k).filter(|&v| degree[v] == 1).collect();
        sum += w(rest[0], rest[1]);
        best = best.min(sum);
    }
    best
}

/// Random sparse dataset with up to `max_x` features and `max_t` bias
/// factors; each cell is present with probability `density`.
pub fn random_dataset(case: u64, max_x: usize, max_t: usize, density: f64) -> Dataset {
    let mut rng = seed::child_rng(0xd5, &[case]);
    loop {
        let nx = rng.random_range(1..=max_x);
        let nt = rng.random_range(1..=max_t);
        let mut rows = Vec::new();
        for x in 0..nx {
            for t in 0..nt {
                if rng.random_bool(density) {
                    let n = rng.random_range(1..20u64);
                    rows.push((format!("x{x}"), format!("t{t}"), rng.random_range(0..=n), n));
                }
            }
        }
        if !rows.is_empty() {
            return Dataset::from_counts(rows).unwrap();
        }
    }
}

/// Dataset made of `k` disjoint blocks, each a small connected bipartite
/// graph, with a random scalar bias feature per bias factor.
pub fn blocky_dataset(case: u64, k: usize) -> (Dataset, BiasFeatureTable) {
    let mut rng = seed::child_rng(0xb1, &[case]);
    let mut rows = Vec::new();
    let mut bf = BiasFeatureTable::new();
    for b in 0..k {
        let nt = rng.random_range(1..=3);
        let nx = rng.random_range(1..=3);
        for t in 0..nt {
            let v: Vec<f64> = (0..2).map(|_| rng.random_range(-5.0..5.0)).collect();
            bf.insert(format!("b{b}t{t}"), v).unwrap();
        }
        // A path over the block's bias factors keeps the block connected.
        for t in 0..nt {
            let x = t % nx;
            rows.push((format!("b{b}x{x}"), format!("b{b}t{t}"), 1u64, 4u64));
            if t + 1 < nt {
                rows.push((format!("b{b}x{x}"), format!("b{b}t{}", t + 1), 1, 4));
            }
        }
        for x in 0..nx {
            let t = rng.random_range(0..nt);
            rows.push((format!("b{b}x{x}"), format!("b{b}t{t}"), 1, 4));
        }
    }
    (Dataset::from_counts(rows).unwrap(), bf)
}

/// Cheapest swap cost between two oracle components under uniform-floor
/// guesses, over both directions.
pub fn oracle_swap_weight(
    d: &Dataset,
    comps: &[Vec<usize>],
    r: &[f64],
    o: &[f64],
    a: usize,
    b: usize,
) -> f64 {
    let floor = |v: f64| v.max(1e-6);
    let cost = |x: usize, t1: usize, t2: usize| 1.0 / (floor(r[x]) * floor(o[t1])) + 1.0 / (floor(r[x]) * floor(o[t2])) - 2.0;
    let pairs = index_pairs(d);
    let mut best = f64::INFINITY;
    for (from, to) in [(a, b), (b, a)] {
        for &(x, t1) in pairs.iter().filter(|p| comps[from].contains(&p.1)) {
            for &t2 in &comps[to] {
                best = best.min(cost(x, t1, t2));
            }
        }
    }
    best
}

/// Closest pair of bias features between two oracle components.
pub fn oracle_merge_weight(d: &Dataset, comps: &[Vec<usize>], bf: &BiasFeatureTable, a: usize, b: usize) -> f64 {
    let mut best = f64::INFINITY;
    for &s in &comps[a] {
        for &t in &comps[b] {
            let u = bf.get(d.bias_name(idlab_core::BiasFactorId(s as u32))).unwrap();
            let v = bf.get(d.bias_name(idlab_core::BiasFactorId(t as u32))).unwrap();
            let dist = u.iter().zip(v).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            best = best.min(dist);
        }
    }
    best
}

/// Appends one zero-click record per `(feature, bias)` pair.
pub fn with_records(d: &Dataset, extra: &[(String, String)]) -> Dataset {
    let rows: Vec<(String, String, u64, u64)> = d
        .named_records()
        .map(|(x, t, c, n)| (x.to_string(), t.to_string(), c, n))
        .chain(extra.iter().map(|(x, t)| (x.clone(), t.clone(), 0, 1)))
        .collect();
    Dataset::from_counts(rows).unwrap()
}

/// Impression-weighted exact click rates of `merged` records, where every
/// original record `(x, t)` maps to `(x, relabel(t))`.
pub fn merged_exact_rates(
    original: &Dataset,
    merged: &Dataset,
    gt: &GroundTruth,
    relabel: &BTreeMap<String, String>,
) -> Vec<f64> {
    let mut acc: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    for (x, t, _, n) in original.named_records() {
        let target = relabel.get(t).cloned().unwrap_or_else(|| t.to_string());
        let rate = gt.relevance[x] * gt.observation[t];
        let e = acc.entry((x.to_string(), target)).or_insert((0.0, 0.0));
        e.0 += rate * n as f64;
        e.1 += n as f64;
    }
    merged
        .named_records()
        .map(|(x, t, _, _)| {
            let (s, w) = acc[&(x.to_string(), t.to_string())];
            s / w
        })
        .collect()
}

/// `|D|` at which the closed-form connectivity estimate reaches `p`.
pub fn dsize_for_probability(x: usize, t: usize, p: f64) -> usize {
    let (mut lo, mut hi) = (1.0f64, 1e8f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if idlab_core::identifiability_probability(mid, x as f64, t as f64).unwrap() < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.round() as usize
}
