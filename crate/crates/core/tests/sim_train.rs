mod common;

use std::collections::BTreeMap;

use idlab_core::experiment::desk_simulation;
use idlab_core::sim::exact_rates;
use idlab_core::{
    fit, fit_rates, generate_synthetic, is_identifiable, mcc, predict_relevance, sample_clicks, Dataset,
    SimulationConfig, TrainConfig,
};
use proptest::prelude::*;

fn small(k: usize, seed: u64) -> SimulationConfig {
    let mut sim = desk_simulation(k);
    sim.n_queries = 300;
    sim.seed = seed;
    sim
}

fn ratio_spread(m: &idlab_core::ModelParams, truth: &BTreeMap<String, f64>, min_r: f64) -> f64 {
    let ratios: Vec<f64> = m
        .features()
        .names()
        .iter()
        .filter(|x| truth[*x] > min_r)
        .map(|x| predict_relevance(m, x).unwrap() / truth[x])
        .collect();
    ratios.iter().cloned().fold(f64::MIN, f64::max) - ratios.iter().cloned().fold(f64::MAX, f64::min)
}

#[test]
fn component_count_matches_target() {
    for k in 1..=4 {
        for seed in 0..3 {
            let (d, _) = generate_synthetic(&small(k, seed)).unwrap();
            assert_eq!(is_identifiable(&d).unwrap().1.count(), k, "K={k} seed={seed}");
        }
    }
}

#[test]
fn sampled_rates_follow_ground_truth() {
    let (d, gt) = generate_synthetic(&small(1, 4)).unwrap();
    let clicked = sample_clicks(&d, &gt, 1_000_000, 9).unwrap();
    assert_eq!(clicked.total_impressions(), 1_000_000);
    // Pool by bias factor: each pooled rate must match the weighted truth.
    let mut pooled: BTreeMap<&str, (f64, f64, f64)> = BTreeMap::new();
    for (x, t, c, n) in clicked.named_records() {
        assert!(c <= n);
        let p = gt.relevance[x] * gt.observation[t];
        let e = pooled.entry(t).or_default();
        e.0 += c as f64;
        e.1 += p * n as f64;
        e.2 += p * (1.0 - p) * n as f64;
    }
    for (t, (c, mean, var)) in pooled {
        assert!((c - mean).abs() <= 4.0 * var.sqrt() + 1.0, "{t}: {c} vs {mean}");
    }
}

#[test]
fn simulation_is_a_function_of_config_and_seed() {
    let cfg = small(3, 5);
    let (a, ga) = generate_synthetic(&cfg).unwrap();
    let (b, gb) = generate_synthetic(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ga.tables_tsv(), gb.tables_tsv());
    assert_eq!(ga.queries_tsv(), gb.queries_tsv());
    assert_eq!(sample_clicks(&a, &ga, 50_000, 2).unwrap(), sample_clicks(&b, &gb, 50_000, 2).unwrap());
    assert_ne!(sample_clicks(&a, &ga, 50_000, 2).unwrap(), sample_clicks(&a, &ga, 50_000, 3).unwrap());
}

#[test]
fn noise_free_connected_fit_recovers_relevance() {
    let (d, gt) = generate_synthetic(&small(1, 2)).unwrap();
    let rates = exact_rates(&d, &gt).unwrap();
    let res = fit_rates(&d, &rates, &TrainConfig::default()).unwrap();
    assert_eq!(res.rerandomized, 0);
    assert!(res.final_loss() <= 1e-10, "{}", res.final_loss());
    assert!(ratio_spread(&res.params, &gt.relevance, 0.05) <= 1e-3);
    let truth: Vec<f64> = res.params.features().names().iter().map(|x| gt.relevance[x]).collect();
    assert!(mcc(&truth, res.params.relevance()).unwrap() > 0.9999);
}

#[test]
fn noise_free_disconnected_fit_leaves_scale_per_component() {
    let (d, gt) = generate_synthetic(&small(2, 2)).unwrap();
    let rates = exact_rates(&d, &gt).unwrap();
    let cfg = TrainConfig { seed: 1, ..Default::default() };
    let res = fit_rates(&d, &rates, &cfg).unwrap();
    assert!(res.final_loss() <= 1e-8);
    // Ratios agree within each component; the two components usually differ.
    let (_, cc) = is_identifiable(&d).unwrap();
    let mut per_comp: Vec<Vec<f64>> = vec![Vec::new(); cc.count()];
    for (i, x) in res.params.features().names().iter().enumerate() {
        if gt.relevance[x] > 0.05 {
            let f = d.feature_id(x).unwrap();
            per_comp[cc.component_of_feature(f).unwrap()].push(res.params.relevance()[i] / gt.relevance[x]);
        }
    }
    for c in &per_comp {
        let spread = c.iter().cloned().fold(f64::MIN, f64::max) - c.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 1e-3, "{spread}");
    }
    assert!((per_comp[0][0] - per_comp[1][0]).abs() > 1e-3);
}

#[test]
fn trained_model_predicts_by_feature() {
    let d = Dataset::from_counts([("a", "p1", 5, 10), ("b", "p1", 2, 10), ("a", "p2", 2, 10)]).unwrap();
    let m = fit(&d, &TrainConfig::default()).unwrap().params;
    let ra = predict_relevance(&m, "a").unwrap();
    let rb = predict_relevance(&m, "b").unwrap();
    assert!((ra / rb - 2.5).abs() < 1e-6);
    assert!(predict_relevance(&m, "zzz").is_err());
}

fn arb_log() -> impl Strategy<Value = Vec<(u8, u8, u64, u64)>> {
    prop::collection::vec((0u8..6, 0u8..5, 0u64..30, 1u64..30), 1..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn parameters_stay_in_unit_interval(log in arb_log(), steps in 1usize..40, seed in any::<u64>()) {
        let d = Dataset::from_counts(log.iter().map(|&(x, t, c, n)| (format!("x{x}"), format!("t{t}"), c.min(n), n))).unwrap();
        let cfg = TrainConfig { max_steps: steps, seed, ..Default::default() };
        let res = fit(&d, &cfg).unwrap();
        prop_assert!(res.params.relevance().iter().chain(res.params.observation()).all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(res.loss_trace.iter().all(|l| l.is_finite() && *l >= 0.0));
    }

    #[test]
    fn correlation_is_affine_invariant(
        v in prop::collection::vec(-10.0f64..10.0, 3..40),
        a in 0.01f64..100.0,
        b in -50.0f64..50.0,
    ) {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        prop_assume!(v.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max) > 1e-3);
        let up: Vec<f64> = v.iter().map(|x| a * x + b).collect();
        let down: Vec<f64> = v.iter().map(|x| -a * x + b).collect();
        prop_assert!((mcc(&v, &up).unwrap() - 1.0).abs() < 1e-9);
        prop_assert!((mcc(&v, &down).unwrap() + 1.0).abs() < 1e-9);
    }
}
