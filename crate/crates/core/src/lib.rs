//! Identifiability analysis and repair for click-based learning to rank.
//!
//! Under the examination hypothesis a click log only determines relevance
//! up to a global scale when its identifiability graph is connected. This
//! crate builds that graph from a click log, plans repairs for disconnected
//! logs (node intervention and node merging), fits relevance and observation
//! tables, simulates click logs and runs seeded experiments.
//!
//! ```
//! use idlab_core::{is_identifiable, Dataset};
//!
//! let d = Dataset::from_counts([("x1", "p1", 3, 10), ("x1", "p2", 1, 10), ("x2", "p3", 2, 10)])?;
//! let (connected, cc) = is_identifiable(&d)?;
//! assert!(!connected);
//! assert_eq!(cc.count(), 2);
//! # Ok::<(), idlab_core::Error>(())
//! ```

pub mod data;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod repair;
pub mod seed;
pub mod sim;
pub mod theory;
pub mod train;
pub mod unionfind;

pub use data::{
    load_bias_features, load_dataset, parse_bias_features, parse_dataset, subsample, BiasFactorId,
    BiasFeatureTable, Dataset, FeatureId, InteractionRecord,
};
pub use error::{Error, Result};
pub use graph::{build_ig, components, is_identifiable, ComponentDecomposition, IdentifiabilityGraph};
pub use metrics::{evaluate, mcc, ndcg_at_k, EvalReport, ScoredDoc};
pub use repair::{
    apply_merge, derive_guesses, intervention_cost, merging_cost, plan_intervention, plan_merge,
    predicted_swap_variance, CostStrategy, GuessModels, InterventionPlan, MergePlan,
};
pub use sim::{
    apply_intervention, generate_synthetic, relevance_from_level, sample_clicks, GroundTruth,
    RankedList, SimulationConfig,
};
pub use theory::{disconnection_probability, identifiability_probability, merging_error_bound};
pub use train::{fit, fit_rates, predict_relevance, FitResult, ModelParams, TrainConfig};
