//! Repair planning for datasets whose identifiability graph is disconnected.
//!
//! Both planners treat each connected component as a vertex of a complete
//! graph and connect them with a minimum spanning tree, so a graph with `K`
//! components always receives exactly `K - 1` repairs.

mod intervention;
mod merge;
pub mod mst;

pub use intervention::{
    derive_guesses, intervention_cost, plan_intervention, plan_intervention_capped,
    predicted_swap_variance, CostStrategy,
    GuessModels, InterventionEntry, InterventionPlan, DEFAULT_CANDIDATE_CAP, GUESS_FLOOR,
};
pub use merge::{apply_merge, merging_cost, plan_merge, MergeEntry, MergePlan};
