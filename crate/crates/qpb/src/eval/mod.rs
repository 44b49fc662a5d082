//! Evaluation harness: distribution comparison, descriptive series, a
//! session-based surrogate recommender, and the canned experiments.

mod distance;
mod experiments;
mod recommend;
mod report;
mod series;

pub use distance::hellinger;
pub use experiments::{
    alpha_sweep, even_mix, reco_impact, si_profiles, AlphaSweepParams, DistanceTable,
    ProfileSeries, RecoImpact, RecoImpactParams, ReferenceBelief, Scenario,
};
pub use recommend::recommend;
pub use report::{write_results, ExperimentOutput};
pub use series::{cumulative_unique_parts, plateau_width, sorted_distribution, SeriesBundle};
