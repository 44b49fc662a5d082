//! Query-part belief modeling for cube explorations.
//!
//! `qpb` models what a data-exploration user believes about a cube as a
//! probability distribution over *query parts* (group-by levels, measures,
//! member filters). The distribution is the stationary distribution of a
//! random walk on a graph of query parts built from the cube schema and
//! from past query logs, blended with a user-specific graph by a weight
//! `alpha`. On top of the belief sits a subjective interestingness measure
//! for queries: surprise (negative log-belief of the query's parts) divided
//! by complexity (the number of parts).
//!
//! The crate also ships a synthetic workload generator with four
//! prototypical exploration templates and an experiment harness measuring
//! how usage and recommendations move the belief.
//!
//! The guide in `book/` walks through the concepts; its code snippets are
//! compiled and run as doctests of this crate.
//!
//! ```
//! use qpb::{
//!     build_log_graph, build_schema_graph, compute_belief, generate_log, generate_schema,
//!     PageRankConfig, QueryPartGraph, SchemaSpec, Template, TemplateParams,
//! };
//!
//! let schema = generate_schema(&SchemaSpec::ssb_like(), 42)?;
//! let mix = qpb::eval::even_mix(8);
//! let log = generate_log(&schema, &mix, 42)?;
//!
//! let topology = build_log_graph(&log, &build_schema_graph(&schema))?;
//! let user = generate_log(&schema, &[(TemplateParams::new(Template::SliceAll, 0), 2)], 7)?;
//! let user_graph = build_log_graph(&user, &QueryPartGraph::new())?;
//!
//! let belief = compute_belief(&topology, &user_graph, 0.8, &PageRankConfig::default())?;
//! assert!((belief.sum() - 1.0).abs() < 1e-9);
//! # Ok::<(), qpb::Error>(())
//! ```

pub mod belief;
pub mod error;
pub mod eval;
pub mod graph;
pub mod interest;
pub mod part;
pub mod query;
pub mod schema;
pub mod workload;

mod util;

pub use belief::{compute_belief, pagerank, BeliefVector, PageRankConfig};
pub use error::{Error, Result};
pub use eval::{
    alpha_sweep, cumulative_unique_parts, hellinger, reco_impact, recommend, si_profiles,
    sorted_distribution, AlphaSweepParams, DistanceTable, ProfileSeries, RecoImpact,
    RecoImpactParams, Scenario, SeriesBundle,
};
pub use graph::{
    add_query_increment, build_log_graph, build_schema_graph, check_connectivity, merge,
    ConnectivityReport, QueryPartGraph,
};
pub use interest::{
    evaluate_session, evaluate_session_with_history, scores_to_csv, si, surprise, SiScore,
};
pub use part::QueryPart;
pub use query::{Log, Query, Session};
pub use schema::{generate_schema, CubeSchema, Hierarchy, SchemaSpec};
pub use util::derive_seed;
pub use workload::{generate_log, generate_session, Template, TemplateParams};

// The book's code snippets double as doctests so the guide can never drift
// from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/schema.md")]
    mod schema {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/belief.md")]
    mod belief {}
    #[doc = include_str!("../../../book/src/interestingness.md")]
    mod interestingness {}
    #[doc = include_str!("../../../book/src/workloads.md")]
    mod workloads {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
