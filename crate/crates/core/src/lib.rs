//! Cover-traffic game for fuzzy message detection on real communication graphs.
//!
//! Receivers pick a false-positive detection rate from a discrete ladder. A
//! higher rate costs bandwidth but hides *other* users' messages, so privacy
//! is a public good. This crate evaluates the resulting utilities (selfish,
//! locally altruistic and globally altruistic players), runs maximum-gain
//! ε-best-response dynamics and social-optimum coordinate search, and
//! measures how equilibria compare to the optimum.
//!
//! Module map:
//! - [`graph`]: temporal edge-list ingestion, message graph, halving, stats.
//! - [`centrality`]: betweenness and degree, top-k helpers.
//! - [`game`]: ladder, profiles, parameters and the incremental utility state.
//! - [`dynamics`]: initial profiles, best-response dynamics, optimum search, sweeps.
//! - [`analysis`]: equilibrium verification, exhaustive oracle, efficiency ratios, reports.
//! - [`reference`]: direct (non-incremental) evaluation used as a cross-check.

#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod centrality;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod graph;
mod numeric;
pub mod reference;

pub use analysis::{
    bc_contribution_cdf, enumerate_oracle, equilibrium_metrics, poa_pos, verify_against, verify_epsilon_ne,
    verify_step_stable, BcCdf, Deviation, EfficiencyRatios, EquilibriumReport, LevelCount, NeReport,
    OracleResult,
};
pub use centrality::{betweenness_centrality, degree_vector, top_k_ids, MetricKind, NodeMetric};
pub use dynamics::{
    brd_run, candidate_gains, init_random, init_sorted, init_threshold, run_init, so_search, standard_inits,
    sweep_argmin, uniform_sweep, InitSpec, Interpolation, NodeProperties, RunObjective, RunRecord,
    SearchOptions, SweepRow, TraceEntry,
};
pub use error::{FmdError, Result};
pub use game::{
    altruism_incidence, make_state, AltruismModel, AltruismSpec, AltruistAssignment, CostBreakdown,
    GameParams, Objective, Profile, Rate, StrategyLadder, UtilityState,
};
pub use graph::{
    build_comm_graph, derive_privacy_loss, graph_stats, halve_graph, parse_temporal_edges, CommGraph,
    GraphStats, RawEventLog,
};
