//! Initial profiles, maximum-gain ε-best-response dynamics, social-optimum
//! coordinate search and the uniform-rate sweep.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centrality::{self, MetricKind, NodeMetric};
use crate::error::{FmdError, Result};
use crate::game::{
    make_state, AltruismModel, AltruismSpec, CostBreakdown, GameParams, MoveClass, Objective, Profile, Rate,
    StrategyLadder, UtilityState,
};
use crate::graph::CommGraph;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MAX_ITERS: usize = 200_000;
/// Normalized betweenness cutoff for threshold initialization.
pub const DEFAULT_BC_CUTOFF: f64 = 0.01;
/// Degree cutoff for threshold initialization.
pub const DEFAULT_DEGREE_CUTOFF: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Ten equal buckets, remainder in the last one.
    Linear,
    /// Buckets of 1, 2, 4, ..., 256 nodes, the tenth takes the rest.
    Exponential,
}

/// How a run's starting profile is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    /// Nodes whose property is strictly above `cutoff` start at `level`, the rest at 0.
    Threshold {
        property: MetricKind,
        cutoff: f64,
        level: Rate,
    },
    /// Rank by property and spread over `2^-1 ... 2^-10` in ten buckets.
    Sorted {
        property: MetricKind,
        interp: Interpolation,
    },
    Random {
        seed: u64,
    },
    Uniform {
        level: Rate,
    },
    Explicit {
        profile: Profile,
    },
}

impl InitSpec {
    /// Threshold init at the default cutoff for `property`.
    pub fn threshold(property: MetricKind, level: Rate) -> Self {
        let cutoff = match property {
            MetricKind::Bc => DEFAULT_BC_CUTOFF,
            MetricKind::Degree => DEFAULT_DEGREE_CUTOFF,
        };
        InitSpec::Threshold {
            property,
            cutoff,
            level,
        }
    }

    /// Threshold init with cutoff 0 ("No Threshold").
    pub fn no_threshold(property: MetricKind, level: Rate) -> Self {
        InitSpec::Threshold {
            property,
            cutoff: 0.0,
            level,
        }
    }

    /// Human-readable label, e.g. `['bc', 'Threshold', 'all from -10']`,
    /// `bc_exp` or `random_3`.
    pub fn label(&self) -> String {
        match self {
            InitSpec::Threshold {
                property,
                cutoff,
                level,
            } => {
                let default = match property {
                    MetricKind::Bc => DEFAULT_BC_CUTOFF,
                    MetricKind::Degree => DEFAULT_DEGREE_CUTOFF,
                };
                let kind = if *cutoff == 0.0 {
                    "No Threshold".to_string()
                } else if *cutoff == default {
                    "Threshold".to_string()
                } else {
                    format!("Threshold {cutoff}")
                };
                format!("['{}', '{kind}', 'all from {level}']", property.label())
            }
            InitSpec::Sorted { property, interp } => {
                let suffix = match interp {
                    Interpolation::Linear => "lin",
                    Interpolation::Exponential => "exp",
                };
                format!("{}_{suffix}", property.label())
            }
            InitSpec::Random { seed } => format!("random_{seed}"),
            InitSpec::Uniform { level } => format!("uniform_{level}"),
            InitSpec::Explicit { .. } => "explicit".to_string(),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            InitSpec::Random { seed } => Some(*seed),
            _ => None,
        }
    }

    pub fn build(
        &self,
        g: &CommGraph,
        ladder: &StrategyLadder,
        props: &mut NodeProperties,
    ) -> Result<Profile> {
        match self {
            InitSpec::Threshold {
                property,
                cutoff,
                level,
            } => init_threshold(props.get(g, *property), *cutoff, ladder.index_of(*level)?),
            InitSpec::Sorted { property, interp } => init_sorted(props.get(g, *property), *interp, ladder),
            InitSpec::Random { seed } => Ok(init_random(g, ladder, *seed)),
            InitSpec::Uniform { level } => Ok(Profile::uniform(g.node_count(), ladder.index_of(*level)?)),
            InitSpec::Explicit { profile } => {
                profile.validate(g.node_count(), ladder)?;
                Ok(profile.clone())
            }
        }
    }
}

/// Lazily computed node properties for a single graph.
#[derive(Clone, Debug, Default)]
pub struct NodeProperties {
    bc: Option<NodeMetric>,
    degree: Option<NodeMetric>,
}

impl NodeProperties {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_bc(bc: NodeMetric) -> Self {
        Self {
            bc: Some(bc),
            degree: None,
        }
    }

    pub fn get(&mut self, g: &CommGraph, kind: MetricKind) -> &NodeMetric {
        match kind {
            MetricKind::Bc => self
                .bc
                .get_or_insert_with(|| centrality::betweenness_centrality(g)),
            MetricKind::Degree => self.degree.get_or_insert_with(|| centrality::degree_vector(g)),
        }
    }
}

pub fn init_threshold(metric: &NodeMetric, cutoff: f64, level_idx: usize) -> Result<Profile> {
    if cutoff.is_nan() || cutoff < 0.0 {
        return Err(FmdError::InvalidParameter(format!(
            "threshold cutoff must be >= 0, got {cutoff}"
        )));
    }
    Ok(Profile(
        metric
            .values
            .iter()
            .map(|&v| if v > cutoff { level_idx } else { 0 })
            .collect(),
    ))
}

const SORTED_BUCKETS: usize = 10;

pub fn init_sorted(metric: &NodeMetric, interp: Interpolation, ladder: &StrategyLadder) -> Result<Profile> {
    let n = metric.len();
    // bucket b holds rate 2^-(b+1)
    let levels = (1..=SORTED_BUCKETS as u8)
        .map(|k| ladder.index_of(Rate::Pow2(k)))
        .collect::<Result<Vec<_>>>()?;
    let sizes: Vec<usize> = match interp {
        Interpolation::Linear => {
            let base = n / SORTED_BUCKETS;
            let mut s = vec![base; SORTED_BUCKETS];
            s[SORTED_BUCKETS - 1] += n - base * SORTED_BUCKETS;
            s
        }
        Interpolation::Exponential => {
            let mut s = Vec::with_capacity(SORTED_BUCKETS);
            let mut left = n;
            for b in 0..SORTED_BUCKETS {
                let want = if b + 1 == SORTED_BUCKETS {
                    left
                } else {
                    1usize << b
                };
                let take = want.min(left);
                s.push(take);
                left -= take;
            }
            s
        }
    };
    let mut idx = vec![0; n];
    let mut ranked = centrality::ranked_ids(&metric.values).into_iter();
    for (b, &size) in sizes.iter().enumerate() {
        for u in ranked.by_ref().take(size) {
            idx[u] = levels[b];
        }
    }
    Ok(Profile(idx))
}

/// Independent uniform draws over the ladder from a seeded ChaCha8 stream.
pub fn init_random(g: &CommGraph, ladder: &StrategyLadder, seed: u64) -> Profile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Profile(
        (0..g.node_count())
            .map(|_| rng.gen_range(0..ladder.len()))
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Keep every k-th trace entry; 1 keeps all, 0 keeps none.
    pub trace_thinning: usize,
    /// Require `gain > epsilon * |objective|` instead of `gain > epsilon`.
    pub relative_epsilon: bool,
    /// Optimum search only: when no single step improves welfare, also try
    /// every other ladder level for each node before stopping.
    pub full_ladder_polish: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_iters: DEFAULT_MAX_ITERS,
            trace_thinning: 1,
            relative_epsilon: false,
            full_ladder_polish: true,
        }
    }
}

impl SearchOptions {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(FmdError::InvalidParameter(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunObjective {
    Nash,
    Social,
}

impl RunObjective {
    pub fn label(self) -> &'static str {
        match self {
            RunObjective::Nash => "nash",
            RunObjective::Social => "social",
        }
    }

    fn move_objective(self) -> Objective {
        match self {
            RunObjective::Nash => Objective::OwnUtility,
            RunObjective::Social => Objective::Welfare,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub node: usize,
    pub old_idx: usize,
    pub new_idx: usize,
    pub gain: f64,
    /// Mover's utility (nash) or welfare (social) after the move.
    pub objective: f64,
}

/// Outcome of one dynamics or optimum-search run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub init: InitSpec,
    pub init_label: String,
    pub seed: Option<u64>,
    pub objective: RunObjective,
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
    pub terminal: Profile,
    pub breakdown: CostBreakdown,
    pub trace: Vec<TraceEntry>,
    pub trace_stride: usize,
    pub wall_time_secs: f64,
}

impl RunRecord {
    /// Attaches the spec that produced the starting profile.
    pub fn with_init(mut self, init: InitSpec) -> Self {
        self.init_label = init.label();
        self.seed = init.seed();
        self.init = init;
        self
    }

    /// Replays the trace from `start`. Needs an unthinned trace.
    pub fn replay(&self, start: &Profile) -> Result<Profile> {
        if self.trace_stride != 1 {
            return Err(FmdError::Replay("trace was thinned".into()));
        }
        replay_trace(start, &self.trace)
    }

    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        write_trace_csv(&self.trace, out)
    }
}

pub fn replay_trace(start: &Profile, trace: &[TraceEntry]) -> Result<Profile> {
    let mut p = start.clone();
    for e in trace {
        if e.node >= p.len() || p.0[e.node] != e.old_idx {
            return Err(FmdError::Replay(format!(
                "iteration {}: node {} is not at index {}",
                e.iteration, e.node, e.old_idx
            )));
        }
        p.0[e.node] = e.new_idx;
    }
    Ok(p)
}

pub fn write_trace_csv<W: Write>(trace: &[TraceEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "node", "old", "new", "gain", "objective"])?;
    for e in trace {
        w.write_record([
            e.iteration.to_string(),
            e.node.to_string(),
            e.old_idx.to_string(),
            e.new_idx.to_string(),
            e.gain.to_string(),
            e.objective.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub node: usize,
    pub to: usize,
    pub gain: f64,
}

/// Builds every move class needed by `moves`, in parallel, keyed by `(from, to)`.
fn classes_for(state: &UtilityState<'_>, keys: Vec<(usize, usize)>) -> BTreeMap<(usize, usize), MoveClass> {
    keys.into_par_iter()
        .map(|(from, to)| ((from, to), state.move_class(from, to)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn needs_class(state: &UtilityState<'_>, u: usize, objective: Objective) -> bool {
    match objective {
        Objective::Welfare => true,
        Objective::OwnUtility => {
            let alt = &state.params().altruism;
            alt.model != AltruismModel::Selfish && alt.constants[u] != 0.0
        }
    }
}

/// Gains of every listed move against a frozen state. Results are
/// independent of the number of worker threads.
pub fn candidate_gains(
    state: &UtilityState<'_>,
    moves: &[(usize, usize)],
    objective: Objective,
) -> Result<Vec<f64>> {
    for &(u, to) in moves {
        if u >= state.node_count() {
            return Err(FmdError::InvalidNode {
                node: u,
                len: state.node_count(),
            });
        }
        state.params().ladder.check(to)?;
        if state.profile().get(u) == to {
            return Err(FmdError::NoOpMove { node: u, index: to });
        }
    }
    let profile = state.profile();
    let mut keys: Vec<(usize, usize)> = moves
        .iter()
        .filter(|&&(u, _)| needs_class(state, u, objective))
        .map(|&(u, to)| (profile.get(u), to))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let classes = classes_for(state, keys);
    let empty = |from, to| MoveClass {
        from,
        to,
        deltas: Vec::new(),
        total: 0.0,
        weighted_total: 0.0,
    };
    let gains: Vec<f64> = moves
        .par_iter()
        .map(|&(u, to)| {
            let from = profile.get(u);
            match classes.get(&(from, to)) {
                Some(c) => state.gain_with_class(u, c, objective),
                // only reached for nodes whose gain is pure bandwidth
                None => state.gain_with_class(u, &empty(from, to), Objective::OwnUtility),
            }
        })
        .collect();
    if let Some(i) = gains.iter().position(|g| g.is_nan()) {
        let (u, to) = moves[i];
        return Err(FmdError::Undefined(format!(
            "gain of node {u} moving to {to} is NaN"
        )));
    }
    Ok(gains)
}

fn step_moves(state: &UtilityState<'_>) -> Vec<(usize, usize)> {
    let top = state.params().ladder.top();
    let mut moves = Vec::with_capacity(2 * state.node_count());
    for (u, &i) in state.profile().indices().iter().enumerate() {
        if i < top {
            moves.push((u, i + 1));
        }
        if i > 0 {
            moves.push((u, i - 1));
        }
    }
    moves
}

fn jump_moves(state: &UtilityState<'_>) -> Vec<(usize, usize)> {
    let len = state.params().ladder.len();
    let mut moves = Vec::new();
    for (u, &i) in state.profile().indices().iter().enumerate() {
        moves.extend((0..len).filter(|&j| j != i).map(|j| (u, j)));
    }
    moves
}

fn current_objective(state: &UtilityState<'_>, u: usize, objective: Objective) -> f64 {
    match objective {
        Objective::OwnUtility => state.player_utility(u),
        Objective::Welfare => state.cost_breakdown().welfare,
    }
}

/// Best move among `moves` whose gain clears the threshold. Moves are
/// scanned in the given order and only a strictly larger gain replaces the
/// incumbent, so earlier moves win ties.
fn best_move(
    state: &UtilityState<'_>,
    moves: &[(usize, usize)],
    objective: Objective,
    opts: &SearchOptions,
) -> Result<Option<Candidate>> {
    let gains = candidate_gains(state, moves, objective)?;
    let welfare_now = if opts.relative_epsilon && objective == Objective::Welfare {
        state.cost_breakdown().welfare
    } else {
        0.0
    };
    let mut best: Option<Candidate> = None;
    for (&(u, to), &gain) in moves.iter().zip(&gains) {
        let threshold = if opts.relative_epsilon {
            let base = match objective {
                Objective::OwnUtility => state.player_utility(u),
                Objective::Welfare => welfare_now,
            };
            opts.epsilon * base.abs()
        } else {
            opts.epsilon
        };
        if gain > threshold && best.is_none_or(|b| gain > b.gain) {
            best = Some(Candidate { node: u, to, gain });
        }
    }
    Ok(best)
}

/// Best single-step improving move for `objective`, if any clears ε.
/// Ties: lower node id, then increment before decrement.
pub fn best_step_move(
    state: &UtilityState<'_>,
    objective: Objective,
    opts: &SearchOptions,
) -> Result<Option<Candidate>> {
    best_move(state, &step_moves(state), objective, opts)
}

fn search(
    g: &CommGraph,
    params: &GameParams,
    init: Profile,
    opts: &SearchOptions,
    run: RunObjective,
    polish: bool,
) -> Result<RunRecord> {
    opts.validate()?;
    let started = Instant::now();
    let objective = run.move_objective();
    let mut state = make_state(g, params, init.clone())?;
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let converged = loop {
        let mut next = best_step_move(&state, objective, opts)?;
        if next.is_none() && polish {
            next = best_move(&state, &jump_moves(&state), objective, opts)?;
        }
        let Some(mv) = next else { break true };
        if iterations >= opts.max_iters {
            break false;
        }
        let old = state.profile().get(mv.node);
        state.apply_move(mv.node, mv.to)?;
        iterations += 1;
        if opts.trace_thinning > 0 && iterations.is_multiple_of(opts.trace_thinning) {
            trace.push(TraceEntry {
                iteration: iterations,
                node: mv.node,
                old_idx: old,
                new_idx: mv.to,
                gain: mv.gain,
                objective: current_objective(&state, mv.node, objective),
            });
        }
        #[cfg(debug_assertions)]
        if iterations.is_multiple_of(crate::game::REFRESH_INTERVAL) {
            let fresh = make_state(g, params, state.profile().clone())?.cost_breakdown();
            let cached = state.cost_breakdown();
            debug_assert!((fresh.welfare - cached.welfare).abs() <= 1e-9 * fresh.welfare.abs().max(1.0));
        }
    };
    let breakdown = state.cost_breakdown();
    let init_spec = InitSpec::Explicit { profile: init };
    Ok(RunRecord {
        init_label: init_spec.label(),
        init: init_spec,
        seed: None,
        objective: run,
        epsilon: opts.epsilon,
        iterations,
        converged,
        terminal: state.into_profile(),
        breakdown,
        trace,
        trace_stride: opts.trace_thinning,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Maximum-gain ε-best-response dynamics with single-step moves. Each
/// iteration moves the one node whose ±1 ladder step raises its own utility
/// the most; stops when no such gain exceeds ε.
pub fn brd_run(g: &CommGraph, params: &GameParams, init: Profile, opts: &SearchOptions) -> Result<RunRecord> {
    search(g, params, init, opts, RunObjective::Nash, false)
}

/// Same loop as [`brd_run`] but every move is judged by welfare. With
/// `full_ladder_polish`, a step-stable profile is also checked against every
/// single-coordinate change before the search stops.
pub fn so_search(
    g: &CommGraph,
    params: &GameParams,
    init: Profile,
    opts: &SearchOptions,
) -> Result<RunRecord> {
    search(
        g,
        params,
        init,
        opts,
        RunObjective::Social,
        opts.full_ladder_polish,
    )
}

/// Builds the starting profile for `init` and runs the matching search.
pub fn run_init(
    g: &CommGraph,
    params: &GameParams,
    init: &InitSpec,
    props: &mut NodeProperties,
    objective: RunObjective,
    opts: &SearchOptions,
) -> Result<RunRecord> {
    let start = init.build(g, &params.ladder, props)?;
    let rec = match objective {
        RunObjective::Nash => brd_run(g, params, start, opts)?,
        RunObjective::Social => so_search(g, params, start, opts)?,
    };
    Ok(rec.with_init(init.clone()))
}

/// The usual batch: thresholds on both properties with and without cutoff,
/// starting from `2^-10` or `2^-1`, the four sorted variants, and random
/// seeds 0 to 4.
pub fn standard_inits() -> Vec<InitSpec> {
    let mut out = Vec::new();
    for property in [MetricKind::Bc, MetricKind::Degree] {
        for level in [Rate::Pow2(10), Rate::Pow2(1)] {
            out.push(InitSpec::threshold(property, level));
            out.push(InitSpec::no_threshold(property, level));
        }
    }
    for property in [MetricKind::Bc, MetricKind::Degree] {
        for interp in [Interpolation::Exponential, Interpolation::Linear] {
            out.push(InitSpec::Sorted { property, interp });
        }
    }
    out.extend((0..5).map(|seed| InitSpec::Random { seed }));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate: Rate,
    pub social_cost: f64,
    pub total_privacy: f64,
    pub total_bandwidth: f64,
}

/// Base costs (no altruism term) with every node at the same rate, one row
/// per ladder level.
pub fn uniform_sweep(g: &CommGraph, params: &GameParams) -> Result<Vec<SweepRow>> {
    let base = GameParams {
        altruism: AltruismSpec::selfish(g.node_count()),
        ..params.clone()
    };
    (0..base.ladder.len())
        .map(|i| {
            let state = make_state(g, &base, Profile::uniform(g.node_count(), i))?;
            let b = state.cost_breakdown();
            Ok(SweepRow {
                rate: base.ladder.rate(i),
                social_cost: b.social_cost,
                total_privacy: b.total_privacy,
                total_bandwidth: b.total_bandwidth,
            })
        })
        .collect()
}

/// Row with the lowest social cost (first on ties).
pub fn sweep_argmin(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter()
        .reduce(|best, r| if r.social_cost < best.social_cost { r } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::AltruismModel;

    fn metric(values: &[f64]) -> NodeMetric {
        NodeMetric {
            kind: MetricKind::Bc,
            values: values.to_vec(),
        }
    }

    fn ladder() -> StrategyLadder {
        StrategyLadder::standard()
    }

    fn rates_of(p: &Profile) -> Vec<f64> {
        p.indices().iter().map(|&i| ladder().value(i)).collect()
    }

    #[test]
    fn threshold_is_strict() {
        let top = ladder().index_of(Rate::Pow2(1)).unwrap();
        let p = init_threshold(&metric(&[0.02, 0.005, 0.0]), 0.01, top).unwrap();
        assert_eq!(rates_of(&p), vec![0.5, 0.0, 0.0]);

        let low = ladder().index_of(Rate::Pow2(10)).unwrap();
        let deg = NodeMetric {
            kind: MetricKind::Degree,
            values: vec![3.0, 0.0, 1.0],
        };
        let p = init_threshold(&deg, 0.0, low).unwrap();
        assert_eq!(rates_of(&p), vec![2f64.powi(-10), 0.0, 2f64.powi(-10)]);
        assert!(init_threshold(&deg, -1.0, low).is_err());
    }

    #[test]
    fn default_cutoffs_and_labels() {
        assert_eq!(
            InitSpec::threshold(MetricKind::Bc, Rate::Pow2(10)),
            InitSpec::Threshold {
                property: MetricKind::Bc,
                cutoff: 0.01,
                level: Rate::Pow2(10)
            }
        );
        assert_eq!(
            InitSpec::threshold(MetricKind::Degree, Rate::Pow2(1)).label(),
            "['degree', 'Threshold', 'all from -1']"
        );
        assert_eq!(
            InitSpec::no_threshold(MetricKind::Bc, Rate::Pow2(10)).label(),
            "['bc', 'No Threshold', 'all from -10']"
        );
        assert_eq!(
            InitSpec::Sorted {
                property: MetricKind::Bc,
                interp: Interpolation::Exponential
            }
            .label(),
            "bc_exp"
        );
        assert_eq!(
            InitSpec::Sorted {
                property: MetricKind::Degree,
                interp: Interpolation::Linear
            }
            .label(),
            "degree_lin"
        );
        assert_eq!(InitSpec::Random { seed: 4 }.label(), "random_4");
    }

    fn bucket_sizes(p: &Profile) -> Vec<usize> {
        // count per rate 2^-1 .. 2^-10
        let l = ladder();
        (1..=10u8)
            .map(|k| {
                let i = l.index_of(Rate::Pow2(k)).unwrap();
                p.indices().iter().filter(|&&x| x == i).count()
            })
            .collect()
    }

    #[test]
    fn sorted_linear_twenty() {
        let vals: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let p = init_sorted(&metric(&vals), Interpolation::Linear, &ladder()).unwrap();
        assert_eq!(bucket_sizes(&p), vec![2; 10]);
        // highest values get 2^-1
        assert_eq!(ladder().value(p.get(19)), 0.5);
        assert_eq!(ladder().value(p.get(0)), 2f64.powi(-10));
    }

    #[test]
    fn sorted_exponential_exhaustion() {
        let p = init_sorted(
            &metric(&[7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0]),
            Interpolation::Exponential,
            &ladder(),
        )
        .unwrap();
        assert_eq!(bucket_sizes(&p), vec![1, 2, 4, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(rates_of(&p)[0], 0.5);
        assert_eq!(rates_of(&p)[6], 0.125);
    }

    #[test]
    fn sorted_exponential_remainder() {
        let vals: Vec<f64> = (0..600).map(|i| (i % 37) as f64).collect();
        let p = init_sorted(&metric(&vals), Interpolation::Exponential, &ladder()).unwrap();
        assert_eq!(bucket_sizes(&p), vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 89]);
    }

    #[test]
    fn sorted_needs_ladder_levels() {
        let small = StrategyLadder::new(vec![Rate::Zero, Rate::Pow2(2), Rate::Pow2(1)]).unwrap();
        assert!(matches!(
            init_sorted(&metric(&[1.0]), Interpolation::Linear, &small),
            Err(FmdError::MissingRate(_))
        ));
    }

    #[test]
    fn random_is_seeded() {
        let labels = (0..50).map(|i| i.to_string()).collect();
        let g = CommGraph::from_weighted_edges(labels, [], 0).unwrap();
        assert_eq!(init_random(&g, &ladder(), 7), init_random(&g, &ladder(), 7));
        assert_ne!(init_random(&g, &ladder(), 7), init_random(&g, &ladder(), 8));
    }

    fn cycle3() -> CommGraph {
        let labels = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        CommGraph::from_weighted_edges(labels, [(0, 1, 1), (1, 2, 1), (2, 0, 1)], 0).unwrap()
    }

    #[test]
    fn selfish_dynamics_collapse() {
        let g = cycle3();
        let params = GameParams::new(10.0, 1.0, ladder(), AltruismSpec::selfish(3)).unwrap();
        let rec = brd_run(&g, &params, Profile(vec![10, 3, 0]), &SearchOptions::default()).unwrap();
        assert!(rec.converged);
        assert_eq!(rec.terminal, Profile::uniform(3, 0));
        assert_eq!(rec.iterations, 13);
        assert_eq!(rec.replay(&Profile(vec![10, 3, 0])).unwrap(), rec.terminal);
        assert!(rec.trace.iter().all(|e| e.gain > 1e-5));
    }

    #[test]
    fn max_iters_flags_non_convergence() {
        let g = cycle3();
        let params = GameParams::new(10.0, 1.0, ladder(), AltruismSpec::selfish(3)).unwrap();
        let opts = SearchOptions {
            max_iters: 4,
            ..Default::default()
        };
        let rec = brd_run(&g, &params, Profile(vec![10, 10, 10]), &opts).unwrap();
        assert!(!rec.converged);
        assert_eq!(rec.iterations, 4);
    }

    #[test]
    fn epsilon_must_be_positive() {
        let g = cycle3();
        let params = GameParams::new(10.0, 1.0, ladder(), AltruismSpec::selfish(3)).unwrap();
        let opts = SearchOptions {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(brd_run(&g, &params, Profile::uniform(3, 0), &opts).is_err());
    }

    #[test]
    fn trace_thinning_keeps_every_kth() {
        let g = cycle3();
        let params = GameParams::new(10.0, 1.0, ladder(), AltruismSpec::selfish(3)).unwrap();
        let opts = SearchOptions {
            trace_thinning: 5,
            ..Default::default()
        };
        let rec = brd_run(&g, &params, Profile(vec![10, 10, 10]), &opts).unwrap();
        assert_eq!(rec.iterations, 30);
        assert_eq!(rec.trace.len(), 6);
        assert!(rec.replay(&Profile(vec![10, 10, 10])).is_err());
    }

    #[test]
    fn sweep_zero_rate_cost() {
        let g = cycle3();
        let params = GameParams::new(
            10.0,
            1.0,
            ladder(),
            AltruismSpec::uniform(AltruismModel::Global, 3, 1.0),
        )
        .unwrap();
        let rows = uniform_sweep(&g, &params).unwrap();
        assert_eq!(rows.len(), 11);
        assert_eq!(rows[0].rate, Rate::Zero);
        assert_eq!(rows[0].social_cost, 10.0 * 3.0 + 3.0);
    }

    #[test]
    fn standard_batch_labels_are_distinct() {
        let inits = standard_inits();
        assert_eq!(inits.len(), 17);
        let mut labels: Vec<String> = inits.iter().map(InitSpec::label).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 17);
    }

    #[test]
    fn trace_csv_header() {
        let e = TraceEntry {
            iteration: 1,
            node: 2,
            old_idx: 3,
            new_idx: 4,
            gain: 0.5,
            objective: -1.0,
        };
        let mut buf = Vec::new();
        write_trace_csv(&[e], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "iteration,node,old,new,gain,objective\n1,2,3,4,0.5,-1\n"
        );
    }
}
