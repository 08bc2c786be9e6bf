//! Game symbols and the incremental utility state.
//!
//! For receiver `u` with `in_u` genuine messages out of `M` in total:
//!
//! - `alpha_u = prod_{v != u} (1 - p_v)` is the chance nobody else downloads one
//!   of `u`'s messages;
//! - privacy cost `C^P_u = L * (1 - (1 - alpha_u)^in_u)`;
//! - bandwidth cost `C^BW_u = f * (in_u + p_u * (M - in_u))`;
//! - utility `phi_u = -C^P_u - C^BW_u - a_u * sum_{v in scope(u)} C^P_v`, where
//!   the scope is empty (selfish), the contacts of `u` (local) or everyone else
//!   (global).
//!
//! Welfare is `sum_u phi_u = -sum C^BW - sum (1 + A_v) C^P_v` with
//! `A_v = sum_{w : v in scope(w)} a_w`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centrality::{self, MetricKind};
use crate::error::{FmdError, Result};
use crate::graph::CommGraph;
use crate::numeric::compensated_sum;

/// Full recompute cadence for [`UtilityState`].
pub const REFRESH_INTERVAL: usize = 1_000;

/// A false-positive rate: zero or `2^-k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rate {
    Zero,
    /// `2^-k`, `k >= 1`.
    Pow2(u8),
}

impl Rate {
    pub fn value(self) -> f64 {
        match self {
            Rate::Zero => 0.0,
            Rate::Pow2(k) => (0.5f64).powi(k as i32),
        }
    }

    /// `ln(1 - p)`.
    pub fn log_complement(self) -> f64 {
        (-self.value()).ln_1p()
    }

    /// Base-2 exponent (`-k`), or `None` for zero.
    pub fn exponent(self) -> Option<i32> {
        match self {
            Rate::Zero => None,
            Rate::Pow2(k) => Some(-(k as i32)),
        }
    }
}

impl PartialOrd for Rate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Rate::Zero, Rate::Zero) => std::cmp::Ordering::Equal,
            (Rate::Zero, _) => std::cmp::Ordering::Less,
            (_, Rate::Zero) => std::cmp::Ordering::Greater,
            (Rate::Pow2(a), Rate::Pow2(b)) => b.cmp(a),
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Zero => f.write_str("zero"),
            Rate::Pow2(k) => write!(f, "-{k}"),
        }
    }
}

impl FromStr for Rate {
    type Err = FmdError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("zero") {
            return Ok(Rate::Zero);
        }
        let e: i64 = s
            .parse()
            .map_err(|_| FmdError::InvalidParameter(format!("rate exponent {s:?}")))?;
        Rate::from_exponent(e)
    }
}

impl Rate {
    /// `-k` maps to `2^-k`; only `-1 ..= -63` are valid.
    pub fn from_exponent(e: i64) -> Result<Self> {
        if (-63..=-1).contains(&e) {
            Ok(Rate::Pow2((-e) as u8))
        } else {
            Err(FmdError::InvalidParameter(format!(
                "rate exponent {e} (expected -1..=-63 or \"zero\")"
            )))
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Rate::Zero => s.serialize_str("zero"),
            Rate::Pow2(k) => s.serialize_i64(-(*k as i64)),
        }
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(e) => Rate::from_exponent(e),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Ordered action set. Levels strictly increase and never exceed 1/2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Rate>", into = "Vec<Rate>")]
pub struct StrategyLadder {
    levels: Vec<Rate>,
    values: Vec<f64>,
    log_complements: Vec<f64>,
}

impl StrategyLadder {
    pub fn new(levels: Vec<Rate>) -> Result<Self> {
        if levels.is_empty() {
            return Err(FmdError::InvalidParameter("empty ladder".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FmdError::InvalidParameter(
                "ladder levels must be strictly increasing".into(),
            ));
        }
        let values = levels.iter().map(|r| r.value()).collect();
        let log_complements = levels.iter().map(|r| r.log_complement()).collect();
        Ok(Self {
            levels,
            values,
            log_complements,
        })
    }

    /// `[0, 2^-10, 2^-9, ..., 2^-1]`.
    pub fn standard() -> Self {
        let mut levels = vec![Rate::Zero];
        levels.extend((1..=10).rev().map(Rate::Pow2));
        Self::new(levels).expect("standard ladder is valid")
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[Rate] {
        &self.levels
    }

    pub fn rate(&self, idx: usize) -> Rate {
        self.levels[idx]
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn log_complement(&self, idx: usize) -> f64 {
        self.log_complements[idx]
    }

    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn index_of(&self, rate: Rate) -> Result<usize> {
        self.levels
            .iter()
            .position(|&r| r == rate)
            .ok_or_else(|| FmdError::MissingRate(rate.to_string()))
    }

    pub fn check(&self, idx: usize) -> Result<()> {
        if idx < self.levels.len() {
            Ok(())
        } else {
            Err(FmdError::InvalidIndex {
                index: idx,
                len: self.levels.len(),
            })
        }
    }
}

impl Default for StrategyLadder {
    fn default() -> Self {
        Self::standard()
    }
}

impl TryFrom<Vec<Rate>> for StrategyLadder {
    type Error = FmdError;
    fn try_from(levels: Vec<Rate>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<StrategyLadder> for Vec<Rate> {
    fn from(l: StrategyLadder) -> Self {
        l.levels
    }
}

/// One ladder index per node.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile(pub Vec<usize>);

impl Profile {
    pub fn uniform(n: usize, idx: usize) -> Self {
        Profile(vec![idx; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, u: usize) -> usize {
        self.0[u]
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn validate(&self, n: usize, ladder: &StrategyLadder) -> Result<()> {
        if self.0.len() != n {
            return Err(FmdError::LengthMismatch {
                expected: n,
                got: self.0.len(),
            });
        }
        self.0.iter().try_for_each(|&i| ladder.check(i))
    }

    /// Count of nodes per ladder index.
    pub fn histogram(&self, ladder: &StrategyLadder) -> Vec<usize> {
        let mut h = vec![0; ladder.len()];
        for &i in &self.0 {
            h[i] += 1;
        }
        h
    }

    /// `node_id,rate_exponent` rows, zero written as `zero`.
    pub fn write_csv<W: Write>(&self, ladder: &StrategyLadder, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "rate_exponent"])?;
        for (u, &i) in self.0.iter().enumerate() {
            w.write_record([u.to_string(), ladder.rate(i).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`Profile::write_csv`]. Rows may appear in
    /// any order but must cover ids `0..n` exactly once.
    pub fn read_csv<R: Read>(ladder: &StrategyLadder, input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut entries = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |m: String| FmdError::Parse {
                line: row + 2,
                message: m,
            };
            let node: usize = rec
                .get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad("missing or invalid node_id".into()))?;
            let rate: Rate = rec
                .get(1)
                .ok_or_else(|| bad("missing rate_exponent".into()))?
                .parse()
                .map_err(|e: FmdError| bad(e.to_string()))?;
            entries.push((node, ladder.index_of(rate)?));
        }
        let n = entries.len();
        let mut idx = vec![usize::MAX; n];
        for (node, i) in entries {
            if node >= n || idx[node] != usize::MAX {
                return Err(FmdError::InvalidParameter(format!(
                    "profile rows must cover node ids 0..{n} exactly once (bad id {node})"
                )));
            }
            idx[node] = i;
        }
        Ok(Profile(idx))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AltruismModel {
    Selfish,
    Local,
    Global,
}

impl AltruismModel {
    pub fn label(self) -> &'static str {
        match self {
            AltruismModel::Selfish => "selfish",
            AltruismModel::Local => "local",
            AltruismModel::Global => "global",
        }
    }
}

/// How altruistic constants are handed out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AltruistAssignment {
    /// Every node gets `a`.
    All { a: f64 },
    /// `k` nodes chosen uniformly with a seeded generator.
    RandomK { k: usize, a: f64, seed: u64 },
    /// The `k` highest-ranked nodes by a metric (ties by id).
    TopKByMetric { k: usize, metric: MetricKind, a: f64 },
}

/// Altruism model plus one non-negative constant per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltruismSpec {
    pub model: AltruismModel,
    pub constants: Vec<f64>,
}

impl AltruismSpec {
    pub fn selfish(n: usize) -> Self {
        Self {
            model: AltruismModel::Selfish,
            constants: vec![0.0; n],
        }
    }

    pub fn uniform(model: AltruismModel, n: usize, a: f64) -> Self {
        let a = if model == AltruismModel::Selfish { 0.0 } else { a };
        Self {
            model,
            constants: vec![a; n],
        }
    }

    pub fn resolve(model: AltruismModel, rule: &AltruistAssignment, g: &CommGraph) -> Result<Self> {
        let n = g.node_count();
        if model == AltruismModel::Selfish {
            return Ok(Self::selfish(n));
        }
        let mut constants = vec![0.0; n];
        match *rule {
            AltruistAssignment::All { a } => constants.iter_mut().for_each(|c| *c = a),
            AltruistAssignment::RandomK { k, a, seed } => {
                if k > n {
                    return Err(FmdError::TopKTooLarge { k, n });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut chosen = rand::seq::index::sample(&mut rng, n, k).into_vec();
                chosen.sort_unstable();
                for u in chosen {
                    constants[u] = a;
                }
            }
            AltruistAssignment::TopKByMetric { k, metric, a } => {
                let m = match metric {
                    MetricKind::Bc => centrality::betweenness_centrality(g),
                    MetricKind::Degree => centrality::degree_vector(g),
                };
                for u in centrality::top_k_ids(&m, k)? {
                    constants[u] = a;
                }
            }
        }
        let spec = Self { model, constants };
        spec.validate(n)?;
        Ok(spec)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.constants.len() != n {
            return Err(FmdError::LengthMismatch {
                expected: n,
                got: self.constants.len(),
            });
        }
        if self.constants.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(FmdError::InvalidParameter(
                "altruism constants must be finite and >= 0".into(),
            ));
        }
        if self.model == AltruismModel::Selfish && self.constants.iter().any(|&a| a != 0.0) {
            return Err(FmdError::InvalidParameter(
                "selfish model requires all constants to be 0".into(),
            ));
        }
        Ok(())
    }

    /// Largest constant (0 for an empty spec).
    pub fn max_constant(&self) -> f64 {
        self.constants.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    /// Cost of a privacy breach (`L`).
    pub privacy_loss: f64,
    /// Cost per downloaded message (`f`).
    pub bandwidth_cost: f64,
    pub ladder: StrategyLadder,
    pub altruism: AltruismSpec,
}

impl GameParams {
    pub fn new(
        privacy_loss: f64,
        bandwidth_cost: f64,
        ladder: StrategyLadder,
        altruism: AltruismSpec,
    ) -> Result<Self> {
        if !(privacy_loss > 0.0 && privacy_loss.is_finite()) {
            return Err(FmdError::InvalidParameter(format!(
                "L must be > 0, got {privacy_loss}"
            )));
        }
        if !(bandwidth_cost > 0.0 && bandwidth_cost.is_finite()) {
            return Err(FmdError::InvalidParameter(format!(
                "f must be > 0, got {bandwidth_cost}"
            )));
        }
        Ok(Self {
            privacy_loss,
            bandwidth_cost,
            ladder,
            altruism,
        })
    }

    /// Same game with a different action set.
    pub fn with_ladder(&self, ladder: StrategyLadder) -> Self {
        Self {
            ladder,
            ..self.clone()
        }
    }

    fn validate_for(&self, g: &CommGraph) -> Result<()> {
        self.altruism.validate(g.node_count())
    }
}

/// `A_u = sum of a_w over every w whose scope contains u`.
pub fn altruism_incidence(g: &CommGraph, spec: &AltruismSpec) -> Vec<f64> {
    let n = g.node_count();
    match spec.model {
        AltruismModel::Selfish => vec![0.0; n],
        AltruismModel::Local => {
            let mut inc = vec![0.0; n];
            for w in 0..n {
                let a = spec.constants[w];
                if a != 0.0 {
                    for &v in g.contacts(w) {
                        inc[v] += a;
                    }
                }
            }
            inc
        }
        AltruismModel::Global => (0..n)
            .map(|u| {
                spec.constants
                    .iter()
                    .enumerate()
                    .filter(|&(w, _)| w != u)
                    .map(|(_, &a)| a)
                    .sum()
            })
            .collect(),
    }
}

/// `L * (1 - (1 - alpha)^incoming)`, evaluated as `-L * expm1(k * log1p(-alpha))`.
pub fn privacy_cost(loss: f64, incoming: u64, alpha: f64) -> f64 {
    if incoming == 0 {
        return 0.0;
    }
    if alpha >= 1.0 {
        return loss;
    }
    -loss * ((incoming as f64) * (-alpha).ln_1p()).exp_m1()
}

/// `C(alpha + d_alpha) - C(alpha)` computed from the change itself, so small
/// differences keep full relative precision.
pub fn privacy_cost_delta(loss: f64, incoming: u64, alpha: f64, d_alpha: f64) -> f64 {
    if incoming == 0 || d_alpha == 0.0 {
        return 0.0;
    }
    let k = incoming as f64;
    let q = 1.0 - alpha;
    if q <= 0.0 {
        if d_alpha > 0.0 {
            // already capped at L
            return 0.0;
        }
        // C(1) = L exactly; the new miss probability is -d_alpha.
        return -loss * (k * (-d_alpha).ln()).exp();
    }
    // C' - C = L (q^k - q'^k) with q' = q - d_alpha
    let ln_qk = k * q.ln();
    if d_alpha >= q {
        // new alpha reaches 1 (possibly overshooting by rounding): C' = L
        return loss * ln_qk.exp();
    }
    let t = k * (-d_alpha / q).ln_1p();
    if t > 30.0 || ln_qk + t.max(0.0) < -700.0 {
        return loss * (ln_qk.exp() - (ln_qk + t).exp());
    }
    -loss * ln_qk.exp() * t.exp_m1()
}

/// Which quantity a move is judged by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// The mover's own utility.
    OwnUtility,
    /// Sum of all utilities.
    Welfare,
}

/// Aggregate costs of a profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total_privacy: f64,
    pub total_bandwidth: f64,
    pub social_cost: f64,
    /// Sum of utilities, altruism terms included.
    pub welfare: f64,
}

impl CostBreakdown {
    /// Privacy share of the social cost; 0 when there is no cost at all.
    pub fn privacy_share(&self) -> f64 {
        if self.social_cost > 0.0 {
            self.total_privacy / self.social_cost
        } else {
            0.0
        }
    }
}

/// Per-node change of `C^P` for one class of moves (same old and new rate for
/// the mover), evaluated for every node as if it were not the mover.
#[derive(Clone, Debug)]
pub(crate) struct MoveClass {
    pub from: usize,
    pub to: usize,
    pub deltas: Vec<f64>,
    pub total: f64,
    pub weighted_total: f64,
}

/// Profile plus cached `alpha`, `C^P`, `C^BW` under a fixed graph and game.
///
/// `alpha` is kept in the log domain: `S = sum_v ln(1 - p_v)` and
/// `alpha_u = exp(S - ln(1 - p_u))`. Moves update `S` incrementally; every
/// [`REFRESH_INTERVAL`] moves everything is recomputed from scratch.
#[derive(Clone, Debug)]
pub struct UtilityState<'g> {
    graph: &'g CommGraph,
    params: &'g GameParams,
    profile: Profile,
    incidence: Vec<f64>,
    log_sum: f64,
    alpha: Vec<f64>,
    privacy: Vec<f64>,
    bandwidth: Vec<f64>,
    moves_since_refresh: usize,
}

pub fn make_state<'g>(
    g: &'g CommGraph,
    params: &'g GameParams,
    profile: Profile,
) -> Result<UtilityState<'g>> {
    UtilityState::new(g, params, profile)
}

pub fn bandwidth_cost(g: &CommGraph, params: &GameParams, profile: &Profile, u: usize) -> f64 {
    bandwidth_for(g, params, u, params.ladder.value(profile.get(u)))
}

fn bandwidth_for(g: &CommGraph, params: &GameParams, u: usize, p: f64) -> f64 {
    let incoming = g.in_msgs()[u] as f64;
    let others = (g.total_messages() - g.in_msgs()[u]) as f64;
    params.bandwidth_cost * (incoming + p * others)
}

impl<'g> UtilityState<'g> {
    pub fn new(g: &'g CommGraph, params: &'g GameParams, profile: Profile) -> Result<Self> {
        let n = g.node_count();
        profile.validate(n, &params.ladder)?;
        params.validate_for(g)?;
        let mut state = Self {
            graph: g,
            params,
            profile,
            incidence: altruism_incidence(g, &params.altruism),
            log_sum: 0.0,
            alpha: vec![1.0; n],
            privacy: vec![0.0; n],
            bandwidth: vec![0.0; n],
            moves_since_refresh: 0,
        };
        state.refresh();
        Ok(state)
    }

    pub fn graph(&self) -> &'g CommGraph {
        self.graph
    }

    pub fn params(&self) -> &'g GameParams {
        self.params
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn into_profile(self) -> Profile {
        self.profile
    }

    pub fn node_count(&self) -> usize {
        self.profile.len()
    }

    pub fn log_sum(&self) -> f64 {
        self.log_sum
    }

    /// `A_u` for every node.
    pub fn incidence(&self) -> &[f64] {
        &self.incidence
    }

    pub fn moves_since_refresh(&self) -> usize {
        self.moves_since_refresh
    }

    /// Recomputes `S` (compensated) and every cache from the profile.
    pub fn refresh(&mut self) {
        let ladder = &self.params.ladder;
        self.log_sum = compensated_sum(self.profile.0.iter().map(|&i| ladder.log_complement(i)));
        self.recompute_caches();
        for u in 0..self.node_count() {
            self.bandwidth[u] = bandwidth_cost(self.graph, self.params, &self.profile, u);
        }
        self.moves_since_refresh = 0;
    }

    fn recompute_caches(&mut self) {
        let ladder = &self.params.ladder;
        let loss = self.params.privacy_loss;
        let in_msgs = self.graph.in_msgs();
        for u in 0..self.profile.len() {
            let a = (self.log_sum - ladder.log_complement(self.profile.0[u]))
                .exp()
                .min(1.0);
            self.alpha[u] = a;
            self.privacy[u] = privacy_cost(loss, in_msgs[u], a);
        }
    }

    pub fn alpha_of(&self, u: usize) -> f64 {
        self.alpha[u]
    }

    pub fn privacy_cost(&self, u: usize) -> f64 {
        self.privacy[u]
    }

    pub fn bandwidth_cost(&self, u: usize) -> f64 {
        self.bandwidth[u]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn privacy_costs(&self) -> &[f64] {
        &self.privacy
    }

    pub fn bandwidth_costs(&self) -> &[f64] {
        &self.bandwidth
    }

    /// `phi_u` under the configured altruism model.
    pub fn player_utility(&self, u: usize) -> f64 {
        let a = self.params.altruism.constants[u];
        let own = -self.privacy[u] - self.bandwidth[u];
        if a == 0.0 {
            return own;
        }
        let others: f64 = match self.params.altruism.model {
            AltruismModel::Selfish => 0.0,
            AltruismModel::Local => self.graph.contacts(u).iter().map(|&v| self.privacy[v]).sum(),
            AltruismModel::Global => self
                .privacy
                .iter()
                .enumerate()
                .filter(|&(v, _)| v != u)
                .map(|(_, &c)| c)
                .sum(),
        };
        own - a * others
    }

    pub fn cost_breakdown(&self) -> CostBreakdown {
        let total_privacy: f64 = self.privacy.iter().sum();
        let total_bandwidth: f64 = self.bandwidth.iter().sum();
        let weighted_privacy: f64 = self
            .privacy
            .iter()
            .zip(&self.incidence)
            .map(|(c, a)| (1.0 + a) * c)
            .sum();
        CostBreakdown {
            total_privacy,
            total_bandwidth,
            social_cost: total_privacy + total_bandwidth,
            welfare: -total_bandwidth - weighted_privacy,
        }
    }

    fn check_move(&self, u: usize, new_idx: usize) -> Result<()> {
        if u >= self.node_count() {
            return Err(FmdError::InvalidNode {
                node: u,
                len: self.node_count(),
            });
        }
        self.params.ladder.check(new_idx)?;
        if self.profile.0[u] == new_idx {
            return Err(FmdError::NoOpMove {
                node: u,
                index: new_idx,
            });
        }
        Ok(())
    }

    /// Ratio `d_alpha / alpha` seen by every other node when the mover goes
    /// from ladder index `from` to `to`.
    fn alpha_ratio(&self, from: usize, to: usize) -> f64 {
        let ladder = &self.params.ladder;
        let (p, q) = (ladder.value(from), ladder.value(to));
        (p - q) / (1.0 - p)
    }

    fn node_delta(&self, v: usize, ratio: f64) -> f64 {
        let a = self.alpha[v];
        privacy_cost_delta(self.params.privacy_loss, self.graph.in_msgs()[v], a, a * ratio)
    }

    /// Change of `C^P_v` for all `v` under one move class, plus plain and
    /// `(1 + A_v)`-weighted totals summed in id order.
    pub(crate) fn move_class(&self, from: usize, to: usize) -> MoveClass {
        let ratio = self.alpha_ratio(from, to);
        let deltas: Vec<f64> = (0..self.node_count())
            .map(|v| self.node_delta(v, ratio))
            .collect();
        let total = deltas.iter().sum();
        let weighted_total = deltas
            .iter()
            .zip(&self.incidence)
            .map(|(d, a)| (1.0 + a) * d)
            .sum();
        MoveClass {
            from,
            to,
            deltas,
            total,
            weighted_total,
        }
    }

    fn bandwidth_gain(&self, u: usize, from: usize, to: usize) -> f64 {
        let ladder = &self.params.ladder;
        let others = (self.graph.total_messages() - self.graph.in_msgs()[u]) as f64;
        -self.params.bandwidth_cost * (ladder.value(to) - ladder.value(from)) * others
    }

    /// Gain of `u` moving to `new_idx` given the class data for that move.
    pub(crate) fn gain_with_class(&self, u: usize, class: &MoveClass, objective: Objective) -> f64 {
        let bw = self.bandwidth_gain(u, class.from, class.to);
        match objective {
            Objective::OwnUtility => {
                let a = self.params.altruism.constants[u];
                if a == 0.0 {
                    return bw;
                }
                let scope = match self.params.altruism.model {
                    AltruismModel::Selfish => 0.0,
                    AltruismModel::Local => self.graph.contacts(u).iter().map(|&v| class.deltas[v]).sum(),
                    AltruismModel::Global => class.total - class.deltas[u],
                };
                bw - a * scope
            }
            Objective::Welfare => {
                let own = (1.0 + self.incidence[u]) * class.deltas[u];
                bw - (class.weighted_total - own)
            }
        }
    }

    /// Objective change if `u` alone switched to `new_idx`. The state is not
    /// modified.
    pub fn eval_unilateral_move(&self, u: usize, new_idx: usize, objective: Objective) -> Result<f64> {
        self.check_move(u, new_idx)?;
        let from = self.profile.0[u];
        let needs_all = match objective {
            Objective::Welfare => true,
            Objective::OwnUtility => {
                self.params.altruism.model == AltruismModel::Global
                    && self.params.altruism.constants[u] != 0.0
            }
        };
        if needs_all {
            return Ok(self.gain_with_class(u, &self.move_class(from, new_idx), objective));
        }
        // Local scope or no altruism: only the contacts' deltas are needed.
        let ratio = self.alpha_ratio(from, new_idx);
        let bw = self.bandwidth_gain(u, from, new_idx);
        let a = self.params.altruism.constants[u];
        if a == 0.0 || self.params.altruism.model == AltruismModel::Selfish {
            return Ok(bw);
        }
        let scope: f64 = self
            .graph
            .contacts(u)
            .iter()
            .map(|&v| self.node_delta(v, ratio))
            .sum();
        Ok(bw - a * scope)
    }

    /// Switches `u` to `new_idx`, updating `S` incrementally and refreshing
    /// the caches.
    pub fn apply_move(&mut self, u: usize, new_idx: usize) -> Result<()> {
        self.check_move(u, new_idx)?;
        let ladder = &self.params.ladder;
        let old = self.profile.0[u];
        self.log_sum += ladder.log_complement(new_idx) - ladder.log_complement(old);
        self.profile.0[u] = new_idx;
        self.moves_since_refresh += 1;
        if self.moves_since_refresh >= REFRESH_INTERVAL {
            self.refresh();
        } else {
            self.recompute_caches();
            self.bandwidth[u] = bandwidth_cost(self.graph, self.params, &self.profile, u);
        }
        Ok(())
    }
}
