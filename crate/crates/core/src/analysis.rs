//! Equilibrium verification, exhaustive search on tiny instances, efficiency
//! ratios and per-profile reports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::centrality::{self, NodeMetric};
use crate::dynamics::candidate_gains;
use crate::error::{FmdError, Result};
use crate::game::{make_state, CostBreakdown, GameParams, Objective, Profile, Rate, UtilityState};
use crate::graph::CommGraph;
use crate::reference;

/// Largest profile space [`enumerate_oracle`] will walk.
pub const ORACLE_PROFILE_LIMIT: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub node: usize,
    pub current: usize,
    pub best: usize,
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeReport {
    pub epsilon: f64,
    pub relative: bool,
    /// Largest unilateral gain seen over all nodes and levels.
    pub max_gain: f64,
    /// One entry per node whose best deviation exceeds the threshold.
    pub violations: Vec<Deviation>,
}

impl NeReport {
    pub fn is_equilibrium(&self) -> bool {
        self.violations.is_empty()
    }
}

fn threshold(state: &UtilityState<'_>, u: usize, objective: Objective, epsilon: f64, relative: bool) -> f64 {
    if !relative {
        return epsilon;
    }
    let base = match objective {
        Objective::OwnUtility => state.player_utility(u),
        Objective::Welfare => state.cost_breakdown().welfare,
    };
    epsilon * base.abs()
}

fn best_deviations(
    state: &UtilityState<'_>,
    moves: &[(usize, usize)],
    objective: Objective,
    epsilon: f64,
    relative: bool,
) -> Result<NeReport> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(FmdError::InvalidParameter(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    let gains = candidate_gains(state, moves, objective)?;
    let mut best: Vec<Option<Deviation>> = vec![None; state.node_count()];
    let mut max_gain = f64::NEG_INFINITY;
    for (&(u, to), &gain) in moves.iter().zip(&gains) {
        max_gain = max_gain.max(gain);
        if best[u].is_none_or(|d| gain > d.gain) {
            best[u] = Some(Deviation {
                node: u,
                current: state.profile().get(u),
                best: to,
                gain,
            });
        }
    }
    let violations = best
        .into_iter()
        .flatten()
        .filter(|d| d.gain > threshold(state, d.node, objective, epsilon, relative))
        .collect();
    Ok(NeReport {
        epsilon,
        relative,
        max_gain,
        violations,
    })
}

/// Checks every node against every other ladder level: the profile is an
/// ε-NE when no own-utility gain exceeds ε (or `ε·|φ_u|` when `relative`).
pub fn verify_epsilon_ne(
    g: &CommGraph,
    params: &GameParams,
    profile: &Profile,
    epsilon: f64,
    relative: bool,
) -> Result<NeReport> {
    verify_against(g, params, profile, Objective::OwnUtility, epsilon, relative)
}

/// Like [`verify_epsilon_ne`] for an arbitrary objective; with
/// [`Objective::Welfare`] this checks ε-optimality against single-coordinate
/// changes.
pub fn verify_against(
    g: &CommGraph,
    params: &GameParams,
    profile: &Profile,
    objective: Objective,
    epsilon: f64,
    relative: bool,
) -> Result<NeReport> {
    let state = make_state(g, params, profile.clone())?;
    let len = params.ladder.len();
    let moves: Vec<(usize, usize)> = profile
        .indices()
        .iter()
        .enumerate()
        .flat_map(|(u, &i)| (0..len).filter(move |&j| j != i).map(move |j| (u, j)))
        .collect();
    best_deviations(&state, &moves, objective, epsilon, relative)
}

/// Checks only the ±1 ladder steps the dynamics consider.
pub fn verify_step_stable(
    g: &CommGraph,
    params: &GameParams,
    profile: &Profile,
    objective: Objective,
    epsilon: f64,
) -> Result<NeReport> {
    let state = make_state(g, params, profile.clone())?;
    let top = params.ladder.top();
    let mut moves = Vec::new();
    for (u, &i) in profile.indices().iter().enumerate() {
        if i < top {
            moves.push((u, i + 1));
        }
        if i > 0 {
            moves.push((u, i - 1));
        }
    }
    best_deviations(&state, &moves, objective, epsilon, false)
}

/// Exhaustive results over every profile of a tiny instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Profiles where no node gains more than the tolerance by deviating.
    pub ne_profiles: Vec<Profile>,
    /// All welfare maximizers.
    pub so_profiles: Vec<Profile>,
    pub so_welfare: f64,
    /// Welfare of every profile, indexed by mixed-radix code with node 0 as
    /// the least significant digit.
    pub welfare: Vec<f64>,
}

impl OracleResult {
    pub fn welfare_of(&self, profile: &Profile, levels: usize) -> f64 {
        self.welfare[encode(profile, levels)]
    }
}

fn encode(profile: &Profile, levels: usize) -> usize {
    profile.indices().iter().rev().fold(0, |acc, &i| acc * levels + i)
}

fn decode(mut code: usize, n: usize, levels: usize) -> Profile {
    Profile(
        (0..n)
            .map(|_| {
                let d = code % levels;
                code /= levels;
                d
            })
            .collect(),
    )
}

/// Walks all `|ladder|^n` profiles with the direct evaluator. A profile is
/// kept as an equilibrium when no unilateral deviation gains more than
/// `tolerance`.
pub fn enumerate_oracle(g: &CommGraph, params: &GameParams, tolerance: f64) -> Result<OracleResult> {
    let n = g.node_count();
    let levels = params.ladder.len();
    let count = (levels as f64).powi(n as i32);
    if count > ORACLE_PROFILE_LIMIT as f64 {
        return Err(FmdError::InstanceTooLarge {
            profiles: count,
            limit: ORACLE_PROFILE_LIMIT,
        });
    }
    params.altruism.validate(n)?;
    let total = count as usize;
    let utilities: Vec<Vec<f64>> = (0..total)
        .map(|c| reference::utilities(g, params, &decode(c, n, levels)))
        .collect();
    let welfare: Vec<f64> = utilities.iter().map(|u| u.iter().sum()).collect();

    let mut ne_profiles = Vec::new();
    for c in 0..total {
        let profile = decode(c, n, levels);
        let mut stable = true;
        let mut place = 1;
        'nodes: for u in 0..n {
            let i = profile.get(u);
            for j in 0..levels {
                if j == i {
                    continue;
                }
                let other = c - i * place + j * place;
                if utilities[other][u] - utilities[c][u] > tolerance {
                    stable = false;
                    break 'nodes;
                }
            }
            place *= levels;
        }
        if stable {
            ne_profiles.push(profile);
        }
    }

    let so_welfare = welfare.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let so_profiles = (0..total)
        .filter(|&c| welfare[c] == so_welfare)
        .map(|c| decode(c, n, levels))
        .collect();
    Ok(OracleResult {
        ne_profiles,
        so_profiles,
        so_welfare,
        welfare,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRatios {
    /// Worst equilibrium cost over optimum cost.
    pub poa: f64,
    /// Best equilibrium cost over optimum cost.
    pub pos: f64,
}

/// Ratios over social costs (`-welfare`). Fails on an empty equilibrium set or
/// a non-positive optimum cost.
pub fn poa_pos(ne_costs: &[f64], so_cost: f64) -> Result<EfficiencyRatios> {
    if ne_costs.is_empty() {
        return Err(FmdError::Undefined("no equilibrium costs".into()));
    }
    if so_cost.is_nan() || so_cost <= 0.0 {
        return Err(FmdError::Undefined(format!("optimum cost is {so_cost}")));
    }
    let worst = ne_costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = ne_costs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EfficiencyRatios {
        poa: worst / so_cost,
        pos: best / so_cost,
    })
}

/// Cumulative betweenness collected along nodes ordered by decreasing rate,
/// then decreasing betweenness, then id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcCdf {
    pub order: Vec<usize>,
    /// Running sum of betweenness along `order`.
    pub cumulative: Vec<f64>,
    /// `cumulative` divided by the total; all zeros when the total is 0.
    pub share: Vec<f64>,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
    /// Unnormalized values at the same positions.
    pub raw_p10: f64,
    pub raw_p50: f64,
    pub raw_p90: f64,
}

impl BcCdf {
    /// Rows `prefix_fraction,node_id,cumulative_bc,cumulative_share`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["prefix_fraction", "node_id", "cumulative_bc", "cumulative_share"])?;
        let n = self.order.len() as f64;
        for (rank, &u) in self.order.iter().enumerate() {
            w.write_record([
                ((rank + 1) as f64 / n).to_string(),
                u.to_string(),
                self.cumulative[rank].to_string(),
                self.share[rank].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Position `ceil(q·n)` (1-based) of the curve; 0 for an empty curve.
fn at_fraction(curve: &[f64], num: usize, den: usize) -> f64 {
    let n = curve.len();
    if n == 0 {
        return 0.0;
    }
    let k = (num * n).div_ceil(den).clamp(1, n);
    curve[k - 1]
}

pub fn bc_contribution_cdf(profile: &Profile, bc: &NodeMetric) -> Result<BcCdf> {
    if profile.len() != bc.len() {
        return Err(FmdError::LengthMismatch {
            expected: bc.len(),
            got: profile.len(),
        });
    }
    let mut order: Vec<usize> = (0..profile.len()).collect();
    order.sort_by(|&a, &b| {
        profile
            .get(b)
            .cmp(&profile.get(a))
            .then(bc.values[b].total_cmp(&bc.values[a]))
            .then(a.cmp(&b))
    });
    let mut running = 0.0;
    let cumulative: Vec<f64> = order
        .iter()
        .map(|&u| {
            running += bc.values[u];
            running
        })
        .collect();
    let total = running;
    let share: Vec<f64> = cumulative
        .iter()
        .map(|&c| if total > 0.0 { c / total } else { 0.0 })
        .collect();
    Ok(BcCdf {
        p10: at_fraction(&share, 1, 10),
        p50: at_fraction(&share, 1, 2),
        p90: at_fraction(&share, 9, 10),
        raw_p10: at_fraction(&cumulative, 1, 10),
        raw_p50: at_fraction(&cumulative, 1, 2),
        raw_p90: at_fraction(&cumulative, 9, 10),
        order,
        cumulative,
        share,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCount {
    pub rate: Rate,
    pub count: usize,
}

/// Summary of one terminal profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub histogram: Vec<LevelCount>,
    pub breakdown: CostBreakdown,
    pub privacy_share: f64,
    /// Highest ladder rate.
    pub max_rate: Rate,
    /// Ids of the nodes sitting at `max_rate`.
    pub max_nodes: Vec<usize>,
    pub max_node_fraction: f64,
    pub max_node_bc_sum: f64,
    /// `max_node_bc_sum` over total betweenness; 0 when the total is 0.
    pub max_node_bc_share: f64,
    /// How many of the ten highest-betweenness nodes sit at `max_rate`.
    pub top10_in_max: usize,
    pub bc_p10: f64,
    pub bc_p50: f64,
    pub bc_p90: f64,
    pub bc_raw_p10: f64,
    pub bc_raw_p50: f64,
    pub bc_raw_p90: f64,
}

pub fn equilibrium_metrics(
    g: &CommGraph,
    params: &GameParams,
    profile: &Profile,
    bc: &NodeMetric,
) -> Result<EquilibriumReport> {
    let n = g.node_count();
    if bc.len() != n {
        return Err(FmdError::LengthMismatch {
            expected: n,
            got: bc.len(),
        });
    }
    let state = make_state(g, params, profile.clone())?;
    let breakdown = state.cost_breakdown();
    let ladder = &params.ladder;
    let histogram = profile
        .histogram(ladder)
        .into_iter()
        .enumerate()
        .map(|(i, count)| LevelCount {
            rate: ladder.rate(i),
            count,
        })
        .collect();
    let top = ladder.top();
    let at_top: Vec<usize> = (0..n).filter(|&u| profile.get(u) == top).collect();
    let max_node_bc_sum: f64 = at_top.iter().fold(0.0, |acc, &u| acc + bc.values[u]);
    let bc_total = bc.total();
    let top10 = centrality::top_k_ids(bc, n.min(10))?;
    let cdf = bc_contribution_cdf(profile, bc)?;
    Ok(EquilibriumReport {
        histogram,
        privacy_share: breakdown.privacy_share(),
        breakdown,
        max_rate: ladder.rate(top),
        max_node_fraction: if n > 0 {
            at_top.len() as f64 / n as f64
        } else {
            0.0
        },
        max_node_bc_sum,
        max_node_bc_share: if bc_total > 0.0 {
            max_node_bc_sum / bc_total
        } else {
            0.0
        },
        top10_in_max: top10.iter().filter(|&&u| profile.get(u) == top).count(),
        max_nodes: at_top,
        bc_p10: cdf.p10,
        bc_p50: cdf.p50,
        bc_p90: cdf.p90,
        bc_raw_p10: cdf.raw_p10,
        bc_raw_p50: cdf.raw_p50,
        bc_raw_p90: cdf.raw_p90,
    })
}
