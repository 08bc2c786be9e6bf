//! Direct evaluation straight from the definitions: products instead of log
//! sums, `powf` instead of `expm1`/`log1p`, no caching and no regrouping.
//! Quadratic in the node count; meant for small instances and cross-checks.

use crate::game::{AltruismModel, GameParams, Profile};
use crate::graph::CommGraph;

pub fn rates(params: &GameParams, profile: &Profile) -> Vec<f64> {
    profile
        .indices()
        .iter()
        .map(|&i| params.ladder.value(i))
        .collect()
}

/// `prod_{v != u} (1 - p_v)`.
pub fn alpha(p: &[f64], u: usize) -> f64 {
    p.iter()
        .enumerate()
        .filter(|&(v, _)| v != u)
        .map(|(_, &pv)| 1.0 - pv)
        .product()
}

pub fn privacy_cost(g: &CommGraph, params: &GameParams, p: &[f64], u: usize) -> f64 {
    let k = g.in_msgs()[u];
    if k == 0 {
        return 0.0;
    }
    params.privacy_loss * (1.0 - (1.0 - alpha(p, u)).powf(k as f64))
}

pub fn bandwidth_cost(g: &CommGraph, params: &GameParams, p: &[f64], u: usize) -> f64 {
    let incoming = g.in_msgs()[u] as f64;
    let m = g.total_messages() as f64;
    params.bandwidth_cost * (incoming + p[u] * (m - incoming))
}

/// Every `phi_u` for a profile.
pub fn utilities(g: &CommGraph, params: &GameParams, profile: &Profile) -> Vec<f64> {
    let p = rates(params, profile);
    let n = g.node_count();
    let privacy: Vec<f64> = (0..n).map(|u| privacy_cost(g, params, &p, u)).collect();
    (0..n)
        .map(|u| {
            let a = params.altruism.constants[u];
            let scope: f64 = match params.altruism.model {
                AltruismModel::Selfish => 0.0,
                AltruismModel::Local => g.contacts(u).iter().map(|&v| privacy[v]).sum(),
                AltruismModel::Global => (0..n).filter(|&v| v != u).map(|v| privacy[v]).sum(),
            };
            -privacy[u] - bandwidth_cost(g, params, &p, u) - a * scope
        })
        .collect()
}

/// `sum_u phi_u`.
pub fn welfare(g: &CommGraph, params: &GameParams, profile: &Profile) -> f64 {
    utilities(g, params, profile).iter().sum()
}

/// `(total privacy, total bandwidth)` without altruism terms.
pub fn base_costs(g: &CommGraph, params: &GameParams, profile: &Profile) -> (f64, f64) {
    let p = rates(params, profile);
    let n = g.node_count();
    let privacy = (0..n).map(|u| privacy_cost(g, params, &p, u)).sum();
    let bandwidth = (0..n).map(|u| bandwidth_cost(g, params, &p, u)).sum();
    (privacy, bandwidth)
}
