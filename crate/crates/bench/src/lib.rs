//! Synthetic workloads shared by the benchmarks.

use fmd_core::{AltruismModel, AltruismSpec, CommGraph, GameParams, StrategyLadder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random message graph: `n` nodes, `messages` directed messages between
/// distinct endpoints, heavier traffic towards low ids.
pub fn synthetic_graph(n: usize, messages: usize, seed: u64) -> CommGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = (0..n).map(|i| i.to_string()).collect();
    let mut triples = Vec::with_capacity(messages);
    while triples.len() < messages {
        let a = skewed(&mut rng, n);
        let b = rng.gen_range(0..n);
        if a != b {
            triples.push((a, b, 1));
        }
    }
    CommGraph::from_weighted_edges(labels, triples, 0).expect("ids are in range")
}

fn skewed(rng: &mut ChaCha8Rng, n: usize) -> usize {
    let x: f64 = rng.gen();
    ((x * x) * n as f64) as usize % n
}

pub fn global_params(g: &CommGraph, a: f64) -> GameParams {
    let loss = fmd_core::derive_privacy_loss(g);
    let altruism = AltruismSpec::uniform(AltruismModel::Global, g.node_count(), a);
    GameParams::new(loss, 1.0, StrategyLadder::standard(), altruism).expect("valid parameters")
}
