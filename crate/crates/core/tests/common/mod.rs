#![allow(dead_code)]

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::PathBuf;

use flate2::read::GzDecoder;
use fmd_core::{
    build_comm_graph, halve_graph, parse_temporal_edges, AltruismModel, AltruismSpec, CommGraph, GameParams,
    Rate, StrategyLadder,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random directed multigraph on `n` nodes with `messages` messages.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, messages: usize) -> CommGraph {
    let labels = (0..n).map(|i| format!("v{i}")).collect();
    let mut triples = Vec::with_capacity(messages);
    if n >= 2 {
        while triples.len() < messages {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b {
                triples.push((a, b, 1));
            }
        }
    }
    CommGraph::from_weighted_edges(labels, triples, 0).unwrap()
}

pub fn small_ladder() -> StrategyLadder {
    StrategyLadder::new(vec![Rate::Zero, Rate::Pow2(2), Rate::Pow2(1)]).unwrap()
}

pub fn params(
    g: &CommGraph,
    loss: f64,
    f: f64,
    ladder: StrategyLadder,
    model: AltruismModel,
    a: f64,
) -> GameParams {
    let altruism = match model {
        AltruismModel::Selfish => AltruismSpec::selfish(g.node_count()),
        _ => AltruismSpec::uniform(model, g.node_count(), a),
    };
    GameParams::new(loss, f, ladder, altruism).unwrap()
}

pub const MODELS: [AltruismModel; 3] = [
    AltruismModel::Selfish,
    AltruismModel::Local,
    AltruismModel::Global,
];

pub enum Dataset {
    Message,
    Mail,
}

impl Dataset {
    pub fn file_stem(&self) -> &'static str {
        match self {
            Dataset::Message => "CollegeMsg.txt",
            Dataset::Mail => "email-Eu-core-temporal.txt",
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Dataset::Message => "message",
            Dataset::Mail => "mail",
        }
    }
}

fn data_dirs() -> Vec<PathBuf> {
    let mut dirs = Vec::new();
    if let Ok(d) = std::env::var("FMD_DATA_DIR") {
        dirs.push(PathBuf::from(d));
    }
    if let Ok(d) = std::env::var("XDG_CACHE_HOME") {
        dirs.push(PathBuf::from(d).join("fmd"));
    }
    if let Ok(d) = std::env::var("HOME") {
        dirs.push(PathBuf::from(d).join(".cache").join("fmd"));
    }
    dirs
}

/// Halved graph of a dataset, or `None` when no copy is on disk.
pub fn load_halved(ds: &Dataset) -> Option<CommGraph> {
    let stem = ds.file_stem();
    for dir in data_dirs() {
        let plain = dir.join(stem);
        let gz = dir.join(format!("{stem}.gz"));
        let reader: Box<dyn Read> = if plain.is_file() {
            Box::new(File::open(plain).ok()?)
        } else if gz.is_file() {
            Box::new(GzDecoder::new(File::open(gz).ok()?))
        } else {
            continue;
        };
        let log = parse_temporal_edges(BufReader::new(reader)).expect("dataset parses");
        return Some(halve_graph(&build_comm_graph(&log)));
    }
    None
}
