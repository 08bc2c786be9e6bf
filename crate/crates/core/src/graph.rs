//! Temporal edge-list ingestion and the directed message graph.
//!
//! Input lines look like `SRC DST UNIXTS` (any whitespace, extra trailing
//! tokens ignored). Node ids are compacted in order of first appearance;
//! parallel messages collapse into weighted edges and self-messages are
//! dropped but counted.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{FmdError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub src: String,
    pub dst: String,
    pub timestamp: i64,
}

/// Events in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEventLog {
    pub events: Vec<Event>,
}

impl RawEventLog {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of distinct labels appearing as source or destination.
    pub fn distinct_labels(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        for e in &self.events {
            seen.insert(e.src.as_str());
            seen.insert(e.dst.as_str());
        }
        seen.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub msg_count: u64,
}

/// Directed weighted message graph with per-node message counts and the
/// undirected contact relation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommGraph {
    labels: Vec<String>,
    edges: Vec<Edge>,
    in_msgs: Vec<u64>,
    out_msgs: Vec<u64>,
    contacts: Vec<Vec<usize>>,
    total_messages: u64,
    dropped_self_loops: u64,
}

impl CommGraph {
    /// Builds a graph from labels and `(src, dst, count)` triples. Self-loops
    /// are discarded and added to `dropped_self_loops`; repeated pairs are
    /// summed; zero counts are ignored.
    pub fn from_weighted_edges(
        labels: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize, u64)>,
        mut dropped_self_loops: u64,
    ) -> Result<Self> {
        let n = labels.len();
        let mut weights: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (src, dst, count) in edges {
            for node in [src, dst] {
                if node >= n {
                    return Err(FmdError::InvalidNode { node, len: n });
                }
            }
            if count == 0 {
                continue;
            }
            if src == dst {
                dropped_self_loops += count;
                continue;
            }
            *weights.entry((src, dst)).or_insert(0) += count;
        }

        let mut in_msgs = vec![0u64; n];
        let mut out_msgs = vec![0u64; n];
        let mut contacts = vec![Vec::new(); n];
        let mut total_messages = 0u64;
        let mut edge_list = Vec::with_capacity(weights.len());
        for (&(src, dst), &msg_count) in &weights {
            in_msgs[dst] += msg_count;
            out_msgs[src] += msg_count;
            total_messages += msg_count;
            contacts[src].push(dst);
            contacts[dst].push(src);
            edge_list.push(Edge { src, dst, msg_count });
        }
        for c in &mut contacts {
            c.sort_unstable();
            c.dedup();
        }

        Ok(Self {
            labels,
            edges: edge_list,
            in_msgs,
            out_msgs,
            contacts,
            total_messages,
            dropped_self_loops,
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Edges sorted by `(src, dst)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Genuine incoming messages per node.
    pub fn in_msgs(&self) -> &[u64] {
        &self.in_msgs
    }

    pub fn out_msgs(&self) -> &[u64] {
        &self.out_msgs
    }

    /// Sorted distinct undirected neighbours of `u`.
    pub fn contacts(&self, u: usize) -> &[usize] {
        &self.contacts[u]
    }

    pub fn total_messages(&self) -> u64 {
        self.total_messages
    }

    pub fn dropped_self_loops(&self) -> u64 {
        self.dropped_self_loops
    }

    pub fn max_in(&self) -> u64 {
        self.in_msgs.iter().copied().max().unwrap_or(0)
    }

    /// Weighted total degree (messages sent plus received).
    pub fn weighted_degree(&self, u: usize) -> u64 {
        self.in_msgs[u] + self.out_msgs[u]
    }
}

/// Parses a temporal edge list. Blank lines and lines starting with `#` or
/// `%` are skipped.
pub fn parse_temporal_edges<R: BufRead>(reader: R) -> Result<RawEventLog> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (Some(src), Some(dst), Some(ts)) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(FmdError::Parse {
                line: line_no,
                message: format!("expected `SRC DST TIMESTAMP`, got {trimmed:?}"),
            });
        };
        let timestamp = ts.parse::<i64>().map_err(|_| FmdError::Parse {
            line: line_no,
            message: format!("timestamp {ts:?} is not an integer"),
        })?;
        events.push(Event {
            src: src.to_string(),
            dst: dst.to_string(),
            timestamp,
        });
    }
    Ok(RawEventLog { events })
}

/// Builds the message graph, assigning compact ids in order of first appearance.
pub fn build_comm_graph(log: &RawEventLog) -> CommGraph {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut triples = Vec::with_capacity(log.events.len());
    for e in &log.events {
        let mut endpoints = [0usize; 2];
        for (slot, label) in endpoints.iter_mut().zip([e.src.as_str(), e.dst.as_str()]) {
            let next = ids.len();
            *slot = *ids.entry(label).or_insert(next);
            if *slot == next {
                labels.push(label.to_string());
            }
        }
        triples.push((endpoints[0], endpoints[1], 1u64));
    }
    CommGraph::from_weighted_edges(labels, triples, 0).expect("ids are assigned from the label table")
}

/// Compares labels numerically when both parse as integers, else lexically.
fn label_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<i128>(), b.parse::<i128>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

/// Keeps every second node by descending weighted degree (ranks 0, 2, 4, ...),
/// dropping the rest along with their edges. Ties go to the smaller label.
pub fn halve_graph(g: &CommGraph) -> CommGraph {
    let n = g.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        g.weighted_degree(b)
            .cmp(&g.weighted_degree(a))
            .then_with(|| label_order(&g.labels[a], &g.labels[b]))
            .then_with(|| a.cmp(&b))
    });

    let mut keep = vec![false; n];
    for &u in order.iter().step_by(2) {
        keep[u] = true;
    }
    let mut remap = vec![usize::MAX; n];
    let mut labels = Vec::with_capacity(n.div_ceil(2));
    for u in 0..n {
        if keep[u] {
            remap[u] = labels.len();
            labels.push(g.labels[u].clone());
        }
    }
    let edges = g
        .edges
        .iter()
        .filter(|e| keep[e.src] && keep[e.dst])
        .map(|e| (remap[e.src], remap[e.dst], e.msg_count));
    CommGraph::from_weighted_edges(labels, edges, g.dropped_self_loops).expect("remapped ids are in range")
}

/// Summary statistics of a message graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_pair_count: usize,
    pub total_messages: u64,
    pub max_in: u64,
    pub isolated_count: usize,
    /// Distinct directed pairs over `n (n - 1)`.
    pub density: f64,
    pub self_loops_dropped: u64,
}

pub fn graph_stats(g: &CommGraph) -> GraphStats {
    let n = g.node_count();
    let pairs = g.edges.len();
    let density = if n < 2 {
        0.0
    } else {
        pairs as f64 / (n as f64 * (n as f64 - 1.0))
    };
    GraphStats {
        node_count: n,
        edge_pair_count: pairs,
        total_messages: g.total_messages,
        max_in: g.max_in(),
        isolated_count: g.contacts.iter().filter(|c| c.is_empty()).count(),
        density,
        self_loops_dropped: g.dropped_self_loops,
    }
}

/// Cost of a privacy breach: total messages minus the largest inbox plus one.
pub fn derive_privacy_loss(g: &CommGraph) -> f64 {
    (g.total_messages - g.max_in() + 1) as f64
}
