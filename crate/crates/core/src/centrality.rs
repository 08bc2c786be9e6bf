//! Node-importance measures on the undirected contact graph.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FmdError, Result};
use crate::graph::CommGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Normalized betweenness centrality.
    #[serde(alias = "betweenness")]
    Bc,
    /// Number of distinct contacts.
    Degree,
}

impl MetricKind {
    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Bc => "bc",
            MetricKind::Degree => "degree",
        }
    }
}

/// One non-negative value per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeMetric {
    pub kind: MetricKind,
    pub values: Vec<f64>,
}

impl NodeMetric {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn normalized(&self) -> bool {
        self.kind == MetricKind::Bc
    }

    pub fn total(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc + v)
    }

    /// Writes `node_id,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "value"])?;
        for (u, v) in self.values.iter().enumerate() {
            w.write_record([u.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of unordered pairs of other nodes, `(n-1)(n-2)/2`: the divisor that
/// maps raw undirected betweenness into `[0, 1]`.
pub fn betweenness_scale(n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    (n as f64 - 1.0) * (n as f64 - 2.0) / 2.0
}

const SOURCES_PER_CHUNK: usize = 32;

/// Brandes accumulation from one source; adds dependencies into `acc`.
fn accumulate_from(g: &CommGraph, s: usize, acc: &mut [f64], scratch: &mut BrandesScratch) {
    let n = g.node_count();
    let BrandesScratch {
        stack,
        queue,
        preds,
        sigma,
        dist,
        delta,
    } = scratch;
    stack.clear();
    queue.clear();
    for v in 0..n {
        preds[v].clear();
        sigma[v] = 0.0;
        dist[v] = -1;
        delta[v] = 0.0;
    }
    sigma[s] = 1.0;
    dist[s] = 0;
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        stack.push(v);
        for &w in g.contacts(v) {
            if dist[w] < 0 {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }
    while let Some(w) = stack.pop() {
        let coeff = (1.0 + delta[w]) / sigma[w];
        for &v in &preds[w] {
            delta[v] += sigma[v] * coeff;
        }
        if w != s {
            acc[w] += delta[w];
        }
    }
}

struct BrandesScratch {
    stack: Vec<usize>,
    queue: std::collections::VecDeque<usize>,
    preds: Vec<Vec<usize>>,
    sigma: Vec<f64>,
    dist: Vec<i64>,
    delta: Vec<f64>,
}

impl BrandesScratch {
    fn new(n: usize) -> Self {
        Self {
            stack: Vec::with_capacity(n),
            queue: std::collections::VecDeque::with_capacity(n),
            preds: vec![Vec::new(); n],
            sigma: vec![0.0; n],
            dist: vec![-1; n],
            delta: vec![0.0; n],
        }
    }
}

/// Raw undirected betweenness: for each node, the sum over unordered pairs of
/// the fraction of shortest paths passing through it.
///
/// Sources are processed in fixed-size chunks, each summed sequentially, and
/// the chunk totals are reduced in chunk order, so the result does not depend
/// on the number of worker threads.
pub fn betweenness_raw(g: &CommGraph) -> Vec<f64> {
    let n = g.node_count();
    if n < 3 {
        return vec![0.0; n];
    }
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCES_PER_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            let mut scratch = BrandesScratch::new(n);
            for &s in chunk {
                accumulate_from(g, s, &mut acc, &mut scratch);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    // every unordered pair was visited from both endpoints
    for t in &mut total {
        *t /= 2.0;
    }
    total
}

/// Normalized betweenness centrality on the undirected simple contact graph.
/// Graphs with fewer than three nodes get all zeros.
pub fn betweenness_centrality(g: &CommGraph) -> NodeMetric {
    let scale = betweenness_scale(g.node_count());
    let values = betweenness_raw(g).into_iter().map(|v| v / scale).collect();
    NodeMetric {
        kind: MetricKind::Bc,
        values,
    }
}

pub fn degree_vector(g: &CommGraph) -> NodeMetric {
    let values = (0..g.node_count()).map(|u| g.contacts(u).len() as f64).collect();
    NodeMetric {
        kind: MetricKind::Degree,
        values,
    }
}

/// Ids of the `k` largest values, ties by ascending id.
pub fn top_k_ids(metric: &NodeMetric, k: usize) -> Result<Vec<usize>> {
    let n = metric.len();
    if k > n {
        return Err(FmdError::TopKTooLarge { k, n });
    }
    Ok(ranked_ids(&metric.values).into_iter().take(k).collect())
}

/// All ids sorted by value descending, ties by ascending id.
pub fn ranked_ids(values: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..values.len()).collect();
    ids.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn undirected(n: usize, pairs: &[(usize, usize)]) -> CommGraph {
        let labels = (0..n).map(|i| i.to_string()).collect();
        CommGraph::from_weighted_edges(labels, pairs.iter().map(|&(a, b)| (a, b, 1)), 0).unwrap()
    }

    #[test]
    fn path_middle_vertex() {
        let bc = betweenness_centrality(&undirected(3, &[(0, 1), (1, 2)]));
        assert_eq!(bc.values, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn star_center() {
        let bc = betweenness_centrality(&undirected(5, &[(0, 1), (0, 2), (3, 0), (4, 0)]));
        assert_eq!(bc.values, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn small_graphs_are_zero() {
        assert_eq!(
            betweenness_centrality(&undirected(2, &[(0, 1)])).values,
            vec![0.0; 2]
        );
        assert!(betweenness_centrality(&undirected(0, &[])).values.is_empty());
    }

    #[test]
    fn direction_and_multiplicity_are_ignored() {
        let a = betweenness_centrality(&undirected(3, &[(0, 1), (1, 2)]));
        let labels = (0..3).map(|i| i.to_string()).collect();
        let g = CommGraph::from_weighted_edges(labels, [(1, 0, 7), (2, 1, 1), (1, 2, 3)], 0).unwrap();
        assert_eq!(betweenness_centrality(&g).values, a.values);
    }

    #[test]
    fn degrees() {
        let g = undirected(4, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(degree_vector(&g).values, vec![2.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn top_k_ties_by_id() {
        let m = NodeMetric {
            kind: MetricKind::Degree,
            values: vec![3.0, 1.0, 3.0],
        };
        assert_eq!(top_k_ids(&m, 2).unwrap(), vec![0, 2]);
        assert!(top_k_ids(&m, 0).unwrap().is_empty());
        assert_eq!(top_k_ids(&m, 3).unwrap(), vec![0, 2, 1]);
        assert!(matches!(
            top_k_ids(&m, 4),
            Err(FmdError::TopKTooLarge { k: 4, n: 3 })
        ));
    }

    #[test]
    fn csv_export() {
        let m = NodeMetric {
            kind: MetricKind::Degree,
            values: vec![2.0, 0.5],
        };
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "node_id,value\n0,2\n1,0.5\n");
    }
}
