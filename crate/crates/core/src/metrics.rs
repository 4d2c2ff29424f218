//! Per-node local metrics (degree, clustering coefficient, local efficiency)
//! and their network-wide averages.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::format::g12;
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub degree: usize,
    pub clustering: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricAverages {
    pub mean_degree: f64,
    pub mean_clustering: f64,
    pub mean_efficiency: f64,
}

/// Fraction of neighbour pairs of `v` that are themselves adjacent; 0 when
/// `v` has fewer than two neighbours.
pub fn clustering_coefficient(g: &Graph, v: usize) -> f64 {
    let nbrs = g.neighbors(v);
    let k = nbrs.len();
    if k < 2 {
        return 0.0;
    }
    let mut triangles = 0usize;
    for (a, &u) in nbrs.iter().enumerate() {
        for &w in &nbrs[a + 1..] {
            if g.has_edge(u, w) {
                triangles += 1;
            }
        }
    }
    2.0 * triangles as f64 / (k * (k - 1)) as f64
}

/// Mean inverse shortest-path distance over neighbour pairs of `v`, with
/// paths restricted to the subgraph induced by the neighbours (so `v`
/// itself is removed). Unreachable pairs count as 0.
pub fn local_efficiency(g: &Graph, v: usize) -> f64 {
    let nbrs = g.neighbors(v);
    let k = nbrs.len();
    if k < 2 {
        return 0.0;
    }
    // Induced subgraph on the neighbour set, re-indexed 0..k.
    let local: Vec<Vec<usize>> = nbrs
        .iter()
        .map(|&u| {
            g.neighbors(u)
                .iter()
                .filter_map(|w| nbrs.binary_search(w).ok())
                .collect()
        })
        .collect();

    let mut total = 0.0;
    let mut dist = vec![usize::MAX; k];
    let mut queue = VecDeque::new();
    for src in 0..k {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[src] = 0;
        queue.clear();
        queue.push_back(src);
        while let Some(a) = queue.pop_front() {
            for &b in &local[a] {
                if dist[b] == usize::MAX {
                    dist[b] = dist[a] + 1;
                    queue.push_back(b);
                }
            }
        }
        total += dist[src + 1..]
            .iter()
            .filter(|&&d| d != usize::MAX)
            .map(|&d| 1.0 / d as f64)
            .sum::<f64>();
    }
    total / (k * (k - 1) / 2) as f64
}

pub fn node_metrics(g: &Graph, v: usize) -> NodeMetrics {
    NodeMetrics {
        degree: g.degree(v),
        clustering: clustering_coefficient(g, v),
        efficiency: local_efficiency(g, v),
    }
}

pub fn all_node_metrics(g: &Graph) -> Vec<NodeMetrics> {
    (0..g.n()).map(|v| node_metrics(g, v)).collect()
}

pub fn averages_of(metrics: &[NodeMetrics]) -> MetricAverages {
    let n = metrics.len().max(1) as f64;
    let (mut k, mut cl, mut eff) = (0.0, 0.0, 0.0);
    for m in metrics {
        k += m.degree as f64;
        cl += m.clustering;
        eff += m.efficiency;
    }
    MetricAverages {
        mean_degree: k / n,
        mean_clustering: cl / n,
        mean_efficiency: eff / n,
    }
}

pub fn graph_averages(g: &Graph) -> MetricAverages {
    averages_of(&all_node_metrics(g))
}

/// CSV with header `node,degree,clustering,efficiency`.
pub fn write_metrics_csv<W: Write>(metrics: &[NodeMetrics], mut out: W) -> std::io::Result<()> {
    writeln!(out, "node,degree,clustering,efficiency")?;
    for (i, m) in metrics.iter().enumerate() {
        writeln!(out, "{i},{},{},{}", m.degree, g12(m.clustering), g12(m.efficiency))?;
    }
    Ok(())
}
