//! Query-specific co-occurrence graph over matched semantic nodes.

use std::collections::BTreeMap;

use super::{QueryConfig, SemanticMatch};
use crate::error::{Error, Result};
use crate::graph::{SemId, SemanticGraph, SemanticNode};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoocGraph {
    /// Matched nodes with at least one edge, by node id.
    pub nodes: BTreeMap<SemId, SemanticMatch>,
    /// Undirected edges keyed `(low, high)`.
    pub edges: BTreeMap<(SemId, SemId), f64>,
}

impl CoocGraph {
    pub fn weight(&self, a: SemId, b: SemId) -> f64 {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.get(&key).copied().unwrap_or(0.0)
    }

    pub fn neighbors(&self, s: SemId) -> impl Iterator<Item = (SemId, f64)> + '_ {
        self.edges.iter().filter_map(move |(&(a, b), &w)| {
            if a == s {
                Some((b, w))
            } else if b == s {
                Some((a, w))
            } else {
                None
            }
        })
    }
}

fn shared_chunks(a: &SemanticNode, b: &SemanticNode) -> usize {
    let (small, large) = if a.chunk_freq.len() <= b.chunk_freq.len() {
        (a, b)
    } else {
        (b, a)
    };
    small
        .chunk_freq
        .keys()
        .filter(|c| large.chunk_freq.contains_key(c))
        .count()
}

/// `|C(i) ∩ C(j)| / sqrt(|C(i)| |C(j)|)` over distinct chunks.
pub fn cooc_weight(i: SemId, j: SemId, graph: &SemanticGraph) -> Result<f64> {
    let (a, b) = (graph.semantic(i)?, graph.semantic(j)?);
    if a.chunk_freq.is_empty() || b.chunk_freq.is_empty() {
        return Err(Error::InvalidState(format!("{i} or {j} has no chunks")));
    }
    let denom = ((a.chunk_count() * b.chunk_count()) as f64).sqrt();
    Ok(shared_chunks(a, b) as f64 / denom)
}

/// Connects matched nodes whose co-occurrence weight exceeds
/// `min_cooc_weight`; nodes left without an edge are returned as isolated.
pub fn build_cooc_graph(
    matches: &[SemanticMatch],
    graph: &SemanticGraph,
    cfg: &QueryConfig,
) -> Result<(CoocGraph, Vec<SemanticMatch>)> {
    let mut edges = BTreeMap::new();
    for (x, a) in matches.iter().enumerate() {
        for b in &matches[x + 1..] {
            if a.sem == b.sem {
                continue;
            }
            let w = cooc_weight(a.sem, b.sem, graph)?;
            if w > cfg.min_cooc_weight && w > 0.0 {
                let key = if a.sem < b.sem { (a.sem, b.sem) } else { (b.sem, a.sem) };
                edges.insert(key, w);
            }
        }
    }
    let mut g = CoocGraph {
        nodes: BTreeMap::new(),
        edges,
    };
    let mut isolated = Vec::new();
    for m in matches {
        if g.edges.keys().any(|&(a, b)| a == m.sem || b == m.sem) {
            g.nodes.insert(m.sem, m.clone());
        } else {
            isolated.push(m.clone());
        }
    }
    Ok((g, isolated))
}

/// `W(s) = (sum of edge weights at s) * alpha_level(s) * query_sim(s)`.
pub fn node_weight(s: &SemanticMatch, g: &CoocGraph, cfg: &QueryConfig) -> f64 {
    let strength: f64 = g.neighbors(s.sem).map(|(_, w)| w).sum();
    strength * s.weighted_sim(cfg)
}
