//! Chunk scoring, stage-1 ranking and isolated-sense recovery.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::cooc::{node_weight, CoocGraph};
use super::{QueryConfig, SemanticMatch};
use crate::graph::{ChunkId, SemId, SemanticGraph, SemanticNode};

/// Chunk-level idf of a semantic node, `ln((N - n_s + 0.5) / (n_s + 0.5) + 1)`.
pub fn semantic_idf(node: &SemanticNode, graph: &SemanticGraph) -> f64 {
    crate::text::idf_from_counts(graph.stats().chunk_count as f64, node.chunk_count() as f64)
}

/// Saturating term-frequency factor with length normalization.
pub fn tf_factor(f: f64, chunk_len: f64, avg_len: f64, cfg: &QueryConfig) -> f64 {
    f * (cfg.k1 + 1.0) / (f + cfg.k1 * (1.0 - cfg.b + cfg.b * chunk_len / avg_len))
}

/// Sum over the active nodes present in `chunk` of `W * G * tf`. Each node
/// counts once however often it occurs.
pub fn score_chunk(chunk: ChunkId, active: &[(SemId, f64)], graph: &SemanticGraph, cfg: &QueryConfig) -> f64 {
    let Some(c) = graph.chunks().get(chunk.index()) else {
        return 0.0;
    };
    let avg = graph.stats().avg_chunk_len();
    let mut seen = BTreeSet::new();
    let mut score = 0.0;
    for &(s, w) in active {
        if !seen.insert(s) {
            continue;
        }
        let node = &graph.semantics()[s.index()];
        let f = node.freq_in(chunk);
        if f == 0 {
            continue;
        }
        score += w * semantic_idf(node, graph) * tf_factor(f as f64, c.length_terms as f64, avg, cfg);
    }
    score
}

/// Sorts by score descending, chunk id ascending.
fn rank(mut scored: Vec<(ChunkId, f64)>) -> Vec<(ChunkId, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

/// Ranks the chunks of all co-occurrence-graph nodes.
pub fn stage1_retrieve(g: &CoocGraph, graph: &SemanticGraph, cfg: &QueryConfig, limit: usize) -> Vec<(ChunkId, f64)> {
    let active: Vec<(SemId, f64)> = g.nodes.values().map(|m| (m.sem, node_weight(m, g, cfg))).collect();
    let candidates: BTreeSet<ChunkId> = g
        .nodes
        .keys()
        .flat_map(|s| graph.semantics()[s.index()].chunk_freq.keys().copied())
        .collect();
    let mut ranked = rank(
        candidates
            .into_iter()
            .map(|c| (c, score_chunk(c, &active, graph, cfg)))
            .collect(),
    );
    ranked.truncate(limit);
    ranked
}

/// Isolated node with its recovery group and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryNode {
    pub sem: SemId,
    /// Sum of `W` over co-occurrence nodes of the same token.
    pub propagated: f64,
    pub upper: bool,
    /// Weight used for chunk scoring: `propagated` in the upper group,
    /// `query_sim * alpha_level` in the lower group.
    pub effective_weight: f64,
}

/// Orders isolated nodes: upper group (positive propagated weight) by
/// `propagated * query_sim`, then lower group by `query_sim`.
pub fn order_isolated(
    isolated: &[SemanticMatch],
    g: &CoocGraph,
    graph: &SemanticGraph,
    cfg: &QueryConfig,
) -> Vec<RecoveryNode> {
    let weights: BTreeMap<SemId, f64> = g.nodes.values().map(|m| (m.sem, node_weight(m, g, cfg))).collect();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for m in isolated {
        let token = graph.semantics()[m.sem.index()].token;
        let propagated: f64 = weights
            .iter()
            .filter(|(s, _)| graph.semantics()[s.index()].token == token)
            .map(|(_, w)| w)
            .sum();
        if propagated > 0.0 {
            upper.push((
                propagated * m.query_sim,
                RecoveryNode {
                    sem: m.sem,
                    propagated,
                    upper: true,
                    effective_weight: propagated,
                },
            ));
        } else {
            lower.push((
                m.query_sim,
                RecoveryNode {
                    sem: m.sem,
                    propagated,
                    upper: false,
                    effective_weight: m.weighted_sim(cfg),
                },
            ));
        }
    }
    let by_key = |a: &(f64, RecoveryNode), b: &(f64, RecoveryNode)| b.0.total_cmp(&a.0).then(a.1.sem.cmp(&b.1.sem));
    upper.sort_by(by_key);
    lower.sort_by(by_key);
    upper.into_iter().chain(lower).map(|(_, n)| n).collect()
}

/// Round-robin over ordered isolated nodes, `round_robin_k` chunks per node
/// per cycle, skipping chunks already emitted or in `exclude`.
pub fn recover_isolated(
    isolated: &[SemanticMatch],
    g: &CoocGraph,
    graph: &SemanticGraph,
    cfg: &QueryConfig,
    exclude: &HashSet<ChunkId>,
    limit: usize,
) -> Vec<(ChunkId, f64)> {
    let order = order_isolated(isolated, g, graph, cfg);
    let mut queues: Vec<std::vec::IntoIter<(ChunkId, f64)>> = order
        .iter()
        .map(|n| {
            let active = [(n.sem, n.effective_weight)];
            rank(
                graph.semantics()[n.sem.index()]
                    .chunk_freq
                    .keys()
                    .map(|&c| (c, score_chunk(c, &active, graph, cfg)))
                    .collect(),
            )
            .into_iter()
        })
        .collect();

    let mut out = Vec::new();
    let mut emitted: HashSet<ChunkId> = HashSet::new();
    let per_cycle = cfg.round_robin_k.max(1);
    while out.len() < limit {
        let mut progressed = false;
        for q in queues.iter_mut() {
            let mut taken = 0;
            while taken < per_cycle && out.len() < limit {
                let Some((c, score)) = q.next() else { break };
                if exclude.contains(&c) || !emitted.insert(c) {
                    continue;
                }
                out.push((c, score));
                taken += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    out
}

/// Baseline without co-occurrence weighting: every chunk of every matched
/// node, scored by the best `query_sim` among matched nodes it holds.
pub fn broad_retrieve(matches: &[SemanticMatch], graph: &SemanticGraph, limit: usize) -> Vec<(ChunkId, f64)> {
    let mut best: BTreeMap<ChunkId, f64> = BTreeMap::new();
    for m in matches {
        for &c in graph.semantics()[m.sem.index()].chunk_freq.keys() {
            let e = best.entry(c).or_insert(f64::NEG_INFINITY);
            *e = e.max(m.query_sim);
        }
    }
    let mut ranked = rank(best.into_iter().collect());
    ranked.truncate(limit);
    ranked
}
