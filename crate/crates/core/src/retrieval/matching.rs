//! Multi-level matching of query terms to semantic nodes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{QueryConfig, QueryTerm};
use crate::graph::{SemId, SemanticGraph, TokenId};
use crate::vector;

/// Match level, ordered from weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchLevel {
    Similarity,
    Partial,
    Exact,
}

impl MatchLevel {
    pub fn alpha(self, cfg: &QueryConfig) -> f64 {
        match self {
            MatchLevel::Exact => cfg.alpha_exact,
            MatchLevel::Partial => cfg.alpha_partial,
            MatchLevel::Similarity => cfg.alpha_similarity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticMatch {
    pub sem: SemId,
    pub level: MatchLevel,
    /// Cosine between the query term embedding and the node anchor.
    pub query_sim: f64,
    pub source_query_token: String,
}

impl SemanticMatch {
    /// `query_sim * alpha_level`.
    pub fn weighted_sim(&self, cfg: &QueryConfig) -> f64 {
        self.query_sim * self.level.alpha(cfg)
    }
}

/// Best-matching sense of a token; ties go to the lower id.
fn best_sense(graph: &SemanticGraph, token: TokenId, q: &[f32]) -> Option<(SemId, f64)> {
    let mut best: Option<(SemId, f64)> = None;
    for &s in &graph.tokens()[token.index()].semantics {
        let sim = vector::cosine(q, &graph.semantics()[s.index()].anchor);
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((s, sim));
        }
    }
    best
}

fn top_k(mut found: Vec<(SemId, f64)>, k: usize) -> Vec<(SemId, f64)> {
    found.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    found.truncate(k);
    found
}

/// Matches every query term at the exact, partial and similarity levels.
///
/// A node reached more than once keeps its strongest level, then its highest
/// similarity. Output is ordered by node id.
pub fn match_semantic_nodes(terms: &[QueryTerm], graph: &SemanticGraph, cfg: &QueryConfig) -> Vec<SemanticMatch> {
    let mut best: BTreeMap<SemId, SemanticMatch> = BTreeMap::new();
    let mut offer = |sem: SemId, level: MatchLevel, query_sim: f64, term: &QueryTerm| {
        let candidate = SemanticMatch {
            sem,
            level,
            query_sim,
            source_query_token: term.surface.clone(),
        };
        match best.get(&sem) {
            Some(m) if (m.level, m.query_sim) >= (level, query_sim) => {}
            _ => {
                best.insert(sem, candidate);
            }
        }
    };

    for term in terms {
        let q = term.embedding.as_slice();
        if let Some((s, sim)) = graph
            .token_by_surface(&term.surface)
            .and_then(|t| best_sense(graph, t, q))
        {
            offer(s, MatchLevel::Exact, sim, term);
        }

        let partial: Vec<(SemId, f64)> = graph
            .tokens()
            .iter()
            .filter(|t| t.surface != term.surface && t.surface.contains(term.surface.as_str()))
            .filter_map(|t| best_sense(graph, t.id, q))
            .collect();
        for (s, sim) in top_k(partial, cfg.top_k_match) {
            offer(s, MatchLevel::Partial, sim, term);
        }

        let similar: Vec<(SemId, f64)> = graph
            .semantics()
            .iter()
            .map(|n| (n.id, vector::cosine(q, &n.anchor)))
            .filter(|&(_, sim)| sim >= cfg.sim_floor)
            .collect();
        for (s, sim) in top_k(similar, cfg.top_k_match) {
            offer(s, MatchLevel::Similarity, sim, term);
        }
    }
    best.into_values().collect()
}
