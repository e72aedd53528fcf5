//! Two-stage retrieval over a semantic graph.
//!
//! Stage 1 weights matched semantic nodes by how strongly they co-occur with
//! each other in the corpus and ranks their chunks with a BM25-style score.
//! Stage 2 recovers chunks for matched nodes that co-occur with nothing else
//! in the query. Stage-1 chunks always come first.

mod cooc;
mod matching;
mod scoring;

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::embed::{EmbedRequest, Gateway};
use crate::error::{Error, Result};
use crate::graph::{ChunkId, DocId, SemanticGraph};
use crate::text::{extract_terms, ChunkingConfig};

pub use cooc::{build_cooc_graph, cooc_weight, node_weight, CoocGraph};
pub use matching::{match_semantic_nodes, MatchLevel, SemanticMatch};
pub use scoring::{
    broad_retrieve, order_isolated, recover_isolated, score_chunk, semantic_idf, stage1_retrieve, tf_factor,
    RecoveryNode,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryConfig {
    pub alpha_exact: f64,
    pub alpha_partial: f64,
    pub alpha_similarity: f64,
    /// Matches kept per query term at the partial and similarity levels.
    pub top_k_match: usize,
    pub k1: f64,
    pub b: f64,
    /// Fraction of the result slots reserved for stage 1.
    pub mix_lambda: f64,
    pub round_robin_k: usize,
    pub sim_floor: f64,
    /// Co-occurrence weights at or below this create no edge.
    pub min_cooc_weight: f64,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            alpha_exact: 3.0,
            alpha_partial: 2.0,
            alpha_similarity: 1.0,
            top_k_match: 10,
            k1: 1.2,
            b: 0.75,
            mix_lambda: 0.7,
            round_robin_k: 1,
            sim_floor: 0.25,
            min_cooc_weight: 0.0,
        }
    }
}

impl QueryConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.alpha_exact > self.alpha_partial
            && self.alpha_partial > self.alpha_similarity
            && self.alpha_similarity > 0.0)
        {
            return bad("alpha weights must satisfy exact > partial > similarity > 0");
        }
        if self.top_k_match < 1 {
            return bad("top_k_match must be >= 1");
        }
        if self.k1.is_nan() || self.k1 < 0.0 || !(0.0..=1.0).contains(&self.b) {
            return bad("k1 must be >= 0 and b must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mix_lambda) {
            return bad("mix_lambda must lie in [0, 1]");
        }
        if self.round_robin_k < 1 {
            return bad("round_robin_k must be >= 1");
        }
        if !(-1.0..=1.0).contains(&self.sim_floor) {
            return bad("sim_floor must lie in [-1, 1]");
        }
        if !(0.0..1.0).contains(&self.min_cooc_weight) {
            return bad("min_cooc_weight must lie in [0, 1)");
        }
        Ok(())
    }

    /// Result slots given to stage 1 out of `k`.
    pub fn stage1_slots(&self, k: usize) -> usize {
        // The epsilon keeps products such as 0.7 * 10 from rounding up.
        ((self.mix_lambda * k as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

/// A distinct query term with its contextual embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryTerm {
    pub surface: String,
    pub embedding: Vec<f32>,
}

/// Extracts the query's terms (first occurrence of each surface) and embeds
/// them in one request, using the query text as context.
pub fn embed_query(query: &str, chunking: &ChunkingConfig, gateway: &Gateway) -> Result<Vec<QueryTerm>> {
    let mut seen = HashSet::new();
    let terms: Vec<_> = extract_terms(query, chunking)
        .into_iter()
        .filter(|t| seen.insert(t.surface.clone()))
        .collect();
    if terms.is_empty() {
        return Ok(Vec::new());
    }
    let req = EmbedRequest {
        chunk_text: query.to_string(),
        spans: terms.iter().map(|t| t.span).collect(),
    };
    let resp = gateway.embed_spans(&req)?;
    Ok(terms
        .into_iter()
        .zip(resp.vectors)
        .map(|(t, embedding)| QueryTerm {
            surface: t.surface,
            embedding,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Cooc,
    Recovery,
    /// Produced by [`retrieve_broad`], never by [`retrieve`].
    Broad,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Cooc => "cooc",
            Stage::Recovery => "recovery",
            Stage::Broad => "broad",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub chunk: ChunkId,
    pub doc: DocId,
    pub score: f64,
    pub stage: Stage,
}

/// Ordered, duplicate-free result list; cooc entries precede recovery entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub entries: Vec<RankedEntry>,
}

impl RankedResult {
    fn push(&mut self, graph: &SemanticGraph, (chunk, score): (ChunkId, f64), stage: Stage) {
        self.entries.push(RankedEntry {
            chunk,
            doc: graph.chunks()[chunk.index()].doc,
            score,
            stage,
        });
    }
}

fn check_index(graph: &SemanticGraph, terms: &[QueryTerm]) -> Result<()> {
    if graph.chunks().is_empty() || graph.semantics().is_empty() {
        return Err(Error::EmptyIndex);
    }
    if let (Some(dim), Some(t)) = (graph.dim(), terms.first()) {
        if t.embedding.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: t.embedding.len(),
            });
        }
    }
    Ok(())
}

/// Embeds `query` and runs [`retrieve_terms`].
pub fn retrieve(
    query: &str,
    k: usize,
    graph: &SemanticGraph,
    gateway: &Gateway,
    chunking: &ChunkingConfig,
    cfg: &QueryConfig,
) -> Result<RankedResult> {
    if graph.chunks().is_empty() || graph.semantics().is_empty() {
        return Err(Error::EmptyIndex);
    }
    let terms = embed_query(query, chunking, gateway)?;
    retrieve_terms(&terms, k, graph, cfg)
}

/// Full two-stage retrieval for already embedded query terms.
///
/// Stage 1 fills up to `ceil(mix_lambda * k)` slots, recovery fills the rest,
/// and whichever stage falls short is backfilled by the other.
pub fn retrieve_terms(terms: &[QueryTerm], k: usize, graph: &SemanticGraph, cfg: &QueryConfig) -> Result<RankedResult> {
    check_index(graph, terms)?;
    let matches = match_semantic_nodes(terms, graph, cfg);
    let (g, isolated) = build_cooc_graph(&matches, graph, cfg)?;

    let stage1 = stage1_retrieve(&g, graph, cfg, usize::MAX);
    let n1 = cfg.stage1_slots(k).min(stage1.len());
    let taken: HashSet<ChunkId> = stage1[..n1].iter().map(|&(c, _)| c).collect();
    let recovered = recover_isolated(&isolated, &g, graph, cfg, &taken, k - n1);

    let recovered_ids: HashSet<ChunkId> = recovered.iter().map(|&(c, _)| c).collect();
    let backfill = stage1[n1..]
        .iter()
        .filter(|(c, _)| !recovered_ids.contains(c))
        .take(k - n1 - recovered.len());

    let mut out = RankedResult::default();
    for &hit in stage1[..n1].iter().chain(backfill) {
        out.push(graph, hit, Stage::Cooc);
    }
    for hit in recovered {
        out.push(graph, hit, Stage::Recovery);
    }
    Ok(out)
}

/// Baseline ranking of the union of all matched nodes' chunks by query similarity.
pub fn retrieve_broad(terms: &[QueryTerm], k: usize, graph: &SemanticGraph, cfg: &QueryConfig) -> Result<RankedResult> {
    check_index(graph, terms)?;
    let matches = match_semantic_nodes(terms, graph, cfg);
    let mut out = RankedResult::default();
    for hit in broad_retrieve(&matches, graph, k) {
        out.push(graph, hit, Stage::Broad);
    }
    Ok(out)
}

/// Writes `query_id chunk_id doc_id rank score stage` lines (tab separated,
/// 1-based rank, document key as `doc_id`).
pub fn write_run<W: Write>(
    w: &mut W,
    query_id: &str,
    result: &RankedResult,
    graph: &SemanticGraph,
) -> std::io::Result<()> {
    for (rank, e) in result.entries.iter().enumerate() {
        writeln!(
            w,
            "{query_id}\t{}\t{}\t{}\t{:.6}\t{}",
            e.chunk,
            graph.docs()[e.doc.index()].key,
            rank + 1,
            e.score,
            e.stage.as_str()
        )?;
    }
    Ok(())
}
