//! Corpus → semantic graph.
//!
//! Documents are chunked and embedded in parallel, then inserted in corpus
//! order. Each token's occurrence embeddings are gathered, induced into
//! semantic nodes (again in parallel, one token per task) and attached in
//! token-id order, so the resulting graph does not depend on scheduling.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{EmbedRequest, Gateway};
use crate::error::Result;
use crate::graph::{SemanticGraph, TokenId};
use crate::induction::{
    induce_semantic_nodes, EmbeddingBatch, EmbeddingItem, Induction, InductionConfig, InductionStats,
};
use crate::text::corpus::CorpusDoc;
use crate::text::{extract_terms, split_chunks, ChunkingConfig, TermOccurrence};

/// Summary of one indexing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub docs: usize,
    pub chunks: usize,
    pub tokens: usize,
    pub semantic_nodes: usize,
    pub multi_sense_tokens: usize,
    /// Wall-clock indexing time divided by the number of documents, seconds.
    pub ait_s: f64,
    pub induction: InductionStats,
}

struct PreparedChunk {
    text: String,
    terms: Vec<TermOccurrence>,
    vectors: Vec<Vec<f32>>,
}

fn prepare(doc: &CorpusDoc, gateway: &Gateway, chunking: &ChunkingConfig) -> Result<Vec<PreparedChunk>> {
    split_chunks(&doc.text, chunking)
        .into_iter()
        .map(|text| {
            let terms = extract_terms(&text, chunking);
            let vectors = if terms.is_empty() {
                Vec::new()
            } else {
                let req = EmbedRequest {
                    chunk_text: text.clone(),
                    spans: terms.iter().map(|t| t.span).collect(),
                };
                gateway.embed_spans(&req)?.vectors
            };
            Ok(PreparedChunk { text, terms, vectors })
        })
        .collect()
}

/// Builds a graph from `docs`. Runs on the current rayon pool.
pub fn build_index(
    docs: &[CorpusDoc],
    gateway: &Gateway,
    chunking: &ChunkingConfig,
    induction: &InductionConfig,
) -> Result<(SemanticGraph, IndexReport)> {
    let started = Instant::now();
    let prepared: Vec<Vec<PreparedChunk>> = docs
        .par_iter()
        .map(|d| prepare(d, gateway, chunking))
        .collect::<Result<_>>()?;

    let mut graph = SemanticGraph::new();
    let mut occurrences: BTreeMap<TokenId, Vec<EmbeddingItem>> = BTreeMap::new();
    for (doc, chunks) in docs.iter().zip(prepared) {
        let doc_id = graph.add_document(&doc.doc_id, &doc.title, doc.source_offset)?;
        for chunk in chunks {
            let chunk_id = graph.insert_chunk(doc_id, &chunk.text, &chunk.terms)?;
            for (term, embedding) in chunk.terms.into_iter().zip(chunk.vectors) {
                let token = graph.ensure_token(&term.surface);
                occurrences.entry(token).or_default().push(EmbeddingItem {
                    embedding,
                    chunk: chunk_id,
                    span: term.span,
                });
            }
        }
    }
    graph.refresh_idf();

    let batches: Vec<EmbeddingBatch> = occurrences
        .into_iter()
        .map(|(token, items)| EmbeddingBatch::new(token, items))
        .collect::<Result<_>>()?;
    let induced: Vec<Induction> = batches
        .par_iter()
        .map(|b| induce_semantic_nodes(b, graph.tokens()[b.token().index()].idf, induction))
        .collect::<Result<_>>()?;

    let mut stats = InductionStats::default();
    for (batch, result) in batches.iter().zip(&induced) {
        stats.record(batch.token(), result);
        for node in &result.nodes {
            let members: Vec<_> = node.members.iter().map(|(&c, &n)| (c, n)).collect();
            graph.attach_semantic_node(batch.token(), &node.anchor, &members, node.tau_anomaly)?;
        }
    }
    drop(batches);

    let elapsed = started.elapsed().as_secs_f64();
    let report = IndexReport {
        docs: graph.docs().len(),
        chunks: graph.chunks().len(),
        tokens: graph.tokens().len(),
        semantic_nodes: graph.semantics().len(),
        multi_sense_tokens: graph.tokens().iter().filter(|t| t.semantics.len() > 1).count(),
        ait_s: if docs.is_empty() {
            0.0
        } else {
            crate::eval::round3(elapsed / docs.len() as f64)
        },
        induction: stats,
    };
    tracing::info!(
        target: "semgraph::indexer",
        docs = report.docs,
        chunks = report.chunks,
        semantic_nodes = report.semantic_nodes,
        aggregation_fallbacks = stats.aggregation_fallbacks,
        "index built"
    );
    Ok((graph, report))
}
