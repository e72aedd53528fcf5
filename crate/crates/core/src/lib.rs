//! Polysemy-aware semantic graph retrieval without language-model calls.
//!
//! A corpus is indexed into a four-layer graph of documents, chunks,
//! semantic nodes and token nodes. Each token's contextual embeddings are
//! clustered into one or more semantic nodes (one per induced meaning), and
//! queries are answered in two stages: co-occurrence weighted chunk scoring
//! over the matched semantic nodes, followed by a recovery pass for matched
//! nodes that share no chunks with the rest of the query.
//!
//! The main entry points are [`indexer::build_index`] for construction,
//! [`retrieval::retrieve`] for querying and [`eval`] for Recall@10 / MRR@10.

pub mod config;
pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
pub mod indexer;
pub mod induction;
pub mod retrieval;
pub mod synth;
pub mod text;
pub mod vector;

pub use error::{Error, Result};
pub use graph::{ChunkId, DocId, SemId, SemanticGraph, TokenId};
