//! The four-layer semantic graph: documents, chunks, semantic nodes, tokens.
//!
//! Only three edge kinds exist, each stored as an owning reference plus a
//! derived reverse adjacency list:
//!
//! * document ↔ chunk (`ChunkNode::doc` / `DocumentNode::chunks`)
//! * chunk ↔ semantic (`SemanticNode::chunk_freq` keys / `ChunkNode::semantics`)
//! * semantic ↔ token (`SemanticNode::token` / `TokenNode::semantics`)
//!
//! Identifiers are dense integers assigned in insertion order. The graph is
//! built by a single writer and is read-only afterwards.

mod persist;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::text::TermOccurrence;
use crate::vector;

pub use persist::{decode, encode, load_index, save_index, FORMAT_VERSION, MAGIC};

/// Anchors handed to [`SemanticGraph::attach_semantic_node`] must be within
/// this distance of unit norm.
pub const ANCHOR_NORM_TOLERANCE: f64 = 1e-4;

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(DocId, "d");
id_type!(ChunkId, "c");
id_type!(TokenId, "t");
id_type!(SemId, "s");

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentNode {
    pub id: DocId,
    /// External identifier from the corpus file.
    pub key: String,
    pub title: String,
    pub source_offset: u64,
    pub chunks: Vec<ChunkId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkNode {
    pub id: ChunkId,
    pub doc: DocId,
    pub text: String,
    /// Number of extracted term occurrences, `|c|` in chunk scoring.
    pub length_terms: u32,
    /// Semantic nodes linked to this chunk, ascending.
    pub semantics: Vec<SemId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenNode {
    pub id: TokenId,
    pub surface: String,
    pub idf: f64,
    /// Semantic nodes of this token ("token family"), ascending.
    pub semantics: Vec<SemId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticNode {
    pub id: SemId,
    pub token: TokenId,
    /// Unit-norm cluster mean.
    pub anchor: Vec<f32>,
    /// Number of contextual embeddings represented by the anchor.
    pub member_count: u32,
    pub tau_anomaly: f64,
    /// Occurrences of this meaning per chunk, `f(s, c)`.
    pub chunk_freq: BTreeMap<ChunkId, u32>,
}

impl SemanticNode {
    /// Number of distinct chunks holding this node, `|C(s)|`.
    pub fn chunk_count(&self) -> usize {
        self.chunk_freq.len()
    }

    pub fn freq_in(&self, chunk: ChunkId) -> u32 {
        self.chunk_freq.get(&chunk).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStats {
    pub chunk_count: u64,
    /// Sum of `length_terms` over all chunks.
    pub total_terms: u64,
    /// Surface → number of chunks containing it.
    pub df: BTreeMap<String, u32>,
}

impl CorpusStats {
    /// Mean chunk length in terms (`avgcl`); 0 for an empty corpus.
    pub fn avg_chunk_len(&self) -> f64 {
        if self.chunk_count == 0 {
            0.0
        } else {
            self.total_terms as f64 / self.chunk_count as f64
        }
    }

    pub fn df(&self, surface: &str) -> u32 {
        self.df.get(surface).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    DocChunk(DocId, ChunkId),
    ChunkSemantic(ChunkId, SemId),
    SemanticToken(SemId, TokenId),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SemanticGraph {
    docs: Vec<DocumentNode>,
    chunks: Vec<ChunkNode>,
    tokens: Vec<TokenNode>,
    semantics: Vec<SemanticNode>,
    stats: CorpusStats,
    dim: Option<usize>,
    doc_keys: HashMap<String, DocId>,
    surfaces: HashMap<String, TokenId>,
}

impl SemanticGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn docs(&self) -> &[DocumentNode] {
        &self.docs
    }

    pub fn chunks(&self) -> &[ChunkNode] {
        &self.chunks
    }

    pub fn tokens(&self) -> &[TokenNode] {
        &self.tokens
    }

    pub fn semantics(&self) -> &[SemanticNode] {
        &self.semantics
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    /// Embedding dimension, fixed by the first attached semantic node.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn doc(&self, id: DocId) -> Result<&DocumentNode> {
        self.docs
            .get(id.index())
            .ok_or_else(|| Error::not_found("document", id))
    }

    pub fn chunk(&self, id: ChunkId) -> Result<&ChunkNode> {
        self.chunks.get(id.index()).ok_or_else(|| Error::not_found("chunk", id))
    }

    pub fn token(&self, id: TokenId) -> Result<&TokenNode> {
        self.tokens.get(id.index()).ok_or_else(|| Error::not_found("token", id))
    }

    pub fn semantic(&self, id: SemId) -> Result<&SemanticNode> {
        self.semantics
            .get(id.index())
            .ok_or_else(|| Error::not_found("semantic node", id))
    }

    pub fn doc_by_key(&self, key: &str) -> Option<DocId> {
        self.doc_keys.get(key).copied()
    }

    pub fn token_by_surface(&self, surface: &str) -> Option<TokenId> {
        self.surfaces.get(surface).copied()
    }

    /// Nodes linked to the token, ascending by id.
    pub fn token_family(&self, token: TokenId) -> Result<&[SemId]> {
        Ok(&self.token(token)?.semantics)
    }

    pub fn add_document(&mut self, key: &str, title: &str, source_offset: u64) -> Result<DocId> {
        if self.doc_keys.contains_key(key) {
            return Err(Error::DuplicateDocument(key.to_string()));
        }
        let id = DocId(self.docs.len() as u32);
        self.docs.push(DocumentNode {
            id,
            key: key.to_string(),
            title: title.to_string(),
            source_offset,
            chunks: Vec::new(),
        });
        self.doc_keys.insert(key.to_string(), id);
        Ok(id)
    }

    /// Stores a chunk under `doc`, registering token nodes for every new
    /// surface in `terms` and updating corpus statistics.
    ///
    /// Token idf values are not refreshed here; call [`Self::refresh_idf`]
    /// once a batch of inserts is complete.
    pub fn insert_chunk(&mut self, doc: DocId, text: &str, terms: &[TermOccurrence]) -> Result<ChunkId> {
        self.doc(doc)?;
        if text.trim().is_empty() {
            return Err(Error::EmptyChunk);
        }
        let id = ChunkId(self.chunks.len() as u32);
        self.chunks.push(ChunkNode {
            id,
            doc,
            text: text.to_string(),
            length_terms: terms.len() as u32,
            semantics: Vec::new(),
        });
        self.docs[doc.index()].chunks.push(id);

        self.stats.chunk_count += 1;
        self.stats.total_terms += terms.len() as u64;
        let mut distinct: Vec<&str> = terms.iter().map(|t| t.surface.as_str()).collect();
        distinct.sort_unstable();
        distinct.dedup();
        for surface in distinct {
            *self.stats.df.entry(surface.to_string()).or_insert(0) += 1;
            self.ensure_token(surface);
        }
        Ok(id)
    }

    /// Returns the token node for `surface`, creating it if needed.
    pub fn ensure_token(&mut self, surface: &str) -> TokenId {
        if let Some(&id) = self.surfaces.get(surface) {
            return id;
        }
        let id = TokenId(self.tokens.len() as u32);
        let idf = if self.stats.chunk_count > 0 {
            crate::text::idf(surface, &self.stats)
        } else {
            0.0
        };
        self.tokens.push(TokenNode {
            id,
            surface: surface.to_string(),
            idf,
            semantics: Vec::new(),
        });
        self.surfaces.insert(surface.to_string(), id);
        id
    }

    /// Recomputes every token's idf from the current corpus statistics.
    pub fn refresh_idf(&mut self) {
        if self.stats.chunk_count == 0 {
            return;
        }
        for token in &mut self.tokens {
            token.idf = crate::text::idf(&token.surface, &self.stats);
        }
    }

    /// Creates a semantic node for `token` linked to every member chunk.
    ///
    /// The anchor is re-normalized before storage; `member_count` is the sum
    /// of the member counts.
    pub fn attach_semantic_node(
        &mut self,
        token: TokenId,
        anchor: &[f32],
        members: &[(ChunkId, u32)],
        tau: f64,
    ) -> Result<SemId> {
        self.token(token)?;
        let anchor = self.checked_anchor(anchor)?;
        if members.is_empty() {
            return Err(Error::InvalidState("semantic node needs at least one member".into()));
        }
        let mut chunk_freq = BTreeMap::new();
        for &(chunk, count) in members {
            self.chunk(chunk)?;
            if count == 0 {
                return Err(Error::InvalidState(format!("zero occurrence count for {chunk}")));
            }
            *chunk_freq.entry(chunk).or_insert(0) += count;
        }
        let member_count = chunk_freq.values().sum();

        let id = SemId(self.semantics.len() as u32);
        for &chunk in chunk_freq.keys() {
            insert_sorted(&mut self.chunks[chunk.index()].semantics, id);
        }
        self.tokens[token.index()].semantics.push(id);
        self.dim = Some(anchor.len());
        self.semantics.push(SemanticNode {
            id,
            token,
            anchor,
            member_count,
            tau_anomaly: tau,
            chunk_freq,
        });
        Ok(id)
    }

    /// Folds one more contextual embedding into an existing node: running
    /// mean of the anchor weighted by `member_count`, then re-normalization.
    pub fn assign_occurrence(&mut self, sem: SemId, chunk: ChunkId, embedding: &[f32]) -> Result<()> {
        self.semantic(sem)?;
        self.chunk(chunk)?;
        if Some(embedding.len()) != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim.unwrap_or(0),
                found: embedding.len(),
            });
        }
        let node = &mut self.semantics[sem.index()];
        let n = node.member_count as f64;
        let updated: Vec<f64> = node
            .anchor
            .iter()
            .zip(embedding)
            .map(|(&a, &e)| (a as f64 * n + e as f64) / (n + 1.0))
            .collect();
        if let Some(anchor) = vector::normalize_f64(&updated) {
            node.anchor = anchor;
        }
        node.member_count += 1;
        let freq = node.chunk_freq.entry(chunk).or_insert(0);
        *freq += 1;
        if *freq == 1 {
            insert_sorted(&mut self.chunks[chunk.index()].semantics, sem);
        }
        Ok(())
    }

    fn checked_anchor(&self, anchor: &[f32]) -> Result<Vec<f32>> {
        let norm = vector::norm(anchor);
        if !norm.is_finite() || (norm - 1.0).abs() > ANCHOR_NORM_TOLERANCE {
            return Err(Error::InvalidAnchor { norm });
        }
        if let Some(dim) = self.dim {
            if anchor.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: anchor.len(),
                });
            }
        }
        vector::normalize(anchor).ok_or(Error::InvalidAnchor { norm })
    }

    /// All edges, grouped by kind and ordered by id.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for c in &self.chunks {
            out.push(Edge::DocChunk(c.doc, c.id));
        }
        for s in &self.semantics {
            out.extend(s.chunk_freq.keys().map(|&c| Edge::ChunkSemantic(c, s.id)));
        }
        for s in &self.semantics {
            out.push(Edge::SemanticToken(s.id, s.token));
        }
        out
    }

    /// Checks the structural invariants, returning the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (i, d) in self.docs.iter().enumerate() {
            if d.id.index() != i {
                return Err(format!("document {i} has id {}", d.id));
            }
            for &c in &d.chunks {
                match self.chunks.get(c.index()) {
                    Some(chunk) if chunk.doc == d.id => {}
                    _ => return Err(format!("{} lists chunk {c} it does not own", d.id)),
                }
            }
        }
        let mut owners = vec![0usize; self.chunks.len()];
        for d in &self.docs {
            for &c in &d.chunks {
                owners[c.index()] += 1;
            }
        }
        let mut total = 0u64;
        for (i, c) in self.chunks.iter().enumerate() {
            if c.id.index() != i {
                return Err(format!("chunk {i} has id {}", c.id));
            }
            let owners = owners[i];
            if owners != 1 || self.docs.get(c.doc.index()).is_none() {
                return Err(format!("{} has {owners} owning documents", c.id));
            }
            for &s in &c.semantics {
                match self.semantics.get(s.index()) {
                    Some(node) if node.chunk_freq.contains_key(&c.id) => {}
                    _ => return Err(format!("{} links {s} without a frequency entry", c.id)),
                }
            }
            total += c.length_terms as u64;
        }
        if total != self.stats.total_terms || self.stats.chunk_count != self.chunks.len() as u64 {
            return Err("corpus statistics disagree with stored chunks".into());
        }
        if self.stats.df.values().any(|&df| df as u64 > self.stats.chunk_count) {
            return Err("document frequency exceeds chunk count".into());
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.id.index() != i || self.surfaces.get(&t.surface) != Some(&t.id) {
                return Err(format!("token {i} is not indexed by its surface"));
            }
            for &s in &t.semantics {
                if self.semantics.get(s.index()).map(|n| n.token) != Some(t.id) {
                    return Err(format!("{} lists foreign semantic node {s}", t.id));
                }
            }
        }
        for (i, s) in self.semantics.iter().enumerate() {
            if s.id.index() != i {
                return Err(format!("semantic node {i} has id {}", s.id));
            }
            let family = match self.tokens.get(s.token.index()) {
                Some(t) => &t.semantics,
                None => return Err(format!("{} has no token", s.id)),
            };
            if family.iter().filter(|&&x| x == s.id).count() != 1 {
                return Err(format!("{} missing from its token family", s.id));
            }
            if (vector::norm(&s.anchor) - 1.0).abs() > 1e-6 {
                return Err(format!("{} anchor is not unit norm", s.id));
            }
            if Some(s.anchor.len()) != self.dim {
                return Err(format!("{} anchor has the wrong dimension", s.id));
            }
            if s.member_count == 0 || s.chunk_freq.is_empty() {
                return Err(format!("{} has no members", s.id));
            }
            for &c in s.chunk_freq.keys() {
                match self.chunks.get(c.index()) {
                    Some(chunk) if chunk.semantics.binary_search(&s.id).is_ok() => {}
                    _ => return Err(format!("{} frequency entry for {c} has no edge", s.id)),
                }
            }
        }
        Ok(())
    }

    /// Reassembles a graph from its persisted parts, rebuilding every
    /// derived adjacency list and lookup table.
    pub(crate) fn from_parts(
        docs: Vec<(String, String, u64)>,
        chunks: Vec<(DocId, String, u32)>,
        tokens: Vec<(String, f64)>,
        semantics: Vec<SemanticNode>,
        stats: CorpusStats,
        dim: Option<usize>,
    ) -> std::result::Result<Self, String> {
        let mut g = SemanticGraph {
            stats,
            dim,
            ..Default::default()
        };
        for (i, (key, title, offset)) in docs.into_iter().enumerate() {
            if g.doc_keys.insert(key.clone(), DocId(i as u32)).is_some() {
                return Err(format!("duplicate document key {key:?}"));
            }
            g.docs.push(DocumentNode {
                id: DocId(i as u32),
                key,
                title,
                source_offset: offset,
                chunks: Vec::new(),
            });
        }
        for (i, (doc, text, length_terms)) in chunks.into_iter().enumerate() {
            let id = ChunkId(i as u32);
            g.docs
                .get_mut(doc.index())
                .ok_or_else(|| format!("chunk {id} references missing {doc}"))?
                .chunks
                .push(id);
            g.chunks.push(ChunkNode {
                id,
                doc,
                text,
                length_terms,
                semantics: Vec::new(),
            });
        }
        for (i, (surface, idf)) in tokens.into_iter().enumerate() {
            let id = TokenId(i as u32);
            if g.surfaces.insert(surface.clone(), id).is_some() {
                return Err(format!("duplicate token surface {surface:?}"));
            }
            g.tokens.push(TokenNode {
                id,
                surface,
                idf,
                semantics: Vec::new(),
            });
        }
        for node in &semantics {
            g.tokens
                .get_mut(node.token.index())
                .ok_or_else(|| format!("{} references missing {}", node.id, node.token))?
                .semantics
                .push(node.id);
            for &c in node.chunk_freq.keys() {
                g.chunks
                    .get_mut(c.index())
                    .ok_or_else(|| format!("{} references missing {c}", node.id))?
                    .semantics
                    .push(node.id);
            }
        }
        g.semantics = semantics;
        Ok(g)
    }
}

fn insert_sorted<T: Ord + Copy>(list: &mut Vec<T>, value: T) {
    if let Err(pos) = list.binary_search(&value) {
        list.insert(pos, value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::TermOccurrence;

    fn terms(n: usize) -> Vec<TermOccurrence> {
        (0..n)
            .map(|i| TermOccurrence {
                surface: format!("w{i}"),
                span: (i * 3, i * 3 + 2),
                is_phrase: false,
            })
            .collect()
    }

    fn unit(dim: usize, axis: usize) -> Vec<f32> {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        v
    }

    #[test]
    fn insert_chunk_echoes_length() {
        let mut g = SemanticGraph::new();
        let d = g.add_document("d1", "", 0).unwrap();
        let c = g.insert_chunk(d, "the cat sat", &terms(3)).unwrap();
        assert_eq!(g.chunk(c).unwrap().length_terms, 3);
        assert_eq!(g.doc(d).unwrap().chunks, vec![c]);
    }

    #[test]
    fn average_chunk_length_is_mean() {
        let mut g = SemanticGraph::new();
        let d = g.add_document("d1", "", 0).unwrap();
        g.insert_chunk(d, "a b", &terms(2)).unwrap();
        g.insert_chunk(d, "a b c d", &terms(4)).unwrap();
        assert_eq!(g.stats().avg_chunk_len(), 3.0);
        assert_eq!(g.stats().df("w0"), 2);
        assert_eq!(g.stats().df("w3"), 1);
    }

    #[test]
    fn unknown_document_is_not_found() {
        let mut g = SemanticGraph::new();
        let err = g.insert_chunk(DocId(7), "text", &[]).unwrap_err();
        assert!(matches!(err, Error::NotFound { .. }));
    }

    #[test]
    fn empty_chunk_is_rejected() {
        let mut g = SemanticGraph::new();
        let d = g.add_document("d1", "", 0).unwrap();
        assert!(matches!(g.insert_chunk(d, "  ", &[]), Err(Error::EmptyChunk)));
    }

    #[test]
    fn duplicate_document_key_is_rejected() {
        let mut g = SemanticGraph::new();
        g.add_document("d1", "", 0).unwrap();
        assert!(matches!(g.add_document("d1", "", 5), Err(Error::DuplicateDocument(_))));
    }

    #[test]
    fn attach_records_frequencies_and_family() {
        let mut g = SemanticGraph::new();
        let d = g.add_document("d1", "", 0).unwrap();
        let c1 = g.insert_chunk(d, "cat", &terms(1)).unwrap();
        let t = g.token_by_surface("w0").unwrap();
        let s1 = g.attach_semantic_node(t, &unit(4, 0), &[(c1, 2)], 0.3).unwrap();
        assert_eq!(g.semantic(s1).unwrap().freq_in(c1), 2);
        assert_eq!(g.semantic(s1).unwrap().member_count, 2);
        let s2 = g.attach_semantic_node(t, &unit(4, 1), &[(c1, 1)], 0.3).unwrap();
        assert_eq!(g.token_family(t).unwrap(), &[s1, s2]);
        assert_eq!(g.chunk(c1).unwrap().semantics, vec![s1, s2]);
        g.validate().unwrap();
    }

    #[test]
    fn attach_rejects_non_unit_anchor() {
        let mut g = SemanticGraph::new();
        let d = g.add_document("d1", "", 0).unwrap();
        let c1 = g.insert_chunk(d, "cat", &terms(1)).unwrap();
        let t = g.token_by_surface("w0").unwrap();
        let err = g.attach_semantic_node(t, &[0.5, 0.0], &[(c1, 1)], 0.3).unwrap_err();
        assert!(matches!(err, Error::InvalidAnchor { .. }));
        let err = g
            .attach_semantic_node(t, &unit(2, 0), &[(ChunkId(9), 1)], 0.3)
            .unwrap_err();
        assert!(matches!(err, Error::NotFound { .. }));
    }

    #[test]
    fn assigning_the_anchor_keeps_it_fixed() {
        let mut g = SemanticGraph::new();
        let d = g.add_document("d1", "", 0).unwrap();
        let c1 = g.insert_chunk(d, "cat", &terms(1)).unwrap();
        let c2 = g.insert_chunk(d, "cat", &terms(1)).unwrap();
        let t = g.token_by_surface("w0").unwrap();
        let a = vector::normalize(&[0.3, -0.2, 0.9]).unwrap();
        let s = g.attach_semantic_node(t, &a, &[(c1, 1)], 0.3).unwrap();
        g.assign_occurrence(s, c2, &a).unwrap();
        let node = g.semantic(s).unwrap();
        for (x, y) in node.anchor.iter().zip(&a) {
            assert!((x - y).abs() < 1e-6);
        }
        assert_eq!(node.member_count, 2);
        assert_eq!(g.chunk(c2).unwrap().semantics, vec![s]);
        g.validate().unwrap();
    }

    #[test]
    fn edges_respect_layering() {
        let mut g = SemanticGraph::new();
        let d = g.add_document("d1", "", 0).unwrap();
        let c1 = g.insert_chunk(d, "cat", &terms(1)).unwrap();
        let t = g.token_by_surface("w0").unwrap();
        let s = g.attach_semantic_node(t, &unit(3, 2), &[(c1, 1)], 0.1).unwrap();
        assert_eq!(
            g.edges(),
            vec![
                Edge::DocChunk(d, c1),
                Edge::ChunkSemantic(c1, s),
                Edge::SemanticToken(s, t)
            ]
        );
    }
}
