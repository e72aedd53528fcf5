//! Per-token semantic induction.
//!
//! A token whose occurrences are both informative (idf above `tau_idf`) and
//! dispersed (S-mean below `tau_disp`) has its contextual embeddings clustered
//! into one semantic node per meaning; every other token gets a single node.
//! Raw embeddings are only held for the duration of one token's induction.

mod anomaly;
mod hdbscan;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ChunkId, TokenId};
use crate::vector;

pub use anomaly::{
    assimilate_embedding, recluster_anomalies, AnomalySet, AnomalyStore, Assimilation, ReclusterOutcome,
};
pub use hdbscan::{density_cluster, ClusterParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InductionConfig {
    pub tau_idf: f64,
    pub tau_disp: f64,
    pub min_cluster_size: usize,
    /// Percentile `n` of member-to-anchor similarity used as the anomaly threshold.
    pub anomaly_percentile: f64,
    pub anomaly_set_capacity: usize,
    pub aggregation_noise_threshold: f64,
    /// Cosine distance beyond which two embeddings are never linked by the clusterer.
    pub cluster_max_distance: f64,
}

impl Default for InductionConfig {
    fn default() -> Self {
        Self {
            tau_idf: 1.0,
            tau_disp: 0.85,
            min_cluster_size: 3,
            anomaly_percentile: 5.0,
            anomaly_set_capacity: 16,
            aggregation_noise_threshold: 0.3,
            cluster_max_distance: 0.75,
        }
    }
}

impl InductionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.tau_idf.is_nan() || self.tau_idf < 0.0 {
            return bad("tau_idf must be >= 0");
        }
        if !(-1.0..=1.0).contains(&self.tau_disp) {
            return bad("tau_disp must lie in [-1, 1]");
        }
        if self.min_cluster_size < 2 {
            return bad("min_cluster_size must be >= 2");
        }
        if !(self.anomaly_percentile > 0.0 && self.anomaly_percentile < 100.0) {
            return bad("anomaly_percentile must lie in (0, 100)");
        }
        if self.anomaly_set_capacity < 1 {
            return bad("anomaly_set_capacity must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.aggregation_noise_threshold) {
            return bad("aggregation_noise_threshold must lie in [0, 1]");
        }
        if self.cluster_max_distance.is_nan() || self.cluster_max_distance <= 0.0 {
            return bad("cluster_max_distance must be > 0");
        }
        Ok(())
    }

    pub fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            min_cluster_size: self.min_cluster_size,
            max_distance: self.cluster_max_distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingItem {
    pub embedding: Vec<f32>,
    pub chunk: ChunkId,
    pub span: (usize, usize),
}

/// All contextual embeddings of one token across the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    token: TokenId,
    items: Vec<EmbeddingItem>,
}

impl EmbeddingBatch {
    pub fn new(token: TokenId, items: Vec<EmbeddingItem>) -> Result<Self> {
        let Some(first) = items.first() else {
            return Err(Error::EmptyInput);
        };
        let dim = first.embedding.len();
        if let Some(bad) = items.iter().find(|i| i.embedding.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.embedding.len(),
            });
        }
        Ok(Self { token, items })
    }

    pub fn token(&self) -> TokenId {
        self.token
    }

    pub fn items(&self) -> &[EmbeddingItem] {
        &self.items
    }

    pub fn dim(&self) -> usize {
        self.items[0].embedding.len()
    }

    fn embeddings(&self) -> Vec<&[f32]> {
        self.items.iter().map(|i| i.embedding.as_slice()).collect()
    }
}

/// Mean cosine of each vector to the centroid; 0 when the centroid vanishes.
pub fn s_mean<P: AsRef<[f32]>>(vectors: &[P]) -> Result<f64> {
    let Some(first) = vectors.first() else {
        return Err(Error::EmptyInput);
    };
    let centroid = vector::mean(vectors.iter().map(|v| v.as_ref()), first.as_ref().len());
    let cn = centroid.iter().map(|x| x * x).sum::<f64>().sqrt();
    if cn < 1e-12 {
        return Ok(0.0);
    }
    let total: f64 = vectors
        .iter()
        .map(|v| {
            let v = v.as_ref();
            let vn = vector::norm(v);
            if vn <= 1e-300 {
                return 0.0;
            }
            let d: f64 = v.iter().zip(&centroid).map(|(&a, &c)| a as f64 * c).sum();
            (d / (vn * cn)).clamp(-1.0, 1.0)
        })
        .sum();
    Ok((total / vectors.len() as f64).clamp(-1.0, 1.0))
}

pub fn should_induce(idf: f64, smean: f64, cfg: &InductionConfig) -> bool {
    idf > cfg.tau_idf && smean < cfg.tau_disp
}

/// Nearest-rank percentile: the value at index `ceil(n/100 * len) - 1` of the sorted input.
pub fn nth_percentile(values: &[f64], n: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (n * sorted.len() as f64 / 100.0).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// One re-normalized mean embedding per distinct chunk, in order of first appearance.
pub fn aggregate_by_chunk(batch: &EmbeddingBatch) -> Vec<(Vec<f32>, ChunkId)> {
    let mut order: Vec<ChunkId> = Vec::new();
    let mut groups: HashMap<ChunkId, Vec<&[f32]>> = HashMap::new();
    for item in &batch.items {
        groups
            .entry(item.chunk)
            .or_insert_with(|| {
                order.push(item.chunk);
                Vec::new()
            })
            .push(&item.embedding);
    }
    let dim = batch.dim();
    order
        .into_iter()
        .map(|c| {
            let members = &groups[&c];
            let v = vector::mean_direction(members.iter().copied(), dim).unwrap_or_else(|| members[0].to_vec());
            (v, c)
        })
        .collect()
}

/// Which branch of induction produced a token's nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InductionPath {
    GateFailed,
    Raw,
    Aggregated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InducedNode {
    pub anchor: Vec<f32>,
    pub members: BTreeMap<ChunkId, u32>,
    pub member_count: u32,
    pub tau_anomaly: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Induction {
    pub nodes: Vec<InducedNode>,
    pub path: InductionPath,
}

/// Induces the semantic nodes of one token.
pub fn induce_semantic_nodes(batch: &EmbeddingBatch, idf: f64, cfg: &InductionConfig) -> Result<Induction> {
    let embeddings = batch.embeddings();
    let smean = s_mean(&embeddings)?;
    let all: Vec<usize> = (0..embeddings.len()).collect();
    if !should_induce(idf, smean, cfg) {
        return Ok(Induction {
            nodes: vec![single_node(batch, &all, cfg)?],
            path: InductionPath::GateFailed,
        });
    }

    let params = cfg.cluster_params();
    let labels = density_cluster(&embeddings, &params);
    if !is_degenerate(batch, &labels, cfg) {
        let assignment = attach_noise(&embeddings, &labels);
        return Ok(Induction {
            nodes: build_nodes(batch, &assignment, cfg)?,
            path: InductionPath::Raw,
        });
    }

    let aggregated = aggregate_by_chunk(batch);
    let agg_vectors: Vec<&[f32]> = aggregated.iter().map(|(v, _)| v.as_slice()).collect();
    let agg_labels = density_cluster(&agg_vectors, &params);
    if agg_labels.iter().all(Option::is_none) {
        return Ok(Induction {
            nodes: vec![single_node(batch, &all, cfg)?],
            path: InductionPath::Aggregated,
        });
    }
    let agg_assignment = attach_noise(&agg_vectors, &agg_labels);
    let by_chunk: HashMap<ChunkId, usize> = aggregated
        .iter()
        .zip(&agg_assignment.cluster)
        .map(|((_, c), &k)| (*c, k))
        .collect();
    let assignment = Assignment {
        cluster: batch.items.iter().map(|i| by_chunk[&i.chunk]).collect(),
        anchors: agg_assignment.anchors,
    };
    Ok(Induction {
        nodes: build_nodes(batch, &assignment, cfg)?,
        path: InductionPath::Aggregated,
    })
}

/// Raw clustering is rejected when it finds nothing, finds one cluster while
/// leaving too much noise, or forms a cluster confined to a single chunk
/// (repeated mentions in one chunk share their context and would otherwise
/// masquerade as a meaning of their own).
fn is_degenerate(batch: &EmbeddingBatch, labels: &[Option<usize>], cfg: &InductionConfig) -> bool {
    let clusters = labels.iter().flatten().max().map_or(0, |&m| m + 1);
    if clusters == 0 {
        return true;
    }
    let noise = labels.iter().filter(|l| l.is_none()).count();
    if clusters == 1 && noise as f64 / labels.len() as f64 > cfg.aggregation_noise_threshold {
        return true;
    }
    let mut chunk_of: Vec<Option<ChunkId>> = vec![None; clusters];
    let mut spread = vec![false; clusters];
    for (item, label) in batch.items.iter().zip(labels) {
        if let Some(k) = *label {
            match chunk_of[k] {
                None => chunk_of[k] = Some(item.chunk),
                Some(c) if c != item.chunk => spread[k] = true,
                _ => {}
            }
        }
    }
    let distinct_chunks = batch
        .items
        .iter()
        .map(|i| i.chunk)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    distinct_chunks > 1 && spread.iter().any(|s| !s)
}

struct Assignment {
    /// Cluster of every point after noise attachment.
    cluster: Vec<usize>,
    anchors: Vec<Vec<f32>>,
}

/// Anchors are the normalized cluster means; noise joins the most similar anchor.
fn attach_noise(points: &[&[f32]], labels: &[Option<usize>]) -> Assignment {
    let k = labels.iter().flatten().max().map_or(0, |&m| m + 1);
    let dim = points[0].len();
    let anchors: Vec<Vec<f32>> = (0..k)
        .map(|c| {
            let members = points
                .iter()
                .zip(labels)
                .filter(|(_, l)| **l == Some(c))
                .map(|(p, _)| *p);
            vector::mean_direction(members, dim).unwrap_or_else(|| {
                let first = labels.iter().position(|l| *l == Some(c)).unwrap();
                points[first].to_vec()
            })
        })
        .collect();
    let cluster = points
        .iter()
        .zip(labels)
        .map(|(p, l)| l.unwrap_or_else(|| nearest(p, &anchors)))
        .collect();
    Assignment { cluster, anchors }
}

/// Index of the most similar anchor; ties go to the lower index.
pub(crate) fn nearest<A: AsRef<[f32]>>(v: &[f32], anchors: &[A]) -> usize {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (i, a) in anchors.iter().enumerate() {
        let s = vector::cosine(v, a.as_ref());
        if s > best_sim {
            best = i;
            best_sim = s;
        }
    }
    best
}

fn build_nodes(batch: &EmbeddingBatch, assignment: &Assignment, cfg: &InductionConfig) -> Result<Vec<InducedNode>> {
    assignment
        .anchors
        .iter()
        .enumerate()
        .map(|(k, anchor)| {
            let idx: Vec<usize> = (0..batch.items.len()).filter(|&i| assignment.cluster[i] == k).collect();
            node_from(batch, &idx, anchor.clone(), cfg)
        })
        .collect()
}

fn single_node(batch: &EmbeddingBatch, idx: &[usize], cfg: &InductionConfig) -> Result<InducedNode> {
    let anchor = vector::mean_direction(idx.iter().map(|&i| batch.items[i].embedding.as_slice()), batch.dim())
        .or_else(|| vector::normalize(&batch.items[idx[0]].embedding))
        .ok_or(Error::InvalidAnchor { norm: 0.0 })?;
    node_from(batch, idx, anchor, cfg)
}

fn node_from(batch: &EmbeddingBatch, idx: &[usize], anchor: Vec<f32>, cfg: &InductionConfig) -> Result<InducedNode> {
    let mut members = BTreeMap::new();
    for &i in idx {
        *members.entry(batch.items[i].chunk).or_insert(0u32) += 1;
    }
    let sims: Vec<f64> = idx
        .iter()
        .map(|&i| vector::cosine(&batch.items[i].embedding, &anchor))
        .collect();
    Ok(InducedNode {
        tau_anomaly: nth_percentile(&sims, cfg.anomaly_percentile)?,
        member_count: idx.len() as u32,
        members,
        anchor,
    })
}

/// Induction counters, reported by the indexer and logged per token.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InductionStats {
    pub tokens: u64,
    pub gate_passed: u64,
    pub aggregation_fallbacks: u64,
    pub multi_sense: u64,
}

impl InductionStats {
    pub fn record(&mut self, token: TokenId, induction: &Induction) {
        self.tokens += 1;
        if induction.path != InductionPath::GateFailed {
            self.gate_passed += 1;
        }
        if induction.path == InductionPath::Aggregated {
            self.aggregation_fallbacks += 1;
        }
        if induction.nodes.len() > 1 {
            self.multi_sense += 1;
        }
        tracing::debug!(
            target: "semgraph::induction",
            token = %token,
            path = ?induction.path,
            nodes = induction.nodes.len(),
            aggregation_fallbacks = self.aggregation_fallbacks,
            "induced"
        );
    }

    pub fn merge(&mut self, other: &InductionStats) {
        self.tokens += other.tokens;
        self.gate_passed += other.gate_passed;
        self.aggregation_fallbacks += other.aggregation_fallbacks;
        self.multi_sense += other.multi_sense;
    }
}
