//! Incremental assignment of new occurrences to existing semantic nodes.
//!
//! An embedding that is not similar enough to any of its token's anchors is
//! quarantined. Once a token's quarantine reaches capacity it is clustered on
//! its own: clusters become new semantic nodes, the rest are absorbed by the
//! nearest node.

use std::collections::{BTreeMap, HashMap};

use super::{density_cluster, nearest, nth_percentile, InductionConfig};
use crate::error::{Error, Result};
use crate::graph::{ChunkId, SemId, SemanticGraph, TokenId};
use crate::vector;

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalySet {
    pub token: TokenId,
    pub pending: Vec<(Vec<f32>, ChunkId)>,
}

/// Quarantined embeddings per token. Lives only in memory.
#[derive(Debug, Default)]
pub struct AnomalyStore {
    sets: HashMap<TokenId, AnomalySet>,
}

impl AnomalyStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, token: TokenId) -> Option<&AnomalySet> {
        self.sets.get(&token)
    }

    pub fn pending_len(&self, token: TokenId) -> usize {
        self.sets.get(&token).map_or(0, |s| s.pending.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReclusterOutcome {
    /// At least one cluster was found; these nodes were created.
    NewNodes(Vec<SemId>),
    /// No cluster; every pending embedding went to its nearest node.
    Absorbed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assimilation {
    Assigned(SemId),
    /// Stored as an anomaly; `recluster` is set when this filled the set.
    Quarantined {
        recluster: Option<ReclusterOutcome>,
    },
}

/// Routes one new occurrence of `token` to a node or to the anomaly set.
pub fn assimilate_embedding(
    token: TokenId,
    embedding: &[f32],
    chunk: ChunkId,
    graph: &mut SemanticGraph,
    store: &mut AnomalyStore,
    cfg: &InductionConfig,
) -> Result<Assimilation> {
    let family = graph.token_family(token)?.to_vec();
    if family.is_empty() {
        return Err(Error::InvalidState(format!("{token} has no semantic nodes")));
    }
    let mut best = family[0];
    let mut best_sim = f64::NEG_INFINITY;
    for &s in &family {
        let sim = vector::cosine(embedding, &graph.semantic(s)?.anchor);
        if sim > best_sim {
            best = s;
            best_sim = sim;
        }
    }
    if best_sim >= graph.semantic(best)?.tau_anomaly {
        graph.assign_occurrence(best, chunk, embedding)?;
        return Ok(Assimilation::Assigned(best));
    }

    graph.chunk(chunk)?;
    let set = store.sets.entry(token).or_insert_with(|| AnomalySet {
        token,
        pending: Vec::new(),
    });
    set.pending.push((embedding.to_vec(), chunk));
    let recluster = if set.pending.len() >= cfg.anomaly_set_capacity {
        Some(recluster_anomalies(token, graph, store, cfg)?)
    } else {
        None
    };
    Ok(Assimilation::Quarantined { recluster })
}

/// Clusters a token's anomaly set and empties it.
pub fn recluster_anomalies(
    token: TokenId,
    graph: &mut SemanticGraph,
    store: &mut AnomalyStore,
    cfg: &InductionConfig,
) -> Result<ReclusterOutcome> {
    let pending = match store.sets.get_mut(&token) {
        Some(set) if !set.pending.is_empty() => std::mem::take(&mut set.pending),
        _ => return Err(Error::InvalidState(format!("anomaly set of {token} is empty"))),
    };
    let points: Vec<&[f32]> = pending.iter().map(|(v, _)| v.as_slice()).collect();
    let labels = density_cluster(&points, &cfg.cluster_params());
    let clusters = labels.iter().flatten().max().map_or(0, |&m| m + 1);

    let mut created = Vec::with_capacity(clusters);
    for k in 0..clusters {
        let idx: Vec<usize> = (0..pending.len()).filter(|&i| labels[i] == Some(k)).collect();
        let dim = points[0].len();
        let anchor =
            vector::mean_direction(idx.iter().map(|&i| points[i]), dim).ok_or(Error::InvalidAnchor { norm: 0.0 })?;
        let sims: Vec<f64> = idx.iter().map(|&i| vector::cosine(points[i], &anchor)).collect();
        let tau = nth_percentile(&sims, cfg.anomaly_percentile)?;
        let mut members = BTreeMap::new();
        for &i in &idx {
            *members.entry(pending[i].1).or_insert(0u32) += 1;
        }
        let members: Vec<(ChunkId, u32)> = members.into_iter().collect();
        created.push(graph.attach_semantic_node(token, &anchor, &members, tau)?);
    }

    let family = graph.token_family(token)?.to_vec();
    let anchors: Vec<Vec<f32>> = family
        .iter()
        .map(|&s| graph.semantic(s).map(|n| n.anchor.clone()))
        .collect::<Result<_>>()?;
    for (i, (v, chunk)) in pending.iter().enumerate() {
        if labels[i].is_none() {
            graph.assign_occurrence(family[nearest(v, &anchors)], *chunk, v)?;
        }
    }
    tracing::debug!(target: "semgraph::induction", token = %token, new_nodes = created.len(), "reclustered anomalies");

    Ok(if created.is_empty() {
        ReclusterOutcome::Absorbed
    } else {
        ReclusterOutcome::NewNodes(created)
    })
}
