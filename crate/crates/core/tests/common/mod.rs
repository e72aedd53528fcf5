//! Definition-level oracles and random fixtures shared by the property and
//! acceptance suites. Every oracle here is written from the formula, not by
//! calling into the library's helpers.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use semgraph::eval::{Qrels, RunFile};
use semgraph::graph::{ChunkId, SemId, SemanticGraph};
use semgraph::retrieval::{MatchLevel, QueryConfig, SemanticMatch};
use semgraph::text::{extract_terms, ChunkingConfig};

pub const VOCAB: [&str; 8] = ["red", "blue", "green", "gold", "pink", "teal", "gray", "navy"];
pub const DIM: usize = 4;

/// Smallest value `v` of the input with `#{x <= v} * 100 >= n * len`.
pub fn percentile_oracle(values: &[f64], n: f64) -> f64 {
    let len = values.len() as f64;
    let mut candidates = values.to_vec();
    candidates.sort_by(f64::total_cmp);
    for &v in &candidates {
        let below = values.iter().filter(|&&x| x <= v).count() as f64;
        if below * 100.0 >= n * len {
            return v;
        }
    }
    *candidates.last().unwrap()
}

/// Mean over vectors of `cos(v, centroid)`; 0 for a vanishing centroid.
pub fn s_mean_oracle(vectors: &[Vec<f32>]) -> f64 {
    let dim = vectors[0].len();
    let mut centroid = vec![0.0f64; dim];
    for v in vectors {
        for k in 0..dim {
            centroid[k] += v[k] as f64 / vectors.len() as f64;
        }
    }
    let cn = centroid.iter().map(|c| c * c).sum::<f64>().sqrt();
    if cn < 1e-12 {
        return 0.0;
    }
    let mut total = 0.0;
    for v in vectors {
        let vn = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        let dot: f64 = (0..dim).map(|k| v[k] as f64 * centroid[k]).sum();
        total += dot / (vn * cn);
    }
    total / vectors.len() as f64
}

pub fn cooc_oracle(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    a.intersection(b).count() as f64 / ((a.len() * b.len()) as f64).sqrt()
}

pub fn idf_oracle(n: f64, df: f64) -> f64 {
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

pub fn tf_oracle(f: f64, len: f64, avg: f64, k1: f64, b: f64) -> f64 {
    f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len / avg))
}

/// One semantic node of a random graph.
#[derive(Debug, Clone)]
pub struct NodeFixture {
    pub word: usize,
    pub anchor: Vec<f32>,
    /// `(chunk index, occurrence count)`, distinct chunks.
    pub members: Vec<(usize, u32)>,
}

#[derive(Debug, Clone)]
pub struct GraphFixture {
    pub chunks: Vec<Vec<usize>>,
    pub nodes: Vec<NodeFixture>,
}

impl GraphFixture {
    pub fn chunk_text(&self, c: usize) -> String {
        self.chunks[c].iter().map(|&w| VOCAB[w]).collect::<Vec<_>>().join(" ")
    }

    pub fn build(&self) -> SemanticGraph {
        let mut g = SemanticGraph::new();
        let doc = g.add_document("doc", "", 0).unwrap();
        let cfg = ChunkingConfig::default();
        let ids: Vec<ChunkId> = (0..self.chunks.len())
            .map(|c| {
                let text = self.chunk_text(c);
                g.insert_chunk(doc, &text, &extract_terms(&text, &cfg)).unwrap()
            })
            .collect();
        g.refresh_idf();
        for n in &self.nodes {
            let token = g.ensure_token(VOCAB[n.word]);
            let members: Vec<(ChunkId, u32)> = n.members.iter().map(|&(c, k)| (ids[c], k)).collect();
            g.attach_semantic_node(token, &n.anchor, &members, 0.5).unwrap();
        }
        g.validate().unwrap();
        g
    }

    pub fn chunk_set(&self, node: usize) -> BTreeSet<usize> {
        self.nodes[node].members.iter().map(|&(c, _)| c).collect()
    }

    pub fn freq(&self, node: usize, chunk: usize) -> u32 {
        self.nodes[node]
            .members
            .iter()
            .find(|&&(c, _)| c == chunk)
            .map_or(0, |&(_, k)| k)
    }
}

pub fn unit_vector(dim: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-1.0f32..1.0, dim)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f32>() > 1e-3)
        .prop_map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
}

/// Graphs with up to `max_chunks` chunks and `max_nodes` semantic nodes.
pub fn graph_fixture(max_chunks: usize, max_nodes: usize) -> impl Strategy<Value = GraphFixture> {
    (1..=max_chunks).prop_flat_map(move |nc| {
        let chunks = prop::collection::vec(prop::collection::vec(0..VOCAB.len(), 1..6), nc);
        let node = (
            0..VOCAB.len(),
            unit_vector(DIM),
            1u32..(1 << nc),
            prop::collection::vec(1u32..4, nc),
        )
            .prop_map(move |(word, anchor, mask, counts)| NodeFixture {
                word,
                anchor,
                members: (0..nc)
                    .filter(|c| mask & (1 << c) != 0)
                    .map(|c| (c, counts[c]))
                    .collect(),
            });
        (chunks, prop::collection::vec(node, 1..=max_nodes)).prop_map(|(chunks, nodes)| GraphFixture { chunks, nodes })
    })
}

pub fn level() -> impl Strategy<Value = MatchLevel> {
    prop_oneof![
        Just(MatchLevel::Exact),
        Just(MatchLevel::Partial),
        Just(MatchLevel::Similarity)
    ]
}

/// One match per node with a random level and similarity.
pub fn matches_for(n_nodes: usize) -> impl Strategy<Value = Vec<SemanticMatch>> {
    prop::collection::vec((level(), 0.0f64..1.0), n_nodes).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (level, sim))| SemanticMatch {
                sem: SemId(i as u32),
                level,
                query_sim: sim,
                source_query_token: String::new(),
            })
            .collect()
    })
}

pub fn alpha_oracle(level: MatchLevel, cfg: &QueryConfig) -> f64 {
    match level {
        MatchLevel::Exact => cfg.alpha_exact,
        MatchLevel::Partial => cfg.alpha_partial,
        MatchLevel::Similarity => cfg.alpha_similarity,
    }
}

/// Brute-force stage 1: every chunk of every non-isolated node, scored from
/// the fixture description, sorted by score descending then chunk index.
pub fn stage1_oracle(fx: &GraphFixture, matches: &[SemanticMatch], cfg: &QueryConfig) -> Vec<(usize, f64)> {
    let n = matches.len();
    let sets: Vec<BTreeSet<usize>> = (0..n).map(|i| fx.chunk_set(matches[i].sem.index())).collect();
    let mut strength = vec![0.0; n];
    let mut linked = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = cooc_oracle(&sets[i], &sets[j]);
            if w > cfg.min_cooc_weight && w > 0.0 {
                strength[i] += w;
                linked[i] = true;
            }
        }
    }
    let lengths: Vec<f64> = fx.chunks.iter().map(|c| c.len() as f64).collect();
    let total_chunks = lengths.len() as f64;
    let avg = lengths.iter().sum::<f64>() / total_chunks;
    let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
    for i in (0..n).filter(|&i| linked[i]) {
        for &c in &sets[i] {
            scores.entry(c).or_insert(0.0);
        }
    }
    for (&c, score) in scores.iter_mut() {
        for i in (0..n).filter(|&i| linked[i]) {
            let f = fx.freq(matches[i].sem.index(), c) as f64;
            if f == 0.0 {
                continue;
            }
            let w = strength[i] * alpha_oracle(matches[i].level, cfg) * matches[i].query_sim;
            let g = idf_oracle(total_chunks, sets[i].len() as f64);
            *score += w * g * tf_oracle(f, lengths[c], avg, cfg.k1, cfg.b);
        }
    }
    let mut out: Vec<(usize, f64)> = scores.into_iter().collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// A random run and matching qrels over small id spaces.
#[derive(Debug, Clone)]
pub struct EvalCase {
    /// Per query: ranked doc ids (duplicates allowed, several chunks per doc).
    pub run: Vec<(String, Vec<String>)>,
    pub gold: Vec<(String, BTreeSet<String>)>,
}

impl EvalCase {
    pub fn run_file(&self) -> RunFile {
        let mut run = RunFile::new();
        for (q, docs) in &self.run {
            run.touch(q);
            for (i, d) in docs.iter().enumerate() {
                run.push(q, &format!("{d}#{i}"), d, 1.0 / (i + 1) as f64);
            }
        }
        run
    }

    pub fn qrels(&self) -> Qrels {
        let mut qrels = Qrels::new();
        for (q, gold) in &self.gold {
            for d in gold {
                qrels.insert(q, d);
            }
        }
        qrels
    }
}

pub fn eval_case() -> impl Strategy<Value = EvalCase> {
    let doc = (0..12usize).prop_map(|d| format!("d{d}"));
    let query = (
        prop::collection::vec(doc.clone(), 0..16),
        prop::collection::btree_set(doc, 1..5),
    );
    prop::collection::vec(query, 1..6).prop_map(|qs| {
        let mut run = Vec::new();
        let mut gold = Vec::new();
        for (i, (docs, g)) in qs.into_iter().enumerate() {
            run.push((format!("q{i}"), docs));
            gold.push((format!("q{i}"), g));
        }
        EvalCase { run, gold }
    })
}

/// Recall@10 straight from the definition: distinct gold documents among the
/// parents of the first ten entries, summed over queries, over total gold.
pub fn recall_oracle(case: &EvalCase) -> f64 {
    let mut num = 0usize;
    let mut den = 0usize;
    for (q, docs) in &case.run {
        let gold = &case.gold.iter().find(|(g, _)| g == q).unwrap().1;
        let mut found = BTreeSet::new();
        for d in docs.iter().take(10) {
            if gold.contains(d) {
                found.insert(d.clone());
            }
        }
        num += found.len();
        den += gold.len();
    }
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn mrr_oracle(case: &EvalCase) -> f64 {
    let mut total = 0.0;
    for (q, docs) in &case.run {
        let gold = &case.gold.iter().find(|(g, _)| g == q).unwrap().1;
        for rank in 1..=10 {
            match docs.get(rank - 1) {
                Some(d) if gold.contains(d) => {
                    total += 1.0 / rank as f64;
                    break;
                }
                _ => {}
            }
        }
    }
    total / case.run.len() as f64
}
