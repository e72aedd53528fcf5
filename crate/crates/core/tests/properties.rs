//! Property tests for the invariants of induction, retrieval and evaluation.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use common::*;
use proptest::prelude::*;
use semgraph::embed::synthetic_encode;
use semgraph::eval::{mrr_at_10, recall_at_10};
use semgraph::graph::{ChunkId, SemId, TokenId};
use semgraph::induction::{
    aggregate_by_chunk, density_cluster, induce_semantic_nodes, nth_percentile, s_mean, should_induce, ClusterParams,
    EmbeddingBatch, EmbeddingItem, InductionConfig,
};
use semgraph::retrieval::{
    build_cooc_graph, cooc_weight, node_weight, retrieve_terms, score_chunk, stage1_retrieve, tf_factor, QueryConfig,
    QueryTerm,
};
use semgraph::vector;

/// Percentiles on a quarter grid keep `n * len` exact in binary floating point.
fn percentile_n() -> impl Strategy<Value = f64> {
    (1u32..400).prop_map(|k| k as f64 / 4.0)
}

/// Points scattered around a few random centres.
fn clustered_points(max: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
    (prop::collection::vec(unit_vector(6), 1..4), 1..=max).prop_flat_map(|(centres, n)| {
        prop::collection::vec((0..centres.len(), prop::collection::vec(-0.15f32..0.15, 6)), n).prop_map(move |pts| {
            pts.into_iter()
                .map(|(c, jitter)| {
                    let v: Vec<f32> = centres[c].iter().zip(&jitter).map(|(a, j)| a + j).collect();
                    vector::normalize(&v).unwrap_or_else(|| centres[c].clone())
                })
                .collect()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn percentile_matches_exhaustive_scan(
        values in prop::collection::vec(-1.0f64..1.0, 1..60),
        n in percentile_n(),
    ) {
        let got = nth_percentile(&values, n).unwrap();
        prop_assert_eq!(got, percentile_oracle(&values, n));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn s_mean_is_bounded_and_matches_definition(vs in prop::collection::vec(unit_vector(5), 1..20)) {
        let s = s_mean(&vs).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert!((s - s_mean_oracle(&vs)).abs() <= 1e-9);
    }

    #[test]
    fn s_mean_is_one_for_parallel_vectors(v in unit_vector(5), scales in prop::collection::vec(0.1f32..3.0, 1..10)) {
        let vs: Vec<Vec<f32>> = scales.iter().map(|s| v.iter().map(|x| x * s).collect()).collect();
        prop_assert!((s_mean(&vs).unwrap() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn gate_flips_only_at_the_idf_threshold(
        smean in -1.0f64..0.85,
        idfs in prop::collection::vec(0.0f64..5.0, 1..50),
    ) {
        let cfg = InductionConfig::default();
        for idf in idfs {
            prop_assert_eq!(should_induce(idf, smean, &cfg), idf > cfg.tau_idf);
        }
        prop_assert!(!should_induce(10.0, cfg.tau_disp, &cfg));
    }

    #[test]
    fn cooc_weight_is_symmetric_bounded_and_exact(fx in graph_fixture(8, 6)) {
        let g = fx.build();
        for i in 0..fx.nodes.len() {
            for j in 0..fx.nodes.len() {
                let w = cooc_weight(SemId(i as u32), SemId(j as u32), &g).unwrap();
                let back = cooc_weight(SemId(j as u32), SemId(i as u32), &g).unwrap();
                prop_assert_eq!(w, back);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&w));
                prop_assert!((w - cooc_oracle(&fx.chunk_set(i), &fx.chunk_set(j))).abs() <= 1e-12);
            }
            let own = cooc_weight(SemId(i as u32), SemId(i as u32), &g).unwrap();
            prop_assert!((own - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn node_weight_is_nonnegative_and_zero_without_edges(
        (fx, matches) in graph_fixture(5, 6).prop_flat_map(|s| { let n = s.nodes.len(); (Just(s), matches_for(n)) })
    ) {
        let g = fx.build();
        let cfg = QueryConfig::default();
        let (cg, isolated) = build_cooc_graph(&matches, &g, &cfg).unwrap();
        for m in cg.nodes.values() {
            let w = node_weight(m, &cg, &cfg);
            prop_assert!(w >= 0.0);
            let strength: f64 = cg.edges.iter().filter(|(&(a, b), _)| a == m.sem || b == m.sem).map(|(_, w)| w).sum();
            prop_assert!(strength > 0.0);
            prop_assert!((w - strength * alpha_oracle(m.level, &cfg) * m.query_sim).abs() <= 1e-12);
        }
        for m in &isolated {
            prop_assert_eq!(node_weight(m, &cg, &cfg), 0.0);
        }
        prop_assert_eq!(cg.nodes.len() + isolated.len(), matches.len());
    }

    #[test]
    fn tf_factor_grows_with_frequency_and_shrinks_with_length(
        f in 1u32..50, len in 1.0f64..200.0, avg in 1.0f64..100.0,
    ) {
        let cfg = QueryConfig::default();
        let base = tf_factor(f as f64, len, avg, &cfg);
        prop_assert!(tf_factor(f as f64 + 1.0, len, avg, &cfg) > base);
        prop_assert!(tf_factor(f as f64, len + 1.0, avg, &cfg) < base);
        prop_assert!(base < cfg.k1 + 1.0);
    }

    #[test]
    fn score_chunk_matches_definition(
        (fx, weights) in graph_fixture(5, 6).prop_flat_map(|s| {
            let n = s.nodes.len();
            (Just(s), prop::collection::vec(0.0f64..5.0, n))
        })
    ) {
        let g = fx.build();
        let cfg = QueryConfig::default();
        let active: Vec<(SemId, f64)> = weights.iter().enumerate().map(|(i, &w)| (SemId(i as u32), w)).collect();
        let n = fx.chunks.len() as f64;
        let avg = fx.chunks.iter().map(Vec::len).sum::<usize>() as f64 / n;
        for c in 0..fx.chunks.len() {
            let mut want = 0.0;
            for (i, &w) in weights.iter().enumerate() {
                let f = fx.freq(i, c) as f64;
                if f > 0.0 {
                    want += w * idf_oracle(n, fx.chunk_set(i).len() as f64)
                        * tf_oracle(f, fx.chunks[c].len() as f64, avg, cfg.k1, cfg.b);
                }
            }
            let got = score_chunk(ChunkId(c as u32), &active, &g, &cfg);
            prop_assert!((got - want).abs() <= 1e-9, "chunk {c}: {got} vs {want}");
        }
    }

    #[test]
    fn stage1_matches_brute_force(
        (fx, matches) in graph_fixture(5, 6).prop_flat_map(|s| { let n = s.nodes.len(); (Just(s), matches_for(n)) })
    ) {
        let g = fx.build();
        let cfg = QueryConfig::default();
        let (cg, _) = build_cooc_graph(&matches, &g, &cfg).unwrap();
        let got = stage1_retrieve(&cg, &g, &cfg, usize::MAX);
        let want = stage1_oracle(&fx, &matches, &cfg);
        prop_assert_eq!(got.len(), want.len());
        let got_ids: BTreeSet<usize> = got.iter().map(|(c, _)| c.index()).collect();
        let want_ids: BTreeSet<usize> = want.iter().map(|&(c, _)| c).collect();
        prop_assert_eq!(got_ids, want_ids);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a.1 - b.1).abs() <= 1e-9);
        }
        prop_assert!(got.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn retrieval_returns_distinct_chunks_up_to_k(
        fx in graph_fixture(6, 6),
        query in prop::collection::vec((0..VOCAB.len(), unit_vector(DIM)), 1..4),
        k in 1usize..8,
    ) {
        let g = fx.build();
        let cfg = QueryConfig::default();
        let mut seen_surface = HashSet::new();
        let terms: Vec<QueryTerm> = query
            .into_iter()
            .filter(|(w, _)| seen_surface.insert(*w))
            .map(|(w, e)| QueryTerm { surface: VOCAB[w].into(), embedding: e })
            .collect();
        let result = retrieve_terms(&terms, k, &g, &cfg).unwrap();
        prop_assert!(result.entries.len() <= k);
        let ids: HashSet<ChunkId> = result.entries.iter().map(|e| e.chunk).collect();
        prop_assert_eq!(ids.len(), result.entries.len());
        // Cooc entries come first and are ranked by score.
        let cooc: Vec<f64> = result.entries.iter()
            .take_while(|e| e.stage == semgraph::retrieval::Stage::Cooc)
            .map(|e| e.score)
            .collect();
        prop_assert!(cooc.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(result.entries.iter().skip(cooc.len()).all(|e| e.stage == semgraph::retrieval::Stage::Recovery));
    }

    #[test]
    fn metrics_match_second_implementation(case in eval_case()) {
        let (run, qrels) = (case.run_file(), case.qrels());
        prop_assert!((recall_at_10(&run, &qrels).unwrap() - recall_oracle(&case)).abs() <= 1e-12);
        prop_assert!((mrr_at_10(&run, &qrels).unwrap() - mrr_oracle(&case)).abs() <= 1e-12);
    }

    #[test]
    fn metrics_ignore_query_order(case in eval_case(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = case.clone();
        shuffled.run.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (a, b) = (case.run_file(), shuffled.run_file());
        let q = case.qrels();
        prop_assert_eq!(recall_at_10(&a, &q).unwrap(), recall_at_10(&b, &q).unwrap());
        prop_assert_eq!(mrr_at_10(&a, &q).unwrap(), mrr_at_10(&b, &q).unwrap());
    }

    #[test]
    fn metrics_stay_in_unit_interval(case in eval_case()) {
        let (run, qrels) = (case.run_file(), case.qrels());
        prop_assert!((0.0..=1.0).contains(&recall_at_10(&run, &qrels).unwrap()));
        prop_assert!((0.0..=1.0).contains(&mrr_at_10(&run, &qrels).unwrap()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn induction_conserves_occurrences(
        pts in clustered_points(40),
        chunk_of in prop::collection::vec(0u32..8, 40),
        idf in 0.5f64..3.0,
    ) {
        let items: Vec<EmbeddingItem> = pts
            .iter()
            .enumerate()
            .map(|(i, e)| EmbeddingItem { embedding: e.clone(), chunk: ChunkId(chunk_of[i]), span: (i, i + 1) })
            .collect();
        let mut want: BTreeMap<ChunkId, u32> = BTreeMap::new();
        for it in &items {
            *want.entry(it.chunk).or_default() += 1;
        }
        let batch = EmbeddingBatch::new(TokenId(0), items).unwrap();
        let induced = induce_semantic_nodes(&batch, idf, &InductionConfig::default()).unwrap();
        prop_assert!(!induced.nodes.is_empty());
        let mut got: BTreeMap<ChunkId, u32> = BTreeMap::new();
        for n in &induced.nodes {
            prop_assert_eq!(n.member_count, n.members.values().sum::<u32>());
            prop_assert!((vector::norm(&n.anchor) - 1.0).abs() < 1e-5);
            for (&c, &k) in &n.members {
                *got.entry(c).or_default() += k;
            }
        }
        prop_assert_eq!(got, want);
    }

    #[test]
    fn cluster_labels_are_dense_and_large_enough(pts in clustered_points(40), m in 2usize..6) {
        let labels = density_cluster(&pts, &ClusterParams::new(m));
        prop_assert_eq!(labels.len(), pts.len());
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for l in labels.iter().flatten() {
            *sizes.entry(*l).or_default() += 1;
        }
        prop_assert!(sizes.keys().copied().eq(0..sizes.len()));
        prop_assert!(sizes.values().all(|&s| s >= m));
    }

    #[test]
    fn aggregation_is_identity_for_single_occurrences(pts in clustered_points(20)) {
        let items: Vec<EmbeddingItem> = pts
            .iter()
            .enumerate()
            .map(|(i, e)| EmbeddingItem { embedding: e.clone(), chunk: ChunkId(i as u32), span: (0, 1) })
            .collect();
        let batch = EmbeddingBatch::new(TokenId(0), items).unwrap();
        let agg = aggregate_by_chunk(&batch);
        prop_assert_eq!(agg.len(), pts.len());
        for ((v, c), (i, p)) in agg.iter().zip(pts.iter().enumerate()) {
            prop_assert_eq!(c.index(), i);
            for (a, b) in v.iter().zip(p) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn assimilating_the_anchor_keeps_it_fixed(fx in graph_fixture(4, 4), node in 0usize..4, chunk in 0usize..4) {
        let mut g = fx.build();
        let s = SemId((node % fx.nodes.len()) as u32);
        let c = ChunkId((chunk % fx.chunks.len()) as u32);
        let before = g.semantic(s).unwrap().anchor.clone();
        let count = g.semantic(s).unwrap().member_count;
        g.assign_occurrence(s, c, &before).unwrap();
        let after = &g.semantic(s).unwrap().anchor;
        for (a, b) in after.iter().zip(&before) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
        prop_assert_eq!(g.semantic(s).unwrap().member_count, count + 1);
        prop_assert!(g.validate().is_ok());
    }
}

/// Identical context bags give more similar embeddings than disjoint ones,
/// for every one of 100 seeds.
#[test]
fn synthetic_encoder_is_context_sensitive() {
    let shared = ["fruit", "pie", "orchard", "sweet"];
    let other = ["iphone", "mac", "launch", "screen"];
    for seed in 0..100u64 {
        let a = synthetic_encode("apple", &shared, 1.0, 64, seed);
        let same = synthetic_encode("apple", &shared, 1.0, 64, seed);
        let diff = synthetic_encode("apple", &other, 1.0, 64, seed);
        assert!(vector::cosine(&a, &diff) < vector::cosine(&a, &same), "seed {seed}");
    }
}
