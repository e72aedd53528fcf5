//! Generated corpora with a planted ambiguous token.
//!
//! Every document is a bag of words drawn from one "world" (two meanings of
//! the planted token). A world has a few core words and several subtopics.
//! Planted documents mention the planted token; distractor documents use the
//! same world and subtopic vocabulary with a rival word instead, so a
//! retriever must rely on the planted token's meaning and co-occurrences to
//! rank the planted documents first. Queries target one meaning and one
//! subtopic; their gold documents are the planted documents of that pair.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::text::corpus::{CorpusDoc, QueryRecord};

pub struct World {
    pub name: &'static str,
    pub core: &'static [&'static str],
    pub subtopics: &'static [&'static [&'static str]],
    pub rivals: &'static [&'static str],
}

pub const FRUIT: World = World {
    name: "fruit",
    core: &["fruit", "ripe", "sweet"],
    subtopics: &[&["pie", "baking", "crust"], &["orchard", "harvest", "cider"]],
    rivals: &["banana", "cherry", "pear", "peach"],
};

pub const TECH: World = World {
    name: "tech",
    core: &["technology", "device", "software"],
    subtopics: &[&["iphone", "launch", "screen"], &["stock", "shares", "investors"]],
    rivals: &["samsung", "google", "microsoft", "intel"],
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    /// Total documents, planted ones included.
    pub num_docs: usize,
    pub planted: String,
    pub planted_per_subtopic: usize,
    /// Mentions of the planted (or rival) word per document.
    pub mentions: usize,
    /// Repetitions of each core word per document.
    pub core_repeats: usize,
    /// Random filler words per document.
    pub fillers: usize,
    pub filler_vocab: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            num_docs: 60,
            planted: "apple".into(),
            planted_per_subtopic: 5,
            mentions: 1,
            core_repeats: 3,
            fillers: 8,
            filler_vocab: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub docs: Vec<CorpusDoc>,
    pub queries: Vec<QueryRecord>,
    /// `(query_id, doc_id)` gold pairs.
    pub qrels: Vec<(String, String)>,
    /// World name of every planted document.
    pub planted_sense: BTreeMap<String, &'static str>,
}

/// Deterministic pronounceable filler words that are never stopwords.
pub fn filler_words(n: usize, seed: u64) -> Vec<String> {
    const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f111);
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS.choose(&mut rng).unwrap());
            w.push_str(VOWELS.choose(&mut rng).unwrap());
        }
        w.push('x');
        if !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

fn compose(
    rng: &mut ChaCha8Rng,
    lead: &str,
    world: &World,
    subtopic: &[&str],
    fillers: &[String],
    cfg: &SynthConfig,
) -> String {
    let mut words: Vec<String> = Vec::new();
    words.extend(std::iter::repeat_n(lead.to_string(), cfg.mentions));
    for w in world.core {
        words.extend(std::iter::repeat_n(w.to_string(), cfg.core_repeats));
    }
    words.extend(subtopic.iter().map(|w| w.to_string()));
    words.extend((0..cfg.fillers).map(|_| fillers.choose(rng).unwrap().clone()));
    words.shuffle(rng);
    format!("{}.", words.join(" "))
}

/// Generates the two-meaning corpus described in the module docs.
pub fn polysemy_corpus(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fillers = filler_words(cfg.filler_vocab, cfg.seed);
    let worlds = [&FRUIT, &TECH];

    let mut docs = Vec::new();
    let mut planted_sense = BTreeMap::new();
    let mut gold: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    for (wi, world) in worlds.iter().enumerate() {
        for (si, sub) in world.subtopics.iter().enumerate() {
            for _ in 0..cfg.planted_per_subtopic {
                let id = format!("doc{:04}", docs.len());
                let text = compose(&mut rng, &cfg.planted, world, sub, &fillers, cfg);
                planted_sense.insert(id.clone(), world.name);
                gold.entry((wi, si)).or_default().push(id.clone());
                docs.push((id, text));
            }
        }
    }
    let mut d = 0usize;
    while docs.len() < cfg.num_docs {
        let world = worlds[d % 2];
        let sub = world.subtopics[(d / 2) % world.subtopics.len()];
        let rival = world.rivals[(d / 4) % world.rivals.len()];
        let id = format!("doc{:04}", docs.len());
        let text = compose(&mut rng, rival, world, sub, &fillers, cfg);
        docs.push((id, text));
        d += 1;
    }

    // Shuffle document order so planted documents are not a prefix.
    docs.shuffle(&mut rng);
    let docs: Vec<CorpusDoc> = docs
        .into_iter()
        .map(|(doc_id, text)| CorpusDoc {
            doc_id,
            title: String::new(),
            text,
            source_offset: 0,
        })
        .collect();

    let mut queries = Vec::new();
    let mut qrels = Vec::new();
    for ((wi, si), ids) in &gold {
        let sub = worlds[*wi].subtopics[*si];
        for (qi, pair) in [(sub[0], sub[1]), (sub[1], sub[2])].iter().enumerate() {
            let query_id = format!("q_{}_{}_{qi}", worlds[*wi].name, sub[0]);
            queries.push(QueryRecord {
                query_id: query_id.clone(),
                text: format!("{} {} {}", cfg.planted, pair.0, pair.1),
            });
            qrels.extend(ids.iter().map(|d| (query_id.clone(), d.clone())));
        }
    }
    SynthCorpus {
        docs,
        queries,
        qrels,
        planted_sense,
    }
}

impl SynthCorpus {
    /// Writes `corpus.jsonl`, `queries.jsonl` and `qrels.tsv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut corpus = fs::File::create(dir.join("corpus.jsonl"))?;
        for d in &self.docs {
            writeln!(corpus, "{}", serde_json::to_string(d).expect("serializable"))?;
        }
        let mut queries = fs::File::create(dir.join("queries.jsonl"))?;
        for q in &self.queries {
            writeln!(queries, "{}", serde_json::to_string(q).expect("serializable"))?;
        }
        let mut qrels = fs::File::create(dir.join("qrels.tsv"))?;
        writeln!(qrels, "query-id\tcorpus-id\tscore")?;
        for (q, d) in &self.qrels {
            writeln!(qrels, "{q}\t{d}\t1")?;
        }
        Ok(())
    }

    pub fn qrels(&self) -> crate::eval::Qrels {
        let mut out = crate::eval::Qrels::new();
        for (q, d) in &self.qrels {
            out.insert(q, d);
        }
        out
    }
}
