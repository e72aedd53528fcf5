//! Retrieval and efficiency metrics.
//!
//! Judgments are at document level: a retrieved chunk is a hit when its
//! parent document is gold, and each gold document counts once per query.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rank cutoff for both metrics.
pub const CUTOFF: usize = 10;

/// Gold document keys per query. Every stored set is nonempty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels(BTreeMap<String, BTreeSet<String>>);

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str) {
        self.0
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string());
    }

    pub fn gold(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.0.get(query_id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub chunk_id: String,
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
}

/// Ranked entries per query, ranks `1..=n` in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile(BTreeMap<String, Vec<RunEntry>>);

impl RunFile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the next-ranked entry for `query_id`.
    pub fn push(&mut self, query_id: &str, chunk_id: &str, doc_id: &str, score: f64) {
        let list = self.0.entry(query_id.to_string()).or_default();
        list.push(RunEntry {
            chunk_id: chunk_id.to_string(),
            doc_id: doc_id.to_string(),
            rank: list.len() + 1,
            score,
        });
    }

    /// Registers a query that retrieved nothing.
    pub fn touch(&mut self, query_id: &str) {
        self.0.entry(query_id.to_string()).or_default();
    }

    pub fn queries(&self) -> impl Iterator<Item = (&str, &[RunEntry])> {
        self.0.iter().map(|(q, v)| (q.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

/// Reads `query_id doc_id relevance` lines (tab or space separated). A
/// leading header line is skipped; relevance `> 0` marks gold.
pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let mut qrels = Qrels::new();
    for (i, line) in fs::read_to_string(path)?.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let relevance: f64 = match fields[2].parse() {
            Ok(r) => r,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(parse_err(path, i + 1, format!("bad relevance {:?}", fields[2]))),
        };
        if relevance > 0.0 {
            qrels.insert(fields[0], fields[1]);
        }
    }
    Ok(qrels)
}

/// Reads `query_id chunk_id doc_id rank score stage` lines. Ranks must run
/// `1..=n` per query.
pub fn read_run(path: impl AsRef<Path>) -> Result<RunFile> {
    let path = path.as_ref();
    let mut run = RunFile::new();
    for (i, line) in fs::read_to_string(path)?.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if line.trim().is_empty() {
            continue;
        }
        if fields.len() < 5 {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let rank: usize = fields[3]
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("bad rank {:?}", fields[3])))?;
        let score: f64 = fields[4]
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("bad score {:?}", fields[4])))?;
        let expected = run.0.get(fields[0]).map_or(1, |v| v.len() + 1);
        if rank != expected {
            return Err(parse_err(
                path,
                i + 1,
                format!("rank {rank} where {expected} was expected"),
            ));
        }
        run.push(fields[0], fields[1], fields[2], score);
    }
    Ok(run)
}

fn judged<'a>(run: &'a RunFile, qrels: &'a Qrels) -> Result<Vec<(&'a [RunEntry], &'a BTreeSet<String>)>> {
    run.queries()
        .map(|(q, entries)| {
            let gold = qrels.gold(q).ok_or_else(|| Error::MissingJudgment(q.to_string()))?;
            Ok((&entries[..entries.len().min(CUTOFF)], gold))
        })
        .collect()
}

/// Micro-averaged Recall@10: distinct gold documents reached in the top 10,
/// summed over queries, over the summed gold set sizes.
pub fn recall_at_10(run: &RunFile, qrels: &Qrels) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (top, gold) in judged(run, qrels)? {
        let found: HashSet<&str> = top
            .iter()
            .map(|e| e.doc_id.as_str())
            .filter(|d| gold.contains(*d))
            .collect();
        hits += found.len();
        total += gold.len();
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

/// Mean reciprocal rank of the first gold hit in the top 10 (0 when none).
pub fn mrr_at_10(run: &RunFile, qrels: &Qrels) -> Result<f64> {
    let per_query = judged(run, qrels)?;
    if per_query.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = per_query
        .iter()
        .map(|(top, gold)| {
            top.iter()
                .position(|e| gold.contains(&e.doc_id))
                .map_or(0.0, |p| 1.0 / (p + 1) as f64)
        })
        .sum();
    Ok(sum / per_query.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Indexing of one document.
    Index,
    /// Answering one query.
    Query,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    /// Average indexing time per document, seconds.
    pub ait_s: Option<f64>,
    /// Average query time, seconds.
    pub aqt_s: Option<f64>,
}

/// Rounds to the millisecond, the precision at which timings are reported.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Mean duration per phase; a phase without events is absent rather than 0.
pub fn timing_report(events: &[(Phase, Duration)]) -> TimingReport {
    let mean = |phase: Phase| {
        let d: Vec<f64> = events
            .iter()
            .filter(|(p, _)| *p == phase)
            .map(|(_, d)| d.as_secs_f64())
            .collect();
        (!d.is_empty()).then(|| round3(d.iter().sum::<f64>() / d.len() as f64))
    };
    TimingReport {
        ait_s: mean(Phase::Index),
        aqt_s: mean(Phase::Query),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub recall_at_10: f64,
    pub mrr_at_10: f64,
    pub ait_s: Option<f64>,
    pub aqt_s: Option<f64>,
    pub num_queries: usize,
    pub num_docs: usize,
}

pub fn evaluate(run: &RunFile, qrels: &Qrels, timing: TimingReport, num_docs: usize) -> Result<Metrics> {
    Ok(Metrics {
        recall_at_10: recall_at_10(run, qrels)?,
        mrr_at_10: mrr_at_10(run, qrels)?,
        ait_s: timing.ait_s,
        aqt_s: timing.aqt_s,
        num_queries: run.len(),
        num_docs,
    })
}
