//! Chunking, term extraction and corpus-level term statistics.
//!
//! Terms are Unicode words (UAX #29 boundaries) that contain at least one
//! alphanumeric character, case-folded, with stopwords removed. Runs of two
//! or more capitalized words separated only by whitespace are additionally
//! emitted as phrases ("Apple Watch" → `apple watch`, `apple`, `watch`).
//! All spans are in characters (Unicode scalar values), not bytes.

pub mod corpus;

use std::collections::HashSet;

use unicode_segmentation::UnicodeSegmentation;

use crate::error::{Error, Result};
use crate::graph::CorpusStats;

const DEFAULT_STOPWORDS: &str = include_str!("stopwords.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermOccurrence {
    pub surface: String,
    /// Character range `[start, end)` in the chunk text.
    pub span: (usize, usize),
    pub is_phrase: bool,
}

#[derive(Debug, Clone)]
pub struct ChunkingConfig {
    /// Terms per chunk.
    pub chunk_size: usize,
    /// Terms shared by consecutive chunks.
    pub overlap: usize,
    pub stopwords: HashSet<String>,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            chunk_size: 64,
            overlap: 0,
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
        }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_size == 0 || self.overlap >= self.chunk_size {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= overlap < chunk_size, got overlap {} and chunk_size {}",
                self.overlap, self.chunk_size
            )));
        }
        Ok(())
    }

    pub fn is_stopword(&self, lowered: &str) -> bool {
        self.stopwords.contains(lowered)
    }
}

/// One surface per line; blank lines and `#` comments are ignored.
pub fn parse_stopwords(list: &str) -> HashSet<String> {
    list.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(normalize_surface)
        .collect()
}

/// Case-folds and collapses whitespace runs to a single space.
pub fn normalize_surface(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy)]
struct Word {
    bytes: (usize, usize),
    chars: (usize, usize),
}

fn words(text: &str) -> Vec<Word> {
    let mut out = Vec::new();
    let mut char_pos = 0usize;
    let mut byte_pos = 0usize;
    for (start, seg) in text.split_word_bound_indices() {
        // Segments are contiguous, so counting chars as we go keeps offsets in sync.
        debug_assert_eq!(start, byte_pos);
        let n_chars = seg.chars().count();
        if seg.chars().any(char::is_alphanumeric) {
            out.push(Word {
                bytes: (start, start + seg.len()),
                chars: (char_pos, char_pos + n_chars),
            });
        }
        char_pos += n_chars;
        byte_pos += seg.len();
    }
    out
}

/// Extracts unigram and capitalized-phrase terms, ordered by span start
/// (longer span first on ties).
pub fn extract_terms(chunk_text: &str, cfg: &ChunkingConfig) -> Vec<TermOccurrence> {
    let words = words(chunk_text);
    let mut out = Vec::new();

    let lowered: Vec<String> = words
        .iter()
        .map(|w| chunk_text[w.bytes.0..w.bytes.1].to_lowercase())
        .collect();
    let capitalized: Vec<bool> = words
        .iter()
        .zip(&lowered)
        .map(|(w, low)| {
            chunk_text[w.bytes.0..w.bytes.1]
                .chars()
                .next()
                .is_some_and(char::is_uppercase)
                && !cfg.is_stopword(low)
        })
        .collect();

    let mut i = 0;
    while i < words.len() {
        if !capitalized[i] {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < words.len()
            && capitalized[j + 1]
            && chunk_text[words[j].bytes.1..words[j + 1].bytes.0]
                .chars()
                .all(char::is_whitespace)
        {
            j += 1;
        }
        if j > i {
            let slice = &chunk_text[words[i].bytes.0..words[j].bytes.1];
            out.push(TermOccurrence {
                surface: normalize_surface(slice),
                span: (words[i].chars.0, words[j].chars.1),
                is_phrase: true,
            });
        }
        i = j + 1;
    }

    for (w, low) in words.iter().zip(lowered) {
        if cfg.is_stopword(&low) {
            continue;
        }
        out.push(TermOccurrence {
            surface: low,
            span: w.chars,
            is_phrase: false,
        });
    }
    out.sort_by(|a, b| a.span.0.cmp(&b.span.0).then(b.span.1.cmp(&a.span.1)));
    out
}

/// Number of unigram terms, the unit of chunk length.
pub fn count_terms(text: &str, cfg: &ChunkingConfig) -> usize {
    extract_terms(text, cfg).iter().filter(|t| !t.is_phrase).count()
}

/// Splits text into windows of `chunk_size` unigram terms with `overlap`
/// terms shared between neighbours. Each chunk is the text slice from its
/// first term to its last. Nonempty text without any term becomes a single
/// chunk so that every document owns at least one.
pub fn split_chunks(text: &str, cfg: &ChunkingConfig) -> Vec<String> {
    if text.trim().is_empty() {
        return Vec::new();
    }
    let terms: Vec<TermOccurrence> = extract_terms(text, cfg).into_iter().filter(|t| !t.is_phrase).collect();
    if terms.is_empty() {
        return vec![text.trim().to_string()];
    }
    let char_to_byte: Vec<usize> = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .collect();
    let stride = cfg.chunk_size - cfg.overlap;
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + cfg.chunk_size).min(terms.len());
        let from = char_to_byte[terms[start].span.0];
        let to = char_to_byte[terms[end - 1].span.1];
        out.push(text[from..to].to_string());
        if end >= terms.len() {
            break;
        }
        start += stride;
    }
    out
}

/// Smoothed inverse chunk frequency, `ln((N - df + 0.5) / (df + 0.5) + 1)`.
pub fn idf(surface: &str, stats: &CorpusStats) -> f64 {
    idf_from_counts(stats.chunk_count as f64, stats.df(surface) as f64)
}

pub fn idf_from_counts(n: f64, df: f64) -> f64 {
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// Converts a character span to a byte range, validating bounds.
pub fn char_span_to_bytes(text: &str, span: (usize, usize)) -> Option<(usize, usize)> {
    let (s, e) = span;
    if s >= e {
        return None;
    }
    let mut start = None;
    for (i, (b, _)) in text.char_indices().enumerate() {
        if i == s {
            start = Some(b);
        }
        if i == e {
            return start.map(|st| (st, b));
        }
    }
    if e == text.chars().count() {
        return start.map(|st| (st, text.len()));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(terms: &[TermOccurrence]) -> Vec<&str> {
        terms.iter().map(|t| t.surface.as_str()).collect()
    }

    fn ten_terms() -> String {
        (0..10).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn phrase_and_unigrams() {
        let cfg = ChunkingConfig::default();
        let terms = extract_terms("the Apple Watch shipped", &cfg);
        assert_eq!(surfaces(&terms), vec!["apple watch", "apple", "watch", "shipped"]);
        assert!(terms[0].is_phrase);
        assert_eq!(terms[0].span, (4, 15));
        assert!(!terms[1].is_phrase);
    }

    #[test]
    fn all_stopwords_yield_nothing() {
        assert!(extract_terms("and or the", &ChunkingConfig::default()).is_empty());
    }

    #[test]
    fn multiplicity_is_preserved() {
        let terms = extract_terms("cat cat", &ChunkingConfig::default());
        assert_eq!(surfaces(&terms), vec!["cat", "cat"]);
        assert_eq!(terms[0].span, (0, 3));
        assert_eq!(terms[1].span, (4, 7));
    }

    #[test]
    fn punctuation_breaks_phrases_and_is_dropped() {
        let terms = extract_terms("Paris, France -- New  York!", &ChunkingConfig::default());
        assert_eq!(surfaces(&terms), vec!["paris", "france", "new york", "new", "york"]);
    }

    #[test]
    fn spans_are_characters() {
        let text = "Café über Straße";
        for t in extract_terms(text, &ChunkingConfig::default()) {
            let slice: String = text.chars().skip(t.span.0).take(t.span.1 - t.span.0).collect();
            assert_eq!(normalize_surface(&slice), t.surface);
        }
    }

    #[test]
    fn chunks_without_overlap() {
        let cfg = ChunkingConfig {
            chunk_size: 4,
            overlap: 0,
            ..Default::default()
        };
        let chunks = split_chunks(&ten_terms(), &cfg);
        let lens: Vec<usize> = chunks.iter().map(|c| count_terms(c, &cfg)).collect();
        assert_eq!(lens, vec![4, 4, 2]);
    }

    #[test]
    fn chunks_with_overlap() {
        let cfg = ChunkingConfig {
            chunk_size: 4,
            overlap: 2,
            ..Default::default()
        };
        let chunks = split_chunks(&ten_terms(), &cfg);
        assert_eq!(chunks, vec!["w0 w1 w2 w3", "w2 w3 w4 w5", "w4 w5 w6 w7", "w6 w7 w8 w9"]);
    }

    #[test]
    fn empty_text_has_no_chunks() {
        assert!(split_chunks("", &ChunkingConfig::default()).is_empty());
        assert_eq!(split_chunks("the and", &ChunkingConfig::default()), vec!["the and"]);
    }

    #[test]
    fn idf_values() {
        assert!((idf_from_counts(100.0, 1.0) - 4.209655).abs() < 1e-6);
        assert!((idf_from_counts(100.0, 100.0) - 0.004963).abs() < 1e-6);
        assert_eq!(idf_from_counts(1.0, 0.0), 4f64.ln());
    }

    #[test]
    fn overlap_must_be_below_chunk_size() {
        let cfg = ChunkingConfig {
            chunk_size: 4,
            overlap: 4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn char_spans_map_to_bytes() {
        assert_eq!(char_span_to_bytes("aé b", (1, 2)), Some((1, 3)));
        assert_eq!(char_span_to_bytes("aé b", (3, 4)), Some((4, 5)));
        assert_eq!(char_span_to_bytes("abc", (2, 5)), None);
        assert_eq!(char_span_to_bytes("abc", (1, 1)), None);
    }
}
