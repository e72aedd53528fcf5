//! JSON-lines readers for corpora and query sets.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDoc {
    #[serde(alias = "_id")]
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
    #[serde(skip)]
    pub source_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    #[serde(alias = "_id")]
    pub query_id: String,
    pub text: String,
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusDoc>> {
    let path = path.as_ref();
    let data = fs::read_to_string(path)?;
    parse_lines(&data, path, |doc: &mut CorpusDoc, offset| doc.source_offset = offset)
}

pub fn read_queries(path: impl AsRef<Path>) -> Result<Vec<QueryRecord>> {
    let path = path.as_ref();
    let data = fs::read_to_string(path)?;
    parse_lines(&data, path, |_: &mut QueryRecord, _| {})
}

fn parse_lines<T, F>(data: &str, path: &Path, mut fixup: F) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(&mut T, u64),
{
    let mut out = Vec::new();
    let mut offset = 0u64;
    for (i, line) in data.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len() as u64;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: T = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        fixup(&mut rec, start);
        out.push(rec);
    }
    Ok(out)
}
