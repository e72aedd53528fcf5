//! Binary index file.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "SEMGRAPH"
//! version  u32
//! dim      u32      0 when the graph has no semantic nodes
//! stats    chunk_count u64, total_terms u64, df_len u32, df_len × (str, u32)
//! docs     u32 count, count × (key str, title str, source_offset u64)
//! chunks   u32 count, count × (doc u32, text str, length_terms u32)
//! tokens   u32 count, count × (surface str, idf f64)
//! semantic u32 count, count × (token u32, member_count u32, tau f64,
//!                              dim × f32 anchor, u32 n, n × (chunk u32, freq u32))
//! end      4 bytes  "DONE"
//! ```
//!
//! Strings are a u32 byte length followed by UTF-8 bytes. Derived adjacency
//! (document → chunks, chunk → semantics, token → semantics) is rebuilt on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{ChunkId, CorpusStats, DocId, SemId, SemanticGraph, SemanticNode, TokenId};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SEMGRAPH";
pub const FORMAT_VERSION: u32 = 1;
const END_MARKER: &[u8; 4] = b"DONE";

pub fn save_index(graph: &SemanticGraph, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(graph);
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<SemanticGraph> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

pub fn encode(graph: &SemanticGraph) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(graph.dim().unwrap_or(0) as u32);

    let stats = graph.stats();
    w.u64(stats.chunk_count);
    w.u64(stats.total_terms);
    w.u32(stats.df.len() as u32);
    for (surface, &df) in &stats.df {
        w.str(surface);
        w.u32(df);
    }

    w.u32(graph.docs().len() as u32);
    for d in graph.docs() {
        w.str(&d.key);
        w.str(&d.title);
        w.u64(d.source_offset);
    }
    w.u32(graph.chunks().len() as u32);
    for c in graph.chunks() {
        w.u32(c.doc.0);
        w.str(&c.text);
        w.u32(c.length_terms);
    }
    w.u32(graph.tokens().len() as u32);
    for t in graph.tokens() {
        w.str(&t.surface);
        w.f64(t.idf);
    }
    w.u32(graph.semantics().len() as u32);
    for s in graph.semantics() {
        w.u32(s.token.0);
        w.u32(s.member_count);
        w.f64(s.tau_anomaly);
        for &x in &s.anchor {
            w.f32(x);
        }
        w.u32(s.chunk_freq.len() as u32);
        for (c, &f) in &s.chunk_freq {
            w.u32(c.0);
            w.u32(f);
        }
    }
    w.bytes(END_MARKER);
    w.buf
}

pub fn decode(bytes: &[u8]) -> Result<SemanticGraph> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(r.corrupt_at(0, "bad magic bytes"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let dim = r.u32()? as usize;

    let chunk_count = r.u64()?;
    let total_terms = r.u64()?;
    let mut df = BTreeMap::new();
    for _ in 0..r.count(8)? {
        let surface = r.str()?;
        let n = r.u32()?;
        df.insert(surface, n);
    }
    let stats = CorpusStats {
        chunk_count,
        total_terms,
        df,
    };

    let mut docs = Vec::new();
    for _ in 0..r.count(16)? {
        docs.push((r.str()?, r.str()?, r.u64()?));
    }
    let mut chunks = Vec::new();
    for _ in 0..r.count(12)? {
        chunks.push((DocId(r.u32()?), r.str()?, r.u32()?));
    }
    let mut tokens = Vec::new();
    for _ in 0..r.count(12)? {
        tokens.push((r.str()?, r.f64()?));
    }
    let sem_count = r.count(20 + 4 * dim)?;
    if sem_count > 0 && dim == 0 {
        return Err(r.corrupt("semantic nodes present but dimension is zero"));
    }
    let mut semantics = Vec::with_capacity(sem_count);
    for i in 0..sem_count {
        let token = TokenId(r.u32()?);
        let member_count = r.u32()?;
        let tau_anomaly = r.f64()?;
        let mut anchor = Vec::with_capacity(dim);
        for _ in 0..dim {
            anchor.push(r.f32()?);
        }
        let mut chunk_freq = BTreeMap::new();
        for _ in 0..r.count(8)? {
            let c = ChunkId(r.u32()?);
            let f = r.u32()?;
            if chunk_freq.insert(c, f).is_some() {
                return Err(r.corrupt("repeated chunk in frequency map"));
            }
        }
        semantics.push(SemanticNode {
            id: SemId(i as u32),
            token,
            anchor,
            member_count,
            tau_anomaly,
            chunk_freq,
        });
    }
    if r.take(END_MARKER.len())? != END_MARKER {
        return Err(r.corrupt("missing end marker"));
    }
    if r.pos != bytes.len() {
        return Err(r.corrupt("trailing bytes after end marker"));
    }
    let end = r.pos as u64;
    let dim = (dim > 0).then_some(dim);
    SemanticGraph::from_parts(docs, chunks, tokens, semantics, stats, dim)
        .map_err(|reason| Error::IndexCorrupt { offset: end, reason })
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn corrupt_at(&self, offset: usize, reason: &str) -> Error {
        Error::IndexCorrupt {
            offset: offset as u64,
            reason: reason.to_string(),
        }
    }

    fn corrupt(&self, reason: &str) -> Error {
        self.corrupt_at(self.pos, reason)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.corrupt("unexpected end of file"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// Reads an element count, rejecting counts the remaining bytes cannot hold.
    fn count(&mut self, min_elem_size: usize) -> Result<usize> {
        let at = self.pos;
        let n = self.u32()? as usize;
        if n.saturating_mul(min_elem_size.max(1)) > self.buf.len() - self.pos {
            return Err(self.corrupt_at(at, "element count exceeds file size"));
        }
        Ok(n)
    }

    fn str(&mut self) -> Result<String> {
        let at = self.pos;
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.corrupt_at(at, "invalid UTF-8 string"))
    }
}
