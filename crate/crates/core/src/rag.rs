//! Chunking, a deterministic default embedder, and an exact cosine index.

use std::cmp::Ordering;
use std::hash::Hasher;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RagError {
    #[error("overlap {overlap} must be smaller than size {size}")]
    Params { size: usize, overlap: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("embedding dimension {got} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index file: {0}")]
    Format(String),
    #[error("{0}")]
    Io(String),
}

/// A window of the source, with char offsets `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextChunk {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Windows of at most `size` chars starting every `size - overlap` chars.
/// A window that does not reach the end of the text is cut after the last
/// whitespace inside the overlap band, so consecutive windows still touch.
pub fn chunk(doc_text: &str, size: usize, overlap: usize) -> Result<Vec<TextChunk>, RagError> {
    if size == 0 || overlap >= size {
        return Err(RagError::Params { size, overlap });
    }
    let chars: Vec<char> = doc_text.chars().collect();
    let len = chars.len();
    let step = size - overlap;
    let mut out = Vec::new();
    let mut start = 0;
    while start < len {
        let mut end = (start + size).min(len);
        if end < len {
            let band_lo = start + step;
            if let Some(p) = (band_lo..=end).rev().find(|&p| p > band_lo.max(start) && chars[p - 1].is_whitespace()) {
                end = p;
            }
        }
        out.push(TextChunk { text: chars[start..end].iter().collect(), start, end });
        start += step;
    }
    Ok(out)
}

/// Inverse of [`chunk`]: concatenation with overlaps removed.
pub fn reconstruct(chunks: &[TextChunk]) -> String {
    let mut out = String::new();
    let mut covered = 0;
    for c in chunks {
        if c.end <= covered {
            continue;
        }
        out.extend(c.text.chars().skip(covered.saturating_sub(c.start)));
        covered = c.end;
    }
    out
}

pub trait Embedder<S: Scalar>: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Vec<S>;
}

/// Lowercased word counts hashed (FNV-1a) into `dimension` buckets, then
/// L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedBowEmbedder {
    pub dimension: usize,
}

impl Default for HashedBowEmbedder {
    fn default() -> Self {
        Self { dimension: 512 }
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write(s.as_bytes());
    h.finish()
}

/// Lowercase `[a-z0-9_]` runs.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl<S: Scalar> Embedder<S> for HashedBowEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Vec<S> {
        let mut counts = vec![0f64; self.dimension];
        let mut tokens = words(text);
        if tokens.is_empty() && !text.is_empty() {
            tokens.push(text.to_string());
        }
        for t in &tokens {
            counts[(fnv1a(t) % self.dimension as u64) as usize] += 1.0;
        }
        let norm = counts.iter().map(|x| x * x).sum::<f64>().sqrt();
        counts.into_iter().map(|x| S::lit(if norm > 0.0 { x / norm } else { 0.0 })).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RagChunk<S> {
    pub doc_id: String,
    pub chunk_index: usize,
    pub text: String,
    pub vector: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Hit<S> {
    pub doc_id: String,
    pub chunk_index: usize,
    pub text: String,
    pub similarity: S,
}

pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> S {
    let dot = a.iter().zip(b).fold(S::zero(), |acc, (x, y)| acc + *x * *y);
    let na = a.iter().fold(S::zero(), |acc, x| acc + *x * *x).sqrt();
    let nb = b.iter().fold(S::zero(), |acc, x| acc + *x * *x).sqrt();
    if na == S::zero() || nb == S::zero() {
        S::zero()
    } else {
        dot / (na * nb)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct IndexFile<S> {
    dimension: usize,
    count: usize,
    chunks: Vec<RagChunk<S>>,
}

/// Exact cosine index. The first insertion fixes the dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex<S> {
    dimension: Option<usize>,
    chunks: Vec<RagChunk<S>>,
}

impl<S: Scalar> Default for FlatIndex<S> {
    fn default() -> Self {
        Self { dimension: None, chunks: Vec::new() }
    }
}

impl<S: Scalar> FlatIndex<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn chunks(&self) -> &[RagChunk<S>] {
        &self.chunks
    }

    /// Embeds and stores `chunks` under `doc_id`, replacing any earlier
    /// chunks of that document.
    pub fn add<T: AsRef<str>>(&mut self, doc_id: &str, chunks: &[T], embedder: &dyn Embedder<S>) -> Result<(), RagError> {
        let dim = embedder.dimension();
        if let Some(expected) = self.dimension.filter(|d| *d != dim) {
            return Err(RagError::DimensionMismatch { expected, got: dim });
        }
        let mut fresh = Vec::with_capacity(chunks.len());
        for (chunk_index, text) in chunks.iter().enumerate() {
            let vector = embedder.embed(text.as_ref());
            if vector.len() != dim {
                return Err(RagError::DimensionMismatch { expected: dim, got: vector.len() });
            }
            fresh.push(RagChunk { doc_id: doc_id.to_string(), chunk_index, text: text.as_ref().to_string(), vector });
        }
        self.dimension = Some(dim);
        self.chunks.retain(|c| c.doc_id != doc_id);
        self.chunks.extend(fresh);
        Ok(())
    }

    /// The `k` most similar chunks, best first; ties by `(doc_id, chunk_index)`.
    pub fn query(&self, query_text: &str, k: usize, embedder: &dyn Embedder<S>) -> Result<Vec<Hit<S>>, RagError> {
        if k == 0 {
            return Err(RagError::ZeroK);
        }
        if self.chunks.is_empty() {
            log::warn!("reference index is empty; no retrieval context");
            return Ok(Vec::new());
        }
        let expected = self.dimension.unwrap_or(0);
        if embedder.dimension() != expected {
            return Err(RagError::DimensionMismatch { expected, got: embedder.dimension() });
        }
        let q = embedder.embed(query_text);
        let mut scored: Vec<(S, &RagChunk<S>)> = self.chunks.iter().map(|c| (cosine(&q, &c.vector), c)).collect();
        scored.sort_by(|(sa, a), (sb, b)| {
            sb.partial_cmp(sa)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
                .then(a.chunk_index.cmp(&b.chunk_index))
        });
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(similarity, c)| Hit {
                doc_id: c.doc_id.clone(),
                chunk_index: c.chunk_index,
                text: c.text.clone(),
                similarity,
            })
            .collect())
    }

    pub fn to_json(&self) -> String {
        let file = IndexFile { dimension: self.dimension.unwrap_or(0), count: self.chunks.len(), chunks: self.chunks.clone() };
        serde_json::to_string(&file).expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RagError> {
        let file: IndexFile<S> = serde_json::from_str(text).map_err(|e| RagError::Format(e.to_string()))?;
        if file.count != file.chunks.len() {
            return Err(RagError::Format(format!("header count {} but {} chunks", file.count, file.chunks.len())));
        }
        if let Some(c) = file.chunks.iter().find(|c| c.vector.len() != file.dimension) {
            return Err(RagError::Format(format!("{} #{}: vector length {}", c.doc_id, c.chunk_index, c.vector.len())));
        }
        let dimension = (!file.chunks.is_empty() || file.dimension > 0).then_some(file.dimension);
        Ok(Self { dimension, chunks: file.chunks })
    }

    pub fn save(&self, path: &Path) -> Result<(), RagError> {
        std::fs::write(path, self.to_json()).map_err(|e| RagError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, RagError> {
        let text = std::fs::read_to_string(path).map_err(|e| RagError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkParams {
    pub size: usize,
    pub overlap: usize,
}

impl Default for ChunkParams {
    fn default() -> Self {
        Self { size: 1200, overlap: 200 }
    }
}

/// Indexes every `.txt`/`.md` file directly under `dir`, in file-name order;
/// the file name is the document id.
pub fn build_from_dir<S: Scalar>(dir: &Path, params: ChunkParams, embedder: &dyn Embedder<S>) -> Result<FlatIndex<S>, RagError> {
    let io = |e: std::io::Error| RagError::Io(format!("{}: {e}", dir.display()));
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt" || x == "md"))
        .collect();
    files.sort();
    let mut index = FlatIndex::new();
    for path in files {
        let text = std::fs::read_to_string(&path).map_err(io)?;
        let pieces: Vec<String> = chunk(&text, params.size, params.overlap)?.into_iter().map(|c| c.text).collect();
        let doc_id = path.file_name().expect("file").to_string_lossy().into_owned();
        index.add(&doc_id, &pieces, embedder)?;
    }
    Ok(index)
}

/// Hits as prompt text.
pub fn format_context<S: Scalar>(hits: &[Hit<S>]) -> String {
    hits.iter()
        .map(|h| format!("[{} #{}]\n{}", h.doc_id, h.chunk_index, h.text.trim()))
        .collect::<Vec<_>>()
        .join("\n\n")
}
