//! Token-level contextual embeddings.
//!
//! Every provider answers the same question: given a chunk of text and a list
//! of character spans inside it, return one unit vector per span. The
//! [`Gateway`] wraps a provider and enforces the response contract (count,
//! order, norm, stable dimension), so callers never see malformed output.

mod http;
mod synthetic;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector;

pub use http::{HealthStatus, HttpConfig, HttpProvider};
pub use synthetic::{hash_to_sphere, synthetic_encode, SyntheticConfig, SyntheticEncoder};

/// Tolerance on the norm of every returned vector.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    #[serde(rename = "text")]
    pub chunk_text: String,
    /// Character ranges `[start, end)`.
    pub spans: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub dim: usize,
    pub vectors: Vec<Vec<f32>>,
}

pub trait EmbedProvider: Send + Sync {
    fn embed_spans(&self, req: &EmbedRequest) -> Result<EmbedResponse>;

    /// Short label for logs and summaries.
    fn name(&self) -> &str;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderConfig {
    Synthetic(SyntheticConfig),
    Http(HttpConfig),
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Synthetic(SyntheticConfig::default())
    }
}

impl ProviderConfig {
    pub fn build(&self) -> Result<Box<dyn EmbedProvider>> {
        Ok(match self {
            ProviderConfig::Synthetic(cfg) => Box::new(SyntheticEncoder::new(cfg.clone())?),
            ProviderConfig::Http(cfg) => Box::new(HttpProvider::new(cfg.clone())?),
        })
    }
}

/// Checks spans against the text: nonempty list, `start < end <= len`.
pub fn validate_request(req: &EmbedRequest) -> Result<()> {
    if req.spans.is_empty() {
        return Err(Error::InvalidSpan("request has no spans".into()));
    }
    let len = req.chunk_text.chars().count();
    for &(s, e) in &req.spans {
        if s >= e || e > len {
            return Err(Error::InvalidSpan(format!(
                "span ({s},{e}) outside text of {len} characters"
            )));
        }
    }
    Ok(())
}

/// Provider wrapper that validates requests and responses and pins the
/// embedding dimension to the first one observed.
pub struct Gateway {
    provider: Box<dyn EmbedProvider>,
    dim: AtomicUsize,
}

impl Gateway {
    pub fn new(provider: Box<dyn EmbedProvider>) -> Self {
        Self {
            provider,
            dim: AtomicUsize::new(0),
        }
    }

    pub fn from_config(cfg: &ProviderConfig) -> Result<Self> {
        Ok(Self::new(cfg.build()?))
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    /// Dimension seen so far, if any call has completed.
    pub fn dim(&self) -> Option<usize> {
        match self.dim.load(Ordering::Acquire) {
            0 => None,
            d => Some(d),
        }
    }

    pub fn embed_spans(&self, req: &EmbedRequest) -> Result<EmbedResponse> {
        validate_request(req)?;
        let resp = self.provider.embed_spans(req)?;
        self.check_response(req, &resp)?;
        Ok(resp)
    }

    fn check_response(&self, req: &EmbedRequest, resp: &EmbedResponse) -> Result<()> {
        if resp.dim == 0 {
            return Err(Error::Protocol("dimension 0".into()));
        }
        if let Err(prev) = self
            .dim
            .compare_exchange(0, resp.dim, Ordering::AcqRel, Ordering::Acquire)
        {
            if prev != resp.dim {
                return Err(Error::DimensionMismatch {
                    expected: prev,
                    found: resp.dim,
                });
            }
        }
        if resp.vectors.len() != req.spans.len() {
            return Err(Error::Protocol(format!(
                "{} vectors for {} spans",
                resp.vectors.len(),
                req.spans.len()
            )));
        }
        for (i, v) in resp.vectors.iter().enumerate() {
            if v.len() != resp.dim {
                return Err(Error::DimensionMismatch {
                    expected: resp.dim,
                    found: v.len(),
                });
            }
            let n = vector::norm(v);
            if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::Protocol(format!("vector {i} has norm {n}")));
            }
        }
        Ok(())
    }
}
