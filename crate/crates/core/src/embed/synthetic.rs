//! Deterministic offline encoder.
//!
//! Every surface `x` owns a pseudo-random direction `v(x)` derived from
//! `(seed, x)` alone. An occurrence is encoded as
//! `normalize(v(surface) + gamma * mean_{w in context} v(w))`, where the
//! context is the bag of all spans in the request (the whole chunk when the
//! indexer batches per chunk). Optional per-occurrence noise models encoders
//! whose individual token vectors carry weak context.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EmbedProvider, EmbedRequest, EmbedResponse};
use crate::error::{Error, Result};
use crate::text::{char_span_to_bytes, normalize_surface};
use crate::vector;

pub const MIN_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub seed: u64,
    pub gamma: f64,
    /// Weight of a per-occurrence random direction; 0 disables it.
    pub occurrence_noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            seed: 42,
            gamma: 1.0,
            occurrence_noise: 0.0,
        }
    }
}

/// Unit vector fully determined by `(seed, key)`.
///
/// Components are centred Irwin–Hall(4) samples from a ChaCha stream keyed by
/// SHA-256 of the inputs; only integer-to-float conversions and additions are
/// involved, so the output is bit-identical across platforms.
pub fn hash_to_sphere(seed: u64, key: &str, dim: usize) -> Vec<f64> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(digest);
    let v: Vec<f64> = (0..dim)
        .map(|_| (0..4).map(|_| rng.random::<f64>()).sum::<f64>() - 2.0)
        .collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// `normalize(v(surface) + gamma * mean v(context))`.
pub fn synthetic_encode(surface: &str, context: &[&str], gamma: f64, dim: usize, seed: u64) -> Vec<f32> {
    assert!(dim >= MIN_DIM, "synthetic encoder needs dim >= {MIN_DIM}");
    let ctx = context_mean(context.iter().map(|w| hash_to_sphere(seed, w, dim)), dim);
    combine(&hash_to_sphere(seed, surface, dim), &ctx, gamma, None)
}

fn context_mean(vectors: impl Iterator<Item = Vec<f64>>, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    let mut n = 0usize;
    for v in vectors {
        acc.iter_mut().zip(&v).for_each(|(a, x)| *a += x);
        n += 1;
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    acc
}

fn combine(base: &[f64], ctx: &[f64], gamma: f64, noise: Option<(&[f64], f64)>) -> Vec<f32> {
    let mut v: Vec<f64> = base.iter().zip(ctx).map(|(b, c)| b + gamma * c).collect();
    if let Some((dir, weight)) = noise {
        v.iter_mut().zip(dir).for_each(|(x, d)| *x += weight * d);
    }
    // A zero sum is only possible for adversarial gamma; fall back to the base direction.
    vector::normalize_f64(&v).unwrap_or_else(|| base.iter().map(|&x| x as f32).collect())
}

#[derive(Debug, Clone)]
pub struct SyntheticEncoder {
    cfg: SyntheticConfig,
}

impl SyntheticEncoder {
    pub fn new(cfg: SyntheticConfig) -> Result<Self> {
        if cfg.dim < MIN_DIM {
            return Err(Error::InvalidConfig(format!(
                "synthetic dim must be >= {MIN_DIM}, got {}",
                cfg.dim
            )));
        }
        if !cfg.gamma.is_finite() || !cfg.occurrence_noise.is_finite() || cfg.occurrence_noise < 0.0 {
            return Err(Error::InvalidConfig("synthetic gamma/noise must be finite".into()));
        }
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.cfg
    }
}

impl EmbedProvider for SyntheticEncoder {
    fn embed_spans(&self, req: &EmbedRequest) -> Result<EmbedResponse> {
        super::validate_request(req)?;
        let SyntheticConfig {
            dim,
            seed,
            gamma,
            occurrence_noise,
        } = self.cfg;

        let mut surfaces = Vec::with_capacity(req.spans.len());
        for &span in &req.spans {
            let (s, e) =
                char_span_to_bytes(&req.chunk_text, span).ok_or_else(|| Error::InvalidSpan(format!("{span:?}")))?;
            surfaces.push(normalize_surface(&req.chunk_text[s..e]));
        }
        let mut directions: HashMap<&str, Vec<f64>> = HashMap::new();
        for s in &surfaces {
            directions
                .entry(s.as_str())
                .or_insert_with(|| hash_to_sphere(seed, s, dim));
        }
        let ctx = context_mean(surfaces.iter().map(|s| directions[s.as_str()].clone()), dim);

        let vectors = surfaces
            .iter()
            .zip(&req.spans)
            .map(|(s, &(start, end))| {
                let base = &directions[s.as_str()];
                if occurrence_noise > 0.0 {
                    let key = format!("\u{0}occurrence\u{0}{}\u{0}{start}:{end}", req.chunk_text);
                    let dir = hash_to_sphere(seed, &key, dim);
                    combine(base, &ctx, gamma, Some((&dir, occurrence_noise)))
                } else {
                    combine(base, &ctx, gamma, None)
                }
            })
            .collect();
        Ok(EmbedResponse { dim, vectors })
    }

    fn name(&self) -> &str {
        "synthetic"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_zero_ignores_context() {
        let a = synthetic_encode("apple", &["fruit", "pie"], 0.0, 64, 42);
        let b = synthetic_encode("apple", &["iphone"], 0.0, 64, 42);
        assert_eq!(a, b);
        let v: Vec<f32> = hash_to_sphere(42, "apple", 64).iter().map(|&x| x as f32).collect();
        assert_eq!(a, v);
    }

    #[test]
    fn disjoint_contexts_are_less_similar() {
        let fruit = synthetic_encode("apple", &["fruit", "pie"], 1.0, 64, 42);
        let fruit2 = synthetic_encode("apple", &["fruit", "pie"], 1.0, 64, 42);
        let tech = synthetic_encode("apple", &["iphone", "mac"], 1.0, 64, 42);
        assert!(vector::cosine(&fruit, &tech) < vector::cosine(&fruit, &fruit2));
    }

    #[test]
    fn provider_output_is_deterministic_and_unit() {
        let enc = SyntheticEncoder::new(SyntheticConfig::default()).unwrap();
        let req = EmbedRequest {
            chunk_text: "apple pie recipe".into(),
            spans: vec![(0, 5)],
        };
        let a = enc.embed_spans(&req).unwrap();
        let b = enc.embed_spans(&req).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim, 64);
        assert!((vector::norm(&a.vectors[0]) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn provider_matches_pure_function() {
        let enc = SyntheticEncoder::new(SyntheticConfig::default()).unwrap();
        let req = EmbedRequest {
            chunk_text: "Apple pie recipe".into(),
            spans: vec![(0, 5), (6, 9), (10, 16)],
        };
        let resp = enc.embed_spans(&req).unwrap();
        let ctx = ["apple", "pie", "recipe"];
        assert_eq!(resp.vectors[1], synthetic_encode("pie", &ctx, 1.0, 64, 42));
    }

    #[test]
    fn occurrence_noise_separates_repeats() {
        let enc = SyntheticEncoder::new(SyntheticConfig {
            occurrence_noise: 0.5,
            ..Default::default()
        })
        .unwrap();
        let req = EmbedRequest {
            chunk_text: "apple apple".into(),
            spans: vec![(0, 5), (6, 11)],
        };
        let resp = enc.embed_spans(&req).unwrap();
        assert_ne!(resp.vectors[0], resp.vectors[1]);
    }

    #[test]
    fn small_dim_is_rejected() {
        assert!(SyntheticEncoder::new(SyntheticConfig {
            dim: 4,
            ..Default::default()
        })
        .is_err());
    }
}
