//! Application configuration.
//!
//! The file is one JSON object with flat dotted keys, e.g.
//! `{"induction.tau_disp": 0.97, "query.k1": 1.5, "provider.kind": "http"}`.
//! Missing keys take their defaults; unknown keys and out-of-range values are
//! rejected at load time.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::embed::{HttpConfig, ProviderConfig, SyntheticConfig};
use crate::error::{Error, Result};
use crate::induction::InductionConfig;
use crate::retrieval::QueryConfig;
use crate::text::{parse_stopwords, ChunkingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkingSettings {
    pub chunk_size: usize,
    pub overlap: usize,
    /// Replaces the built-in English stopword list when set.
    pub stopwords_file: Option<PathBuf>,
}

impl Default for ChunkingSettings {
    fn default() -> Self {
        let d = ChunkingConfig::default();
        Self {
            chunk_size: d.chunk_size,
            overlap: d.overlap,
            stopwords_file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Synthetic,
    Http,
}

/// Settings for both providers; `kind` picks which ones apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSettings {
    pub kind: ProviderKind,
    pub dim: usize,
    pub seed: u64,
    pub gamma: f64,
    pub occurrence_noise: f64,
    pub url: String,
    pub timeout_secs: f64,
    pub max_in_flight: usize,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        let s = SyntheticConfig::default();
        let h = HttpConfig::default();
        Self {
            kind: ProviderKind::Synthetic,
            dim: s.dim,
            seed: s.seed,
            gamma: s.gamma,
            occurrence_noise: s.occurrence_noise,
            url: h.url,
            timeout_secs: h.timeout_secs,
            max_in_flight: h.max_in_flight,
        }
    }
}

impl ProviderSettings {
    pub fn provider_config(&self) -> ProviderConfig {
        match self.kind {
            ProviderKind::Synthetic => ProviderConfig::Synthetic(SyntheticConfig {
                dim: self.dim,
                seed: self.seed,
                gamma: self.gamma,
                occurrence_noise: self.occurrence_noise,
            }),
            ProviderKind::Http => ProviderConfig::Http(HttpConfig {
                url: self.url.clone(),
                timeout_secs: self.timeout_secs,
                max_in_flight: self.max_in_flight,
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub chunking: ChunkingSettings,
    pub induction: InductionConfig,
    pub query: QueryConfig,
    pub provider: ProviderSettings,
}

impl AppConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let cfg = Self::from_json(&text)?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let flat: Map<String, Value> =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("not a JSON object: {e}")))?;
        let mut nested = Map::new();
        for (key, value) in flat {
            let Some((section, field)) = key.split_once('.') else {
                return Err(Error::InvalidConfig(format!("key {key:?} has no section prefix")));
            };
            if field.contains('.') || field.is_empty() {
                return Err(Error::InvalidConfig(format!("key {key:?} is not section.field")));
            }
            let entry = nested
                .entry(section.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            if let Value::Object(obj) = entry {
                obj.insert(field.to_string(), value);
            }
        }
        let cfg: AppConfig =
            serde_json::from_value(Value::Object(nested)).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Flat dotted-key form, the inverse of [`Self::from_json`].
    pub fn to_flat_json(&self) -> Value {
        let mut flat = Map::new();
        if let Ok(Value::Object(sections)) = serde_json::to_value(self) {
            for (section, fields) in sections {
                if let Value::Object(fields) = fields {
                    for (field, v) in fields {
                        flat.insert(format!("{section}.{field}"), v);
                    }
                }
            }
        }
        Value::Object(flat)
    }

    pub fn validate(&self) -> Result<()> {
        self.chunking_config_unchecked().validate()?;
        self.induction.validate()?;
        self.query.validate()?;
        self.provider.provider_config().build().map(|_| ())
    }

    fn chunking_config_unchecked(&self) -> ChunkingConfig {
        ChunkingConfig {
            chunk_size: self.chunking.chunk_size,
            overlap: self.chunking.overlap,
            ..ChunkingConfig::default()
        }
    }

    /// Chunking parameters, loading the stopword file if one is configured.
    pub fn chunking_config(&self) -> Result<ChunkingConfig> {
        let mut cfg = self.chunking_config_unchecked();
        if let Some(path) = &self.chunking.stopwords_file {
            cfg.stopwords = parse_stopwords(&fs::read_to_string(path)?);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
