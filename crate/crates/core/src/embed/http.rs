//! Client for a remote token-embedding service.
//!
//! `POST {url}/embed` with `{"text": ..., "spans": [[s, e], ...]}` returns
//! `{"dim": d, "vectors": [[...], ...]}`. 422 means the spans were rejected;
//! any 5xx or transport failure is reported as retryable unavailability.
//! `GET {url}/health` returns `{"status", "model", "dim"}`.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedProvider, EmbedRequest, EmbedResponse};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Base URL, e.g. `http://127.0.0.1:8000`.
    pub url: String,
    pub timeout_secs: f64,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8000".into(),
            timeout_secs: 30.0,
            max_in_flight: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthStatus {
    pub status: String,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub dim: usize,
}

/// Counting semaphore bounding concurrent requests.
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpProvider {
    cfg: HttpConfig,
    agent: ureq::Agent,
    permits: Permits,
}

impl HttpProvider {
    pub fn new(cfg: HttpConfig) -> Result<Self> {
        if cfg.max_in_flight == 0 || (cfg.timeout_secs.is_nan() || cfg.timeout_secs <= 0.0) {
            return Err(Error::InvalidConfig(
                "http provider needs max_in_flight >= 1 and a positive timeout".into(),
            ));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let permits = Permits {
            free: Mutex::new(cfg.max_in_flight),
            cv: Condvar::new(),
        };
        Ok(Self { cfg, agent, permits })
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.cfg.url.trim_end_matches('/'), path)
    }

    pub fn health(&self) -> Result<HealthStatus> {
        let _permit = self.permits.acquire();
        let mut resp = self
            .agent
            .get(&self.endpoint("health"))
            .call()
            .map_err(|e| Error::ProviderUnavailable(e.to_string()))?;
        match resp.status().as_u16() {
            200 => resp
                .body_mut()
                .read_json()
                .map_err(|e| Error::Protocol(format!("bad health body: {e}"))),
            code => Err(Error::ProviderUnavailable(format!("health returned {code}"))),
        }
    }
}

impl EmbedProvider for HttpProvider {
    fn embed_spans(&self, req: &EmbedRequest) -> Result<EmbedResponse> {
        let _permit = self.permits.acquire();
        let mut resp = self
            .agent
            .post(&self.endpoint("embed"))
            .send_json(req)
            .map_err(|e| Error::ProviderUnavailable(e.to_string()))?;
        let code = resp.status().as_u16();
        if code == 200 {
            return resp
                .body_mut()
                .read_json()
                .map_err(|e| Error::Protocol(format!("bad embed body: {e}")));
        }
        let body = resp.body_mut().read_to_string().unwrap_or_default();
        match code {
            422 => Err(Error::InvalidSpan(format!("service rejected spans: {body}"))),
            413 => Err(Error::InvalidSpan(format!("text too long for service: {body}"))),
            500..=599 => Err(Error::ProviderUnavailable(format!("service returned {code}"))),
            _ => Err(Error::Protocol(format!("unexpected status {code}: {body}"))),
        }
    }

    fn name(&self) -> &str {
        "http"
    }
}
