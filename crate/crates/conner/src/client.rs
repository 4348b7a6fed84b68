//! Blocking HTTP client for a protocol-v1 scoring service.

use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::Duration;

use conner_core::{Backend, Endpoint, Error, Evidence, NliVector, Result, TokenLogprobs};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::protocol::*;

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_retries() -> u32 {
    3
}

fn default_batch() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    /// Participates in cache keys; two services with the same id are assumed
    /// to answer identically.
    pub backend_id: String,
    pub base_url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

impl BackendConfig {
    pub fn new(backend_id: impl Into<String>, base_url: impl Into<String>) -> Self {
        BackendConfig {
            backend_id: backend_id.into(),
            base_url: base_url.into(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
            batch_size: default_batch(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.backend_id.trim().is_empty() {
            return Err(Error::invalid("backend_id is empty"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.base_url.trim().is_empty() {
            return Err(Error::invalid("base_url is empty"));
        }
        Ok(())
    }
}

pub struct HttpBackend {
    cfg: BackendConfig,
    client: Client,
    calls: AtomicU64,
}

impl HttpBackend {
    pub fn new(cfg: BackendConfig) -> Result<Self> {
        cfg.validate()?;
        let client = Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| Error::BackendUnavailable(format!("http client: {e}")))?;
        Ok(HttpBackend {
            cfg,
            client,
            calls: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    /// Number of endpoint requests sent (health probes excluded).
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.cfg.base_url.trim_end_matches('/'), path)
    }

    pub fn health(&self) -> Result<Health> {
        let resp = self
            .client
            .get(self.url("/v1/health"))
            .header(PROTO_HEADER, PROTO_VERSION.to_string())
            .send()
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", self.cfg.base_url)))?;
        if !resp.status().is_success() {
            return Err(Error::BackendUnavailable(format!(
                "{}: health returned {}",
                self.cfg.base_url,
                resp.status()
            )));
        }
        let health: Health = resp
            .json()
            .map_err(|e| Error::protocol(format!("health body: {e}")))?;
        if health.proto != PROTO_VERSION {
            return Err(Error::protocol(format!("service speaks protocol {}", health.proto)));
        }
        Ok(health)
    }

    /// POSTs `body`, retrying transport failures and 503 with exponential backoff.
    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp> {
        let url = self.url(path);
        let mut last_err = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(50u64 << (attempt - 1).min(6)));
            }
            self.calls.fetch_add(1, Ordering::Relaxed);
            let resp = match self
                .client
                .post(&url)
                .header(PROTO_HEADER, PROTO_VERSION.to_string())
                .json(body)
                .send()
            {
                Ok(r) => r,
                Err(e) => {
                    last_err = e.to_string();
                    continue;
                }
            };
            match resp.status() {
                s if s.is_success() => {
                    return resp
                        .json::<Resp>()
                        .map_err(|e| Error::protocol(format!("{path}: malformed response: {e}")));
                }
                StatusCode::SERVICE_UNAVAILABLE => {
                    last_err = "503 overloaded".to_string();
                }
                StatusCode::BAD_REQUEST => {
                    let msg = resp
                        .json::<ErrorBody>()
                        .map(|b| b.error)
                        .unwrap_or_else(|_| "bad request".to_string());
                    return Err(Error::invalid(format!("{path}: {msg}")));
                }
                s => return Err(Error::protocol(format!("{path}: HTTP {s}"))),
            }
        }
        Err(Error::BackendUnavailable(format!(
            "{url} after {} attempts: {last_err}",
            self.cfg.max_retries + 1
        )))
    }
}

fn check_rank(score: f64) -> Result<f64> {
    if !score.is_finite() || !(-1e-6..=1.0 + 1e-6).contains(&score) {
        return Err(Error::protocol(format!("rank score {score} outside [0,1]")));
    }
    Ok(score.clamp(0.0, 1.0))
}

fn check_retrieved(evidence: Vec<Evidence>, l: usize) -> Result<Vec<Evidence>> {
    if evidence.len() > l {
        return Err(Error::protocol(format!("asked for {l} passages, got {}", evidence.len())));
    }
    if evidence.windows(2).any(|w| w[0].retrieval_score < w[1].retrieval_score) {
        return Err(Error::protocol("evidence not in descending score order"));
    }
    Ok(evidence)
}

impl Backend for HttpBackend {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVector> {
        let req = NliRequest {
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
        };
        self.post::<_, NliResponse>(&endpoint_path(Endpoint::Nli), &req)?
            .into_vector()
    }

    fn nli_batch(&self, pairs: &[(String, String)]) -> Result<Vec<NliVector>> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(self.cfg.batch_size) {
            let req = BatchRequest {
                requests: chunk
                    .iter()
                    .map(|(p, h)| NliRequest {
                        premise: p.clone(),
                        hypothesis: h.clone(),
                    })
                    .collect(),
            };
            let resp: BatchResponse<NliResponse> = self.post(&batch_path(Endpoint::Nli), &req)?;
            if resp.responses.len() != chunk.len() {
                return Err(Error::protocol("batch response length differs from request"));
            }
            for r in resp.responses {
                out.push(r.into_vector()?);
            }
        }
        Ok(out)
    }

    fn rank(&self, query: &str, passage: &str) -> Result<f64> {
        let req = RankRequest {
            query: query.to_string(),
            passage: passage.to_string(),
        };
        check_rank(self.post::<_, RankResponse>(&endpoint_path(Endpoint::Rank), &req)?.score)
    }

    fn token_logprobs(&self, context: &str, continuation: &str) -> Result<TokenLogprobs> {
        if continuation.trim().is_empty() {
            return Err(Error::invalid("continuation is empty"));
        }
        let req = LogprobRequest {
            context: context.to_string(),
            continuation: continuation.to_string(),
        };
        let r: LogprobResponse = self.post(&endpoint_path(Endpoint::Logprob), &req)?;
        TokenLogprobs::new(r.tokens, r.logprobs)
    }

    fn retrieve(&self, query: &str, l: usize) -> Result<Vec<Evidence>> {
        if l == 0 {
            return Err(Error::invalid("retrieve needs l >= 1"));
        }
        let req = RetrieveRequest {
            query: query.to_string(),
            l,
        };
        let r: RetrieveResponse = self.post(&endpoint_path(Endpoint::Retrieve), &req)?;
        check_retrieved(r.into_evidence(), l)
    }

    fn discourse_raw(&self, sentences: &[String]) -> Result<f64> {
        let req = DiscourseRequest {
            sentences: sentences.to_vec(),
        };
        let raw = self.post::<_, DiscourseResponse>(&endpoint_path(Endpoint::Discourse), &req)?.raw;
        if !raw.is_finite() {
            return Err(Error::protocol("discourse score is not finite"));
        }
        Ok(raw)
    }
}
