//! Backend composition: caching in front of any backend, and per-endpoint routing.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use conner_core::{Backend, Endpoint, Error, Evidence, NliVector, Result, TokenLogprobs};
use log::warn;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cache::{CacheKey, ResponseCache};
use crate::protocol::*;

/// Serves repeated requests from a [`ResponseCache`] and forwards the rest.
pub struct CachedBackend<B> {
    inner: B,
    backend_id: String,
    cache: Arc<ResponseCache>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<B: Backend> CachedBackend<B> {
    pub fn new(inner: B, backend_id: impl Into<String>, cache: Arc<ResponseCache>) -> Self {
        CachedBackend {
            inner,
            backend_id: backend_id.into(),
            cache,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    fn key<Req: Serialize>(&self, endpoint: Endpoint, req: &Req) -> Result<(CacheKey, serde_json::Value)> {
        let value = serde_json::to_value(req).map_err(|e| Error::protocol(e.to_string()))?;
        Ok((CacheKey::new(&self.backend_id, endpoint, &value), value))
    }

    fn store<Resp: Serialize>(&self, key: CacheKey, request: &serde_json::Value, resp: &Resp) -> Result<()> {
        let value = serde_json::to_value(resp).map_err(|e| Error::protocol(e.to_string()))?;
        if let Err(e) = self.cache.put(key, request, value) {
            warn!("cache write failed: {e}");
        }
        Ok(())
    }

    /// Returns the stored response for `req` or runs `fetch` and stores its result.
    pub fn cached<Req, Resp, F>(&self, endpoint: Endpoint, req: &Req, fetch: F) -> Result<Resp>
    where
        Req: Serialize,
        Resp: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<Resp>,
    {
        let (key, request) = self.key(endpoint, req)?;
        if let Some(hit) = self.cache.lookup::<Resp>(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let resp = fetch()?;
        self.store(key, &request, &resp)?;
        Ok(resp)
    }
}

impl<B: Backend> Backend for CachedBackend<B> {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVector> {
        let req = NliRequest {
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
        };
        self.cached(Endpoint::Nli, &req, || {
            self.inner.nli(premise, hypothesis).map(NliResponse::from)
        })?
        .into_vector()
    }

    fn nli_batch(&self, pairs: &[(String, String)]) -> Result<Vec<NliVector>> {
        let mut out: Vec<Option<NliVector>> = vec![None; pairs.len()];
        let mut missing = Vec::new();
        for (i, (p, h)) in pairs.iter().enumerate() {
            let req = NliRequest {
                premise: p.clone(),
                hypothesis: h.clone(),
            };
            let (key, value) = self.key(Endpoint::Nli, &req)?;
            match self.cache.lookup::<NliResponse>(&key) {
                Some(hit) => {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    out[i] = Some(hit.into_vector()?);
                }
                None => {
                    self.misses.fetch_add(1, Ordering::Relaxed);
                    missing.push((i, key, value));
                }
            }
        }
        if !missing.is_empty() {
            let ask: Vec<(String, String)> = missing.iter().map(|(i, _, _)| pairs[*i].clone()).collect();
            let got = self.inner.nli_batch(&ask)?;
            if got.len() != ask.len() {
                return Err(Error::protocol("batch response length differs from request"));
            }
            for ((i, key, value), v) in missing.into_iter().zip(got) {
                self.store(key, &value, &NliResponse::from(v))?;
                out[i] = Some(v);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("every slot filled")).collect())
    }

    fn rank(&self, query: &str, passage: &str) -> Result<f64> {
        let req = RankRequest {
            query: query.to_string(),
            passage: passage.to_string(),
        };
        Ok(self
            .cached(Endpoint::Rank, &req, || {
                self.inner.rank(query, passage).map(|score| RankResponse { score })
            })?
            .score)
    }

    fn token_logprobs(&self, context: &str, continuation: &str) -> Result<TokenLogprobs> {
        let req = LogprobRequest {
            context: context.to_string(),
            continuation: continuation.to_string(),
        };
        let r = self.cached(Endpoint::Logprob, &req, || {
            self.inner
                .token_logprobs(context, continuation)
                .map(LogprobResponse::from)
        })?;
        TokenLogprobs::new(r.tokens, r.logprobs)
    }

    fn retrieve(&self, query: &str, l: usize) -> Result<Vec<Evidence>> {
        let req = RetrieveRequest {
            query: query.to_string(),
            l,
        };
        Ok(self
            .cached(Endpoint::Retrieve, &req, || {
                self.inner.retrieve(query, l).map(RetrieveResponse::from)
            })?
            .into_evidence())
    }

    fn discourse_raw(&self, sentences: &[String]) -> Result<f64> {
        let req = DiscourseRequest {
            sentences: sentences.to_vec(),
        };
        Ok(self
            .cached(Endpoint::Discourse, &req, || {
                self.inner.discourse_raw(sentences).map(|raw| DiscourseResponse { raw })
            })?
            .raw)
    }
}

pub type SharedBackend = Arc<dyn Backend + Send + Sync>;

/// Sends each endpoint to its own backend.
#[derive(Clone, Default)]
pub struct RoutedBackend {
    routes: BTreeMap<Endpoint, SharedBackend>,
}

impl RoutedBackend {
    pub fn new() -> Self {
        RoutedBackend::default()
    }

    /// The same backend for every endpoint.
    pub fn uniform(backend: SharedBackend) -> Self {
        let mut r = RoutedBackend::new();
        for e in Endpoint::ALL {
            r.insert(e, backend.clone());
        }
        r
    }

    pub fn insert(&mut self, endpoint: Endpoint, backend: SharedBackend) {
        self.routes.insert(endpoint, backend);
    }

    fn route(&self, endpoint: Endpoint) -> Result<&SharedBackend> {
        self.routes
            .get(&endpoint)
            .ok_or_else(|| Error::invalid(format!("no backend configured for {}", endpoint.as_str())))
    }
}

impl Backend for RoutedBackend {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVector> {
        self.route(Endpoint::Nli)?.nli(premise, hypothesis)
    }

    fn nli_batch(&self, pairs: &[(String, String)]) -> Result<Vec<NliVector>> {
        self.route(Endpoint::Nli)?.nli_batch(pairs)
    }

    fn rank(&self, query: &str, passage: &str) -> Result<f64> {
        self.route(Endpoint::Rank)?.rank(query, passage)
    }

    fn token_logprobs(&self, context: &str, continuation: &str) -> Result<TokenLogprobs> {
        self.route(Endpoint::Logprob)?.token_logprobs(context, continuation)
    }

    fn retrieve(&self, query: &str, l: usize) -> Result<Vec<Evidence>> {
        self.route(Endpoint::Retrieve)?.retrieve(query, l)
    }

    fn discourse_raw(&self, sentences: &[String]) -> Result<f64> {
        self.route(Endpoint::Discourse)?.discourse_raw(sentences)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use conner_core::MockBackend;
    use std::sync::atomic::AtomicUsize;

    /// Counts how often the wrapped mock is reached.
    struct Counting {
        mock: MockBackend,
        calls: AtomicUsize,
    }

    impl Backend for Counting {
        fn nli(&self, p: &str, h: &str) -> Result<NliVector> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.mock.nli(p, h)
        }
        fn rank(&self, q: &str, p: &str) -> Result<f64> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.mock.rank(q, p)
        }
        fn token_logprobs(&self, c: &str, t: &str) -> Result<TokenLogprobs> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.mock.token_logprobs(c, t)
        }
        fn retrieve(&self, q: &str, l: usize) -> Result<Vec<Evidence>> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.mock.retrieve(q, l)
        }
        fn discourse_raw(&self, s: &[String]) -> Result<f64> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.mock.discourse_raw(s)
        }
    }

    fn counting() -> Counting {
        Counting {
            mock: MockBackend::default(),
            calls: AtomicUsize::new(0),
        }
    }

    #[test]
    fn repeat_request_is_a_hit() {
        let cache = Arc::new(ResponseCache::in_memory());
        let b = CachedBackend::new(counting(), "mock", cache);
        let first = b.nli("a cat", "a cat sleeps").unwrap();
        let second = b.nli("a cat", "a cat sleeps").unwrap();
        assert_eq!(first, second);
        assert_eq!(b.inner().calls.load(Ordering::SeqCst), 1);
        assert_eq!((b.hits(), b.misses()), (1, 1));
    }

    #[test]
    fn backend_id_separates_entries() {
        let cache = Arc::new(ResponseCache::in_memory());
        let a = CachedBackend::new(counting(), "one", cache.clone());
        let b = CachedBackend::new(counting(), "two", cache);
        a.rank("cats", "cats").unwrap();
        b.rank("cats", "cats").unwrap();
        assert_eq!(a.inner().calls.load(Ordering::SeqCst) + b.inner().calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn whitespace_variants_collide() {
        let cache = Arc::new(ResponseCache::in_memory());
        let b = CachedBackend::new(counting(), "mock", cache);
        b.token_logprobs("ctx", "a  b").unwrap();
        b.token_logprobs("ctx", "a b").unwrap();
        assert_eq!(b.inner().calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn batch_matches_sequential_and_fills_cache() {
        let cache = Arc::new(ResponseCache::in_memory());
        let b = CachedBackend::new(counting(), "mock", cache);
        let pairs: Vec<(String, String)> = (0..5)
            .map(|i| (format!("cats {i} purr"), format!("cats {} sleep", i % 2)))
            .collect();
        b.nli(&pairs[2].0, &pairs[2].1).unwrap();
        let batch = b.nli_batch(&pairs).unwrap();
        let seq: Vec<NliVector> = pairs.iter().map(|(p, h)| MockBackend::default().nli(p, h).unwrap()).collect();
        assert_eq!(batch, seq);
        assert_eq!(b.hits(), 1);
        b.nli_batch(&pairs).unwrap();
        assert_eq!(b.hits(), 6);
    }

    #[test]
    fn unrouted_endpoint_is_an_error() {
        let r = RoutedBackend::new();
        assert!(matches!(r.rank("a", "b"), Err(Error::InvalidArgument(_))));
    }
}
