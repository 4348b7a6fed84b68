//! On-disk response cache: persistence across processes and recovery from
//! damaged records.

use std::fs;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use conner::cache::ResponseCache;
use conner::routing::CachedBackend;
use conner_core::{Backend, Evidence, MockBackend, NliVector, Passage, Result, TokenLogprobs};

/// Counts calls reaching the wrapped mock.
struct Counted {
    inner: MockBackend,
    calls: AtomicUsize,
}

impl Counted {
    fn new() -> Self {
        Counted {
            inner: MockBackend::new(vec![
                Passage {
                    source_id: "a".into(),
                    text: "Paris is the capital of France.".into(),
                },
                Passage {
                    source_id: "b".into(),
                    text: "Lyon is a city in France.".into(),
                },
            ]),
            calls: AtomicUsize::new(0),
        }
    }

    fn tick(&self) {
        self.calls.fetch_add(1, Ordering::SeqCst);
    }
}

impl Backend for Counted {
    fn nli(&self, p: &str, h: &str) -> Result<NliVector> {
        self.tick();
        self.inner.nli(p, h)
    }
    fn rank(&self, q: &str, p: &str) -> Result<f64> {
        self.tick();
        self.inner.rank(q, p)
    }
    fn token_logprobs(&self, c: &str, t: &str) -> Result<TokenLogprobs> {
        self.tick();
        self.inner.token_logprobs(c, t)
    }
    fn retrieve(&self, q: &str, l: usize) -> Result<Vec<Evidence>> {
        self.tick();
        self.inner.retrieve(q, l)
    }
    fn discourse_raw(&self, s: &[String]) -> Result<f64> {
        self.tick();
        self.inner.discourse_raw(s)
    }
}

fn exercise<B: Backend>(b: &B) -> (NliVector, f64, TokenLogprobs, Vec<Evidence>, f64) {
    (
        b.nli("Paris is the capital of France.", "The capital of France is Paris.").unwrap(),
        b.rank("capital of france", "Paris is the capital of France.").unwrap(),
        b.token_logprobs("Paris is", "the capital of France").unwrap(),
        b.retrieve("capital of france", 2).unwrap(),
        b.discourse_raw(&["One.".into(), "Two.".into()]).unwrap(),
    )
}

#[test]
fn reopened_cache_answers_without_backend() {
    let dir = tempfile::tempdir().unwrap();
    let first = {
        let cache = Arc::new(ResponseCache::open(dir.path()).unwrap());
        let b = CachedBackend::new(Counted::new(), "mock", cache);
        let out = exercise(&b);
        assert_eq!(b.inner().calls.load(Ordering::SeqCst), 5);
        assert_eq!((b.hits(), b.misses()), (0, 5));
        out
    };
    let cache = Arc::new(ResponseCache::open(dir.path()).unwrap());
    assert_eq!(cache.len(), 5);
    let b = CachedBackend::new(Counted::new(), "mock", cache);
    assert_eq!(exercise(&b), first);
    assert_eq!(b.inner().calls.load(Ordering::SeqCst), 0);
    assert_eq!((b.hits(), b.misses()), (5, 0));
}

#[test]
fn damaged_records_are_dropped_and_refetched() {
    let dir = tempfile::tempdir().unwrap();
    let expected = {
        let cache = Arc::new(ResponseCache::open(dir.path()).unwrap());
        exercise(&CachedBackend::new(Counted::new(), "mock", cache))
    };
    let file = dir.path().join("mock.jsonl");
    let text = fs::read_to_string(&file).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    assert_eq!(lines.len(), 5);
    // Tamper with the rank response without fixing its checksum, and
    // truncate the discourse record.
    let rank = lines.iter().position(|l| l.contains("\"endpoint\":\"rank\"")).unwrap();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[rank]).unwrap();
    rec["response"]["score"] = serde_json::json!(0.99);
    lines[rank] = rec.to_string();
    let disc = lines.iter().position(|l| l.contains("\"endpoint\":\"discourse\"")).unwrap();
    let half = lines[disc].len() / 2;
    lines[disc].truncate(half);
    fs::write(&file, lines.join("\n") + "\n").unwrap();

    let cache = Arc::new(ResponseCache::open(dir.path()).unwrap());
    assert_eq!(cache.len(), 3);
    assert_eq!(cache.invalidated(), 2);
    let b = CachedBackend::new(Counted::new(), "mock", cache.clone());
    assert_eq!(exercise(&b), expected);
    assert_eq!(b.inner().calls.load(Ordering::SeqCst), 2);

    // The refetched answers were appended and win on the next open.
    let cache = Arc::new(ResponseCache::open(dir.path()).unwrap());
    assert_eq!(cache.len(), 5);
    let b = CachedBackend::new(Counted::new(), "mock", cache);
    assert_eq!(exercise(&b), expected);
    assert_eq!(b.inner().calls.load(Ordering::SeqCst), 0);
}

#[test]
fn concurrent_writers_leave_a_readable_file() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ResponseCache::open(dir.path()).unwrap());
    let b = Arc::new(CachedBackend::new(Counted::new(), "mock", cache));
    std::thread::scope(|s| {
        for t in 0..8 {
            let b = b.clone();
            s.spawn(move || {
                for i in 0..50 {
                    b.rank(&format!("query {t} {i}"), "Paris is the capital of France.").unwrap();
                }
            });
        }
    });
    let reopened = ResponseCache::open(dir.path()).unwrap();
    assert_eq!(reopened.len(), 400);
    assert_eq!(reopened.invalidated(), 0);
}
