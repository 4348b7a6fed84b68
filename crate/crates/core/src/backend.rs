//! The scoring-service contract and a closed-form mock implementation.
//!
//! Every metric reaches models only through [`Backend`]. The mock answers
//! from lexical overlap so golden values can be computed by hand:
//!
//! * nli: with `J` the content-word Jaccard, `(J, 1 - J - 0.1(1 - J), 0.1(1 - J))`
//! * rank: `J`
//! * logprob: whitespace tokens, `-1` if the token appears in the context, else `-2`
//! * retrieve: corpus ranked by `J`, ties by `source_id`
//! * discourse: `4f - 2` for `f` the fraction of adjacent sentences sharing a
//!   content word, `+2` for a single sentence

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{content_word_set, jaccard};
use crate::types::{Evidence, NliVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Nli,
    Rank,
    Logprob,
    Retrieve,
    Discourse,
}

impl Endpoint {
    pub const ALL: [Endpoint; 5] = [
        Endpoint::Nli,
        Endpoint::Rank,
        Endpoint::Logprob,
        Endpoint::Retrieve,
        Endpoint::Discourse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Endpoint::Nli => "nli",
            Endpoint::Rank => "rank",
            Endpoint::Logprob => "logprob",
            Endpoint::Retrieve => "retrieve",
            Endpoint::Discourse => "discourse",
        }
    }

    pub fn parse(s: &str) -> Option<Endpoint> {
        Endpoint::ALL.into_iter().find(|e| e.as_str() == s)
    }
}

/// Per-token natural-log probabilities of a continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprobs {
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
}

impl TokenLogprobs {
    pub fn new(tokens: Vec<String>, logprobs: Vec<f64>) -> Result<Self> {
        if tokens.len() != logprobs.len() {
            return Err(Error::protocol(alloc::format!(
                "{} tokens but {} logprobs",
                tokens.len(),
                logprobs.len()
            )));
        }
        if let Some(bad) = logprobs.iter().find(|lp| !(lp.is_finite() && **lp <= 0.0)) {
            return Err(Error::protocol(alloc::format!("logprob {bad} is not a finite value <= 0")));
        }
        Ok(TokenLogprobs { tokens, logprobs })
    }

    pub fn len(&self) -> usize {
        self.logprobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logprobs.is_empty()
    }

    /// Sum of negative log-probabilities, in nats.
    pub fn total_nll(&self) -> f64 {
        -self.logprobs.iter().sum::<f64>()
    }
}

pub(crate) fn require_text(name: &str, value: &str) -> Result<()> {
    if value.trim().is_empty() {
        Err(Error::invalid(alloc::format!("{name} is empty")))
    } else {
        Ok(())
    }
}

/// A set of scoring services. Implementations must be deterministic: the same
/// request always yields the same response.
pub trait Backend {
    /// Probabilities that `premise` entails, is neutral to, or contradicts `hypothesis`.
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVector>;

    /// Order-preserving batch of [`Backend::nli`]; must equal sequential calls.
    fn nli_batch(&self, pairs: &[(String, String)]) -> Result<Vec<NliVector>> {
        pairs.iter().map(|(p, h)| self.nli(p, h)).collect()
    }

    /// Query-passage relevance in [0,1].
    fn rank(&self, query: &str, passage: &str) -> Result<f64>;

    /// Log-probability of each continuation token given `context` (may be empty).
    fn token_logprobs(&self, context: &str, continuation: &str) -> Result<TokenLogprobs>;

    /// At most `l` evidence passages in descending score order.
    fn retrieve(&self, query: &str, l: usize) -> Result<Vec<Evidence>>;

    /// Unnormalized discourse-coherence score of an ordered paragraph.
    fn discourse_raw(&self, sentences: &[String]) -> Result<f64>;
}

macro_rules! forward_backend {
    ($($ty:ty),*) => {$(
        impl<B: Backend + ?Sized> Backend for $ty {
            fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVector> {
                (**self).nli(premise, hypothesis)
            }
            fn nli_batch(&self, pairs: &[(String, String)]) -> Result<Vec<NliVector>> {
                (**self).nli_batch(pairs)
            }
            fn rank(&self, query: &str, passage: &str) -> Result<f64> {
                (**self).rank(query, passage)
            }
            fn token_logprobs(&self, context: &str, continuation: &str) -> Result<TokenLogprobs> {
                (**self).token_logprobs(context, continuation)
            }
            fn retrieve(&self, query: &str, l: usize) -> Result<Vec<Evidence>> {
                (**self).retrieve(query, l)
            }
            fn discourse_raw(&self, sentences: &[String]) -> Result<f64> {
                (**self).discourse_raw(sentences)
            }
        }
    )*};
}

forward_backend!(&B, Box<B>, Arc<B>);

/// A retrievable corpus passage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub source_id: String,
    pub text: String,
}

/// Deterministic closed-form backend over an in-memory corpus.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    corpus: Vec<Passage>,
}

impl MockBackend {
    pub const BACKEND_ID: &'static str = "mock";

    pub fn new(corpus: Vec<Passage>) -> Self {
        MockBackend { corpus }
    }

    pub fn corpus(&self) -> &[Passage] {
        &self.corpus
    }
}

impl Backend for MockBackend {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVector> {
        require_text("premise", premise)?;
        require_text("hypothesis", hypothesis)?;
        let j = jaccard(premise, hypothesis);
        let contradict = 0.1 * (1.0 - j);
        NliVector::new(j, 1.0 - j - contradict, contradict)
    }

    fn rank(&self, query: &str, passage: &str) -> Result<f64> {
        require_text("query", query)?;
        require_text("passage", passage)?;
        Ok(jaccard(query, passage))
    }

    fn token_logprobs(&self, context: &str, continuation: &str) -> Result<TokenLogprobs> {
        require_text("continuation", continuation)?;
        let seen: BTreeSet<&str> = context.split_whitespace().collect();
        let tokens: Vec<String> = continuation.split_whitespace().map(String::from).collect();
        let logprobs = tokens
            .iter()
            .map(|t| if seen.contains(t.as_str()) { -1.0 } else { -2.0 })
            .collect();
        TokenLogprobs::new(tokens, logprobs)
    }

    fn retrieve(&self, query: &str, l: usize) -> Result<Vec<Evidence>> {
        if l == 0 {
            return Err(Error::invalid("retrieve needs l >= 1"));
        }
        let mut scored: Vec<Evidence> = self
            .corpus
            .iter()
            .map(|p| Evidence {
                text: p.text.clone(),
                source_id: p.source_id.clone(),
                retrieval_score: jaccard(query, &p.text),
            })
            .collect();
        scored.sort_by(|a, b| {
            b.retrieval_score
                .total_cmp(&a.retrieval_score)
                .then_with(|| a.source_id.cmp(&b.source_id))
        });
        scored.truncate(l);
        Ok(scored)
    }

    fn discourse_raw(&self, sentences: &[String]) -> Result<f64> {
        if sentences.is_empty() {
            return Err(Error::invalid("discourse needs at least one sentence"));
        }
        if sentences.len() == 1 {
            return Ok(2.0);
        }
        let sets: Vec<_> = sentences.iter().map(|s| content_word_set(s)).collect();
        let linked = sets
            .windows(2)
            .filter(|w| w[0].intersection(&w[1]).next().is_some())
            .count();
        let fraction = linked as f64 / (sets.len() - 1) as f64;
        Ok(4.0 * fraction - 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn nli_identity_pair() {
        let v = MockBackend::default().nli("glory of love", "glory of love").unwrap();
        assert_eq!((v.entail, v.neutral, v.contradict), (1.0, 0.0, 0.0));
    }

    #[test]
    fn nli_partial_overlap() {
        // 4 shared content words out of 6 distinct.
        let v = MockBackend::default()
            .nli("alpha beta gamma delta epsilon", "alpha beta gamma delta zeta")
            .unwrap();
        assert!(close(v.entail, 4.0 / 6.0));
        assert!(close(v.contradict, 0.1 * (1.0 - 4.0 / 6.0)));
        assert!(close(v.neutral, 1.0 - 4.0 / 6.0 - 0.1 / 3.0));
        // "of" is a stopword: {billy, hill, wrote, glory, love} vs {irving, berlin, wrote, glory, love}.
        let v = MockBackend::default()
            .nli("billy hill wrote glory of love", "irving berlin wrote glory of love")
            .unwrap();
        assert!(close(v.entail, 3.0 / 7.0));
    }

    #[test]
    fn nli_disjoint() {
        let v = MockBackend::default().nli("red apple", "blue sky").unwrap();
        assert!(close(v.entail, 0.0) && close(v.contradict, 0.1) && close(v.neutral, 0.9));
    }

    #[test]
    fn nli_rejects_empty() {
        assert!(MockBackend::default().nli("", "x").is_err());
    }

    #[test]
    fn rank_is_jaccard() {
        let b = MockBackend::default();
        assert_eq!(b.rank("who wrote the song", "who wrote the song").unwrap(), 1.0);
        assert!(close(b.rank("who wrote the song", "the song was wrote by billy hill").unwrap(), 0.4));
        assert_eq!(b.rank("red apple", "blue sky").unwrap(), 0.0);
    }

    #[test]
    fn logprob_membership_rule() {
        let b = MockBackend::default();
        assert_eq!(b.token_logprobs("a b", "a b").unwrap().logprobs, vec![-1.0, -1.0]);
        assert_eq!(b.token_logprobs("a", "a c").unwrap().logprobs, vec![-1.0, -2.0]);
        assert_eq!(b.token_logprobs("", "x").unwrap().logprobs, vec![-2.0]);
        assert!(matches!(b.token_logprobs("a", " "), Err(Error::InvalidArgument(_))));
    }

    fn corpus() -> MockBackend {
        MockBackend::new(vec![
            Passage { source_id: "p2".to_string(), text: "billy hill wrote glory of love".to_string() },
            Passage { source_id: "p1".to_string(), text: "glory of love is a song".to_string() },
            Passage { source_id: "p3".to_string(), text: "the weather in paris".to_string() },
        ])
    }

    #[test]
    fn retrieve_ranks_and_truncates() {
        let b = corpus();
        let top = b.retrieve("who wrote glory of love", 1).unwrap();
        // {who, wrote, glory, love}: p2 -> 3/6, p1 -> 2/5, p3 -> 0.
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].source_id, "p2");
        let all = b.retrieve("who wrote glory of love", 10).unwrap();
        let ids: Vec<_> = all.iter().map(|e| e.source_id.as_str()).collect();
        assert_eq!(ids, ["p2", "p1", "p3"]);
    }

    #[test]
    fn retrieve_ties_by_source_id() {
        let all = corpus().retrieve("quantum chromodynamics", 3).unwrap();
        let ids: Vec<_> = all.iter().map(|e| e.source_id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
        assert!(all.iter().all(|e| e.retrieval_score == 0.0));
        assert!(MockBackend::default().retrieve("x", 3).unwrap().is_empty());
    }

    #[test]
    fn discourse_mapping() {
        let b = MockBackend::default();
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(b.discourse_raw(&s(&["Only one."])).unwrap(), 2.0);
        assert_eq!(b.discourse_raw(&s(&["Cats purr.", "Cats sleep.", "Sleep is good."])).unwrap(), 2.0);
        assert_eq!(b.discourse_raw(&s(&["Cats purr.", "Rain falls."])).unwrap(), -2.0);
    }
}
