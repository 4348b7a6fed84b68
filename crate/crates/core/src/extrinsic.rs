//! Extrinsic metrics: helpfulness of knowledge for producing the answer and
//! validity of the answer itself.

use alloc::string::String;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backend::{require_text, Backend};
use crate::error::{Error, Result};
use crate::template::{PromptTemplate, Slots};
use crate::types::{Answer, AnswerKind, Knowledge, Query};

pub const DEFAULT_NEGATIVES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSet {
    pub negatives: Vec<Knowledge>,
    pub seed: u64,
}

/// Cross-entropy of an answer under some knowledge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnswerLoss {
    /// Sum of `-logprob` over answer tokens, in nats.
    pub total_nll: f64,
    pub token_count: usize,
}

impl AnswerLoss {
    pub fn mean_nll(&self) -> f64 {
        self.total_nll / self.token_count as f64
    }
}

/// The text an answer is scored as a continuation of.
pub fn answer_context(q: &Query, k: &Knowledge, template: &PromptTemplate) -> Result<String> {
    let slots = Slots::for_query(q).knowledge(k.text()).answer("");
    Ok(String::from(template.render(&slots)?.trim_end()))
}

pub fn answer_loss<B: Backend + ?Sized>(
    backend: &B,
    q: &Query,
    k: &Knowledge,
    a: &Answer,
    template: &PromptTemplate,
) -> Result<AnswerLoss> {
    require_text("answer", &a.text)?;
    let context = answer_context(q, k, template)?;
    let lps = backend.token_logprobs(&context, &a.text)?;
    if lps.is_empty() {
        return Err(Error::protocol("backend returned no tokens for a non-empty answer"));
    }
    Ok(AnswerLoss {
        total_nll: lps.total_nll(),
        token_count: lps.len(),
    })
}

/// Draws `u` baseline knowledges uniformly without replacement from the
/// entries of `pool` whose text differs from `k`.
pub fn sample_negatives(pool: &[Knowledge], k: &Knowledge, u: usize, seed: u64) -> Result<NegativeSet> {
    if u == 0 {
        return Err(Error::invalid("need at least one negative (u >= 1)"));
    }
    let eligible: Vec<&Knowledge> = pool.iter().filter(|c| c.text() != k.text()).collect();
    if eligible.len() < u {
        return Err(Error::invalid(alloc::format!(
            "negative pool has {} usable entries but u = {u} are required",
            eligible.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let negatives = rand::seq::index::sample(&mut rng, eligible.len(), u)
        .into_iter()
        .map(|i| eligible[i].clone())
        .collect();
    Ok(NegativeSet { negatives, seed })
}

/// `max(0, 1 - L / mean(baselines))`; zero when the baseline loss is zero.
pub fn helpfulness_from_losses(loss: f64, baselines: &[f64]) -> Result<f64> {
    if baselines.is_empty() {
        return Err(Error::invalid("helpfulness needs at least one baseline loss"));
    }
    if !(loss.is_finite() && loss >= 0.0) || baselines.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(Error::invalid("losses must be finite and non-negative"));
    }
    let mean = baselines.iter().sum::<f64>() / baselines.len() as f64;
    if mean == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - loss / mean).clamp(0.0, 1.0))
}

pub fn helpfulness<B: Backend + ?Sized>(
    backend: &B,
    q: &Query,
    a: &Answer,
    k: &Knowledge,
    negatives: &NegativeSet,
    template: &PromptTemplate,
) -> Result<f64> {
    let loss = answer_loss(backend, q, k, a, template)?;
    let baselines = negatives
        .negatives
        .iter()
        .map(|n| answer_loss(backend, q, n, a, template).map(|l| l.total_nll))
        .collect::<Result<Vec<_>>>()?;
    helpfulness_from_losses(loss.total_nll, &baselines)
}

/// Query and answer joined for span-answer entailment.
pub fn render_span(q: &Query, a: &Answer) -> String {
    alloc::format!("{} {}", q.text, a.text)
}

/// Entailment of `(q, a)` by `(q, a*)`, maximized over reference answers.
pub fn validity_span<B: Backend + ?Sized>(
    backend: &B,
    q: &Query,
    a: &Answer,
    references: &[Answer],
) -> Result<f64> {
    if a.kind != AnswerKind::Span {
        return Err(Error::invalid("validity_span needs a span answer"));
    }
    if references.is_empty() {
        return Err(Error::invalid("validity_span needs a reference answer"));
    }
    let hypothesis = render_span(q, a);
    let mut best = 0.0f64;
    for r in references {
        let v = backend.nli(&render_span(q, r), &hypothesis)?;
        best = best.max(v.entail);
    }
    Ok(best)
}

/// Best entailment of an open-ended answer by up to `l` passages retrieved for it.
pub fn validity_open<B: Backend + ?Sized>(backend: &B, a: &Answer, l: usize) -> Result<f64> {
    if a.kind != AnswerKind::OpenEnded {
        return Err(Error::invalid("validity_open needs an open-ended answer"));
    }
    if l == 0 {
        return Err(Error::invalid("evidence count l must be >= 1"));
    }
    let evidence = backend.retrieve(&a.text, l)?;
    let mut best = 0.0f64;
    for e in &evidence {
        best = best.max(backend.nli(&e.text, &a.text)?.entail);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{MockBackend, Passage};
    use crate::types::{Provenance, TaskKind};
    use alloc::string::ToString;
    use alloc::vec;

    fn k(t: &str) -> Knowledge {
        Knowledge::new(t, Provenance::Generated)
    }

    #[test]
    fn helpfulness_boundaries() {
        assert_eq!(helpfulness_from_losses(0.0, &[2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(helpfulness_from_losses(2.5, &[2.0, 3.0]).unwrap(), 0.0);
        assert!((helpfulness_from_losses(1.0, &[2.0, 3.0]).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(helpfulness_from_losses(4.0, &[2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(helpfulness_from_losses(0.0, &[0.0]).unwrap(), 0.0);
        assert!(helpfulness_from_losses(1.0, &[]).is_err());
    }

    #[test]
    fn answer_loss_mock() {
        let b = MockBackend::default();
        let q = Query::new("q", "who wrote glory of love", TaskKind::SpanQa).unwrap();
        let t = PromptTemplate::builtin("nq-answer-best").unwrap();
        let a = Answer::span("Billy Hill").unwrap();
        let present = answer_loss(&b, &q, &k("Billy Hill wrote it."), &a, &t).unwrap();
        assert_eq!((present.total_nll, present.token_count), (2.0, 2));
        let absent = answer_loss(&b, &q, &k("Someone wrote it."), &a, &t).unwrap();
        assert_eq!(absent.total_nll, 4.0);
        assert!(Answer::span("  ").is_err());
        let blank = Answer { text: String::new(), kind: AnswerKind::Span };
        assert!(matches!(answer_loss(&b, &q, &k("x"), &blank, &t), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn negatives_exclude_evaluated_knowledge() {
        let pool: Vec<_> = ["a one", "b two", "c three", "d four"].iter().map(|t| k(t)).collect();
        let target = pool[1].clone();
        let neg = sample_negatives(&pool, &target, 3, 7).unwrap();
        assert_eq!(neg.negatives.len(), 3);
        assert!(neg.negatives.iter().all(|n| n.text() != target.text()));
        assert_eq!(neg, sample_negatives(&pool, &target, 3, 7).unwrap());
        let err = sample_negatives(&pool, &target, 4, 7).unwrap_err();
        assert!(alloc::format!("{err}").contains("u = 4"));
    }

    #[test]
    fn span_validity_mock() {
        let b = MockBackend::default();
        let q = Query::new("q", "which country hosted the games", TaskKind::SpanQa).unwrap();
        let a = Answer::span("China").unwrap();
        assert_eq!(validity_span(&b, &q, &a, &[a.clone()]).unwrap(), 1.0);
        let prc = Answer::span("PRC").unwrap();
        let v = validity_span(&b, &q, &prc, &[a.clone()]).unwrap();
        assert!(v > 0.0 && v < 1.0);
        let bare = Query::new("q", "zzz", TaskKind::SpanQa).unwrap();
        assert_eq!(validity_span(&b, &bare, &Answer::span("apple").unwrap(), &[Answer::span("pear").unwrap()]).unwrap(), 1.0 / 3.0);
        assert!(validity_span(&b, &q, &a, &[]).is_err());
    }

    #[test]
    fn open_validity_mock() {
        let b = MockBackend::new(vec![Passage { source_id: "1".to_string(), text: "Cats purr when content.".to_string() }]);
        assert_eq!(validity_open(&b, &Answer::open("Cats purr when content.").unwrap(), 3).unwrap(), 1.0);
        assert_eq!(validity_open(&MockBackend::default(), &Answer::open("Cats purr.").unwrap(), 3).unwrap(), 0.0);
    }
}
