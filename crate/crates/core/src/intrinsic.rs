//! Intrinsic metrics: factuality against retrieved evidence, query
//! relevance, sentence cohesion, paragraph coherence and informativeness.

use alloc::string::String;
use alloc::vec::Vec;

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::template::PromptTemplate;
use crate::types::{Evidence, FactualityMode, FactualityScore, Knowledge, NliVector, Query, Sentence};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactualityConfig {
    /// Evidence passages retrieved per sentence.
    pub l: usize,
    pub mode: FactualityMode,
}

impl Default for FactualityConfig {
    fn default() -> Self {
        FactualityConfig {
            l: 10,
            mode: FactualityMode::Min,
        }
    }
}

impl FactualityConfig {
    pub fn new(l: usize, mode: FactualityMode) -> Result<Self> {
        if l == 0 {
            return Err(Error::invalid("evidence count l must be >= 1"));
        }
        Ok(FactualityConfig { l, mode })
    }
}

/// Evidence lists aligned with a knowledge's sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceSets {
    pub per_sentence: Vec<Vec<Evidence>>,
}

/// Retrieves the top-`l` evidence for every sentence, using the sentence
/// text alone as the retrieval query.
pub fn gather_evidence<B: Backend + ?Sized>(
    backend: &B,
    k: &Knowledge,
    cfg: &FactualityConfig,
) -> Result<EvidenceSets> {
    if k.sentences().is_empty() {
        return Err(Error::invalid("knowledge has no sentences"));
    }
    let per_sentence = k
        .sentences()
        .iter()
        .map(|s| backend.retrieve(&s.text, cfg.l))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvidenceSets { per_sentence })
}

/// Index of the first vector with the highest entail component.
fn argmax_entail(vs: &[NliVector]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in vs.iter().enumerate() {
        if best.is_none_or(|b| v.entail > vs[b].entail) {
            best = Some(i);
        }
    }
    best
}

fn argmin_entail(vs: &[NliVector]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in vs.iter().enumerate() {
        if best.is_none_or(|b| v.entail < vs[b].entail) {
            best = Some(i);
        }
    }
    best
}

/// Keeps the full vector of the best-entailed evidence; (0,1,0) when there is none.
pub fn select_sentence_vector(nli: &[NliVector]) -> NliVector {
    argmax_entail(nli).map_or(NliVector::NON_VERIFIED, |i| nli[i])
}

/// Factuality of one sentence: NLI of every evidence (premise) against the
/// sentence (hypothesis), reduced by [`select_sentence_vector`].
pub fn sentence_factuality<B: Backend + ?Sized>(
    backend: &B,
    sentence: &Sentence,
    evidence: &[Evidence],
) -> Result<NliVector> {
    if evidence.is_empty() {
        return Ok(NliVector::NON_VERIFIED);
    }
    let pairs: Vec<(String, String)> = evidence
        .iter()
        .map(|e| (e.text.clone(), sentence.text.clone()))
        .collect();
    let vs = backend.nli_batch(&pairs)?;
    if vs.len() != pairs.len() {
        return Err(Error::protocol("nli batch length mismatch"));
    }
    Ok(select_sentence_vector(&vs))
}

/// Aggregates per-sentence vectors. `Min` and `Max` keep the whole vector of
/// the sentence with the lowest or highest entailment; `Mean` averages
/// component-wise.
pub fn aggregate_sentences(per_sentence: &[NliVector], mode: FactualityMode) -> Result<FactualityScore> {
    if per_sentence.is_empty() {
        return Err(Error::invalid("factuality needs at least one sentence"));
    }
    let v = match mode {
        FactualityMode::Min => per_sentence[argmin_entail(per_sentence).unwrap_or(0)],
        FactualityMode::Max => per_sentence[argmax_entail(per_sentence).unwrap_or(0)],
        FactualityMode::Mean => {
            let n = per_sentence.len() as f64;
            let (e, ne, c) = per_sentence.iter().fold((0.0, 0.0, 0.0), |acc, v| {
                (acc.0 + v.entail, acc.1 + v.neutral, acc.2 + v.contradict)
            });
            NliVector::new(e / n, ne / n, c / n)?
        }
    };
    FactualityScore::new(v, mode)
}

pub fn factuality<B: Backend + ?Sized>(
    backend: &B,
    k: &Knowledge,
    evidence: &EvidenceSets,
    cfg: &FactualityConfig,
) -> Result<FactualityScore> {
    let sentences = k.sentences();
    if sentences.is_empty() {
        return Err(Error::invalid("knowledge has no sentences"));
    }
    if evidence.per_sentence.len() != sentences.len() {
        return Err(Error::invalid(alloc::format!(
            "{} evidence lists for {} sentences",
            evidence.per_sentence.len(),
            sentences.len()
        )));
    }
    let per_sentence = sentences
        .iter()
        .zip(&evidence.per_sentence)
        .map(|(s, e)| sentence_factuality(backend, s, e))
        .collect::<Result<Vec<_>>>()?;
    aggregate_sentences(&per_sentence, cfg.mode)
}

pub fn relevance<B: Backend + ?Sized>(backend: &B, q: &Query, k: &Knowledge) -> Result<f64> {
    if k.text().is_empty() {
        return Err(Error::invalid("knowledge text is empty"));
    }
    Ok(backend.rank(&q.text, k.text())?.clamp(0.0, 1.0))
}

/// Mean inverse perplexity over sentences. Sentences without tokens are
/// skipped; if none has tokens the score is undefined.
pub fn cohesion_from_logprobs(per_sentence: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for lps in per_sentence.iter().filter(|lps| !lps.is_empty()) {
        let mean = lps.iter().sum::<f64>() / lps.len() as f64;
        // 1 / PPL = exp(mean logprob)
        total += libm::exp(mean);
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::invalid("no sentence has any tokens"));
    }
    Ok(total / counted as f64)
}

pub fn coherence_sentence<B: Backend + ?Sized>(backend: &B, k: &Knowledge) -> Result<f64> {
    if k.sentences().is_empty() {
        return Err(Error::invalid("knowledge has no sentences"));
    }
    let per_sentence = k
        .sentences()
        .iter()
        .map(|s| backend.token_logprobs("", &s.text).map(|t| t.logprobs))
        .collect::<Result<Vec<_>>>()?;
    cohesion_from_logprobs(&per_sentence)
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn coherence_paragraph<B: Backend + ?Sized>(backend: &B, k: &Knowledge) -> Result<f64> {
    if k.sentences().is_empty() {
        return Err(Error::invalid("knowledge has no sentences"));
    }
    let raw = backend.discourse_raw(&k.sentence_texts())?;
    if !raw.is_finite() {
        return Err(Error::protocol("discourse score is not finite"));
    }
    Ok(logistic(raw))
}

/// One minus the geometric-mean token probability.
pub fn informativeness_from_logprobs(logprobs: &[f64]) -> Result<f64> {
    if logprobs.is_empty() {
        return Err(Error::invalid("knowledge has no tokens"));
    }
    let mean = logprobs.iter().sum::<f64>() / logprobs.len() as f64;
    Ok(1.0 - libm::exp(mean))
}

/// The conditioning context for informativeness: the query rendered with the
/// zero-shot knowledge prompt, knowledge slot left open.
pub fn informativeness_context(q: &Query, template: &PromptTemplate) -> Result<String> {
    template.render_open(q, None)
}

pub fn informativeness<B: Backend + ?Sized>(
    backend: &B,
    q: &Query,
    k: &Knowledge,
    template: &PromptTemplate,
) -> Result<f64> {
    if k.text().is_empty() {
        return Err(Error::invalid("knowledge text is empty"));
    }
    let context = informativeness_context(q, template)?;
    let lps = backend.token_logprobs(&context, k.text())?;
    informativeness_from_logprobs(&lps.logprobs)
}
