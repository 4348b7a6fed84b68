//! Knowledge quality as a weighted sum of intrinsic scores, and the two
//! selection strategies built on it: picking few-shot demonstrations and
//! picking the best of several generated candidates.

use alloc::string::String;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::intrinsic::{self, FactualityConfig};
use crate::template::{PromptTemplate, Slots};
use crate::types::{Knowledge, Query};

pub const DEFAULT_POOL_SAMPLE: usize = 30;
pub const DEFAULT_DEMONSTRATIONS: usize = 8;

/// Weights over (factuality, relevance, paragraph coherence, informativeness).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma {
    pub w_fact: f64,
    pub w_rel: f64,
    pub w_coh: f64,
    pub w_info: f64,
}

impl Default for Gamma {
    fn default() -> Self {
        Gamma {
            w_fact: 0.25,
            w_rel: 0.25,
            w_coh: 0.25,
            w_info: 0.25,
        }
    }
}

impl Gamma {
    pub fn new(w_fact: f64, w_rel: f64, w_coh: f64, w_info: f64) -> Result<Self> {
        let w = [w_fact, w_rel, w_coh, w_info];
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("gamma weights must be finite"));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(Error::invalid("gamma needs at least one non-zero weight"));
        }
        Ok(Gamma {
            w_fact,
            w_rel,
            w_coh,
            w_info,
        })
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w_fact, self.w_rel, self.w_coh, self.w_info]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Gamma::new(self.w_fact * c, self.w_rel * c, self.w_coh * c, self.w_info * c)
    }

    pub fn apply(&self, s: &IntrinsicScores) -> f64 {
        self.w_fact * s.fact + self.w_rel * s.rel + self.w_coh * s.coh_para + self.w_info * s.info
    }
}

/// The four scalar intrinsic scores entering the quality score; `fact` is the
/// fact-consistent component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntrinsicScores {
    pub fact: f64,
    pub rel: f64,
    pub coh_para: f64,
    pub info: f64,
}

/// What the intrinsic metrics need beyond the backend.
#[derive(Debug, Clone)]
pub struct ScoringSetup {
    pub factuality: FactualityConfig,
    /// Renders the query for informativeness.
    pub zero_shot: PromptTemplate,
}

impl Default for ScoringSetup {
    fn default() -> Self {
        ScoringSetup {
            factuality: FactualityConfig::default(),
            zero_shot: PromptTemplate::builtin("nq-zeroshot-best").expect("built-in"),
        }
    }
}

pub fn intrinsic_scores<B: Backend + ?Sized>(
    backend: &B,
    q: &Query,
    k: &Knowledge,
    setup: &ScoringSetup,
) -> Result<IntrinsicScores> {
    let evidence = intrinsic::gather_evidence(backend, k, &setup.factuality)?;
    let fact = intrinsic::factuality(backend, k, &evidence, &setup.factuality)?;
    Ok(IntrinsicScores {
        fact: fact.fact_consistent,
        rel: intrinsic::relevance(backend, q, k)?,
        coh_para: intrinsic::coherence_paragraph(backend, k)?,
        info: intrinsic::informativeness(backend, q, k, &setup.zero_shot)?,
    })
}

pub fn q_know<B: Backend + ?Sized>(
    backend: &B,
    q: &Query,
    k: &Knowledge,
    gamma: &Gamma,
    setup: &ScoringSetup,
) -> Result<f64> {
    Ok(gamma.apply(&intrinsic_scores(backend, q, k, setup)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub query: Query,
    pub knowledge: Knowledge,
    pub q_know: f64,
}

/// Seeded uniform sample of `m` pool indices, in draw order.
pub fn sample_pool(pool_len: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, pool_len, m).into_vec()
}

/// Positions of the `n` highest scores, descending; equal scores keep input order.
pub fn top_n(scores: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.truncate(n);
    order
}

/// Samples `m` items from the pool, scores each with `score`, and keeps the
/// best `n` in descending order.
pub fn select_demonstrations_with<F>(
    pool: &[(Query, Knowledge)],
    m: usize,
    n: usize,
    seed: u64,
    mut score: F,
) -> Result<Vec<Demonstration>>
where
    F: FnMut(&Query, &Knowledge) -> Result<f64>,
{
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    if n > m {
        return Err(Error::invalid(alloc::format!("n = {n} exceeds m = {m}")));
    }
    if m > pool.len() {
        return Err(Error::invalid(alloc::format!(
            "m = {m} exceeds pool size {}",
            pool.len()
        )));
    }
    let sampled = sample_pool(pool.len(), m, seed);
    let scores = sampled
        .iter()
        .map(|&i| score(&pool[i].0, &pool[i].1))
        .collect::<Result<Vec<_>>>()?;
    Ok(top_n(&scores, n)
        .into_iter()
        .map(|j| {
            let (q, k) = &pool[sampled[j]];
            Demonstration {
                query: q.clone(),
                knowledge: k.clone(),
                q_know: scores[j],
            }
        })
        .collect())
}

pub fn select_demonstrations<B: Backend + ?Sized>(
    backend: &B,
    pool: &[(Query, Knowledge)],
    m: usize,
    n: usize,
    gamma: &Gamma,
    seed: u64,
    setup: &ScoringSetup,
) -> Result<Vec<Demonstration>> {
    select_demonstrations_with(pool, m, n, seed, |q, k| q_know(backend, q, k, gamma, setup))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeSelection {
    pub index: usize,
    /// One score per candidate, in input order.
    pub scores: Vec<f64>,
}

/// Index of the highest score; ties keep the lowest index.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn select_from_scores(candidates: &[IntrinsicScores], gamma: &Gamma) -> Result<KnowledgeSelection> {
    let scores: Vec<f64> = candidates.iter().map(|s| gamma.apply(s)).collect();
    let index = argmax_first(&scores).ok_or_else(|| Error::invalid("no candidates"))?;
    Ok(KnowledgeSelection { index, scores })
}

pub fn select_knowledge<B: Backend + ?Sized>(
    backend: &B,
    q: &Query,
    candidates: &[Knowledge],
    gamma: &Gamma,
    setup: &ScoringSetup,
) -> Result<KnowledgeSelection> {
    if candidates.is_empty() {
        return Err(Error::invalid("select_knowledge needs at least one candidate"));
    }
    let intr = candidates
        .iter()
        .map(|k| intrinsic_scores(backend, q, k, setup))
        .collect::<Result<Vec<_>>>()?;
    select_from_scores(&intr, gamma)
}

/// Few-shot prompt: each demonstration rendered with its knowledge, then the
/// test query with the knowledge slot left open, joined by the separator.
pub fn render_prompt(demos: &[Demonstration], test: &Query, template: &PromptTemplate) -> Result<String> {
    let mut blocks = Vec::with_capacity(demos.len() + 1);
    for d in demos {
        let slots = Slots::for_query(&d.query).knowledge(d.knowledge.text());
        blocks.push(template.render(&slots)?);
    }
    blocks.push(template.render_open(test, None)?);
    Ok(blocks.join(&template.separator))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;
    use crate::types::{Provenance, TaskKind};
    use alloc::vec;

    fn item(id: &str, q: &str, k: &str) -> (Query, Knowledge) {
        (
            Query::new(id, q, TaskKind::SpanQa).unwrap(),
            Knowledge::new(k, Provenance::Generated),
        )
    }

    #[test]
    fn gamma_rules() {
        assert!(Gamma::new(0.0, 0.0, 0.0, 0.0).is_err());
        let s = IntrinsicScores { fact: 0.7, rel: 0.1, coh_para: 0.2, info: 0.3 };
        assert_eq!(Gamma::new(1.0, 0.0, 0.0, 0.0).unwrap().apply(&s), 0.7);
        let s = IntrinsicScores { fact: 0.8, rel: 0.6, coh_para: 0.9, info: 0.3 };
        assert!((Gamma::default().apply(&s) - 0.65).abs() < 1e-12);
    }

    #[test]
    fn top_n_by_score() {
        assert_eq!(top_n(&[0.9, 0.1, 0.5, 0.7], 2), vec![0, 3]);
        assert_eq!(top_n(&[0.5, 0.5, 0.6], 3), vec![2, 0, 1]);
    }

    #[test]
    fn demonstrations_m_equals_n_keeps_everything() {
        let pool: Vec<_> = (0..4).map(|i| item(&alloc::format!("{i}"), "q", &alloc::format!("k{i}"))).collect();
        let scores = [0.9, 0.1, 0.5, 0.7];
        let picked = select_demonstrations_with(&pool, 4, 4, 3, |q, _| Ok(scores[q.id.parse::<usize>().unwrap()])).unwrap();
        let got: Vec<f64> = picked.iter().map(|d| d.q_know).collect();
        assert_eq!(got, vec![0.9, 0.7, 0.5, 0.1]);
        let picked = select_demonstrations_with(&pool, 4, 2, 3, |q, _| Ok(scores[q.id.parse::<usize>().unwrap()])).unwrap();
        let ids: Vec<&str> = picked.iter().map(|d| d.query.id.as_str()).collect();
        assert_eq!(ids, ["0", "3"]);
    }

    #[test]
    fn demonstration_bounds() {
        let pool = vec![item("a", "q", "k")];
        assert!(select_demonstrations_with(&pool, 1, 2, 0, |_, _| Ok(0.0)).is_err());
        assert!(select_demonstrations_with(&pool, 2, 1, 0, |_, _| Ok(0.0)).is_err());
    }

    #[test]
    fn knowledge_selection_ties_and_singletons() {
        let g = Gamma::default();
        let s = IntrinsicScores { fact: 0.5, rel: 0.5, coh_para: 0.5, info: 0.5 };
        assert_eq!(select_from_scores(&[s], &g).unwrap().index, 0);
        assert_eq!(select_from_scores(&[s, s], &g).unwrap().index, 0);
        assert!(select_from_scores(&[], &g).is_err());
        let b = MockBackend::default();
        let q = Query::new("q", "x", TaskKind::SpanQa).unwrap();
        assert!(select_knowledge(&b, &q, &[], &g, &ScoringSetup::default()).is_err());
    }

    #[test]
    fn prompt_rendering() {
        let t = PromptTemplate::builtin("nq-fewshot-best").unwrap();
        let test = Query::new("t", "who sang it", TaskKind::SpanQa).unwrap();
        assert_eq!(render_prompt(&[], &test, &t).unwrap(), "Query: who sang it\nRelated Wikipedia knowledge:");
        let (q, k) = item("d", "who wrote it", "Billy Hill wrote it.");
        let demo = Demonstration { query: q.with_topic("Song"), knowledge: k, q_know: 0.5 };
        assert_eq!(
            render_prompt(&[demo], &test.with_topic("Song"), &t).unwrap(),
            "Topic: Song\nQuery: who wrote it\nRelated Wikipedia knowledge: Billy Hill wrote it.\nTopic: Song\nQuery: who sang it\nRelated Wikipedia knowledge:"
        );
    }
}
