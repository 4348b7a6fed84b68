//! Domain types. Everything here is immutable once constructed and checks
//! its range invariants at construction.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{canonicalize_whitespace, split_sentences};

/// Tolerance on the sum of a probability simplex.
pub const SIMPLEX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    SpanQa,
    OpenDialogue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    /// For dialogue this is the last partner utterance.
    pub text: String,
    pub topic: Option<String>,
    pub history: Vec<String>,
    pub task_kind: TaskKind,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>, task_kind: TaskKind) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invalid("query text is empty"));
        }
        Ok(Query {
            id: id.into(),
            text,
            topic: None,
            history: Vec::new(),
            task_kind,
        })
    }

    pub fn with_topic(mut self, topic: impl Into<String>) -> Self {
        self.topic = Some(topic.into());
        self
    }

    pub fn with_history(mut self, history: Vec<String>) -> Self {
        self.history = history;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Retrieved,
    Generated,
    Reference,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Retrieved => "retrieved",
            Provenance::Generated => "generated",
            Provenance::Reference => "reference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
}

/// A piece of acquired knowledge, stored whitespace-canonicalized together
/// with its sentence segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Knowledge {
    text: String,
    sentences: Vec<Sentence>,
    pub provenance: Provenance,
    pub generator_id: Option<String>,
}

impl Knowledge {
    pub fn new(text: &str, provenance: Provenance) -> Self {
        let text = canonicalize_whitespace(text);
        let sentences = split_sentences(&text);
        Knowledge {
            text,
            sentences,
            provenance,
            generator_id: None,
        }
    }

    pub fn generated(text: &str, generator_id: impl Into<String>) -> Self {
        let mut k = Knowledge::new(text, Provenance::Generated);
        k.generator_id = Some(generator_id.into());
        k
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn sentence_texts(&self) -> Vec<String> {
        self.sentences.iter().map(|s| s.text.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub text: String,
    pub source_id: String,
    pub retrieval_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    Span,
    OpenEnded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub text: String,
    pub kind: AnswerKind,
}

impl Answer {
    pub fn new(text: impl Into<String>, kind: AnswerKind) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invalid("answer text is empty"));
        }
        Ok(Answer { text, kind })
    }

    pub fn span(text: impl Into<String>) -> Result<Self> {
        Answer::new(text, AnswerKind::Span)
    }

    pub fn open(text: impl Into<String>) -> Result<Self> {
        Answer::new(text, AnswerKind::OpenEnded)
    }
}

/// Entail / neutral / contradict probabilities for one premise-hypothesis pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliVector {
    pub entail: f64,
    pub neutral: f64,
    pub contradict: f64,
}

fn check_simplex(parts: [f64; 3], what: &str) -> Result<()> {
    if parts.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
        return Err(Error::range(alloc::format!("{what} component outside [0,1]: {parts:?}")));
    }
    let sum: f64 = parts.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::range(alloc::format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl NliVector {
    /// The vector assigned to a sentence with no evidence at all.
    pub const NON_VERIFIED: NliVector = NliVector {
        entail: 0.0,
        neutral: 1.0,
        contradict: 0.0,
    };

    pub fn new(entail: f64, neutral: f64, contradict: f64) -> Result<Self> {
        check_simplex([entail, neutral, contradict], "nli vector")?;
        Ok(NliVector {
            entail,
            neutral,
            contradict,
        })
    }

    /// Accepts a vector reported by a scoring service. A vector already on
    /// the simplex is kept bit for bit; one off by at most 1e-3 is
    /// renormalized; anything further is rejected.
    pub fn from_backend(entail: f64, neutral: f64, contradict: f64) -> Result<Self> {
        const TOL: f64 = 1e-3;
        if let Ok(v) = NliVector::new(entail, neutral, contradict) {
            return Ok(v);
        }
        let parts = [entail, neutral, contradict];
        if parts.iter().any(|p| !p.is_finite() || *p < -TOL || *p > 1.0 + TOL) {
            return Err(Error::protocol(alloc::format!("nli component out of range: {parts:?}")));
        }
        let clamped = parts.map(|p| p.clamp(0.0, 1.0));
        let sum: f64 = clamped.iter().sum();
        if (sum - 1.0).abs() > TOL || sum == 0.0 {
            return Err(Error::protocol(alloc::format!("nli vector off simplex (sum {sum})")));
        }
        NliVector::new(clamped[0] / sum, clamped[1] / sum, clamped[2] / sum)
            .map_err(|e| Error::protocol(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactualityMode {
    #[default]
    Min,
    Mean,
    Max,
}

impl FactualityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FactualityMode::Min => "min",
            FactualityMode::Mean => "mean",
            FactualityMode::Max => "max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactualityScore {
    pub fact_consistent: f64,
    pub non_verified: f64,
    pub fact_inconsistent: f64,
    pub mode: FactualityMode,
}

/// Factuality label of a single item, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FactLabel {
    Consistent,
    NonVerified,
    Inconsistent,
}

impl FactualityScore {
    pub fn new(v: NliVector, mode: FactualityMode) -> Result<Self> {
        check_simplex([v.entail, v.neutral, v.contradict], "factuality score")?;
        Ok(FactualityScore {
            fact_consistent: v.entail,
            non_verified: v.neutral,
            fact_inconsistent: v.contradict,
            mode,
        })
    }

    /// Argmax component; ties go to the more severe label.
    pub fn label(&self) -> FactLabel {
        let mut best = (FactLabel::Consistent, self.fact_consistent);
        for (label, v) in [
            (FactLabel::NonVerified, self.non_verified),
            (FactLabel::Inconsistent, self.fact_inconsistent),
        ] {
            if v >= best.1 {
                best = (label, v);
            }
        }
        best.0
    }
}

/// Per-item scores. A metric that was not requested (or not computable for
/// the item) is `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fact: Option<FactualityScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coh_sent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coh_para: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub help: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity: Option<f64>,
}

impl ScoreCard {
    pub fn validate(&self) -> Result<()> {
        fn closed(name: &str, v: Option<f64>) -> Result<()> {
            match v {
                Some(x) if !(0.0..=1.0).contains(&x) => {
                    Err(Error::range(alloc::format!("{name} = {x} outside [0,1]")))
                }
                _ => Ok(()),
            }
        }
        if let Some(f) = &self.fact {
            check_simplex(
                [f.fact_consistent, f.non_verified, f.fact_inconsistent],
                "factuality score",
            )?;
        }
        closed("rel", self.rel)?;
        closed("coh_para", self.coh_para)?;
        closed("help", self.help)?;
        closed("validity", self.validity)?;
        if let Some(x) = self.coh_sent {
            if !(x > 0.0 && x <= 1.0) {
                return Err(Error::range(alloc::format!("coh_sent = {x} outside (0,1]")));
            }
        }
        if let Some(x) = self.info {
            if !(0.0..1.0).contains(&x) {
                return Err(Error::range(alloc::format!("info = {x} outside [0,1)")));
            }
        }
        Ok(())
    }
}

/// Ordinal human judgement in {0, 1, 2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Rating(u8);

impl Rating {
    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Rating {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        if v <= 2 {
            Ok(Rating(v))
        } else {
            Err(Error::range(alloc::format!("human rating {v} not in {{0,1,2}}")))
        }
    }
}

impl From<Rating> for u8 {
    fn from(r: Rating) -> u8 {
        r.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanRatings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factuality: Option<Rating>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance: Option<Rating>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence: Option<Rating>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub informativeness: Option<Rating>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub helpfulness: Option<Rating>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity: Option<Rating>,
}

impl HumanRatings {
    pub fn get(&self, dimension: &str) -> Option<Rating> {
        match dimension {
            "factuality" => self.factuality,
            "relevance" => self.relevance,
            "coherence" => self.coherence,
            "informativeness" => self.informativeness,
            "helpfulness" => self.helpfulness,
            "validity" => self.validity,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub query: Query,
    pub knowledge: Knowledge,
    pub answer: Option<Answer>,
    pub reference_answers: Vec<Answer>,
    /// Carried for baseline comparisons only; no metric here reads it.
    pub reference_knowledge: Option<String>,
    pub human_ratings: Option<HumanRatings>,
}

impl EvalItem {
    pub fn new(query: Query, knowledge: Knowledge) -> Self {
        EvalItem {
            query,
            knowledge,
            answer: None,
            reference_answers: Vec::new(),
            reference_knowledge: None,
            human_ratings: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.query.id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nli_vector_rejects_off_simplex() {
        assert!(NliVector::new(0.5, 0.5, 0.1).is_err());
        assert!(NliVector::new(-0.1, 1.0, 0.1).is_err());
        assert!(NliVector::new(0.2, 0.3, 0.5).is_ok());
    }

    #[test]
    fn backend_vectors_are_renormalized_within_tolerance() {
        let v = NliVector::from_backend(0.5004, 0.3, 0.2).unwrap();
        assert!((v.entail + v.neutral + v.contradict - 1.0).abs() < 1e-12);
        assert!(matches!(
            NliVector::from_backend(0.6, 0.3, 0.2),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn backend_vectors_on_simplex_pass_unchanged() {
        let (e, n, c) = (0.07692307692307691, 0.8307692307692306, 0.09230769230769231);
        let v = NliVector::from_backend(e, n, c).unwrap();
        assert_eq!((v.entail, v.neutral, v.contradict), (e, n, c));
        assert_eq!(NliVector::from_backend(v.entail, v.neutral, v.contradict).unwrap(), v);
    }

    #[test]
    fn label_ties_go_to_more_severe() {
        let f = |e, n, c| FactualityScore::new(NliVector::new(e, n, c).unwrap(), FactualityMode::Min).unwrap().label();
        assert_eq!(f(0.5, 0.5, 0.0), FactLabel::NonVerified);
        assert_eq!(f(0.4, 0.2, 0.4), FactLabel::Inconsistent);
        assert_eq!(f(0.8, 0.1, 0.1), FactLabel::Consistent);
    }

    #[test]
    fn ratings_outside_ordinal_scale_rejected() {
        assert!(Rating::try_from(3).is_err());
        assert_eq!(Rating::try_from(2).unwrap().value(), 2);
    }

    #[test]
    fn scorecard_ranges() {
        let mut c = ScoreCard {
            coh_sent: Some(1.0),
            info: Some(0.0),
            ..Default::default()
        };
        assert!(c.validate().is_ok());
        c.coh_sent = Some(0.0);
        assert!(c.validate().is_err());
        c.coh_sent = None;
        c.info = Some(1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn knowledge_sentences_follow_text() {
        let k = Knowledge::new("One  two.\nThree four.", Provenance::Retrieved);
        assert_eq!(k.text(), "One two. Three four.");
        assert_eq!(k.sentences().len(), 2);
    }
}
