//! Prompt templates with `{placeholder}` slots.
//!
//! A line that mentions `{topic}` is dropped when the query has no topic.
//! Any other slot the pattern uses must be supplied.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::types::Query;

pub const PLACEHOLDERS: [&str; 6] = ["topic", "query", "knowledge", "utterance", "answer", "response"];

const BUILTINS: &[(&str, &str)] = &[
    (
        "nq-zeroshot-best",
        "Topic: {topic}\nGenerate a Wikipedia to answer the given question.\nQuestion: {query}\nWikipedia:",
    ),
    (
        "nq-fewshot-best",
        "Topic: {topic}\nQuery: {query}\nRelated Wikipedia knowledge: {knowledge}",
    ),
    (
        "wow-fewshot-best",
        "Topic: {topic}\nQuery: {utterance}\nRelated Wikipedia knowledge: {knowledge}",
    ),
    (
        "nq-answer-best",
        "Topic: {topic}\nPassage: {knowledge}\nQuery: {query}\nAnswer: {answer}",
    ),
    (
        "wow-answer-best",
        "Topic: {topic}\nPassage: {knowledge}\nSpeaker 1: {utterance}\nSpeaker 2: {response}",
    ),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub pattern: String,
    /// Joins rendered examples in a few-shot prompt.
    pub separator: String,
}

/// Values for each placeholder. `None` means not supplied.
#[derive(Debug, Clone, Copy, Default)]
pub struct Slots<'a> {
    pub topic: Option<&'a str>,
    pub query: Option<&'a str>,
    pub knowledge: Option<&'a str>,
    pub utterance: Option<&'a str>,
    pub answer: Option<&'a str>,
    pub response: Option<&'a str>,
}

impl<'a> Slots<'a> {
    /// Topic, query and utterance taken from `q`.
    pub fn for_query(q: &'a Query) -> Self {
        Slots {
            topic: q.topic.as_deref(),
            query: Some(&q.text),
            utterance: Some(&q.text),
            ..Default::default()
        }
    }

    pub fn knowledge(mut self, k: &'a str) -> Self {
        self.knowledge = Some(k);
        self
    }

    /// Fills both `{answer}` and `{response}`.
    pub fn answer(mut self, a: &'a str) -> Self {
        self.answer = Some(a);
        self.response = Some(a);
        self
    }

    fn get(&self, name: &str) -> Option<&'a str> {
        match name {
            "topic" => self.topic,
            "query" => self.query,
            "knowledge" => self.knowledge,
            "utterance" => self.utterance,
            "answer" => self.answer,
            "response" => self.response,
            _ => None,
        }
    }
}

enum Piece<'p> {
    Literal(&'p str),
    Slot(&'p str),
}

fn pieces(line: &str) -> Result<Vec<Piece<'_>>> {
    let mut out = Vec::new();
    let mut rest = line;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            out.push(Piece::Literal(&rest[..open]));
        }
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| Error::invalid(alloc::format!("unterminated placeholder in {line:?}")))?;
        let name = &after[..close];
        if !PLACEHOLDERS.contains(&name) {
            return Err(Error::invalid(alloc::format!("unknown placeholder {{{name}}}")));
        }
        out.push(Piece::Slot(name));
        rest = &after[close + 1..];
    }
    if !rest.is_empty() {
        out.push(Piece::Literal(rest));
    }
    Ok(out)
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, pattern: impl Into<String>) -> Result<Self> {
        let pattern = pattern.into();
        for line in pattern.split('\n') {
            pieces(line)?;
        }
        Ok(PromptTemplate {
            name: name.into(),
            pattern,
            separator: "\n".to_string(),
        })
    }

    pub fn with_separator(mut self, separator: impl Into<String>) -> Self {
        self.separator = separator.into();
        self
    }

    pub fn builtin(name: &str) -> Option<Self> {
        BUILTINS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(n, p)| PromptTemplate::new(*n, *p).expect("built-in templates parse"))
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTINS.iter().map(|(n, _)| *n)
    }

    pub fn uses(&self, placeholder: &str) -> bool {
        self.pattern.contains(&alloc::format!("{{{placeholder}}}"))
    }

    pub fn render(&self, slots: &Slots<'_>) -> Result<String> {
        let mut lines = Vec::new();
        for line in self.pattern.split('\n') {
            let ps = pieces(line)?;
            if slots.topic.is_none() && ps.iter().any(|p| matches!(p, Piece::Slot("topic"))) {
                continue;
            }
            let mut out = String::new();
            for p in ps {
                match p {
                    Piece::Literal(s) => out.push_str(s),
                    Piece::Slot(name) => out.push_str(slots.get(name).ok_or_else(|| {
                        Error::invalid(alloc::format!(
                            "template {} needs a value for {{{name}}}",
                            self.name
                        ))
                    })?),
                }
            }
            lines.push(out);
        }
        Ok(lines.join("\n"))
    }

    /// Renders `q` with the generation slot left open: knowledge, answer and
    /// response default to empty and trailing whitespace is trimmed, so the
    /// text ends right after the label the model continues from.
    pub fn render_open(&self, q: &Query, knowledge: Option<&str>) -> Result<String> {
        let slots = Slots::for_query(q).knowledge(knowledge.unwrap_or("")).answer("");
        Ok(self.render(&slots)?.trim_end().to_string())
    }
}
