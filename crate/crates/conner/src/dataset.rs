//! JSON-lines dataset, annotation and candidate files.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use conner_core::types::HumanRatings;
use conner_core::{Answer, AnswerKind, EvalItem, Knowledge, Provenance, Query, ScoreCard, TaskKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    NqJsonl,
    WowJsonl,
}

impl DatasetFormat {
    pub fn task_kind(self) -> TaskKind {
        match self {
            DatasetFormat::NqJsonl => TaskKind::SpanQa,
            DatasetFormat::WowJsonl => TaskKind::OpenDialogue,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnowledgeRecord {
    pub text: String,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_id: Option<String>,
}

/// One dataset line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_kind: Option<TaskKind>,
    pub knowledge: KnowledgeRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_answers: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_knowledge: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_ratings: Option<HumanRatings>,
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            line: n + 1,
            msg: e.to_string(),
        })?;
        out.push((n + 1, rec));
    }
    Ok(out)
}

fn record_to_item(rec: DatasetRecord, format: DatasetFormat) -> std::result::Result<EvalItem, String> {
    let kind = format.task_kind();
    if let Some(k) = rec.task_kind {
        if k != kind {
            return Err(format!("task_kind {k:?} does not match dataset format {format:?}"));
        }
    }
    let answer_kind = match kind {
        TaskKind::SpanQa => AnswerKind::Span,
        TaskKind::OpenDialogue => AnswerKind::OpenEnded,
    };
    let mut query = Query::new(rec.id, rec.query, kind).map_err(|e| format!("field `query`: {e}"))?;
    query.topic = rec.topic;
    query.history = rec.history.unwrap_or_default();
    let mut knowledge = Knowledge::new(&rec.knowledge.text, rec.knowledge.provenance);
    knowledge.generator_id = rec.knowledge.generator_id;
    if knowledge.sentences().is_empty() {
        return Err("field `knowledge.text` is empty".into());
    }
    let mut item = EvalItem::new(query, knowledge);
    item.answer = rec
        .answer
        .map(|a| Answer::new(a, answer_kind))
        .transpose()
        .map_err(|e| format!("field `answer`: {e}"))?;
    item.reference_answers = rec
        .reference_answers
        .unwrap_or_default()
        .into_iter()
        .map(|a| Answer::new(a, answer_kind))
        .collect::<conner_core::Result<_>>()
        .map_err(|e| format!("field `reference_answers`: {e}"))?;
    item.reference_knowledge = rec.reference_knowledge;
    item.human_ratings = rec.human_ratings;
    Ok(item)
}

/// Parses a dataset file into items, in file order.
pub fn parse_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<EvalItem>> {
    let mut ids = HashSet::new();
    let mut items = Vec::new();
    for (line, rec) in read_lines::<DatasetRecord>(path)? {
        let schema = |msg: String| Error::Schema {
            path: path.to_path_buf(),
            line,
            msg,
        };
        if !ids.insert(rec.id.clone()) {
            return Err(schema(format!("duplicate id {}", rec.id)));
        }
        items.push(record_to_item(rec, format).map_err(schema)?);
    }
    Ok(items)
}

#[derive(Debug, Clone, Deserialize)]
struct AnnotationRecord {
    id: String,
    human_ratings: HumanRatings,
}

/// Reads `{"id", "human_ratings"}` lines (dataset files qualify).
pub fn parse_annotations(path: &Path) -> Result<BTreeMap<String, HumanRatings>> {
    let mut out = BTreeMap::new();
    for (line, rec) in read_lines::<AnnotationRecord>(path)? {
        if out.insert(rec.id.clone(), rec.human_ratings).is_some() {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                line,
                msg: format!("duplicate id {}", rec.id),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceUse {
    pub sentence: usize,
    pub source_ids: Vec<String>,
}

/// One line of per-item output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutput {
    pub id: String,
    pub scores: ScoreCard,
    pub evidence_used: Vec<EvidenceUse>,
    pub errors: Vec<String>,
}

pub fn parse_scores(path: &Path) -> Result<BTreeMap<String, ItemOutput>> {
    let mut out = BTreeMap::new();
    for (line, rec) in read_lines::<ItemOutput>(path)? {
        if out.insert(rec.id.clone(), rec).is_some() {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                line,
                msg: "duplicate id".into(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Deserialize)]
pub struct CandidateRecord {
    pub query_id: String,
    #[serde(default)]
    pub candidate_id: Option<String>,
    pub text: String,
    #[serde(default)]
    pub generator_id: Option<String>,
}

/// Candidates grouped by query id, keeping file order within each group.
pub fn parse_candidates(path: &Path) -> Result<BTreeMap<String, Vec<CandidateRecord>>> {
    let mut out: BTreeMap<String, Vec<CandidateRecord>> = BTreeMap::new();
    for (line, rec) in read_lines::<CandidateRecord>(path)? {
        if rec.text.trim().is_empty() {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                line,
                msg: "field `text` is empty".into(),
            });
        }
        out.entry(rec.query_id.clone()).or_default().push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const NQ: &str = r#"{"id": "a", "query": "who wrote glory of love", "knowledge": {"text": "Billy Hill wrote it.", "provenance": "generated", "generator_id": "llama"}, "answer": "Billy Hill", "reference_answers": ["Billy Hill"]}
{"id": "b", "topic": "Paris", "query": "capital of france", "task_kind": "span_qa", "knowledge": {"text": "Paris is the capital.", "provenance": "retrieved"}}
"#;

    #[test]
    fn empty_file_is_empty_dataset() {
        assert!(parse_dataset(file("").path(), DatasetFormat::NqJsonl).unwrap().is_empty());
    }

    #[test]
    fn nq_records() {
        let items = parse_dataset(file(NQ).path(), DatasetFormat::NqJsonl).unwrap();
        assert_eq!(items.len(), 2);
        assert!(items.iter().all(|i| i.query.task_kind == TaskKind::SpanQa));
        assert_eq!(items[0].knowledge.generator_id.as_deref(), Some("llama"));
        assert_eq!(items[0].answer.as_ref().unwrap().kind, AnswerKind::Span);
        assert_eq!(items[1].query.topic.as_deref(), Some("Paris"));
    }

    #[test]
    fn wow_records_keep_history() {
        let wow = r#"{"id": "d1", "topic": "Cats", "query": "Do cats purr?", "history": ["I love cats.", "Me too."], "knowledge": {"text": "Cats purr.", "provenance": "reference"}, "answer": "Yes, they purr when content."}"#;
        let items = parse_dataset(file(wow).path(), DatasetFormat::WowJsonl).unwrap();
        assert_eq!(items[0].query.task_kind, TaskKind::OpenDialogue);
        assert_eq!(items[0].query.history.len(), 2);
        assert_eq!(items[0].answer.as_ref().unwrap().kind, AnswerKind::OpenEnded);
    }

    #[test]
    fn missing_query_names_line_and_field() {
        let bad = format!("{}\n{}\n", NQ.lines().next().unwrap(), r#"{"id": "z", "knowledge": {"text": "x.", "provenance": "generated"}}"#);
        let err = parse_dataset(file(&bad).path(), DatasetFormat::NqJsonl).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("query"), "{msg}");
        assert_eq!(err.exit_code(), 5);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let line = NQ.lines().next().unwrap();
        let err = parse_dataset(file(&format!("{line}\n{line}\n")).path(), DatasetFormat::NqJsonl).unwrap_err();
        assert!(err.to_string().contains("duplicate id a"));
    }

    #[test]
    fn kind_mismatch_rejected() {
        let line = NQ.lines().nth(1).unwrap();
        assert!(parse_dataset(file(line).path(), DatasetFormat::WowJsonl).is_err());
    }

    #[test]
    fn rating_out_of_scale_rejected() {
        let f = file(r#"{"id": "a", "human_ratings": {"factuality": 3}}"#);
        let err = parse_annotations(f.path()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let ok = file(r#"{"id": "a", "human_ratings": {"factuality": 2}}"#);
        assert_eq!(parse_annotations(ok.path()).unwrap()["a"].factuality.unwrap().value(), 2);
    }
}
