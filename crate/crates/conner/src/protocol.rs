//! Wire protocol v1: JSON bodies over HTTP, one route per endpoint plus
//! index-aligned batch routes and a health probe.

use conner_core::{Endpoint, Evidence, NliVector, TokenLogprobs};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTO_HEADER: &str = "x-conner-proto";
pub const PROTO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliRequest {
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliResponse {
    pub entail: f64,
    pub neutral: f64,
    pub contradict: f64,
}

impl From<NliVector> for NliResponse {
    fn from(v: NliVector) -> Self {
        NliResponse {
            entail: v.entail,
            neutral: v.neutral,
            contradict: v.contradict,
        }
    }
}

impl NliResponse {
    pub fn into_vector(self) -> conner_core::Result<NliVector> {
        NliVector::from_backend(self.entail, self.neutral, self.contradict)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRequest {
    pub query: String,
    pub passage: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankResponse {
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogprobRequest {
    pub context: String,
    pub continuation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogprobResponse {
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
}

impl From<TokenLogprobs> for LogprobResponse {
    fn from(t: TokenLogprobs) -> Self {
        LogprobResponse {
            tokens: t.tokens,
            logprobs: t.logprobs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveRequest {
    pub query: String,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEvidence {
    pub text: String,
    pub source_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveResponse {
    pub evidence: Vec<WireEvidence>,
}

impl From<Vec<Evidence>> for RetrieveResponse {
    fn from(es: Vec<Evidence>) -> Self {
        RetrieveResponse {
            evidence: es
                .into_iter()
                .map(|e| WireEvidence {
                    text: e.text,
                    source_id: e.source_id,
                    score: e.retrieval_score,
                })
                .collect(),
        }
    }
}

impl RetrieveResponse {
    pub fn into_evidence(self) -> Vec<Evidence> {
        self.evidence
            .into_iter()
            .map(|e| Evidence {
                text: e.text,
                source_id: e.source_id,
                retrieval_score: e.score,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscourseRequest {
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscourseResponse {
    pub raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRequest<T> {
    pub requests: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResponse<T> {
    pub responses: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub backend_id: String,
    pub proto: u32,
    pub endpoints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

pub fn endpoint_path(endpoint: Endpoint) -> String {
    format!("/v1/{}", endpoint.as_str())
}

pub fn batch_path(endpoint: Endpoint) -> String {
    format!("/v1/batch/{}", endpoint.as_str())
}

/// Serializes `value` with object keys sorted and every string's whitespace
/// collapsed, so requests that differ only in key order or spacing coincide.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        Value::String(s) => {
            let canon = conner_core::text::canonicalize_whitespace(s);
            out.push_str(&Value::String(canon).to_string());
        }
        other => out.push_str(&other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_form_sorts_keys_and_spaces() {
        let a = json!({"premise": "a  b", "hypothesis": " c\n"});
        let b = json!({"hypothesis": "c", "premise": "a b"});
        assert_eq!(canonical_json(&a), canonical_json(&b));
        assert_eq!(canonical_json(&b), r#"{"hypothesis":"c","premise":"a b"}"#);
        assert_ne!(canonical_json(&json!({"l": 1})), canonical_json(&json!({"l": 2})));
    }
}
