//! Markdown rendering of corpus reports and correlation tables.

use conner_core::stats::{CorrelationResult, ReportRow};
use serde::{Deserialize, Serialize};

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.2}%"))
}

fn unit(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

pub const CORPUS_HEADER: &str = "| Model | Setting | Fact-cons. | Non-verif. | Fact-incon. | Relevance | Coh-sent. | Coh-para. | Inform. | Helpful. | Validity |";

pub fn corpus_row(r: &ReportRow) -> String {
    format!(
        "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
        r.model,
        r.setting,
        pct(r.fact_consistent_pct),
        pct(r.non_verified_pct),
        pct(r.fact_inconsistent_pct),
        unit(r.relevance_mean),
        unit(r.coh_sent_mean),
        unit(r.coh_para_mean),
        unit(r.info_mean),
        unit(r.helpfulness_mean),
        pct(r.validity_pct),
    )
}

pub fn extrinsic_row(r: &ReportRow) -> String {
    format!(
        "| {} | {} | {} |",
        r.model,
        unit(r.helpfulness_mean),
        pct(r.validity_pct)
    )
}

pub fn corpus_markdown(rows: &[ReportRow]) -> String {
    let mut out = String::from("# Knowledge evaluation\n\n");
    out.push_str(CORPUS_HEADER);
    out.push('\n');
    out.push_str("|---|---|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        out.push_str(&corpus_row(r));
        out.push('\n');
    }
    out.push_str("\n## Extrinsic\n\n| Model | Helpfulness | Validity |\n|---|---|---|\n");
    for r in rows {
        out.push_str(&extrinsic_row(r));
        out.push('\n');
    }
    out
}

/// One correlation row as written to `correlation.json`. `d` and
/// `p_value` are absent when the statistic is undefined for the sample,
/// with the reason in `note`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub metric: String,
    pub dimension: String,
    pub n: usize,
    pub d: Option<f64>,
    pub p_value: Option<f64>,
    pub n_permutations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CorrelationRow {
    pub fn from_result(metric: &str, dimension: &str, r: &CorrelationResult) -> Self {
        CorrelationRow {
            metric: metric.into(),
            dimension: dimension.into(),
            n: r.n,
            d: Some(r.d),
            p_value: Some(r.p_value),
            n_permutations: r.n_permutations,
            note: None,
        }
    }
}

/// `0.24†` style cell; the dagger marks p < 0.05.
pub fn d_cell(d: Option<f64>, p: Option<f64>) -> String {
    match d {
        None => "-".into(),
        Some(d) => {
            let dagger = if p.is_some_and(|p| p < 0.05) { "†" } else { "" };
            format!("{d:.2}{dagger}")
        }
    }
}

pub fn correlation_markdown(rows: &[CorrelationRow]) -> String {
    let mut out = String::from(
        "# Somers' D against human ratings\n\n| Metric | Human dimension | D | p | n |\n|---|---|---|---|---|\n",
    );
    for r in rows {
        let p = r.p_value.map_or_else(|| "-".into(), |p| format!("{p:.4}"));
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            r.metric,
            r.dimension,
            d_cell(r.d, r.p_value),
            p,
            r.n
        ));
    }
    out.push_str("\n† p < 0.05\n");
    for r in rows.iter().filter(|r| r.note.is_some()) {
        out.push_str(&format!("\n{}: {}\n", r.metric, r.note.as_deref().unwrap_or_default()));
    }
    out
}
