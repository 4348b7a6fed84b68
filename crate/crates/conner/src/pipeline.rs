//! The run commands: evaluate, correlate, select-prompt and select-knowledge.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use conner_core::extrinsic::{self, NegativeSet};
use conner_core::intrinsic;
use conner_core::selection::{self, Demonstration, Gamma, IntrinsicScores, ScoringSetup};
use conner_core::stats::{self, GroupKey, PairedSample, ReportRow};
use conner_core::types::Rating;
use conner_core::{AnswerKind, Backend, Endpoint, EvalItem, Knowledge, Query, ScoreCard};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::ResponseCache;
use crate::client::HttpBackend;
use crate::config::{required_endpoints, RunConfig, Templates, METRICS};
use crate::dataset::{self, EvidenceUse, ItemOutput};
use crate::error::{Error, Result};
use crate::report::{self, CorrelationRow};
use crate::routing::{CachedBackend, RoutedBackend, SharedBackend};

/// The configured services behind a cache, routed per endpoint.
pub struct Backends {
    pub routed: RoutedBackend,
    services: Vec<Arc<CachedBackend<HttpBackend>>>,
    pub cache: Arc<ResponseCache>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    /// `None` when nothing was looked up.
    pub hit_rate: Option<f64>,
    pub backend_calls: u64,
}

impl Backends {
    /// Opens the cache and health-checks every service. Any failure here is
    /// a startup failure.
    pub fn connect(cfg: &RunConfig, needed: &BTreeSet<Endpoint>) -> Result<Self> {
        let cache = Arc::new(match &cfg.cache_dir {
            Some(dir) => ResponseCache::open(dir).map_err(|e| Error::io(dir, e))?,
            None => ResponseCache::in_memory(),
        });
        let mut routed = RoutedBackend::new();
        let mut services = Vec::new();
        for (bc, roles) in cfg.services() {
            if roles.is_disjoint(needed) {
                continue;
            }
            let http = HttpBackend::new(bc.clone()).map_err(|e| Error::Config(e.to_string()))?;
            let health = http.health().map_err(|e| Error::Unavailable(e.to_string()))?;
            for role in &roles {
                if !health.endpoints.iter().any(|e| e == role.as_str()) {
                    return Err(Error::Unavailable(format!(
                        "{} does not serve {}",
                        bc.base_url,
                        role.as_str()
                    )));
                }
            }
            if health.backend_id != bc.backend_id {
                warn!(
                    "{} reports backend_id {} but is configured as {}",
                    bc.base_url, health.backend_id, bc.backend_id
                );
            }
            let svc = Arc::new(CachedBackend::new(http, bc.backend_id.clone(), cache.clone()));
            let shared: SharedBackend = svc.clone();
            for role in roles {
                routed.insert(role, shared.clone());
            }
            services.push(svc);
        }
        Ok(Backends {
            routed,
            services,
            cache,
        })
    }

    pub fn stats(&self) -> CacheStats {
        let hits: u64 = self.services.iter().map(|s| s.hits()).sum();
        let misses: u64 = self.services.iter().map(|s| s.misses()).sum();
        let total = hits + misses;
        CacheStats {
            hits,
            misses,
            hit_rate: (total > 0).then(|| hits as f64 / total as f64),
            backend_calls: self.services.iter().map(|s| s.inner().calls()).sum(),
        }
    }
}

fn endpoints_for(metrics: &[&str]) -> BTreeSet<Endpoint> {
    metrics.iter().flat_map(|m| required_endpoints(m).iter().copied()).collect()
}

/// Seed for one item's negative sample, derived from the run seed and item id.
pub fn item_seed(seed: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

struct EvalContext<'a> {
    metrics: Vec<&'static str>,
    setup: ScoringSetup,
    templates: Templates,
    negatives: usize,
    seed: u64,
    pool: &'a [Knowledge],
}

fn score_item<B: Backend + ?Sized>(backend: &B, item: &EvalItem, ctx: &EvalContext<'_>) -> ItemOutput {
    let mut scores = ScoreCard::default();
    let mut errors = Vec::new();
    let mut evidence_used = Vec::new();
    let q = &item.query;
    let k = &item.knowledge;
    for &metric in &ctx.metrics {
        let res: conner_core::Result<()> = (|| {
            match metric {
                "fact" => {
                    let ev = intrinsic::gather_evidence(backend, k, &ctx.setup.factuality)?;
                    evidence_used = ev
                        .per_sentence
                        .iter()
                        .enumerate()
                        .map(|(i, es)| EvidenceUse {
                            sentence: i,
                            source_ids: es.iter().map(|e| e.source_id.clone()).collect(),
                        })
                        .collect();
                    scores.fact = Some(intrinsic::factuality(backend, k, &ev, &ctx.setup.factuality)?);
                }
                "rel" => scores.rel = Some(intrinsic::relevance(backend, q, k)?),
                "coh_sent" => scores.coh_sent = Some(intrinsic::coherence_sentence(backend, k)?),
                "coh_para" => scores.coh_para = Some(intrinsic::coherence_paragraph(backend, k)?),
                "info" => scores.info = Some(intrinsic::informativeness(backend, q, k, &ctx.setup.zero_shot)?),
                "help" => {
                    // Scored against the gold answer when there is one.
                    let Some(a) = item.reference_answers.first().or(item.answer.as_ref()) else {
                        return Ok(());
                    };
                    let negs: NegativeSet =
                        extrinsic::sample_negatives(ctx.pool, k, ctx.negatives, item_seed(ctx.seed, item.id()))?;
                    scores.help = Some(extrinsic::helpfulness(backend, q, a, k, &negs, &ctx.templates.answer)?);
                }
                "validity" => {
                    let Some(a) = item.answer.as_ref() else {
                        return Ok(());
                    };
                    scores.validity = match a.kind {
                        AnswerKind::Span if item.reference_answers.is_empty() => None,
                        AnswerKind::Span => Some(extrinsic::validity_span(backend, q, a, &item.reference_answers)?),
                        AnswerKind::OpenEnded => {
                            Some(extrinsic::validity_open(backend, a, ctx.setup.factuality.l)?)
                        }
                    };
                }
                _ => unreachable!("metric names are validated"),
            }
            Ok(())
        })();
        if let Err(e) = res {
            errors.push(format!("{metric}: {e}"));
        }
    }
    if let Err(e) = scores.validate() {
        errors.push(e.to_string());
    }
    ItemOutput {
        id: item.id().to_string(),
        scores,
        evidence_used,
        errors,
    }
}

/// Runs `f` over `items` on up to `workers` threads; results keep input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("poisoned")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("poisoned")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

fn model_label(k: &Knowledge) -> String {
    k.generator_id.clone().unwrap_or_else(|| k.provenance.as_str().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    /// Endpoint role to backend id.
    pub backends: BTreeMap<String, String>,
    pub metrics: Vec<String>,
    pub items: usize,
    pub failed: Vec<String>,
    pub cache: CacheStats,
}

#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub outputs: Vec<ItemOutput>,
    pub report: Vec<ReportRow>,
    pub manifest: Manifest,
    pub output_dir: PathBuf,
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Scores every dataset item and writes `scores.jsonl`, `report.json`,
/// `report.md` and `manifest.json` to the output directory. Item failures
/// are recorded, not raised; check `manifest.failed`.
pub fn run_evaluate(cfg: &RunConfig) -> Result<EvaluateOutcome> {
    let items = dataset::parse_dataset(&cfg.dataset.path, cfg.dataset.format)?;
    let config_hash = cfg.config_hash()?;
    let metrics = cfg.metric_set();
    let backends = Backends::connect(cfg, &endpoints_for(&metrics))?;
    let pool: Vec<Knowledge> = items.iter().map(|i| i.knowledge.clone()).collect();
    let ctx = EvalContext {
        metrics: metrics.clone(),
        setup: cfg.scoring_setup()?,
        templates: cfg.templates()?,
        negatives: cfg.negatives,
        seed: cfg.seed,
        pool: &pool,
    };
    info!("evaluating {} items with {} workers", items.len(), cfg.concurrency);
    let mut outputs = parallel_map(&items, cfg.concurrency, |item| score_item(&backends.routed, item, &ctx));

    let mut keyed: Vec<(GroupKey, &ItemOutput)> = items
        .iter()
        .zip(&outputs)
        .map(|(item, out)| {
            let key = GroupKey {
                model: model_label(&item.knowledge),
                setting: cfg.setting.clone(),
            };
            (key, out)
        })
        .collect();
    keyed.sort_by(|a, b| a.1.id.cmp(&b.1.id));
    let cards: Vec<(GroupKey, ScoreCard)> = keyed.into_iter().map(|(k, o)| (k, o.scores.clone())).collect();
    let report_rows = stats::corpus_report(&cards);
    outputs.sort_by(|a, b| a.id.cmp(&b.id));

    let failed: Vec<String> = outputs.iter().filter(|o| !o.errors.is_empty()).map(|o| o.id.clone()).collect();
    for o in outputs.iter().filter(|o| !o.errors.is_empty()) {
        warn!("item {} failed: {}", o.id, o.errors.join("; "));
    }
    let manifest = Manifest {
        config_hash,
        seed: cfg.seed,
        backends: cfg
            .backends
            .iter()
            .map(|(k, v)| (k.clone(), v.backend_id.clone()))
            .collect(),
        metrics: metrics.iter().map(|m| m.to_string()).collect(),
        items: outputs.len(),
        failed,
        cache: backends.stats(),
    };

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut jsonl = String::new();
    for o in &outputs {
        jsonl.push_str(&serde_json::to_string(o).expect("serializable"));
        jsonl.push('\n');
    }
    write(&dir.join("scores.jsonl"), &jsonl)?;
    write(&dir.join("report.json"), &pretty(&report_rows))?;
    write(&dir.join("report.md"), &report::corpus_markdown(&report_rows))?;
    write(&dir.join("manifest.json"), &pretty(&manifest))?;
    Ok(EvaluateOutcome {
        outputs,
        report: report_rows,
        manifest,
        output_dir: dir.clone(),
    })
}

/// Human rating dimension a metric is validated against.
pub fn human_dimension(metric: &str) -> Option<&'static str> {
    Some(match metric {
        "fact" => "factuality",
        "rel" => "relevance",
        "coh_sent" | "coh_para" => "coherence",
        "info" => "informativeness",
        "help" => "helpfulness",
        "validity" => "validity",
        _ => return None,
    })
}

/// The scalar a metric contributes to correlation; factuality uses its
/// fact-consistent component.
pub fn metric_value(card: &ScoreCard, metric: &str) -> Option<f64> {
    match metric {
        "fact" => card.fact.map(|f| f.fact_consistent),
        "rel" => card.rel,
        "coh_sent" => card.coh_sent,
        "coh_para" => card.coh_para,
        "info" => card.info,
        "help" => card.help,
        "validity" => card.validity,
        _ => None,
    }
}

fn missing_list(ids: &[&String]) -> String {
    ids.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
}

/// Somers' D of each metric against its human dimension. Items lacking
/// either value for a metric are left out of that metric's sample.
pub fn correlate_files(
    scores: &Path,
    human: &Path,
    metrics: &[String],
    n_perm: usize,
    seed: u64,
) -> Result<Vec<CorrelationRow>> {
    if n_perm < stats::MIN_PERMUTATIONS {
        return Err(Error::Config(format!(
            "at least {} permutations are required",
            stats::MIN_PERMUTATIONS
        )));
    }
    for m in metrics {
        if !METRICS.contains(&m.as_str()) {
            return Err(Error::Config(format!("unknown metric `{m}`")));
        }
    }
    let scores = dataset::parse_scores(scores)?;
    let human = dataset::parse_annotations(human)?;
    let no_human: Vec<&String> = scores.keys().filter(|id| !human.contains_key(*id)).collect();
    let no_score: Vec<&String> = human.keys().filter(|id| !scores.contains_key(*id)).collect();
    if !no_human.is_empty() || !no_score.is_empty() {
        return Err(Error::Data(format!(
            "item ids do not align; missing from annotations: [{}]; missing from scores: [{}]",
            missing_list(&no_human),
            missing_list(&no_score)
        )));
    }
    let mut rows = Vec::new();
    for metric in metrics {
        let dim = human_dimension(metric).expect("validated");
        let (xs, ys): (Vec<f64>, Vec<Rating>) = scores
            .iter()
            .filter_map(|(id, out)| Some((metric_value(&out.scores, metric)?, human[id].get(dim)?)))
            .unzip();
        let n = xs.len();
        let result = PairedSample::new(xs, ys).and_then(|s| stats::correlate(&s, n_perm, seed));
        rows.push(match result {
            Ok(r) => CorrelationRow::from_result(metric, dim, &r),
            Err(e @ (conner_core::Error::UndefinedStatistic(_) | conner_core::Error::InvalidArgument(_))) => {
                CorrelationRow {
                    metric: metric.clone(),
                    dimension: dim.to_string(),
                    n,
                    d: None,
                    p_value: None,
                    n_permutations: n_perm,
                    note: Some(e.to_string()),
                }
            }
            Err(e) => return Err(Error::Data(format!("{metric}: {e}"))),
        });
    }
    Ok(rows)
}

/// [`correlate_files`], then writes `correlation.json` and `correlation.md` into `out_dir`.
pub fn run_correlate(
    scores: &Path,
    human: &Path,
    metrics: &[String],
    n_perm: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<CorrelationRow>> {
    let rows = correlate_files(scores, human, metrics, n_perm, seed)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write(&out_dir.join("correlation.json"), &pretty(&rows))?;
    write(&out_dir.join("correlation.md"), &report::correlation_markdown(&rows))?;
    Ok(rows)
}

fn quality_endpoints() -> BTreeSet<Endpoint> {
    endpoints_for(&["fact", "rel", "coh_para", "info"])
}

fn require_quality_backends(cfg: &RunConfig) -> Result<()> {
    for e in quality_endpoints() {
        if !cfg.backends.contains_key(e.as_str()) {
            return Err(Error::Config(format!("selection needs a `{}` backend", e.as_str())));
        }
    }
    Ok(())
}

/// Where the test query of a few-shot prompt comes from.
#[derive(Debug, Clone)]
pub enum TestQuery {
    /// A dataset item, which is then excluded from the demonstration pool.
    Item(String),
    Text { query: String, topic: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    pub query: String,
    pub knowledge: String,
    pub q_know: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptManifest {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub gamma: [f64; 4],
    pub template: String,
    pub demonstrations: Vec<DemoRecord>,
}

impl From<&Demonstration> for DemoRecord {
    fn from(d: &Demonstration) -> Self {
        DemoRecord {
            id: d.query.id.clone(),
            topic: d.query.topic.clone(),
            query: d.query.text.clone(),
            knowledge: d.knowledge.text().to_string(),
            q_know: d.q_know,
        }
    }
}

/// Picks `n` of `m` sampled dataset items as demonstrations and renders the
/// few-shot prompt. Writes `prompt.txt` and `demonstrations.json`.
pub fn run_select_prompt(cfg: &RunConfig, m: usize, n: usize, test: &TestQuery) -> Result<(String, PromptManifest)> {
    require_quality_backends(cfg)?;
    let items = dataset::parse_dataset(&cfg.dataset.path, cfg.dataset.format)?;
    let kind = cfg.dataset.format.task_kind();
    let (test_query, exclude) = match test {
        TestQuery::Item(id) => {
            let item = items
                .iter()
                .find(|i| i.id() == id)
                .ok_or_else(|| Error::Data(format!("test id {id} is not in the dataset")))?;
            (item.query.clone(), Some(id.as_str()))
        }
        TestQuery::Text { query, topic } => {
            let mut q = Query::new("test", query.clone(), kind)?;
            q.topic = topic.clone();
            (q, None)
        }
    };
    let pool: Vec<(Query, Knowledge)> = items
        .iter()
        .filter(|i| Some(i.id()) != exclude)
        .map(|i| (i.query.clone(), i.knowledge.clone()))
        .collect();
    let backends = Backends::connect(cfg, &quality_endpoints())?;
    let gamma: Gamma = cfg.gamma()?;
    let setup = cfg.scoring_setup()?;
    let template = cfg.templates()?.few_shot;
    let demos = selection::select_demonstrations(&backends.routed, &pool, m, n, &gamma, cfg.seed, &setup)?;
    let mut prompt = selection::render_prompt(&demos, &test_query, &template)?;
    prompt.push('\n');
    let manifest = PromptManifest {
        m,
        n,
        seed: cfg.seed,
        gamma: gamma.as_array(),
        template: template.name.clone(),
        demonstrations: demos.iter().map(DemoRecord::from).collect(),
    };
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("prompt.txt"), &prompt)?;
    write(&dir.join("demonstrations.json"), &pretty(&manifest))?;
    Ok((prompt, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate_id: String,
    pub q_know: f64,
    pub fact: f64,
    pub rel: f64,
    pub coh_para: f64,
    pub info: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySelection {
    pub query_id: String,
    pub chosen: String,
    pub chosen_index: usize,
    pub candidates: Vec<CandidateScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedQuery {
    pub query_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest {
    pub gamma: [f64; 4],
    pub selections: Vec<QuerySelection>,
    pub failed: Vec<FailedQuery>,
}

/// Chooses the highest-Q_know candidate for every dataset query. Queries
/// without candidates, candidates for unknown queries, and scoring errors
/// end up in `failed`. Writes `selection.json`.
pub fn run_select_knowledge(cfg: &RunConfig, candidates: &Path) -> Result<SelectionManifest> {
    require_quality_backends(cfg)?;
    let items = dataset::parse_dataset(&cfg.dataset.path, cfg.dataset.format)?;
    let mut groups = dataset::parse_candidates(candidates)?;
    let backends = Backends::connect(cfg, &quality_endpoints())?;
    let gamma = cfg.gamma()?;
    let setup = cfg.scoring_setup()?;

    let mut queries: Vec<&EvalItem> = items.iter().collect();
    queries.sort_by(|a, b| a.id().cmp(b.id()));
    let jobs: Vec<(&EvalItem, Vec<dataset::CandidateRecord>)> = queries
        .into_iter()
        .map(|i| (i, groups.remove(i.id()).unwrap_or_default()))
        .collect();
    let results = parallel_map(&jobs, cfg.concurrency, |(item, cands)| {
        select_for(&backends.routed, item, cands, &gamma, &setup)
    });

    let mut selections = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(s) => selections.push(s),
            Err(f) => failed.push(f),
        }
    }
    for id in groups.into_keys() {
        failed.push(FailedQuery {
            query_id: id,
            reason: "query id is not in the dataset".into(),
        });
    }
    failed.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    let manifest = SelectionManifest {
        gamma: gamma.as_array(),
        selections,
        failed,
    };
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("selection.json"), &pretty(&manifest))?;
    Ok(manifest)
}

fn select_for<B: Backend + ?Sized>(
    backend: &B,
    item: &EvalItem,
    cands: &[dataset::CandidateRecord],
    gamma: &Gamma,
    setup: &ScoringSetup,
) -> std::result::Result<QuerySelection, FailedQuery> {
    let fail = |reason: String| FailedQuery {
        query_id: item.id().to_string(),
        reason,
    };
    if cands.is_empty() {
        return Err(fail("no candidates".into()));
    }
    let intr = cands
        .iter()
        .map(|c| {
            let mut k = Knowledge::new(&c.text, conner_core::Provenance::Generated);
            k.generator_id = c.generator_id.clone();
            selection::intrinsic_scores(backend, &item.query, &k, setup)
        })
        .collect::<conner_core::Result<Vec<IntrinsicScores>>>()
        .map_err(|e| fail(e.to_string()))?;
    let sel = selection::select_from_scores(&intr, gamma).map_err(|e| fail(e.to_string()))?;
    let ids: Vec<String> = cands
        .iter()
        .enumerate()
        .map(|(i, c)| c.candidate_id.clone().unwrap_or_else(|| format!("{}#{i}", item.id())))
        .collect();
    Ok(QuerySelection {
        query_id: item.id().to_string(),
        chosen: ids[sel.index].clone(),
        chosen_index: sel.index,
        candidates: ids
            .into_iter()
            .zip(intr.iter().zip(&sel.scores))
            .map(|(candidate_id, (s, q))| CandidateScore {
                candidate_id,
                q_know: *q,
                fact: s.fact,
                rel: s.rel,
                coh_para: s.coh_para,
                info: s.info,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use conner_core::{Answer, MockBackend, Passage, Provenance, TaskKind};

    fn item(id: &str, q: &str, k: &str) -> EvalItem {
        EvalItem::new(
            Query::new(id, q, TaskKind::SpanQa).unwrap(),
            Knowledge::new(k, Provenance::Generated),
        )
    }

    fn ctx<'a>(pool: &'a [Knowledge], metrics: Vec<&'static str>) -> EvalContext<'a> {
        EvalContext {
            metrics,
            setup: ScoringSetup::default(),
            templates: Templates {
                zero_shot: conner_core::template::PromptTemplate::builtin("nq-zeroshot-best").unwrap(),
                answer: conner_core::template::PromptTemplate::builtin("nq-answer-best").unwrap(),
                few_shot: conner_core::template::PromptTemplate::builtin("nq-fewshot-best").unwrap(),
            },
            negatives: 1,
            seed: 3,
            pool,
        }
    }

    #[test]
    fn item_seed_depends_on_both_inputs() {
        assert_eq!(item_seed(1, "a"), item_seed(1, "a"));
        assert_ne!(item_seed(1, "a"), item_seed(2, "a"));
        assert_ne!(item_seed(1, "a"), item_seed(1, "b"));
    }

    #[test]
    fn subset_leaves_other_metrics_absent() {
        let mock = MockBackend::new(vec![]);
        let it = item("1", "capital of france", "Paris is the capital of France.");
        let out = score_item(&mock, &it, &ctx(&[], vec!["rel"]));
        assert!(out.errors.is_empty());
        assert!(out.scores.rel.is_some());
        assert_eq!(
            out.scores,
            ScoreCard {
                rel: out.scores.rel,
                ..ScoreCard::default()
            }
        );
    }

    #[test]
    fn failing_metric_is_isolated() {
        let mock = MockBackend::new(vec![Passage {
            source_id: "p".into(),
            text: "Paris is the capital of France.".into(),
        }]);
        let mut it = item("1", "capital of france", "Paris is the capital of France.");
        it.reference_answers = vec![Answer::span("Paris").unwrap()];
        // One-entry pool: no negatives available, so helpfulness fails alone.
        let pool = vec![it.knowledge.clone()];
        let out = score_item(&mock, &it, &ctx(&pool, vec!["rel", "help"]));
        assert_eq!(out.errors.len(), 1);
        assert!(out.errors[0].starts_with("help:"));
        assert!(out.scores.rel.is_some() && out.scores.help.is_none());
    }

    #[test]
    fn parallel_map_keeps_order() {
        let v: Vec<usize> = (0..100).collect();
        assert_eq!(parallel_map(&v, 7, |x| x * 2), (0..100).map(|x| x * 2).collect::<Vec<_>>());
        assert!(parallel_map(&Vec::<usize>::new(), 4, |x| *x).is_empty());
    }
}
