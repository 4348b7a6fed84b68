//! Run configuration: one JSON document per run.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use conner_core::extrinsic::DEFAULT_NEGATIVES;
use conner_core::intrinsic::FactualityConfig;
use conner_core::selection::{Gamma, ScoringSetup};
use conner_core::template::PromptTemplate;
use conner_core::{Endpoint, FactualityMode};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::client::BackendConfig;
use crate::dataset::DatasetFormat;
use crate::error::{Error, Result};

pub const CACHE_DIR_ENV: &str = "CONNER_CACHE_DIR";

/// Metric names accepted in `metrics` and by `correlate`.
pub const METRICS: [&str; 7] = ["fact", "rel", "coh_sent", "coh_para", "info", "help", "validity"];

/// Endpoints a metric calls.
pub fn required_endpoints(metric: &str) -> &'static [Endpoint] {
    match metric {
        "fact" => &[Endpoint::Retrieve, Endpoint::Nli],
        "rel" => &[Endpoint::Rank],
        "coh_sent" | "info" | "help" => &[Endpoint::Logprob],
        "coh_para" => &[Endpoint::Discourse],
        "validity" => &[Endpoint::Retrieve, Endpoint::Nli],
        _ => &[],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub format: DatasetFormat,
}

fn default_l() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactualitySection {
    #[serde(default = "default_l")]
    pub l: usize,
    #[serde(default)]
    pub mode: FactualityMode,
}

impl Default for FactualitySection {
    fn default() -> Self {
        FactualitySection {
            l: default_l(),
            mode: FactualityMode::Min,
        }
    }
}

fn quarter() -> f64 {
    0.25
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    #[serde(default = "quarter")]
    pub fact: f64,
    #[serde(default = "quarter")]
    pub rel: f64,
    #[serde(default = "quarter")]
    pub coh: f64,
    #[serde(default = "quarter")]
    pub info: f64,
}

impl Default for GammaSection {
    fn default() -> Self {
        GammaSection {
            fact: 0.25,
            rel: 0.25,
            coh: 0.25,
            info: 0.25,
        }
    }
}

/// Template names; unset entries fall back to the dataset format's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSection {
    pub zero_shot: Option<String>,
    pub answer: Option<String>,
    pub few_shot: Option<String>,
    /// Directory of `<name>.txt` patterns, consulted before the built-ins.
    pub dir: Option<PathBuf>,
}

fn default_negatives() -> usize {
    DEFAULT_NEGATIVES
}

fn default_concurrency() -> usize {
    4
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_setting() -> String {
    "default".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    /// Keyed by endpoint name.
    pub backends: BTreeMap<String, BackendConfig>,
    #[serde(default)]
    pub factuality: FactualitySection,
    #[serde(default = "default_negatives")]
    pub negatives: usize,
    #[serde(default)]
    pub gamma: GammaSection,
    #[serde(default)]
    pub templates: TemplateSection,
    pub seed: u64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Metric subset; all metrics when absent.
    #[serde(default)]
    pub metrics: Option<Vec<String>>,
    /// Label for the report's Setting column.
    #[serde(default = "default_setting")]
    pub setting: String,
}

/// Templates resolved to their patterns.
#[derive(Debug, Clone)]
pub struct Templates {
    pub zero_shot: PromptTemplate,
    pub answer: PromptTemplate,
    pub few_shot: PromptTemplate,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    /// Reads, resolves relative paths against the file's directory, applies
    /// the cache-directory override, and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&raw).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()) {
            cfg.cache_dir = Some(PathBuf::from(dir));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset.path);
        fix(&mut self.output_dir);
        if let Some(p) = self.cache_dir.as_mut() {
            fix(p);
        }
        if let Some(p) = self.templates.dir.as_mut() {
            fix(p);
        }
    }

    /// Selected metrics in canonical order.
    pub fn metric_set(&self) -> Vec<&'static str> {
        match &self.metrics {
            None => METRICS.to_vec(),
            Some(m) => METRICS.iter().copied().filter(|x| m.iter().any(|y| y == x)).collect(),
        }
    }

    pub fn wants(&self, metric: &str) -> bool {
        self.metric_set().contains(&metric)
    }

    pub fn validate(&self) -> Result<()> {
        for role in self.backends.keys() {
            if Endpoint::parse(role).is_none() {
                return Err(config_err(format!("unknown backend role `{role}`")));
            }
        }
        for (role, b) in &self.backends {
            b.validate().map_err(|e| config_err(format!("backends.{role}: {e}")))?;
        }
        if let Some(m) = &self.metrics {
            if m.is_empty() {
                return Err(config_err("metrics is empty"));
            }
            if let Some(bad) = m.iter().find(|x| !METRICS.contains(&x.as_str())) {
                return Err(config_err(format!("unknown metric `{bad}`")));
            }
        }
        for metric in self.metric_set() {
            for e in required_endpoints(metric) {
                if !self.backends.contains_key(e.as_str()) {
                    return Err(config_err(format!(
                        "metric `{metric}` needs a `{}` backend",
                        e.as_str()
                    )));
                }
            }
        }
        self.factuality_config()?;
        self.gamma()?;
        if self.negatives == 0 {
            return Err(config_err("negatives must be >= 1"));
        }
        if self.concurrency == 0 {
            return Err(config_err("concurrency must be >= 1"));
        }
        self.templates()?;
        Ok(())
    }

    pub fn factuality_config(&self) -> Result<FactualityConfig> {
        FactualityConfig::new(self.factuality.l, self.factuality.mode).map_err(|e| config_err(e.to_string()))
    }

    pub fn gamma(&self) -> Result<Gamma> {
        let g = &self.gamma;
        Gamma::new(g.fact, g.rel, g.coh, g.info).map_err(|e| config_err(e.to_string()))
    }

    fn template(&self, name: &str) -> Result<PromptTemplate> {
        if let Some(dir) = &self.templates.dir {
            let file = dir.join(format!("{name}.txt"));
            if file.is_file() {
                let pattern = fs::read_to_string(&file).map_err(|e| config_err(format!("{}: {e}", file.display())))?;
                let pattern = pattern.strip_suffix('\n').unwrap_or(&pattern);
                return PromptTemplate::new(name, pattern).map_err(|e| config_err(format!("{}: {e}", file.display())));
            }
        }
        PromptTemplate::builtin(name).ok_or_else(|| config_err(format!("unknown template `{name}`")))
    }

    pub fn templates(&self) -> Result<Templates> {
        let (answer, few_shot) = match self.dataset.format {
            DatasetFormat::NqJsonl => ("nq-answer-best", "nq-fewshot-best"),
            DatasetFormat::WowJsonl => ("wow-answer-best", "wow-fewshot-best"),
        };
        let t = &self.templates;
        Ok(Templates {
            zero_shot: self.template(t.zero_shot.as_deref().unwrap_or("nq-zeroshot-best"))?,
            answer: self.template(t.answer.as_deref().unwrap_or(answer))?,
            few_shot: self.template(t.few_shot.as_deref().unwrap_or(few_shot))?,
        })
    }

    pub fn scoring_setup(&self) -> Result<ScoringSetup> {
        Ok(ScoringSetup {
            factuality: self.factuality_config()?,
            zero_shot: self.templates()?.zero_shot,
        })
    }

    /// Distinct backend services, each with the roles it serves.
    pub fn services(&self) -> Vec<(BackendConfig, BTreeSet<Endpoint>)> {
        let mut out: Vec<(BackendConfig, BTreeSet<Endpoint>)> = Vec::new();
        for (role, b) in &self.backends {
            let e = Endpoint::parse(role).expect("validated");
            match out.iter_mut().find(|(c, _)| c == b) {
                Some((_, roles)) => {
                    roles.insert(e);
                }
                None => out.push((b.clone(), BTreeSet::from([e]))),
            }
        }
        out
    }

    /// Hash over everything that can change a score: dataset content,
    /// backend identities, metric parameters, template text, seed, metric
    /// subset and setting label. Paths, URLs, timeouts, batch sizes and
    /// concurrency are left out.
    pub fn config_hash(&self) -> Result<String> {
        let dataset = fs::read(&self.dataset.path).map_err(|e| Error::io(&self.dataset.path, e))?;
        let t = self.templates()?;
        let backends: BTreeMap<&str, &str> = self
            .backends
            .iter()
            .map(|(k, v)| (k.as_str(), v.backend_id.as_str()))
            .collect();
        let doc = json!({
            "dataset_sha256": hex::encode(Sha256::digest(&dataset)),
            "format": self.dataset.format,
            "backends": backends,
            "factuality": self.factuality,
            "negatives": self.negatives,
            "gamma": self.gamma,
            "templates": {
                "zero_shot": [t.zero_shot.name, t.zero_shot.pattern, t.zero_shot.separator],
                "answer": [t.answer.name, t.answer.pattern, t.answer.separator],
                "few_shot": [t.few_shot.name, t.few_shot.pattern, t.few_shot.separator],
            },
            "seed": self.seed,
            "metrics": self.metric_set(),
            "setting": self.setting,
        });
        // `Value` objects keep keys sorted, so this serialization is canonical.
        Ok(hex::encode(Sha256::digest(doc.to_string().as_bytes())))
    }
}
