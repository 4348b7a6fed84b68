//! Agreement between metrics and human ordinal ratings (Somers' D with a
//! permutation test), lexical baseline metrics, and corpus aggregation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FactLabel, Rating, ScoreCard};

pub const DEFAULT_PERMUTATIONS: usize = 10_000;
pub const MIN_PERMUTATIONS: usize = 100;

/// Metric values (predictor) paired with human ratings (response).
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    metric: Vec<f64>,
    human: Vec<f64>,
}

impl PairedSample {
    pub fn new(metric: Vec<f64>, human: Vec<Rating>) -> Result<Self> {
        PairedSample::from_reals(metric, human.into_iter().map(|r| f64::from(r.value())).collect())
    }

    /// Same as [`PairedSample::new`] but with an arbitrary real-valued response.
    pub fn from_reals(metric: Vec<f64>, human: Vec<f64>) -> Result<Self> {
        if metric.len() != human.len() {
            return Err(Error::invalid(alloc::format!(
                "{} metric values but {} ratings",
                metric.len(),
                human.len()
            )));
        }
        if metric.len() < 2 {
            return Err(Error::invalid("need at least two paired samples"));
        }
        if metric.iter().chain(&human).any(|v| !v.is_finite()) {
            return Err(Error::invalid("samples must be finite"));
        }
        Ok(PairedSample { metric, human })
    }

    pub fn len(&self) -> usize {
        self.metric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metric.is_empty()
    }

    pub fn metric(&self) -> &[f64] {
        &self.metric
    }

    pub fn human(&self) -> &[f64] {
        &self.human
    }
}

/// Concordant-minus-discordant pair count and the number of pairs untied on X.
struct PairCounts {
    net: i64,
    untied_x: i64,
}

/// Fenwick tree over dense response ranks.
struct Fenwick(Vec<i64>);

impl Fenwick {
    fn add(&mut self, mut i: usize) {
        i += 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks `< i`.
    fn below(&self, mut i: usize) -> i64 {
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

fn dense_ranks(y: &[f64]) -> (Vec<usize>, usize) {
    let mut levels: Vec<f64> = y.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let ranks = y
        .iter()
        .map(|v| levels.partition_point(|l| l < v))
        .collect();
    (ranks, levels.len())
}

/// O(n log n) pair counting: sweep X in ascending order, one tie group at a
/// time, querying how many earlier responses fall below or above.
fn pair_counts(x: &[f64], y_rank: &[usize], levels: usize) -> PairCounts {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut tree = Fenwick(alloc::vec![0; levels + 1]);
    let mut net = 0i64;
    let mut tied_x = 0i64;
    let mut inserted = 0i64;
    let mut g = 0;
    while g < n {
        let mut h = g;
        while h + 1 < n && x[order[h + 1]] == x[order[g]] {
            h += 1;
        }
        for &i in &order[g..=h] {
            let below = tree.below(y_rank[i]);
            let above = inserted - tree.below(y_rank[i] + 1);
            net += below - above;
        }
        for &i in &order[g..=h] {
            tree.add(y_rank[i]);
        }
        let t = (h - g + 1) as i64;
        tied_x += t * (t - 1) / 2;
        inserted += t;
        g = h + 1;
    }
    let total = (n as i64) * (n as i64 - 1) / 2;
    PairCounts {
        net,
        untied_x: total - tied_x,
    }
}

/// Somers' D of the human response given the metric:
/// `(concordant - discordant) / pairs untied on the metric`.
pub fn somers_d(s: &PairedSample) -> Result<f64> {
    let (ranks, levels) = dense_ranks(&s.human);
    let c = pair_counts(&s.metric, &ranks, levels);
    if c.untied_x == 0 {
        return Err(Error::UndefinedStatistic(String::from(
            "all metric values are tied",
        )));
    }
    Ok(c.net as f64 / c.untied_x as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub d: f64,
    pub p_value: f64,
    pub n: usize,
    pub n_permutations: usize,
}

/// Two-sided permutation p-value of Somers' D: the share of response
/// shuffles at least as extreme as the observed statistic, with the usual
/// +1 correction.
pub fn permutation_p(s: &PairedSample, n_perm: usize, seed: u64) -> Result<f64> {
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::invalid(alloc::format!(
            "n_perm = {n_perm} is below the minimum of {MIN_PERMUTATIONS}"
        )));
    }
    somers_d(s)?;
    let (mut ranks, levels) = dense_ranks(&s.human);
    // The denominator is fixed by X, so compare the integer numerators.
    let observed = pair_counts(&s.metric, &ranks, levels).net.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..n_perm {
        ranks.shuffle(&mut rng);
        if pair_counts(&s.metric, &ranks, levels).net.abs() >= observed {
            extreme += 1;
        }
    }
    Ok((1 + extreme) as f64 / (1 + n_perm) as f64)
}

pub fn correlate(s: &PairedSample, n_perm: usize, seed: u64) -> Result<CorrelationResult> {
    Ok(CorrelationResult {
        d: somers_d(s)?,
        p_value: permutation_p(s, n_perm, seed)?,
        n: s.len(),
        n_permutations: n_perm,
    })
}

/// Lowercase, strip punctuation, drop the articles a/an/the, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let stripped: String = lowered
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    let words: Vec<&str> = stripped
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect();
    words.join(" ")
}

pub fn exact_match(pred: &str, golds: &[&str]) -> u8 {
    let p = normalize_answer(pred);
    u8::from(golds.iter().any(|g| normalize_answer(g) == p))
}

/// Harmonic mean of multiset unigram precision and recall after normalization.
pub fn unigram_f1(pred: &str, gold: &str) -> f64 {
    let p = normalize_answer(pred);
    let g = normalize_answer(gold);
    let pt: Vec<&str> = p.split_whitespace().collect();
    let gt: Vec<&str> = g.split_whitespace().collect();
    if pt.is_empty() || gt.is_empty() {
        return if pt.is_empty() && gt.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for t in &gt {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &pt {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pt.len() as f64;
    let recall = overlap as f64 / gt.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub model: String,
    pub setting: String,
}

/// One row of the corpus table. Columns with no contributing items are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub setting: String,
    pub fact_consistent_pct: Option<f64>,
    pub non_verified_pct: Option<f64>,
    pub fact_inconsistent_pct: Option<f64>,
    pub relevance_mean: Option<f64>,
    pub coh_sent_mean: Option<f64>,
    pub coh_para_mean: Option<f64>,
    pub info_mean: Option<f64>,
    pub helpfulness_mean: Option<f64>,
    pub validity_pct: Option<f64>,
    pub item_count: usize,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn summarize(key: &GroupKey, cards: &[&ScoreCard]) -> ReportRow {
    let labels: Vec<FactLabel> = cards.iter().filter_map(|c| c.fact.map(|f| f.label())).collect();
    let pct = |l: FactLabel| {
        (!labels.is_empty())
            .then(|| 100.0 * labels.iter().filter(|x| **x == l).count() as f64 / labels.len() as f64)
    };
    ReportRow {
        model: key.model.clone(),
        setting: key.setting.clone(),
        fact_consistent_pct: pct(FactLabel::Consistent),
        non_verified_pct: pct(FactLabel::NonVerified),
        fact_inconsistent_pct: pct(FactLabel::Inconsistent),
        relevance_mean: mean_of(cards.iter().map(|c| c.rel)),
        coh_sent_mean: mean_of(cards.iter().map(|c| c.coh_sent)),
        coh_para_mean: mean_of(cards.iter().map(|c| c.coh_para)),
        info_mean: mean_of(cards.iter().map(|c| c.info)),
        helpfulness_mean: mean_of(cards.iter().map(|c| c.help)),
        validity_pct: mean_of(cards.iter().map(|c| c.validity)).map(|v| 100.0 * v),
        item_count: cards.len(),
    }
}

/// Groups cards by key (rows sorted by key) and aggregates each group.
/// Factuality columns are the share of items whose score argmax is each label.
pub fn corpus_report(cards: &[(GroupKey, ScoreCard)]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<&GroupKey, Vec<&ScoreCard>> = BTreeMap::new();
    for (k, c) in cards {
        groups.entry(k).or_default().push(c);
    }
    groups.iter().map(|(k, cs)| summarize(k, cs)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{FactualityMode, FactualityScore, NliVector};
    use alloc::vec;

    fn sample(x: &[f64], y: &[f64]) -> PairedSample {
        PairedSample::from_reals(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn somers_fixtures() {
        assert_eq!(somers_d(&sample(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0])).unwrap(), 1.0);
        assert_eq!(somers_d(&sample(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 1.0, 1.0])).unwrap(), 2.0 / 3.0);
        assert_eq!(somers_d(&sample(&[1.0, 2.0], &[1.0, 0.0])).unwrap(), -1.0);
        assert!(matches!(
            somers_d(&sample(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0])),
            Err(Error::UndefinedStatistic(_))
        ));
        assert!(PairedSample::from_reals(vec![1.0], vec![0.0]).is_err());
        assert!(PairedSample::from_reals(vec![1.0, 2.0], vec![0.0]).is_err());
    }

    #[test]
    fn permutation_minimum() {
        let s = sample(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]);
        assert!(permutation_p(&s, 99, 0).is_err());
        let p = permutation_p(&s, 100, 0).unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn exact_match_normalization() {
        assert_eq!(exact_match("The PRC", &["prc"]), 1);
        assert_eq!(exact_match("PRC", &["China"]), 0);
        assert_eq!(exact_match("", &["x"]), 0);
        assert_eq!(exact_match("Paris.", &["London", "paris"]), 1);
    }

    #[test]
    fn f1_values() {
        assert_eq!(unigram_f1("glory of love", "glory of love"), 1.0);
        assert!((unigram_f1("x b c", "b c d") - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(unigram_f1("PRC", "China"), 0.0);
        assert_eq!(unigram_f1("the", "a"), 1.0);
        assert_eq!(unigram_f1("", "china"), 0.0);
    }

    fn card(e: f64, n: f64, c: f64) -> ScoreCard {
        ScoreCard {
            fact: Some(FactualityScore::new(NliVector::new(e, n, c).unwrap(), FactualityMode::Min).unwrap()),
            validity: Some(0.4345),
            ..Default::default()
        }
    }

    #[test]
    fn report_percentages() {
        let key = GroupKey { model: "m".into(), setting: "s".into() };
        let cards = vec![
            (key.clone(), card(0.9, 0.1, 0.0)),
            (key.clone(), card(0.8, 0.1, 0.1)),
            (key.clone(), card(0.1, 0.8, 0.1)),
            (key.clone(), card(0.1, 0.1, 0.8)),
        ];
        let rows = corpus_report(&cards);
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!((r.fact_consistent_pct, r.non_verified_pct, r.fact_inconsistent_pct), (Some(50.0), Some(25.0), Some(25.0)));
        assert!((r.validity_pct.unwrap() - 43.45).abs() < 1e-9);
        assert_eq!(r.relevance_mean, None);
        assert_eq!(r.item_count, 4);
    }
}
