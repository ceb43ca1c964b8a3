use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus_io::{Qrels, RunList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Ndcg,
    Map,
    Mrr,
    Precision,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// `grade`
    #[default]
    Linear,
    /// `2^grade - 1`
    Exponential,
}

impl Gain {
    fn of(self, grade: u32) -> f64 {
        match self {
            Gain::Linear => f64::from(grade),
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
        }
    }
}

/// A metric with its cutoff and relevance threshold.
///
/// Textual form: `ndcg@10`, `map`, `mrr`, `p@10`, optionally with
/// `_exp` (exponential gain, nDCG only) or `_r2` (binary threshold 2), e.g.
/// `ndcg_exp@20`, `map_r2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub cutoff: Option<usize>,
    pub min_rel: u32,
    pub gain: Gain,
}

impl MetricSpec {
    pub fn ndcg(k: usize) -> Self {
        Self::new(MetricKind::Ndcg, Some(k))
    }

    pub fn map() -> Self {
        Self::new(MetricKind::Map, None)
    }

    pub fn mrr() -> Self {
        Self::new(MetricKind::Mrr, None)
    }

    pub fn precision(k: usize) -> Self {
        Self::new(MetricKind::Precision, Some(k))
    }

    fn new(kind: MetricKind, cutoff: Option<usize>) -> Self {
        Self {
            kind,
            cutoff,
            min_rel: 1,
            gain: Gain::Linear,
        }
    }

    pub fn with_min_rel(mut self, min_rel: u32) -> Self {
        self.min_rel = min_rel;
        self
    }

    pub fn with_gain(mut self, gain: Gain) -> Self {
        self.gain = gain;
        self
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidMetric(format!("{self}: {m}")));
        match (self.kind, self.cutoff) {
            (MetricKind::Ndcg | MetricKind::Precision, None) => return bad("needs a cutoff"),
            (_, Some(0)) => return bad("cutoff must be positive"),
            _ => {}
        }
        if self.min_rel == 0 {
            return bad("relevance threshold must be at least 1");
        }
        if self.gain == Gain::Exponential && self.kind != MetricKind::Ndcg {
            return bad("exponential gain applies to nDCG only");
        }
        Ok(())
    }

    /// Value for one query, or `None` when the query has no relevant
    /// judgments under this metric's threshold.
    pub fn compute(&self, ranked: &[&str], judged: &BTreeMap<String, u32>) -> Option<f64> {
        let k = self.cutoff.unwrap_or(usize::MAX);
        match self.kind {
            MetricKind::Ndcg => ndcg_of(ranked, judged, k, self.gain),
            MetricKind::Map => ap_of(&ranked[..k.min(ranked.len())], judged, self.min_rel),
            MetricKind::Mrr => rr_of(&ranked[..k.min(ranked.len())], judged, self.min_rel),
            MetricKind::Precision => precision_of(ranked, judged, k, self.min_rel),
        }
    }

    /// Whether a query with these judgments is evaluated at all.
    pub fn is_evaluable(&self, judged: &BTreeMap<String, u32>) -> bool {
        let threshold = match self.kind {
            MetricKind::Ndcg => 1,
            _ => self.min_rel,
        };
        judged.values().any(|&g| g >= threshold)
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            MetricKind::Ndcg => "ndcg",
            MetricKind::Map => "map",
            MetricKind::Mrr => "mrr",
            MetricKind::Precision => "p",
        };
        f.write_str(name)?;
        if self.gain == Gain::Exponential {
            f.write_str("_exp")?;
        }
        if self.min_rel != 1 {
            write!(f, "_r{}", self.min_rel)?;
        }
        if let Some(k) = self.cutoff {
            write!(f, "@{k}")?;
        }
        Ok(())
    }
}

impl FromStr for MetricSpec {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || EvalError::InvalidMetric(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        let (head, cutoff) = match lower.split_once('@') {
            Some((h, k)) => (h, Some(k.parse::<usize>().map_err(|_| invalid())?)),
            None => (lower.as_str(), None),
        };
        let head = match head.strip_prefix("recip_rank") {
            Some(rest) => format!("mrr{rest}"),
            None => head.to_string(),
        };
        let mut parts = head.split('_');
        let kind = match parts.next() {
            Some("ndcg") => MetricKind::Ndcg,
            Some("map") => MetricKind::Map,
            Some("mrr") => MetricKind::Mrr,
            Some("p" | "precision") => MetricKind::Precision,
            _ => return Err(invalid()),
        };
        let mut spec = Self::new(kind, cutoff);
        for p in parts {
            if p == "exp" {
                spec.gain = Gain::Exponential;
            } else if let Some(r) = p.strip_prefix('r') {
                spec.min_rel = r.parse().map_err(|_| invalid())?;
            } else {
                return Err(invalid());
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl Serialize for MetricSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MetricSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn discount(rank0: usize) -> f64 {
    ((rank0 + 2) as f64).log2()
}

fn ndcg_of(ranked: &[&str], judged: &BTreeMap<String, u32>, k: usize, gain: Gain) -> Option<f64> {
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| gain.of(judged.get(*d).copied().unwrap_or(0)) / discount(i))
        .sum();
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain.of(g) / discount(i))
        .sum();
    Some(dcg / idcg)
}

fn is_rel(judged: &BTreeMap<String, u32>, doc: &str, min_rel: u32) -> bool {
    judged.get(doc).is_some_and(|&g| g >= min_rel)
}

fn ap_of(ranked: &[&str], judged: &BTreeMap<String, u32>, min_rel: u32) -> Option<f64> {
    let r = judged.values().filter(|&&g| g >= min_rel).count();
    if r == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranked.iter().enumerate() {
        if is_rel(judged, d, min_rel) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / r as f64)
}

fn rr_of(ranked: &[&str], judged: &BTreeMap<String, u32>, min_rel: u32) -> Option<f64> {
    if !judged.values().any(|&g| g >= min_rel) {
        return None;
    }
    Some(
        ranked
            .iter()
            .position(|d| is_rel(judged, d, min_rel))
            .map_or(0.0, |i| 1.0 / (i + 1) as f64),
    )
}

fn precision_of(
    ranked: &[&str],
    judged: &BTreeMap<String, u32>,
    k: usize,
    min_rel: u32,
) -> Option<f64> {
    if !judged.values().any(|&g| g >= min_rel) {
        return None;
    }
    let hits = ranked
        .iter()
        .take(k)
        .filter(|d| is_rel(judged, d, min_rel))
        .count();
    Some(hits as f64 / k as f64)
}

fn ranked(run: &RunList) -> Vec<&str> {
    run.docnos().collect()
}

fn judged<'a>(run: &RunList, qrels: &'a Qrels) -> Option<&'a BTreeMap<String, u32>> {
    qrels.judgments(&run.qid)
}

/// nDCG@k with linear gain; `None` when the query has no relevant documents.
pub fn ndcg_at_k(run: &RunList, qrels: &Qrels, k: usize) -> Option<f64> {
    ndcg_of(&ranked(run), judged(run, qrels)?, k, Gain::Linear)
}

pub fn average_precision(run: &RunList, qrels: &Qrels, min_rel: u32) -> Option<f64> {
    ap_of(&ranked(run), judged(run, qrels)?, min_rel)
}

pub fn mrr(run: &RunList, qrels: &Qrels, min_rel: u32) -> Option<f64> {
    rr_of(&ranked(run), judged(run, qrels)?, min_rel)
}

pub fn precision_at_k(run: &RunList, qrels: &Qrels, k: usize, min_rel: u32) -> Option<f64> {
    precision_of(&ranked(run), judged(run, qrels)?, k, min_rel)
}

/// Per-query values and their mean for one metric over one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: MetricSpec,
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
    pub count: usize,
    /// Queries in the run or qrels that have no relevant judgments.
    pub skipped: Vec<String>,
}

/// Scores `runs` against `qrels`. Every qrels query with a relevant
/// judgment is evaluated; one missing from the run scores 0. Other queries
/// are listed as skipped.
pub fn evaluate(
    runs: &[RunList],
    qrels: &Qrels,
    metric: MetricSpec,
) -> Result<EvalReport, EvalError> {
    metric.validate()?;
    let by_qid: BTreeMap<&str, &RunList> = runs.iter().map(|r| (r.qid.as_str(), r)).collect();
    let mut per_query = BTreeMap::new();
    let mut skipped = Vec::new();
    for qid in qrels.qids() {
        let judged = qrels.judgments(qid).expect("qid from qrels");
        if !metric.is_evaluable(judged) {
            skipped.push(qid.to_string());
            continue;
        }
        let docs = by_qid.get(qid).map(|r| ranked(r)).unwrap_or_default();
        let v = metric.compute(&docs, judged).expect("evaluable query");
        per_query.insert(qid.to_string(), v);
    }
    for qid in by_qid.keys() {
        if qrels.judgments(qid).is_none() {
            skipped.push(qid.to_string());
        }
    }
    skipped.sort();
    let count = per_query.len();
    let mean = if count == 0 {
        0.0
    } else {
        per_query.values().sum::<f64>() / count as f64
    };
    Ok(EvalReport {
        metric,
        per_query,
        mean,
        count,
        skipped,
    })
}

/// trec_eval-style rows: `metric<TAB>qid<TAB>value`, then an `all` row.
pub fn reports_to_tsv(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    for r in reports {
        for (qid, v) in &r.per_query {
            out.push_str(&format!("{}\t{qid}\t{v:.4}\n", r.metric));
        }
        out.push_str(&format!("{}\tall\t{:.4}\n", r.metric, r.mean));
    }
    out
}

pub fn reports_to_json(reports: &[EvalReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::RunEntry;

    fn run(qid: &str, docs: &[&str]) -> RunList {
        let mut r = RunList::new(qid, "t");
        r.entries = docs
            .iter()
            .enumerate()
            .map(|(i, d)| RunEntry {
                docno: d.to_string(),
                rank: i + 1,
                score: (docs.len() - i) as f64,
            })
            .collect();
        r
    }

    fn qrels(rows: &[(&str, &str, i64)]) -> Qrels {
        let mut q = Qrels::new();
        for (qid, d, g) in rows {
            q.insert(qid, d, *g).unwrap();
        }
        q
    }

    #[test]
    fn ndcg_hand_case() {
        let q = qrels(&[("1", "a", 0), ("1", "b", 1), ("1", "c", 2)]);
        let v = ndcg_at_k(&run("1", &["a", "b", "c"]), &q, 3).unwrap();
        assert!((v - 0.6199).abs() < 1e-4, "{v}");
        assert_eq!(ndcg_at_k(&run("1", &["c", "b", "a"]), &q, 3), Some(1.0));
    }

    #[test]
    fn ap_mrr_precision_examples() {
        let q = qrels(&[("1", "a", 1), ("1", "c", 1)]);
        let v = average_precision(&run("1", &["a", "b", "c"]), &q, 1).unwrap();
        assert!((v - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert_eq!(average_precision(&run("1", &["x"]), &q, 1), Some(0.0));
        assert_eq!(mrr(&run("1", &["x", "y", "z", "c"]), &q, 1), Some(0.25));
        assert_eq!(mrr(&run("1", &["x"]), &q, 1), Some(0.0));
        assert_eq!(precision_at_k(&run("1", &[]), &q, 10, 1), Some(0.0));
        assert_eq!(precision_at_k(&run("1", &["a", "c"]), &q, 2, 1), Some(1.0));
        assert_eq!(precision_at_k(&run("1", &["a", "c"]), &q, 10, 1), Some(0.2));
    }

    #[test]
    fn threshold_two_changes_relevance() {
        let q = qrels(&[("1", "a", 1), ("1", "b", 2)]);
        assert_eq!(mrr(&run("1", &["a", "b"]), &q, 2), Some(0.5));
        assert_eq!(
            mrr(&run("1", &["a", "b"]), &qrels(&[("1", "a", 1)]), 2),
            None
        );
    }

    #[test]
    fn exponential_gain() {
        let judged: BTreeMap<String, u32> = [("a".to_string(), 1), ("b".to_string(), 3)].into();
        let spec = MetricSpec::ndcg(2).with_gain(Gain::Exponential);
        let v = spec.compute(&["a", "b"], &judged).unwrap();
        let expect = (1.0 + 7.0 / 3f64.log2()) / (7.0 + 1.0 / 3f64.log2());
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn evaluate_skips_and_zero_fills() {
        let q = qrels(&[("1", "a", 1), ("2", "b", 0), ("3", "c", 2)]);
        let runs = vec![run("1", &["a"]), run("2", &["b"]), run("9", &["z"])];
        let r = evaluate(&runs, &q, MetricSpec::map()).unwrap();
        assert_eq!(
            r.per_query,
            BTreeMap::from([("1".into(), 1.0), ("3".into(), 0.0)])
        );
        assert_eq!(r.mean, 0.5);
        assert_eq!(r.count, 2);
        assert_eq!(r.skipped, vec!["2", "9"]);
    }

    #[test]
    fn metric_names_round_trip() {
        for s in [
            "ndcg@10",
            "map",
            "mrr",
            "p@10",
            "ndcg_exp@20",
            "map_r2",
            "p_r2@5",
        ] {
            let m: MetricSpec = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert_eq!(
            "P@20".parse::<MetricSpec>().unwrap(),
            MetricSpec::precision(20)
        );
        assert_eq!(
            "recip_rank".parse::<MetricSpec>().unwrap(),
            MetricSpec::mrr()
        );
        assert_eq!(
            "recip_rank_r2".parse::<MetricSpec>().unwrap(),
            MetricSpec::mrr().with_min_rel(2)
        );
        for bad in ["ndcg", "p@0", "map_exp", "bleu", "map_r0", "ndcg@x"] {
            assert!(bad.parse::<MetricSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn tsv_layout() {
        let q = qrels(&[("1", "a", 1), ("2", "b", 1)]);
        let r = evaluate(&[run("1", &["a"])], &q, MetricSpec::precision(1)).unwrap();
        assert_eq!(
            reports_to_tsv(&[r]),
            "p@1\t1\t1.0000\np@1\t2\t0.0000\np@1\tall\t0.5000\n"
        );
    }
}
