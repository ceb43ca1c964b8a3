//! Effectiveness metrics and significance testing.
//!
//! Metrics follow trec_eval conventions: linear-gain nDCG with the ideal
//! ranking drawn from all judged documents, binary metrics at a configurable
//! grade threshold, and queries without relevant judgments skipped rather
//! than scored.

mod metrics;
mod significance;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{
    average_precision, evaluate, mrr, ndcg_at_k, precision_at_k, reports_to_json, reports_to_tsv,
    EvalReport, Gain, MetricKind, MetricSpec,
};
pub use significance::{holm_bonferroni, paired_ttest, ttest_differences, TTest};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid metric `{0}`")]
    InvalidMetric(String),
    #[error("query sets differ: only in first {only_a:?}, only in second {only_b:?}")]
    MismatchedQids {
        only_a: Vec<String>,
        only_b: Vec<String>,
    },
    #[error("paired test needs at least 2 queries, got {0}")]
    TooFewQueries(usize),
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("baseline run has no `{0}` report")]
    MissingMetric(String),
}

/// A named run's reports, one per metric.
#[derive(Debug, Clone)]
pub struct RunReports {
    pub name: String,
    pub reports: Vec<EvalReport>,
}

impl RunReports {
    pub fn new(name: impl Into<String>, reports: Vec<EvalReport>) -> Self {
        Self {
            name: name.into(),
            reports,
        }
    }

    fn get(&self, metric: &MetricSpec) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.metric == *metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub run: String,
    pub metric: MetricSpec,
    pub mean: f64,
    /// Relative change against the baseline mean, in percent; `None` for the
    /// baseline itself or when the baseline mean is zero.
    pub improvement_pct: Option<f64>,
    pub p_value: Option<f64>,
    /// `p < alpha` without correction.
    pub significant: bool,
    /// Rejected by Holm's procedure over all runs for this metric.
    pub significant_holm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: String,
    pub alpha: f64,
    pub rows: Vec<ComparisonRow>,
}

/// Compares every run against `baseline` on each of the baseline's metrics.
/// The Holm family for a metric is the set of non-baseline runs.
pub fn compare(
    baseline: &RunReports,
    runs: &[RunReports],
    alpha: f64,
) -> Result<ComparisonTable, EvalError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EvalError::InvalidAlpha(alpha));
    }
    let mut rows = Vec::new();
    for base in &baseline.reports {
        rows.push(ComparisonRow {
            run: baseline.name.clone(),
            metric: base.metric,
            mean: base.mean,
            improvement_pct: None,
            p_value: None,
            significant: false,
            significant_holm: false,
        });
        let mut family = Vec::new();
        for run in runs {
            let r = run
                .get(&base.metric)
                .ok_or_else(|| EvalError::MissingMetric(base.metric.to_string()))?;
            let p = if base.per_query.len() < 2 {
                1.0
            } else {
                paired_ttest(&r.per_query, &base.per_query)?.p
            };
            family.push(p);
            rows.push(ComparisonRow {
                run: run.name.clone(),
                metric: base.metric,
                mean: r.mean,
                improvement_pct: (base.mean != 0.0)
                    .then(|| (r.mean - base.mean) / base.mean * 100.0),
                p_value: Some(p),
                significant: p < alpha,
                significant_holm: false,
            });
        }
        let flags = holm_bonferroni(&family, alpha);
        let start = rows.len() - family.len();
        for (row, flag) in rows[start..].iter_mut().zip(flags) {
            row.significant_holm = flag && row.significant;
        }
    }
    Ok(ComparisonTable {
        baseline: baseline.name.clone(),
        alpha,
        rows,
    })
}

impl ComparisonTable {
    /// Tab-separated table with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "run\tmetric\tmean\timprovement_pct\tp_value\tsignificant\tsignificant_holm\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.4}\t{}\t{}\t{}\t{}",
                r.run,
                r.metric,
                r.mean,
                r.improvement_pct.map_or("-".into(), |v| format!("{v:+.2}")),
                r.p_value.map_or("-".into(), |v| format!("{v:.4}")),
                r.significant,
                r.significant_holm
            );
        }
        out
    }

    /// Fixed-width table for terminals. `*` marks raw significance, `†`
    /// significance after Holm correction.
    pub fn render(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.run.len())
            .max()
            .unwrap_or(3)
            .max(3);
        let mut out = format!(
            "{:<width$}  {:<12} {:>8} {:>9} {:>8}\n",
            "run", "metric", "mean", "Δ%", "p"
        );
        for r in &self.rows {
            let marks = match (r.significant, r.significant_holm) {
                (_, true) => " *†",
                (true, false) => " *",
                _ => "",
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:<12} {:>8.4} {:>9} {:>8}{marks}",
                r.run,
                r.metric.to_string(),
                r.mean,
                r.improvement_pct
                    .map_or("-".into(), |v| format!("{v:+.1}%")),
                r.p_value.map_or("-".into(), |v| format!("{v:.4}")),
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn report(metric: MetricSpec, vals: &[f64]) -> EvalReport {
        let per_query: BTreeMap<String, f64> = vals
            .iter()
            .enumerate()
            .map(|(i, v)| (i.to_string(), *v))
            .collect();
        EvalReport {
            metric,
            mean: vals.iter().sum::<f64>() / vals.len() as f64,
            count: vals.len(),
            per_query,
            skipped: vec![],
        }
    }

    #[test]
    fn identical_runs_have_zero_delta() {
        let m = MetricSpec::ndcg(10);
        let base = RunReports::new("bm25", vec![report(m, &[0.2, 0.4])]);
        let same = RunReports::new("copy", vec![report(m, &[0.2, 0.4])]);
        let t = compare(&base, &[same], 0.05).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[1].improvement_pct, Some(0.0));
        assert_eq!(t.rows[1].p_value, Some(1.0));
        assert!(!t.rows[1].significant_holm);
    }

    #[test]
    fn percentages_and_flags() {
        let m = MetricSpec::map();
        let base = RunReports::new("b", vec![report(m, &[0.0, 0.1, 0.2, 0.3, 0.4])]);
        let better = RunReports::new("x", vec![report(m, &[0.1, 0.3, 0.5, 0.7, 0.9])]);
        let t = compare(&base, &[better], 0.05).unwrap();
        let row = &t.rows[1];
        assert!((row.improvement_pct.unwrap() - 150.0).abs() < 1e-9);
        assert!((row.p_value.unwrap() - 0.0132).abs() < 5e-4);
        assert!(row.significant && row.significant_holm);
        assert!(t.render().contains("+150.0%"));
        assert!(t
            .to_tsv()
            .lines()
            .nth(2)
            .unwrap()
            .starts_with("x\tmap\t0.5000\t+150.00\t"));
    }

    #[test]
    fn single_run_table() {
        let m = MetricSpec::mrr();
        let t = compare(&RunReports::new("only", vec![report(m, &[1.0])]), &[], 0.05).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(compare(&RunReports::new("only", vec![]), &[], 1.5).is_err());
    }
}
