use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    /// Two-sided p-value.
    pub p: f64,
}

/// Two-sided paired t-test of `a` against `b` over their common qids.
///
/// Differences with zero variance yield `p = 1.0` by convention (and
/// `t = 0` when the mean difference is zero, `±inf` otherwise).
pub fn paired_ttest(
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
) -> Result<TTest, EvalError> {
    let only_a: Vec<String> = a.keys().filter(|q| !b.contains_key(*q)).cloned().collect();
    let only_b: Vec<String> = b.keys().filter(|q| !a.contains_key(*q)).cloned().collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(EvalError::MismatchedQids { only_a, only_b });
    }
    let diffs: Vec<f64> = a.iter().map(|(q, x)| x - b[q]).collect();
    ttest_differences(&diffs)
}

/// One-sample two-sided t-test of `diffs` against zero mean.
pub fn ttest_differences(diffs: &[f64]) -> Result<TTest, EvalError> {
    let n = diffs.len();
    if n < 2 {
        return Err(EvalError::TooFewQueries(n));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var.sqrt() <= 1e-12 * (1.0 + mean.abs()) {
        let t = if mean == 0.0 {
            0.0
        } else {
            mean.signum() * f64::INFINITY
        };
        return Ok(TTest { t, df, p: 1.0 });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTest { t, df, p })
}

/// Holm's step-down procedure. Returns one rejection flag per p-value, in
/// input order. Ties keep input order.
///
/// # Panics
/// If `alpha` is not in (0, 1).
pub fn holm_bonferroni(p_values: &[f64], alpha: f64) -> Vec<bool> {
    assert!(
        alpha > 0.0 && alpha < 1.0,
        "alpha must lie in (0, 1), got {alpha}"
    );
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let mut reject = vec![false; m];
    for (rank, &i) in order.iter().enumerate() {
        if p_values[i] <= alpha / (m - rank) as f64 {
            reject[i] = true;
        } else {
            break;
        }
    }
    reject
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(vals: &[(&str, f64)]) -> BTreeMap<String, f64> {
        vals.iter().map(|(q, v)| (q.to_string(), *v)).collect()
    }

    #[test]
    fn reference_p_value() {
        let r = ttest_differences(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((r.t - 4.2426).abs() < 1e-4);
        assert!((r.p - 0.0132).abs() < 5e-4, "{}", r.p);
        assert_eq!(r.df, 4);
    }

    #[test]
    fn degenerate_cases() {
        let a = map(&[("1", 0.3), ("2", 0.5)]);
        assert_eq!(paired_ttest(&a, &a).unwrap().p, 1.0);
        let r = ttest_differences(&[1.0, -1.0]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        assert!(matches!(
            ttest_differences(&[1.0]),
            Err(EvalError::TooFewQueries(1))
        ));
    }

    #[test]
    fn mismatch_lists_symmetric_difference() {
        let a = map(&[("1", 0.0), ("2", 0.0)]);
        let b = map(&[("2", 0.0), ("3", 0.0)]);
        match paired_ttest(&a, &b) {
            Err(EvalError::MismatchedQids { only_a, only_b }) => {
                assert_eq!(only_a, vec!["1"]);
                assert_eq!(only_b, vec!["3"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn holm_examples() {
        assert_eq!(
            holm_bonferroni(&[0.01, 0.04, 0.03], 0.05),
            vec![true, false, false]
        );
        assert_eq!(holm_bonferroni(&[0.04], 0.05), vec![true]);
        assert_eq!(holm_bonferroni(&[1.0, 1.0], 0.05), vec![false, false]);
        assert!(holm_bonferroni(&[], 0.05).is_empty());
    }
}
