use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::curves::{roc_pr_auc, Curves};
use super::metrics::{threshold_sweep, ThresholdRow};
use super::stats::{confidence_interval, rank_sum_test, Aggregate, RankSumMethod, RankSumTest};
use super::timing::Timing;
use crate::dataset::Label;
use crate::Result;

/// A rate with its normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateInterval {
    pub rate: f64,
    pub half_width: f64,
    pub n: u64,
}

impl RateInterval {
    fn new(rate: Option<f64>, n: u64, z: f64) -> Result<Option<Self>> {
        match rate {
            Some(rate) if n > 0 => Ok(Some(Self {
                rate,
                half_width: confidence_interval(rate, n, z)?,
                n,
            })),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSummary {
    pub threshold: f64,
    pub sensitivity: Option<RateInterval>,
    pub specificity: Option<RateInterval>,
    pub accuracy: Option<RateInterval>,
}

/// Everything the `eval` command reports for one model on one test set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<ThresholdRow>,
    #[serde(skip)]
    pub curves: Curves,
    pub auc: f64,
    pub z: f64,
    pub intervals: Vec<ThresholdSummary>,
    /// Rank-sum test of positive-class grades against negative-class grades.
    pub separation: Option<RankSumTest>,
    pub timings: BTreeMap<String, Timing>,
    pub run_aggregates: BTreeMap<String, Aggregate>,
}

impl EvalReport {
    pub fn build(grades: &[f64], labels: &[Label], thresholds: &[f64], z: f64) -> Result<Self> {
        let rows = threshold_sweep(grades, labels, thresholds)?;
        let curves = roc_pr_auc(grades, labels)?;
        let intervals = rows
            .iter()
            .map(|r| {
                let c = &r.confusion;
                Ok(ThresholdSummary {
                    threshold: r.threshold,
                    sensitivity: RateInterval::new(r.sensitivity, c.positives(), z)?,
                    specificity: RateInterval::new(r.specificity, c.negatives(), z)?,
                    accuracy: RateInterval::new(c.accuracy().ok(), c.total(), z)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (pos, neg): (Vec<f64>, Vec<f64>) = {
            let pos = grades.iter().zip(labels).filter(|(_, l)| l.is_positive()).map(|(&g, _)| g);
            let neg = grades.iter().zip(labels).filter(|(_, l)| !l.is_positive()).map(|(&g, _)| g);
            (pos.collect(), neg.collect())
        };
        let separation = rank_sum_test(&pos, &neg, RankSumMethod::Auto).ok();
        Ok(Self {
            rows,
            auc: curves.auc,
            curves,
            z,
            intervals,
            separation,
            timings: BTreeMap::new(),
            run_aggregates: BTreeMap::new(),
        })
    }

    pub fn with_timing(mut self, name: &str, timing: Timing) -> Self {
        self.timings.insert(name.to_string(), timing);
        self
    }

    /// `threshold,tp,fp,tn,fn,sensitivity,specificity,accuracy`; undefined
    /// rates are left empty.
    pub fn thresholds_csv(&self) -> String {
        let mut out = String::from("threshold,tp,fp,tn,fn,sensitivity,specificity,accuracy\n");
        for r in &self.rows {
            let c = &r.confusion;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.threshold,
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                opt(r.sensitivity),
                opt(r.specificity),
                opt(c.accuracy().ok())
            );
        }
        out
    }

    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (x, y) in &self.curves.roc {
            let _ = writeln!(out, "{x},{y}");
        }
        out
    }

    pub fn pr_csv(&self) -> String {
        let mut out = String::from("recall,precision\n");
        for (x, y) in &self.curves.pr {
            let _ = writeln!(out, "{x},{y}");
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::DEFAULT_THRESHOLDS;
    use crate::RngStream;

    #[test]
    fn report_tables() {
        let mut s = RngStream::new(8, 0);
        let labels: Vec<Label> = (0..60).map(|i| Label::from_decision(i < 20)).collect();
        let grades: Vec<f64> = labels
            .iter()
            .map(|l| if l.is_positive() { 0.3 + 0.7 * s.next_f64() } else { 0.5 * s.next_f64() })
            .collect();
        let r = EvalReport::build(&grades, &labels, &DEFAULT_THRESHOLDS, 1.96).unwrap();
        assert_eq!(r.thresholds_csv().lines().count(), 5);
        assert!(r.roc_csv().starts_with("fpr,tpr\n0,0\n"));
        assert!(r.pr_csv().starts_with("recall,precision\n"));
        assert!(r.separation.unwrap().p_value < 1e-3);
        let json = r.summary_json().unwrap();
        assert!(json.contains("\"auc\""));
    }

    #[test]
    fn undefined_rates_are_blank() {
        let labels = vec![Label::Positive, Label::Negative];
        let mut r = EvalReport::build(&[0.9, 0.1], &labels, &[0.5], 1.96).unwrap();
        r.rows[0].specificity = None;
        let line = r.thresholds_csv().lines().nth(1).unwrap().to_string();
        assert!(line.contains(",,"), "{line}");
    }
}
