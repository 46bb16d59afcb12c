use serde::Serialize;

use crate::dataset::Label;
use crate::{Error, Result};

/// ROC and precision-recall curves plus the ROC area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curves {
    /// `(false-positive rate, true-positive rate)`, starting at `(0, 0)`,
    /// non-decreasing in both coordinates.
    pub roc: Vec<(f64, f64)>,
    /// `(recall, precision)`, one point per distinct grade.
    pub pr: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Curves over every distinct grade used as a threshold. Tied grades move
/// the ROC curve diagonally, which gives ties half credit in the area.
pub fn roc_pr_auc(grades: &[f64], labels: &[Label]) -> Result<Curves> {
    if grades.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} grades vs {} labels",
            grades.len(),
            labels.len()
        )));
    }
    if grades.iter().any(|g| g.is_nan()) {
        return Err(Error::Domain("grades contain NaN".into()));
    }
    let pos = labels.iter().filter(|l| l.is_positive()).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Domain("ROC needs at least one sample of each class".into()));
    }

    let mut order: Vec<usize> = (0..grades.len()).collect();
    order.sort_by(|&a, &b| grades[b].total_cmp(&grades[a]));

    let mut roc = vec![(0.0, 0.0)];
    let mut pr = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area in units of (1/pos)(1/neg)
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let g = grades[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && grades[order[i]] == g {
            if labels[order[i]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) as u128 * (tp + tp0) as u128;
        roc.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        pr.push((tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64));
    }
    let auc = area2 as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok(Curves { roc, pr, auc })
}
