use serde::{Deserialize, Serialize};

use crate::error::{GgrError, Result};

/// Recurrence is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
    pub accuracy: f64,
    /// `None` when the fold has no positives.
    pub sensitivity: Option<f64>,
    /// `None` when the fold has no negatives.
    pub specificity: Option<f64>,
}

/// Hard labels are `probability >= threshold`.
pub fn confusion_metrics(probabilities: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionMetrics> {
    check_pair(probabilities, labels)?;
    let (mut tp, mut fn_, mut fp, mut tn) = (0, 0, 0, 0);
    for (&p, &l) in probabilities.iter().zip(labels) {
        match (p >= threshold, l) {
            (true, true) => tp += 1,
            (false, true) => fn_ += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if a + b == 0 { None } else { Some(a as f64 / (a + b) as f64) };
    Ok(ConfusionMetrics {
        tp,
        fn_,
        fp,
        tn,
        accuracy: (tp + tn) as f64 / labels.len() as f64,
        sensitivity: ratio(tp, fn_),
        specificity: ratio(tn, fp),
    })
}

fn check_pair(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(GgrError::Shape(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if scores.is_empty() {
        return Err(GgrError::invalid("scores", "empty"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(GgrError::NonFinite("scores"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points from `(0,0)` to `(1,1)`, one step per distinct score taken in
/// descending order; tied scores move together.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    check_pair(scores, labels)?;
    let p = labels.iter().filter(|&&l| l).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(GgrError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { fpr: fp as f64 / n as f64, tpr: tp as f64 / p as f64 });
    }
    Ok(points)
}

/// Trapezoidal area under an ordered curve.
pub fn curve_area(curve: &[RocPoint]) -> f64 {
    curve.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    Ok(curve_area(&roc_curve(scores, labels)?))
}

/// `(#{pos > neg} + #{ties}/2) / (P * N)` by direct pair counting.
pub fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_pair(scores, labels)?;
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(GgrError::SingleClass);
    }
    let mut wins = 0.0;
    for &a in &pos {
        for &b in &neg {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos.len() * neg.len()) as f64)
}

pub const ROC_GRID: usize = 101;

/// TPR at `fpr`: the highest TPR reached at or before `fpr`, linearly
/// interpolated towards the next point with a larger FPR.
pub fn tpr_at(curve: &[RocPoint], fpr: f64) -> f64 {
    let Some(last) = curve.iter().rposition(|p| p.fpr <= fpr) else {
        return 0.0;
    };
    let a = curve[last];
    match curve.get(last + 1) {
        Some(b) if b.fpr > a.fpr => a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr),
        _ => a.tpr,
    }
}

/// Vertical average over the grid `fpr = i / 100`.
pub fn average_roc(curves: &[Vec<RocPoint>]) -> Vec<RocPoint> {
    (0..ROC_GRID)
        .map(|i| {
            let fpr = i as f64 / (ROC_GRID - 1) as f64;
            let tpr = if curves.is_empty() {
                0.0
            } else {
                curves.iter().map(|c| tpr_at(c, fpr)).sum::<f64>() / curves.len() as f64
            };
            RocPoint { fpr, tpr }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn confusion_by_hand() {
        let m = confusion_metrics(&[0.9, 0.4, 0.6, 0.1], &[true, true, false, false], 0.5).unwrap();
        assert_eq!((m.tp, m.fn_, m.fp, m.tn), (1, 1, 1, 1));
        assert_eq!((m.accuracy, m.sensitivity, m.specificity), (0.5, Some(0.5), Some(0.5)));
        let perfect = confusion_metrics(&[0.8, 0.2], &[true, false], 0.5).unwrap();
        assert_eq!((perfect.accuracy, perfect.sensitivity, perfect.specificity), (1.0, Some(1.0), Some(1.0)));
        let labels: Vec<bool> = (0..88).map(|i| i < 59).collect();
        let all_pos = confusion_metrics(&[1.0; 88], &labels, 0.5).unwrap();
        assert!((all_pos.accuracy - 0.6705).abs() < 1e-4);
        assert_eq!((all_pos.sensitivity, all_pos.specificity), (Some(1.0), Some(0.0)));
        let no_neg = confusion_metrics(&[0.7, 0.1], &[true, true], 0.5).unwrap();
        assert_eq!(no_neg.specificity, None);
        assert_eq!(confusion_metrics(&[0.5], &[true], 0.5).unwrap().tp, 1);
    }

    #[test]
    fn roc_shapes() {
        let c = roc_curve(&[0.9, 0.8, 0.3, 0.2], &[true, true, false, false]).unwrap();
        assert!(c.contains(&RocPoint { fpr: 0.0, tpr: 1.0 }));
        assert_eq!(curve_area(&c), 1.0);
        let flat = roc_curve(&[0.4; 5], &[true, false, true, false, false]).unwrap();
        assert_eq!(flat, vec![RocPoint { fpr: 0.0, tpr: 0.0 }, RocPoint { fpr: 1.0, tpr: 1.0 }]);
        assert_eq!(curve_area(&flat), 0.5);
        assert_eq!(auc(&[0.9, 0.8, 0.3, 0.2], &[true, false, false, true]).unwrap(), 0.5);
        assert!(matches!(roc_curve(&[0.1, 0.2], &[true, true]), Err(GgrError::SingleClass)));
    }

    #[test]
    fn roc_matches_threshold_sweep() {
        let mut rng = SplitMix64::new(17);
        let scores: Vec<f64> = (0..50).map(|_| (rng.uniform() * 12.0).floor() / 12.0).collect();
        let labels: Vec<bool> = (0..50).map(|_| rng.bernoulli(0.4)).collect();
        let curve = roc_curve(&scores, &labels).unwrap();
        let p = labels.iter().filter(|&&l| l).count() as f64;
        let n = 50.0 - p;
        let mut thresholds: Vec<f64> = scores.clone();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let mut sweep = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
        for t in thresholds {
            let tp = scores.iter().zip(&labels).filter(|(&s, &l)| s >= t && l).count() as f64;
            let fp = scores.iter().zip(&labels).filter(|(&s, &l)| s >= t && !l).count() as f64;
            sweep.push(RocPoint { fpr: fp / n, tpr: tp / p });
        }
        assert_eq!(curve, sweep);
    }

    #[test]
    fn average_roc_cases() {
        let diag = vec![RocPoint { fpr: 0.0, tpr: 0.0 }, RocPoint { fpr: 1.0, tpr: 1.0 }];
        let top = vec![RocPoint { fpr: 0.0, tpr: 0.0 }, RocPoint { fpr: 0.0, tpr: 1.0 }, RocPoint { fpr: 1.0, tpr: 1.0 }];
        let avg = average_roc(&[diag.clone(), top.clone()]);
        assert_eq!(avg.len(), 101);
        for p in &avg {
            assert!((p.tpr - (p.fpr + 1.0) / 2.0).abs() < 1e-15);
        }
        let single = average_roc(&[diag.clone()]);
        assert!(single.iter().all(|p| (p.tpr - p.fpr).abs() < 1e-15));
        assert_eq!(average_roc(&[top.clone(), top.clone()]), average_roc(&[top]));
    }
}
