use serde::{Deserialize, Serialize};

use crate::error::{GgrError, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub repeat: usize,
    pub fold: usize,
    /// Ascending row indices.
    pub train: Vec<usize>,
    /// Ascending row indices.
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub n: usize,
    pub stratified: bool,
    /// Repeat-major.
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn get(&self, repeat: usize, fold: usize) -> Option<&Fold> {
        self.folds.iter().find(|f| f.repeat == repeat && f.fold == fold)
    }
}

/// Repeated stratified k-fold plan. Repeat `r` shuffles each class with
/// seed `seed + r`, lists positives then negatives, and deals them to folds
/// round-robin. Falls back to an unstratified shuffle (with a warning) when
/// a class has fewer than `k` members.
pub fn make_folds(labels: &[bool], k: usize, repeats: usize, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 {
        return Err(GgrError::invalid("k", "need at least 2 folds"));
    }
    if repeats == 0 {
        return Err(GgrError::invalid("repeats", "must be >= 1"));
    }
    if n < k {
        return Err(GgrError::invalid("k", format!("{k} folds for {n} patients")));
    }
    let pos: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
    let stratified = pos.len() >= k && neg.len() >= k;
    if !stratified {
        log::warn!("class sizes {}/{} too small for {k}-fold stratification; using plain shuffled folds", pos.len(), neg.len());
    }
    let mut folds = Vec::with_capacity(k * repeats);
    for r in 0..repeats {
        let mut rng = SplitMix64::new(seed.wrapping_add(r as u64));
        let order: Vec<usize> = if stratified {
            let (mut p, mut q) = (pos.clone(), neg.clone());
            rng.shuffle(&mut p);
            rng.shuffle(&mut q);
            p.into_iter().chain(q).collect()
        } else {
            let mut all: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut all);
            all
        };
        let mut assignment = vec![0usize; n];
        for (t, &i) in order.iter().enumerate() {
            assignment[i] = t % k;
        }
        for f in 0..k {
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            folds.push(Fold { repeat: r, fold: f, train, test });
        }
    }
    Ok(FoldPlan { k, repeats, seed, n, stratified, folds })
}

/// Checks disjointness, coverage, size balance and (for stratified plans)
/// per-fold class balance within one patient.
pub fn check_plan(plan: &FoldPlan, labels: &[bool]) -> Result<()> {
    let n = labels.len();
    let bad = |d: String| Err(GgrError::invalid("folds", d));
    if plan.n != n {
        return bad(format!("plan for {} patients, labels for {n}", plan.n));
    }
    let pos_total = labels.iter().filter(|&&l| l).count() as f64;
    for r in 0..plan.repeats {
        let folds: Vec<&Fold> = plan.folds.iter().filter(|f| f.repeat == r).collect();
        if folds.len() != plan.k {
            return bad(format!("repeat {r} has {} folds", folds.len()));
        }
        let mut seen = vec![false; n];
        for f in &folds {
            for &i in &f.test {
                if i >= n || seen[i] {
                    return bad(format!("repeat {r}: index {i} repeated or out of range"));
                }
                seen[i] = true;
            }
            let mut both: Vec<usize> = f.train.iter().chain(&f.test).copied().collect();
            both.sort_unstable();
            if both != (0..n).collect::<Vec<_>>() {
                return bad(format!("repeat {r} fold {}: train and test do not partition", f.fold));
            }
        }
        if !seen.iter().all(|&s| s) {
            return bad(format!("repeat {r}: test folds do not cover every patient"));
        }
        let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
        if sizes.iter().max().unwrap_or(&0) - sizes.iter().min().unwrap_or(&0) > 1 {
            return bad(format!("repeat {r}: fold sizes {sizes:?}"));
        }
        if plan.stratified {
            for f in &folds {
                let expected = pos_total * f.test.len() as f64 / n as f64;
                let got = f.test.iter().filter(|&&i| labels[i]).count() as f64;
                if (got - expected).abs() > 1.0 {
                    return bad(format!("repeat {r} fold {}: {got} positives, expected {expected:.2}", f.fold));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_59_of_88() -> Vec<bool> {
        (0..88).map(|i| i % 3 != 2).collect()
    }

    #[test]
    fn eighty_eight_patients() {
        let labels = labels_59_of_88();
        assert_eq!(labels.iter().filter(|&&l| l).count(), 59);
        let plan = make_folds(&labels, 10, 5, 7).unwrap();
        assert!(plan.stratified);
        check_plan(&plan, &labels).unwrap();
        for r in 0..5 {
            let mut sizes: Vec<usize> = plan.folds.iter().filter(|f| f.repeat == r).map(|f| f.test.len()).collect();
            sizes.sort_unstable();
            assert_eq!(sizes, [8, 8, 9, 9, 9, 9, 9, 9, 9, 9]);
        }
        assert_eq!(plan, make_folds(&labels, 10, 5, 7).unwrap());
        assert_ne!(plan.folds[0].test, plan.folds[10].test);
    }

    #[test]
    fn small_class_falls_back() {
        let labels: Vec<bool> = (0..30).map(|i| i < 4).collect();
        let plan = make_folds(&labels, 5, 2, 0).unwrap();
        assert!(!plan.stratified);
        check_plan(&plan, &labels).unwrap();
    }

    #[test]
    fn rejects_impossible_plans() {
        assert!(make_folds(&[true, false], 3, 1, 0).is_err());
        assert!(make_folds(&[true, false, true], 1, 1, 0).is_err());
        assert!(make_folds(&[true, false, true], 2, 0, 0).is_err());
    }
}
