//! Univariate (F, chi-squared) and sparse (LASSO) selection of features or
//! genes against the recurrence label.

mod lasso;
pub mod special;
mod univariate;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{GgrError, Result};

pub use lasso::{lambda_max, lasso_fit, lasso_fit_with, soft_threshold, LassoFit, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
pub use univariate::{chi2_test, chi2_test_columns, f_test, f_test_columns, TestStat};

pub const DEFAULT_P_THRESHOLD: f64 = 0.02;
pub const DEFAULT_LAMBDA_FRAC: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    None,
    Ftest,
    Chi2,
    Lasso,
    #[default]
    Intersection,
}

impl SelectionMethod {
    pub fn tag(self) -> &'static str {
        match self {
            SelectionMethod::None => "none",
            SelectionMethod::Ftest => "ftest",
            SelectionMethod::Chi2 => "chi2",
            SelectionMethod::Lasso => "lasso",
            SelectionMethod::Intersection => "intersection",
        }
    }
}

impl std::str::FromStr for SelectionMethod {
    type Err = GgrError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => SelectionMethod::None,
            "ftest" => SelectionMethod::Ftest,
            "chi2" => SelectionMethod::Chi2,
            "lasso" => SelectionMethod::Lasso,
            "intersection" => SelectionMethod::Intersection,
            other => return Err(GgrError::invalid("method", format!("unknown selection method `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub method: SelectionMethod,
    pub p_threshold: f64,
    /// LASSO penalty as a fraction of `lambda_max` on the standardized design.
    pub lambda_frac: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            method: SelectionMethod::Intersection,
            p_threshold: DEFAULT_P_THRESHOLD,
            lambda_frac: DEFAULT_LAMBDA_FRAC,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_threshold > 0.0 && self.p_threshold <= 1.0) {
            return Err(GgrError::invalid("pvalue", "must be in (0, 1]"));
        }
        if !(self.lambda_frac >= 0.0 && self.lambda_frac.is_finite()) {
            return Err(GgrError::invalid("lambda_frac", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub method: SelectionMethod,
    /// F statistic for `ftest`/`intersection`/`none`, chi-squared for `chi2`,
    /// `|beta|` for `lasso`.
    pub scores: Vec<f64>,
    pub p_values: Vec<Option<f64>>,
    /// Ascending indices.
    pub selected: Vec<usize>,
    /// p-value cut, or lambda for `lasso`.
    pub threshold: f64,
    /// Intersection came out empty and the F-test set was used instead.
    pub fell_back: bool,
}

/// Indices with `p < threshold`, ascending.
pub fn select_by_pvalue(p_values: &[f64], threshold: f64) -> Vec<usize> {
    p_values
        .iter()
        .enumerate()
        .filter(|(_, p)| **p < threshold)
        .map(|(i, _)| i)
        .collect()
}

/// The `k` strongest features by F-test (smallest p, then largest F, then
/// lowest index), returned in ascending index order.
pub fn top_k_by_f(stats: &[TestStat], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&a, &b| {
        stats[a]
            .p_value
            .total_cmp(&stats[b].p_value)
            .then(stats[b].score.total_cmp(&stats[a].score))
            .then(a.cmp(&b))
    });
    let mut chosen: Vec<usize> = order.into_iter().take(k).collect();
    chosen.sort_unstable();
    chosen
}

/// Column-standardized copy (population SD); zero-variance columns become 0.
pub fn standardize_columns(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    let mut out = x.to_owned();
    for mut col in out.columns_mut() {
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        col.mapv_inplace(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 });
    }
    out
}

fn labels_as_centered(labels: &[bool]) -> Vec<f64> {
    let mean = labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64;
    labels.iter().map(|&l| f64::from(u8::from(l)) - mean).collect()
}

/// LASSO on the standardized design against centered labels at
/// `lambda_frac * lambda_max`.
pub fn lasso_select(x: ArrayView2<f64>, labels: &[bool], lambda_frac: f64) -> Result<(LassoFit, f64)> {
    let xs = standardize_columns(x);
    let y = labels_as_centered(labels);
    let lambda = lambda_frac * lambda_max(xs.view(), &y);
    Ok((lasso_fit(xs.view(), &y, lambda)?, lambda))
}

pub fn intersect_sorted(sets: &[&[usize]]) -> Vec<usize> {
    let Some((first, rest)) = sets.split_first() else {
        return Vec::new();
    };
    first
        .iter()
        .copied()
        .filter(|i| rest.iter().all(|s| s.binary_search(i).is_ok()))
        .collect()
}

/// Runs the configured selection of columns of `x` against `labels`.
pub fn select_features(x: ArrayView2<f64>, labels: &[bool], config: &SelectionConfig) -> Result<SelectionResult> {
    config.validate()?;
    if x.nrows() != labels.len() {
        return Err(GgrError::Shape(format!("{} rows vs {} labels", x.nrows(), labels.len())));
    }
    let d = x.ncols();
    let thr = config.p_threshold;
    let result = match config.method {
        SelectionMethod::None => {
            let f = f_test_columns(x, labels)?;
            SelectionResult {
                method: config.method,
                scores: f.iter().map(|t| t.score).collect(),
                p_values: f.iter().map(|t| Some(t.p_value)).collect(),
                selected: (0..d).collect(),
                threshold: 1.0,
                fell_back: false,
            }
        }
        SelectionMethod::Ftest | SelectionMethod::Chi2 => {
            let stats = if config.method == SelectionMethod::Ftest {
                f_test_columns(x, labels)?
            } else {
                chi2_test_columns(x, labels)?
            };
            let p: Vec<f64> = stats.iter().map(|t| t.p_value).collect();
            SelectionResult {
                method: config.method,
                scores: stats.iter().map(|t| t.score).collect(),
                p_values: p.iter().map(|&v| Some(v)).collect(),
                selected: select_by_pvalue(&p, thr),
                threshold: thr,
                fell_back: false,
            }
        }
        SelectionMethod::Lasso => {
            let (fit, lambda) = lasso_select(x, labels, config.lambda_frac)?;
            SelectionResult {
                method: config.method,
                scores: fit.coefficients.iter().map(|b| b.abs()).collect(),
                p_values: vec![None; d],
                selected: fit.support(),
                threshold: lambda,
                fell_back: false,
            }
        }
        SelectionMethod::Intersection => {
            let f = f_test_columns(x, labels)?;
            let chi = chi2_test_columns(x, labels)?;
            let (fit, _) = lasso_select(x, labels, config.lambda_frac)?;
            let f_set = select_by_pvalue(&f.iter().map(|t| t.p_value).collect::<Vec<_>>(), thr);
            let chi_set = select_by_pvalue(&chi.iter().map(|t| t.p_value).collect::<Vec<_>>(), thr);
            let lasso_set = fit.support();
            let mut selected = intersect_sorted(&[&lasso_set, &f_set, &chi_set]);
            let fell_back = selected.is_empty();
            if fell_back {
                log::warn!("empty LASSO/F/chi2 intersection; falling back to the F-test selection");
                selected = f_set;
            }
            SelectionResult {
                method: config.method,
                scores: f.iter().map(|t| t.score).collect(),
                p_values: f.iter().map(|t| Some(t.p_value)).collect(),
                selected,
                threshold: thr,
                fell_back,
            }
        }
    };
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn pvalue_threshold_is_strict() {
        assert_eq!(select_by_pvalue(&[0.01, 0.02, 0.5], 0.02), vec![0]);
        assert!(select_by_pvalue(&[1.0, 1.0], 0.02).is_empty());
        assert_eq!(select_by_pvalue(&[0.3, 0.99, 0.0], 1.0), vec![0, 1, 2]);
    }

    #[test]
    fn set_algebra() {
        assert_eq!(intersect_sorted(&[&[1, 2, 3], &[2, 3, 4], &[3, 5]]), vec![3]);
        assert!(intersect_sorted(&[&[1], &[2]]).is_empty());
    }

    #[test]
    fn top_k_prefers_small_p() {
        let stats = [
            TestStat { score: 1.0, p_value: 0.5 },
            TestStat { score: 9.0, p_value: 0.001 },
            TestStat { score: 30.0, p_value: 0.0 },
            TestStat { score: 40.0, p_value: 0.0 },
        ];
        assert_eq!(top_k_by_f(&stats, 2), vec![2, 3]);
        assert_eq!(top_k_by_f(&stats, 3), vec![1, 2, 3]);
    }

    #[test]
    fn raising_threshold_never_removes() {
        let mut rng = SplitMix64::new(5);
        let p: Vec<f64> = (0..50).map(|_| rng.uniform()).collect();
        let mut prev = Vec::new();
        for t in [0.0, 0.01, 0.02, 0.1, 0.5, 1.0] {
            let s = select_by_pvalue(&p, t);
            assert!(prev.iter().all(|i| s.contains(i)));
            prev = s;
        }
    }

    #[test]
    fn intersection_finds_planted_column() {
        let mut rng = SplitMix64::new(8);
        let n = 120;
        let labels: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
        let x = Array2::from_shape_fn((n, 30), |(i, j)| {
            let base = rng.uniform();
            if j == 7 {
                base + if labels[i] { 1.5 } else { 0.0 }
            } else {
                base
            }
        });
        let r = select_features(x.view(), &labels, &SelectionConfig::default()).unwrap();
        assert!(r.selected.contains(&7));
        assert!(!r.fell_back);
        for method in [SelectionMethod::None, SelectionMethod::Ftest, SelectionMethod::Chi2, SelectionMethod::Lasso] {
            let r = select_features(x.view(), &labels, &SelectionConfig { method, ..Default::default() }).unwrap();
            assert!(r.selected.contains(&7), "{method:?}");
            assert!(r.p_values.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn intersection_fallback() {
        // pure noise: the intersection is (almost surely) empty
        let mut rng = SplitMix64::new(1);
        let labels: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let x = Array2::from_shape_fn((40, 3), |_| rng.uniform());
        let r = select_features(x.view(), &labels, &SelectionConfig::default()).unwrap();
        if r.fell_back {
            let f = select_features(x.view(), &labels, &SelectionConfig { method: SelectionMethod::Ftest, ..Default::default() }).unwrap();
            assert_eq!(r.selected, f.selected);
        }
    }
}
