use ndarray::ArrayView2;
use rayon::prelude::*;

use super::special::{chi2_sf, f_sf};
use crate::error::{GgrError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestStat {
    pub score: f64,
    pub p_value: f64,
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GgrError::NonFinite("feature column"));
    }
    Ok(())
}

/// Two-group one-way ANOVA of `x` split by `labels`.
pub fn f_test(x: &[f64], labels: &[bool]) -> Result<TestStat> {
    if x.len() != labels.len() {
        return Err(GgrError::Shape(format!("{} values vs {} labels", x.len(), labels.len())));
    }
    if x.len() < 3 {
        return Err(GgrError::invalid("n", "F-test needs at least 3 samples"));
    }
    check_finite(x)?;
    let mut sum = [0.0; 2];
    let mut count = [0usize; 2];
    for (&v, &l) in x.iter().zip(labels) {
        sum[l as usize] += v;
        count[l as usize] += 1;
    }
    if count[0] == 0 || count[1] == 0 {
        return Err(GgrError::SingleClass);
    }
    let n = x.len() as f64;
    let grand = (sum[0] + sum[1]) / n;
    let means = [sum[0] / count[0] as f64, sum[1] / count[1] as f64];
    let ssb: f64 = (0..2).map(|c| count[c] as f64 * (means[c] - grand).powi(2)).sum();
    let ssw: f64 = x
        .iter()
        .zip(labels)
        .map(|(&v, &l)| (v - means[l as usize]).powi(2))
        .sum();
    let (df1, df2) = (1.0, n - 2.0);
    let f = if ssw == 0.0 {
        if ssb == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (ssb / df1) / (ssw / df2)
    };
    Ok(TestStat {
        score: f,
        p_value: f_sf(f, df1, df2),
    })
}

/// Chi-squared statistic of a non-negative feature's class sums against the
/// class-size proportional split of its total.
pub fn chi2_test(x: &[f64], labels: &[bool]) -> Result<TestStat> {
    if x.len() != labels.len() {
        return Err(GgrError::Shape(format!("{} values vs {} labels", x.len(), labels.len())));
    }
    check_finite(x)?;
    if x.iter().any(|&v| v < 0.0) {
        return Err(GgrError::invalid("x", "chi-squared test needs non-negative values"));
    }
    let mut observed = [0.0; 2];
    let mut count = [0usize; 2];
    for (&v, &l) in x.iter().zip(labels) {
        observed[l as usize] += v;
        count[l as usize] += 1;
    }
    if count[0] == 0 || count[1] == 0 {
        return Err(GgrError::SingleClass);
    }
    let total = observed[0] + observed[1];
    if total == 0.0 {
        return Ok(TestStat {
            score: 0.0,
            p_value: 1.0,
        });
    }
    let n = x.len() as f64;
    let chi2: f64 = (0..2)
        .map(|c| {
            let expected = total * count[c] as f64 / n;
            (observed[c] - expected).powi(2) / expected
        })
        .sum();
    Ok(TestStat {
        score: chi2,
        p_value: chi2_sf(chi2, 1.0),
    })
}

pub fn f_test_columns(x: ArrayView2<f64>, labels: &[bool]) -> Result<Vec<TestStat>> {
    (0..x.ncols())
        .into_par_iter()
        .map(|j| f_test(&x.column(j).to_vec(), labels))
        .collect()
}

/// Min-max scales each column to `[0, 1]` before testing; constant columns
/// become all-zero and score 0.
pub fn chi2_test_columns(x: ArrayView2<f64>, labels: &[bool]) -> Result<Vec<TestStat>> {
    (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let col = x.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = hi - lo;
            let scaled: Vec<f64> = col
                .iter()
                .map(|&v| if range > 0.0 { (v - lo) / range } else { 0.0 })
                .collect();
            chi2_test(&scaled, labels)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anova_worked_example() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [false, false, false, true, true, true];
        let t = f_test(&x, &y).unwrap();
        assert_eq!(t.score, 13.5);
        assert!((t.p_value - 0.021_311_641_128_756_72).abs() < 1e-4);
    }

    #[test]
    fn anova_equal_means() {
        let t = f_test(&[1.0, 3.0, 2.0, 2.0], &[false, false, true, true]).unwrap();
        assert_eq!(t.score, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn anova_degenerate_cases() {
        assert!(matches!(f_test(&[1.0, 2.0, 3.0], &[true; 3]), Err(GgrError::SingleClass)));
        let t = f_test(&[5.0; 4], &[false, false, true, true]).unwrap();
        assert_eq!((t.score, t.p_value), (0.0, 1.0));
        let t = f_test(&[1.0, 1.0, 2.0, 2.0], &[false, false, true, true]).unwrap();
        assert_eq!((t.score, t.p_value), (f64::INFINITY, 0.0));
    }

    #[test]
    fn anova_affine_invariance() {
        let x = [0.3, 1.7, 2.2, 5.1, 4.4, 3.9, 0.8];
        let y = [false, false, true, true, true, false, true];
        let a = f_test(&x, &y).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| -3.5 * v + 12.0).collect();
        let b = f_test(&x2, &y).unwrap();
        assert!((a.score - b.score).abs() < 1e-10 * a.score);
        assert!((a.p_value - b.p_value).abs() < 1e-12);
    }

    #[test]
    fn chi2_worked_example() {
        let t = chi2_test(&[1.0, 1.0, 0.0, 0.0], &[true, true, false, false]).unwrap();
        assert_eq!(t.score, 2.0);
        assert!((t.p_value - 0.157_299_207_050_281_05).abs() < 1e-4);
    }

    #[test]
    fn chi2_constant_and_scaling() {
        let y = [true, false, true, false];
        assert_eq!(chi2_test(&[0.5; 4], &y).unwrap().score, 0.0);
        let z = chi2_test(&[0.0; 4], &y).unwrap();
        assert_eq!((z.score, z.p_value), (0.0, 1.0));
        let x = [0.2, 0.9, 0.4, 0.1];
        let a = chi2_test(&x, &y).unwrap().score;
        let b = chi2_test(&x.map(|v| 2.0 * v), &y).unwrap().score;
        assert!((b - 2.0 * a).abs() < 1e-12);
        assert!(chi2_test(&[-1.0, 1.0, 0.0, 0.0], &y).is_err());
    }
}
