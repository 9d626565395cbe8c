use crate::error::{GgrError, Result};

pub const FIRST_ORDER_NAMES: [&str; 10] = [
    "mean", "sd", "p10_mean", "p25_mean", "p50_mean", "p10_sd", "p25_sd", "p50_sd", "kurtosis", "skewness",
];

const PERCENTILES: [f64; 3] = [10.0, 25.0, 50.0];

/// What fills the `p*_mean` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PercentileMode {
    /// Mean of the lower tail `{x <= P_p}`.
    #[default]
    LowerTail,
    /// The percentile value `P_p` itself.
    Value,
}

/// Linear-interpolation percentile of sorted data (`pos = p/100 * (n-1)`).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Ten intensity statistics of `values`, named by [`FIRST_ORDER_NAMES`].
///
/// SDs use the population divisor; kurtosis is excess (`m4/m2^2 - 3`) and
/// skewness is `m3/m2^1.5`, both 0 for constant input.
pub fn first_order_features(values: &[f64], mode: PercentileMode) -> Result<[f64; 10]> {
    if values.len() < 2 {
        return Err(GgrError::invalid("mask", "first-order statistics need at least 2 in-mask pixels"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mean, sd) = mean_sd(&sorted);

    let mut out = [0.0; 10];
    out[0] = mean;
    out[1] = sd;
    for (k, &p) in PERCENTILES.iter().enumerate() {
        let cut = percentile_sorted(&sorted, p);
        let tail_len = sorted.partition_point(|&x| x <= cut);
        let (tail_mean, tail_sd) = mean_sd(&sorted[..tail_len]);
        out[2 + k] = match mode {
            PercentileMode::LowerTail => tail_mean,
            PercentileMode::Value => cut,
        };
        out[5 + k] = tail_sd;
    }
    if sd > 0.0 {
        let n = sorted.len() as f64;
        let (m2, m3, m4) = sorted.iter().fold((0.0, 0.0, 0.0), |(a, b, c), x| {
            let d = x - mean;
            let d2 = d * d;
            (a + d2, b + d2 * d, c + d2 * d2)
        });
        let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
        out[8] = m4 / (m2 * m2) - 3.0;
        out[9] = m3 / m2.powf(1.5);
    }
    Ok(out)
}
