//! Cyclic coordinate descent for `(1/2)||y - X b||^2 + lambda ||b||_1`.

use ndarray::ArrayView2;

use crate::error::{GgrError, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective after each sweep.
    pub objective_trace: Vec<f64>,
}

impl LassoFit {
    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Smallest penalty with an all-zero solution: `max_j |x_j . y|`.
pub fn lambda_max(x: ArrayView2<f64>, y: &[f64]) -> f64 {
    x.columns()
        .into_iter()
        .map(|c| c.iter().zip(y).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

pub fn lasso_fit(x: ArrayView2<f64>, y: &[f64], lambda: f64) -> Result<LassoFit> {
    lasso_fit_with(x, y, lambda, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)
}

pub fn lasso_fit_with(
    x: ArrayView2<f64>,
    y: &[f64],
    lambda: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<LassoFit> {
    let (n, d) = x.dim();
    if y.len() != n {
        return Err(GgrError::Shape(format!("X has {n} rows, y has {}", y.len())));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(GgrError::invalid("lambda", "must be finite and >= 0"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(GgrError::NonFinite("lasso inputs"));
    }
    let columns: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    let norms: Vec<f64> = columns.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let mut beta = vec![0.0; d];
    let mut resid = y.to_vec();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            if norms[j] == 0.0 {
                continue;
            }
            let col = &columns[j];
            let rho = col.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() + norms[j] * beta[j];
            let updated = soft_threshold(rho, lambda) / norms[j];
            let delta = updated - beta[j];
            if delta != 0.0 {
                for (r, a) in resid.iter_mut().zip(col) {
                    *r -= delta * a;
                }
                beta[j] = updated;
                max_change = max_change.max(delta.abs());
            }
        }
        let objective = 0.5 * resid.iter().map(|r| r * r).sum::<f64>()
            + lambda * beta.iter().map(|b| b.abs()).sum::<f64>();
        trace.push(objective);
        if max_change < tol {
            converged = true;
            break;
        }
    }
    Ok(LassoFit {
        coefficients: beta,
        sweeps,
        converged,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use ndarray::{array, Array2};

    #[test]
    fn orthonormal_closed_form() {
        let x = Array2::<f64>::eye(2);
        let fit = lasso_fit(x.view(), &[2.0, 0.5], 1.0).unwrap();
        assert_eq!(fit.coefficients, vec![1.0, 0.0]);
        assert!(fit.converged);
    }

    #[test]
    fn zero_above_lambda_max() {
        let x = array![[1.0, -0.5], [-1.0, 0.2], [0.3, 1.0]];
        let y = [0.4, -0.9, 1.3];
        let lm = lambda_max(x.view(), &y);
        for lambda in [lm, 2.0 * lm] {
            let fit = lasso_fit(x.view(), &y, lambda).unwrap();
            assert!(fit.coefficients.iter().all(|&b| b == 0.0));
        }
        let fit = lasso_fit(x.view(), &y, 0.5 * lm).unwrap();
        assert!(!fit.support().is_empty());
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = SplitMix64::new(17);
        let x = Array2::from_shape_fn((40, 12), |_| rng.normal());
        let y: Vec<f64> = (0..40).map(|i| x[[i, 0]] * 2.0 - x[[i, 3]] + 0.3 * rng.normal()).collect();
        let fit = lasso_fit(x.view(), &y, 0.1 * lambda_max(x.view(), &y)).unwrap();
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = array![[1.0], [f64::NAN]];
        assert!(lasso_fit(x.view(), &[1.0, 2.0], 0.1).is_err());
        let x = array![[1.0], [2.0]];
        assert!(lasso_fit(x.view(), &[1.0, 2.0], -1.0).is_err());
        assert!(lasso_fit(x.view(), &[1.0], 0.1).is_err());
    }
}
