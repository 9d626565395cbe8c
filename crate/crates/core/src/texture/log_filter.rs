//! Laplacian-of-Gaussian filter bank.

use ndarray::Array2;

use crate::error::{GgrError, Result};

/// Quantum of the DC-corrected taps. Every tap is an integer multiple of it,
/// which makes the kernel sum exactly zero under any summation order.
const TAP_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct LogKernel {
    pub sigma: f64,
    /// Half-width `k = ceil(3 sigma)`; taps are `(2k+1) x (2k+1)`.
    pub radius: usize,
    pub taps: Array2<f64>,
}

impl LogKernel {
    pub fn is_identity(&self) -> bool {
        self.sigma == 0.0
    }
}

/// `-1/(pi sigma^4) * (1 - r^2/(2 sigma^2)) * exp(-r^2/(2 sigma^2))`.
pub fn log_response(x: f64, y: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let q = (x * x + y * y) / (2.0 * s2);
    -1.0 / (std::f64::consts::PI * s2 * s2) * (1.0 - q) * (-q).exp()
}

/// Samples the LoG on the integer grid and removes its DC component.
/// `sigma = 0` yields the identity (single unit tap).
pub fn log_kernel(sigma: f64) -> Result<LogKernel> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(GgrError::invalid("sigma", format!("{sigma} must be finite and >= 0")));
    }
    if sigma == 0.0 {
        return Ok(LogKernel {
            sigma,
            radius: 0,
            taps: Array2::from_elem((1, 1), 1.0),
        });
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let width = 2 * radius + 1;
    let r = radius as f64;
    let raw = Array2::from_shape_fn((width, width), |(i, j)| log_response(j as f64 - r, i as f64 - r, sigma));
    let mean = raw.sum() / (width * width) as f64;

    let mut quanta: Array2<i64> = raw.mapv(|v| ((v - mean) / TAP_QUANTUM).round() as i64);
    let residual: i64 = quanta.sum();
    quanta[[radius, radius]] -= residual;
    let taps = quanta.mapv(|q| q as f64 * TAP_QUANTUM);
    Ok(LogKernel { sigma, radius, taps })
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
pub(crate) fn reflect(idx: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = idx.rem_euclid(period);
    if m < n {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// 2-D convolution with reflect padding; the identity kernel returns a copy.
pub fn apply_log(image: &Array2<f64>, kernel: &LogKernel) -> Array2<f64> {
    if kernel.is_identity() {
        return image.clone();
    }
    let (h, w) = image.dim();
    let k = kernel.radius;
    let ki = k as isize;
    let padded = Array2::from_shape_fn((h + 2 * k, w + 2 * k), |(i, j)| {
        image[[reflect(i as isize - ki, h), reflect(j as isize - ki, w)]]
    });
    let kw = 2 * k + 1;
    // Convolution flips the kernel.
    let flipped: Vec<f64> = (0..kw * kw)
        .map(|t| kernel.taps[[kw - 1 - t / kw, kw - 1 - t % kw]])
        .collect();
    let mut out = Array2::zeros((h, w));
    let pad_w = w + 2 * k;
    let pslice = padded.as_slice().expect("standard layout");
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for a in 0..kw {
                let row = &pslice[(i + a) * pad_w + j..(i + a) * pad_w + j + kw];
                let taps = &flipped[a * kw..(a + 1) * kw];
                acc += row.iter().zip(taps).map(|(x, t)| x * t).sum::<f64>();
            }
            out[[i, j]] = acc;
        }
    }
    out
}
