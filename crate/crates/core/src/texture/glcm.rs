use ndarray::{Array2, ArrayView2};

use crate::error::{GgrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GlcmAngle {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl GlcmAngle {
    pub const ALL: [GlcmAngle; 4] = [GlcmAngle::Deg0, GlcmAngle::Deg45, GlcmAngle::Deg90, GlcmAngle::Deg135];

    /// Unit `(row, col)` step; rows grow downward so 45 degrees points up-right.
    pub fn offset(self) -> (isize, isize) {
        match self {
            GlcmAngle::Deg0 => (0, 1),
            GlcmAngle::Deg45 => (-1, 1),
            GlcmAngle::Deg90 => (-1, 0),
            GlcmAngle::Deg135 => (-1, -1),
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            GlcmAngle::Deg0 => 0,
            GlcmAngle::Deg45 => 45,
            GlcmAngle::Deg90 => 90,
            GlcmAngle::Deg135 => 135,
        }
    }
}

/// Symmetric, normalized co-occurrence distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GlcmMatrix {
    pub levels: usize,
    pub angle: GlcmAngle,
    pub distance: usize,
    pub p: Array2<f64>,
    /// No in-mask pair existed; `p` is uniform.
    pub degenerate: bool,
}

/// Equal-width bins over the in-mask `[min, max]`; `None` outside the mask.
/// A (numerically) constant region maps entirely to bin 0.
pub fn quantize(image: ArrayView2<f64>, mask: ArrayView2<u8>, levels: usize) -> Array2<Option<usize>> {
    let (lo, hi) = image
        .iter()
        .zip(mask.iter())
        .filter(|(_, &m)| m != 0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let flat = !(range > 1e-9 * lo.abs().max(hi.abs()).max(1.0));
    ndarray::Zip::from(&image).and(&mask).map_collect(|&v, &m| {
        (m != 0).then(|| {
            if flat {
                0
            } else {
                (((v - lo) / range * levels as f64).floor() as usize).min(levels - 1)
            }
        })
    })
}

pub fn glcm_from_quantized(
    bins: ArrayView2<Option<usize>>,
    angle: GlcmAngle,
    distance: usize,
    levels: usize,
) -> GlcmMatrix {
    let (h, w) = bins.dim();
    let (dr, dc) = angle.offset();
    let (dr, dc) = (dr * distance as isize, dc * distance as isize);
    let mut counts = Array2::<f64>::zeros((levels, levels));
    let mut pairs = 0usize;
    for i in 0..h {
        for j in 0..w {
            let Some(a) = bins[[i, j]] else { continue };
            let (ni, nj) = (i as isize + dr, j as isize + dc);
            if ni < 0 || nj < 0 || ni >= h as isize || nj >= w as isize {
                continue;
            }
            if let Some(b) = bins[[ni as usize, nj as usize]] {
                counts[[a, b]] += 1.0;
                counts[[b, a]] += 1.0;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return GlcmMatrix {
            levels,
            angle,
            distance,
            p: Array2::from_elem((levels, levels), 1.0 / (levels * levels) as f64),
            degenerate: true,
        };
    }
    let total = 2.0 * pairs as f64;
    GlcmMatrix {
        levels,
        angle,
        distance,
        p: counts.mapv(|c| c / total),
        degenerate: false,
    }
}

pub fn compute_glcm(
    image: ArrayView2<f64>,
    mask: ArrayView2<u8>,
    angle: GlcmAngle,
    levels: usize,
) -> Result<GlcmMatrix> {
    compute_glcm_at(image, mask, angle, levels, 1)
}

pub fn compute_glcm_at(
    image: ArrayView2<f64>,
    mask: ArrayView2<u8>,
    angle: GlcmAngle,
    levels: usize,
    distance: usize,
) -> Result<GlcmMatrix> {
    if levels < 2 {
        return Err(GgrError::invalid("levels", "need at least 2 gray levels"));
    }
    if distance == 0 {
        return Err(GgrError::invalid("distance", "must be positive"));
    }
    if image.dim() != mask.dim() {
        return Err(GgrError::Shape("image and mask dims differ".into()));
    }
    let bins = quantize(image, mask, levels);
    Ok(glcm_from_quantized(bins.view(), angle, distance, levels))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmFeatures {
    pub contrast: f64,
    pub entropy: f64,
    pub correlation: f64,
    pub homogeneity: f64,
    pub energy: f64,
}

impl GlcmFeatures {
    pub const NAMES: [&'static str; 5] = ["contrast", "entropy", "correlation", "homogeneity", "energy"];

    pub fn to_array(self) -> [f64; 5] {
        [self.contrast, self.entropy, self.correlation, self.homogeneity, self.energy]
    }
}

pub fn glcm_features(glcm: &GlcmMatrix) -> GlcmFeatures {
    let p = &glcm.p;
    let (mut mu_i, mut mu_j) = (0.0, 0.0);
    for ((i, j), &v) in p.indexed_iter() {
        mu_i += i as f64 * v;
        mu_j += j as f64 * v;
    }
    let (mut var_i, mut var_j) = (0.0, 0.0);
    let mut f = GlcmFeatures {
        contrast: 0.0,
        entropy: 0.0,
        correlation: 0.0,
        homogeneity: 0.0,
        energy: 0.0,
    };
    let mut cov = 0.0;
    for ((i, j), &v) in p.indexed_iter() {
        let (fi, fj) = (i as f64, j as f64);
        let d = fi - fj;
        f.contrast += d * d * v;
        if v > 0.0 {
            f.entropy -= v * v.ln();
        }
        f.homogeneity += v / (1.0 + d.abs());
        f.energy += v * v;
        var_i += (fi - mu_i).powi(2) * v;
        var_j += (fj - mu_j).powi(2) * v;
        cov += (fi - mu_i) * (fj - mu_j) * v;
    }
    let denom = (var_i * var_j).sqrt();
    f.correlation = if denom > 0.0 { cov / denom } else { 0.0 };
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_by_two_worked_example() {
        let img = array![[0.0, 0.0], [1.0, 1.0]];
        let mask = Array2::from_elem((2, 2), 1u8);
        let g = compute_glcm(img.view(), mask.view(), GlcmAngle::Deg0, 2).unwrap();
        assert_eq!(g.p, array![[0.5, 0.0], [0.0, 0.5]]);
        let f = glcm_features(&g);
        assert_eq!(f.contrast, 0.0);
        assert!((f.entropy - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((f.homogeneity - 1.0).abs() < 1e-12);
        assert!((f.energy - 0.5).abs() < 1e-12);
        assert!((f.correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_image_single_cell() {
        let img = Array2::from_elem((5, 5), 42.0);
        let mask = Array2::from_elem((5, 5), 1u8);
        for angle in GlcmAngle::ALL {
            let g = compute_glcm(img.view(), mask.view(), angle, 8).unwrap();
            assert_eq!(g.p[[0, 0]], 1.0);
            assert_eq!(g.p.sum(), 1.0);
            let f = glcm_features(&g);
            assert_eq!(f.entropy, 0.0);
            assert_eq!(f.energy, 1.0);
            assert_eq!(f.contrast, 0.0);
        }
    }

    #[test]
    fn degenerate_mask_is_uniform() {
        let img = array![[1.0, 2.0], [3.0, 4.0]];
        let mask = array![[1u8, 0], [0, 1]];
        let g = compute_glcm(img.view(), mask.view(), GlcmAngle::Deg0, 4).unwrap();
        assert!(g.degenerate);
        assert!((g.p.sum() - 1.0).abs() < 1e-12);
        // the diagonal pair exists at 135 degrees: (1,1) -> (0,0)
        let g = compute_glcm(img.view(), mask.view(), GlcmAngle::Deg135, 4).unwrap();
        assert!(!g.degenerate);
    }

    #[test]
    fn invalid_levels() {
        let img = Array2::zeros((2, 2));
        let mask = Array2::from_elem((2, 2), 1u8);
        assert!(compute_glcm(img.view(), mask.view(), GlcmAngle::Deg0, 1).is_err());
    }

    #[test]
    fn quantize_edges() {
        let img = array![[0.0, 0.5, 1.0]];
        let mask = array![[1u8, 1, 1]];
        let q = quantize(img.view(), mask.view(), 4);
        assert_eq!(q.row(0).to_vec(), vec![Some(0), Some(2), Some(3)]);
    }
}
