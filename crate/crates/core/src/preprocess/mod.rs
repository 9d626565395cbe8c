//! CT volume + mask to the 224x224x3 tumor slab.

use std::path::Path;

use ndarray::{s, Array2, Array3, ArrayView2};

use crate::cohort::{CtVolume, TumorMask};
use crate::error::{GgrError, Result};

pub const SLAB_SIZE: usize = 224;
pub const HU_MIN: i32 = -1000;
pub const HU_MAX: i32 = 400;

/// Three windowed, masked and resized slices, indexed `(channel, row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabImage {
    pub pixels: Array3<f64>,
    pub source_slices: [usize; 3],
}

/// Per-channel tumor mask resampled alongside the slab.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabMask {
    pub pixels: Array3<u8>,
}

/// Maps one HU value into `[0, 255]`.
pub fn window_hu(h: i16) -> u8 {
    let clamped = (h as i32).clamp(HU_MIN, HU_MAX);
    // (h + 1000) * 255 / 1400 with ties away from zero
    (((clamped - HU_MIN) as f64 * 255.0) / 1400.0).round() as u8
}

pub fn window_and_normalize(volume: &CtVolume) -> Array3<u8> {
    volume.voxels.mapv(window_hu)
}

/// Index of the largest-area slice and its two neighbours, duplicating the
/// boundary slice at either end of the stack.
pub fn select_slab(mask: &TumorMask) -> Result<[usize; 3]> {
    let areas = mask.slice_areas();
    select_slab_from_areas(&areas)
}

pub fn select_slab_from_areas(areas: &[usize]) -> Result<[usize; 3]> {
    let (best, &area) = areas
        .iter()
        .enumerate()
        // max_by_key keeps the last maximum; reverse so ties go to the lowest index
        .rev()
        .max_by_key(|(_, a)| **a)
        .ok_or_else(|| GgrError::EmptyMask(" (no slices)".into()))?;
    if area == 0 {
        return Err(GgrError::EmptyMask(String::new()));
    }
    let last = areas.len() - 1;
    Ok([best.saturating_sub(1), best, (best + 1).min(last)])
}

/// Inclusive tight bounding box `(row0, row1, col0, col1)` of a 2-D mask.
pub fn bounding_box(mask: ArrayView2<u8>) -> Option<(usize, usize, usize, usize)> {
    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for ((i, j), &v) in mask.indexed_iter() {
        if v != 0 {
            bbox = Some(match bbox {
                None => (i, i, j, j),
                Some((r0, r1, c0, c1)) => (r0.min(i), r1.max(i), c0.min(j), c1.max(j)),
            });
        }
    }
    bbox
}

/// Corner-aligned bilinear resize: output pixel `(i, j)` samples the source
/// at `(i * (h - 1) / (out_h - 1), j * (w - 1) / (out_w - 1))`.
pub fn resize_bilinear(src: ArrayView2<f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let (h, w) = src.dim();
    let scale = |n: usize, out: usize| {
        if out > 1 {
            (n - 1) as f64 / (out - 1) as f64
        } else {
            0.0
        }
    };
    let (sy, sx) = (scale(h, out_h), scale(w, out_w));
    Array2::from_shape_fn((out_h, out_w), |(i, j)| {
        let y = i as f64 * sy;
        let x = j as f64 * sx;
        let y0 = (y.floor() as usize).min(h - 1);
        let x0 = (x.floor() as usize).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let x1 = (x0 + 1).min(w - 1);
        let fy = y - y0 as f64;
        let fx = x - x0 as f64;
        let top = src[[y0, x0]] * (1.0 - fx) + src[[y0, x1]] * fx;
        let bottom = src[[y1, x0]] * (1.0 - fx) + src[[y1, x1]] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Masks each selected slice, crops all three to the bounding box of the
/// centre slice's mask and resizes them to 224x224.
///
/// The per-channel masks go through the same crop and bilinear resize and are
/// binarised at 0.5.
pub fn mask_crop_resize(
    normalized: &Array3<u8>,
    mask: &TumorMask,
    slab: [usize; 3],
) -> Result<(SlabImage, SlabMask)> {
    let (ns, _, _) = normalized.dim();
    if mask.dims() != normalized.dim() {
        return Err(GgrError::Shape("mask and volume dims differ".into()));
    }
    if let Some(&bad) = slab.iter().find(|&&k| k >= ns) {
        return Err(GgrError::invalid("slab", format!("slice {bad} out of range 0..{ns}")));
    }
    let (r0, r1, c0, c1) = bounding_box(mask.voxels.slice(s![slab[1], .., ..]))
        .ok_or_else(|| GgrError::EmptyMask(format!(" on centre slice {}", slab[1])))?;

    let mut pixels = Array3::zeros((3, SLAB_SIZE, SLAB_SIZE));
    let mut out_mask = Array3::zeros((3, SLAB_SIZE, SLAB_SIZE));
    for (ch, &k) in slab.iter().enumerate() {
        let img = normalized.slice(s![k, r0..=r1, c0..=c1]);
        let m = mask.voxels.slice(s![k, r0..=r1, c0..=c1]);
        let masked = ndarray::Zip::from(&img)
            .and(&m)
            .map_collect(|&g, &mv| if mv != 0 { g as f64 } else { 0.0 });
        let resized = resize_bilinear(masked.view(), SLAB_SIZE, SLAB_SIZE);
        pixels
            .slice_mut(s![ch, .., ..])
            .assign(&resized.mapv(|v| v.clamp(0.0, 255.0)));
        let mf = m.mapv(|v| v as f64);
        let mr = resize_bilinear(mf.view(), SLAB_SIZE, SLAB_SIZE);
        out_mask
            .slice_mut(s![ch, .., ..])
            .assign(&mr.mapv(|v| u8::from(v >= 0.5)));
    }
    Ok((
        SlabImage {
            pixels,
            source_slices: slab,
        },
        SlabMask { pixels: out_mask },
    ))
}

/// Full preprocessing of one patient.
pub fn preprocess(volume: &CtVolume, mask: &TumorMask) -> Result<(SlabImage, SlabMask)> {
    if volume.dims() != mask.dims() {
        return Err(GgrError::Shape(format!(
            "volume {:?} vs mask {:?}",
            volume.dims(),
            mask.dims()
        )));
    }
    let slab = select_slab(mask)?;
    mask_crop_resize(&window_and_normalize(volume), mask, slab)
}

/// Slab file: header `GGRSLAB v1 <rows> <cols> <s0> <s1> <s2>\n`, then
/// `3*rows*cols` little-endian `f64` pixels (channel, row, col), then the
/// same number of mask bytes.
pub fn encode_slab(slab: &SlabImage, mask: &SlabMask) -> Vec<u8> {
    let (_, r, c) = slab.pixels.dim();
    let [a, b, d] = slab.source_slices;
    let mut out = format!("GGRSLAB v1 {r} {c} {a} {b} {d}\n").into_bytes();
    for v in slab.pixels.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(mask.pixels.iter().copied());
    out
}

pub fn decode_slab(bytes: &[u8]) -> Result<(SlabImage, SlabMask)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| GgrError::format("slab", "missing header"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| GgrError::format("slab", "header"))?;
    let f: Vec<&str> = header.split_ascii_whitespace().collect();
    if f.len() != 7 || f[0] != "GGRSLAB" || f[1] != "v1" {
        return Err(GgrError::format("slab", format!("bad header `{header}`")));
    }
    let nums: Vec<usize> = f[2..]
        .iter()
        .map(|s| s.parse().map_err(|_| GgrError::format("slab", format!("bad field `{s}`"))))
        .collect::<Result<_>>()?;
    let (r, c) = (nums[0], nums[1]);
    let n = 3 * r * c;
    let payload = &bytes[nl + 1..];
    if payload.len() != n * 9 {
        return Err(GgrError::format("slab", "payload size mismatch"));
    }
    let px: Vec<f64> = payload[..n * 8]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    if px.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 255.0) {
        return Err(GgrError::format("slab", "pixel outside [0, 255]"));
    }
    let m = payload[n * 8..].to_vec();
    if m.iter().any(|&v| v > 1) {
        return Err(GgrError::format("slab", "mask values must be 0 or 1"));
    }
    Ok((
        SlabImage {
            pixels: Array3::from_shape_vec((3, r, c), px).expect("sized"),
            source_slices: [nums[2], nums[3], nums[4]],
        },
        SlabMask {
            pixels: Array3::from_shape_vec((3, r, c), m).expect("sized"),
        },
    ))
}

pub fn save_slab(path: impl AsRef<Path>, slab: &SlabImage, mask: &SlabMask) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_slab(slab, mask)).map_err(|e| GgrError::io(path, e))
}

pub fn load_slab(path: impl AsRef<Path>) -> Result<(SlabImage, SlabMask)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| GgrError::io(path, e))?;
    decode_slab(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn window_endpoints() {
        assert_eq!(window_hu(-1000), 0);
        assert_eq!(window_hu(400), 255);
        assert_eq!(window_hu(2000), 255);
        assert_eq!(window_hu(-3000), 0);
        // 700 * 255 / 1400 = 127.5 rounds away from zero
        assert_eq!(window_hu(-300), 128);
    }

    #[test]
    fn window_is_monotone() {
        let mut prev = 0u8;
        for h in i16::MIN..=i16::MAX {
            let g = window_hu(h);
            assert!(g >= prev);
            prev = g;
        }
    }

    #[test]
    fn slab_selection_rules() {
        assert_eq!(select_slab_from_areas(&[0, 5, 9, 4]).unwrap(), [1, 2, 3]);
        assert_eq!(select_slab_from_areas(&[9, 5, 0]).unwrap(), [0, 0, 1]);
        assert_eq!(select_slab_from_areas(&[4, 7, 7]).unwrap(), [0, 1, 2]);
        assert_eq!(select_slab_from_areas(&[1, 3]).unwrap(), [0, 1, 1]);
        assert!(matches!(select_slab_from_areas(&[0, 0]), Err(GgrError::EmptyMask(_))));
    }

    #[test]
    fn bounding_box_shape() {
        let mut m = Array2::<u8>::zeros((12, 12));
        m.slice_mut(s![3..=7, 2..=9]).fill(1);
        let (r0, r1, c0, c1) = bounding_box(m.view()).unwrap();
        assert_eq!((r1 - r0 + 1, c1 - c0 + 1), (5, 8));
    }

    #[test]
    fn bilinear_ramp() {
        let src = array![[0.0, 255.0], [0.0, 255.0]];
        let out = resize_bilinear(src.view(), SLAB_SIZE, SLAB_SIZE);
        for i in 0..SLAB_SIZE {
            for j in 0..SLAB_SIZE {
                let expected = 255.0 * j as f64 / 223.0;
                assert!((out[[i, j]] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_square_stays_constant() {
        let mut vox = Array3::<i16>::from_elem((3, 20, 20), -1000);
        let mut m = Array3::<u8>::zeros((3, 20, 20));
        vox.slice_mut(s![.., 5..15, 5..15]).fill(-300);
        m.slice_mut(s![.., 5..15, 5..15]).fill(1);
        let vol = CtVolume::new(vox, [1.0; 3]).unwrap();
        let mask = TumorMask::new(m).unwrap();
        let (slab, smask) = preprocess(&vol, &mask).unwrap();
        assert_eq!(slab.pixels.dim(), (3, 224, 224));
        assert!(slab.pixels.iter().all(|&v| v == 128.0));
        assert!(smask.pixels.iter().all(|&v| v == 1));
        assert_eq!(slab.source_slices, [0, 0, 1]);
    }

    #[test]
    fn background_is_zeroed() {
        let vox = Array3::<i16>::from_elem((1, 10, 10), 0);
        let mut m = Array3::<u8>::zeros((1, 10, 10));
        m[[0, 2, 2]] = 1;
        m[[0, 4, 4]] = 1;
        let vol = CtVolume::new(vox, [1.0; 3]).unwrap();
        let mask = TumorMask::new(m).unwrap();
        let (slab, _) = preprocess(&vol, &mask).unwrap();
        // corners of the 3x3 crop: (2,2) masked in, (2,4) masked out
        assert!(slab.pixels[[0, 0, 0]] > 0.0);
        assert_eq!(slab.pixels[[0, 0, 223]], 0.0);
        assert!(slab.pixels.iter().all(|v| (0.0..=255.0).contains(v)));
    }

    #[test]
    fn slab_file_round_trip() {
        let vox = Array3::<i16>::from_shape_fn((4, 16, 16), |(k, i, j)| (k * 50 + i * 7 + j * 3) as i16 - 200);
        let mut m = Array3::<u8>::zeros((4, 16, 16));
        m.slice_mut(s![1..3, 4..12, 3..10]).fill(1);
        let (slab, smask) =
            preprocess(&CtVolume::new(vox, [1.0; 3]).unwrap(), &TumorMask::new(m).unwrap()).unwrap();
        let (s2, m2) = decode_slab(&encode_slab(&slab, &smask)).unwrap();
        assert_eq!(s2, slab);
        assert_eq!(m2, smask);
    }
}
