//! On-disk volume and mask format.
//!
//! A volume file is one ASCII header line terminated by `\n`
//!
//! ```text
//! GGRVOL v1 <slices> <rows> <cols> <spacing_z> <spacing_y> <spacing_x>
//! ```
//!
//! followed by exactly `slices*rows*cols` little-endian `i16` Hounsfield
//! values in slice-major, row-major order. Masks use
//! `GGRMASK v1 <slices> <rows> <cols>` and one byte per voxel, each `0` or `1`.

use std::fs;
use std::path::Path;

use ndarray::Array3;

use crate::error::{GgrError, Result};

pub const VOLUME_MAGIC: &str = "GGRVOL";
pub const MASK_MAGIC: &str = "GGRMASK";

/// CT intensities in Hounsfield units, indexed `(slice, row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtVolume {
    pub voxels: Array3<i16>,
    /// Voxel spacing in millimetres `(z, y, x)`; metadata only.
    pub spacing: [f64; 3],
}

impl CtVolume {
    pub fn new(voxels: Array3<i16>, spacing: [f64; 3]) -> Result<Self> {
        let (s, r, c) = voxels.dim();
        if s == 0 || r == 0 || c == 0 {
            return Err(GgrError::Shape(format!("volume dims ({s},{r},{c}) must be positive")));
        }
        if spacing.iter().any(|v| !v.is_finite()) {
            return Err(GgrError::NonFinite("volume spacing"));
        }
        Ok(Self { voxels, spacing })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.voxels.dim()
    }
}

/// Binary tumor segmentation with the same dims as its volume.
#[derive(Debug, Clone, PartialEq)]
pub struct TumorMask {
    pub voxels: Array3<u8>,
}

impl TumorMask {
    pub fn new(voxels: Array3<u8>) -> Result<Self> {
        if voxels.iter().any(|&v| v > 1) {
            return Err(GgrError::format("mask", "values must be 0 or 1"));
        }
        let (s, r, c) = voxels.dim();
        if s == 0 || r == 0 || c == 0 {
            return Err(GgrError::Shape(format!("mask dims ({s},{r},{c}) must be positive")));
        }
        Ok(Self { voxels })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.voxels.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.iter().all(|&v| v == 0)
    }

    /// Foreground voxel count per slice.
    pub fn slice_areas(&self) -> Vec<usize> {
        self.voxels
            .outer_iter()
            .map(|s| s.iter().filter(|&&v| v != 0).count())
            .collect()
    }
}

fn split_header<'a>(bytes: &'a [u8], what: &'static str) -> Result<(String, &'a [u8])> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| GgrError::format(what, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| GgrError::format(what, "header is not ASCII"))?
        .to_string();
    Ok((header, &bytes[nl + 1..]))
}

fn parse_dims(fields: &[&str], what: &'static str) -> Result<(usize, usize, usize)> {
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| GgrError::format(what, format!("bad dimension `{s}`")))
    };
    let dims = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
    if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
        return Err(GgrError::format(what, "dimensions must be positive"));
    }
    Ok(dims)
}

pub fn decode_volume(bytes: &[u8]) -> Result<CtVolume> {
    let (header, payload) = split_header(bytes, "volume")?;
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    if fields.len() != 8 || fields[0] != VOLUME_MAGIC || fields[1] != "v1" {
        return Err(GgrError::format("volume", format!("bad header `{header}`")));
    }
    let (s, r, c) = parse_dims(&fields[2..5], "volume")?;
    let mut spacing = [0.0; 3];
    for (dst, src) in spacing.iter_mut().zip(&fields[5..8]) {
        *dst = src
            .parse::<f64>()
            .map_err(|_| GgrError::format("volume", format!("bad spacing `{src}`")))?;
    }
    let n = s * r * c;
    if payload.len() != 2 * n {
        return Err(GgrError::format(
            "volume",
            format!("header declares {n} voxels, payload holds {} bytes", payload.len()),
        ));
    }
    let data: Vec<i16> = payload
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect();
    let voxels = Array3::from_shape_vec((s, r, c), data).expect("length checked");
    CtVolume::new(voxels, spacing)
}

pub fn encode_volume(volume: &CtVolume) -> Vec<u8> {
    let (s, r, c) = volume.dims();
    let [sz, sy, sx] = volume.spacing;
    let mut out = format!("{VOLUME_MAGIC} v1 {s} {r} {c} {sz} {sy} {sx}\n").into_bytes();
    out.reserve(2 * s * r * c);
    for v in volume.voxels.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<TumorMask> {
    let (header, payload) = split_header(bytes, "mask")?;
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    if fields.len() != 5 || fields[0] != MASK_MAGIC || fields[1] != "v1" {
        return Err(GgrError::format("mask", format!("bad header `{header}`")));
    }
    let (s, r, c) = parse_dims(&fields[2..5], "mask")?;
    if payload.len() != s * r * c {
        return Err(GgrError::format(
            "mask",
            format!("header declares {} voxels, payload holds {}", s * r * c, payload.len()),
        ));
    }
    let voxels = Array3::from_shape_vec((s, r, c), payload.to_vec()).expect("length checked");
    TumorMask::new(voxels)
}

pub fn encode_mask(mask: &TumorMask) -> Vec<u8> {
    let (s, r, c) = mask.dims();
    let mut out = format!("{MASK_MAGIC} v1 {s} {r} {c}\n").into_bytes();
    out.extend(mask.voxels.iter().copied());
    out
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<CtVolume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| GgrError::io(path, e))?;
    decode_volume(&bytes)
}

pub fn save_volume(path: impl AsRef<Path>, volume: &CtVolume) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_volume(volume)).map_err(|e| GgrError::io(path, e))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<TumorMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| GgrError::io(path, e))?;
    decode_mask(&bytes)
}

pub fn save_mask(path: impl AsRef<Path>, mask: &TumorMask) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_mask(mask)).map_err(|e| GgrError::io(path, e))
}
