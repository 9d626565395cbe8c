//! Handcrafted texture signature and deep-feature ingestion.
//!
//! Each slab channel is filtered by five LoG bands. Every band contributes
//! 4 angles x 5 GLCM features plus 10 first-order statistics, for 30 values
//! per band, 150 per channel and 450 per patient. Names follow
//! `s{channel}_sig{sigma}_{feature}`, e.g. `s1_sig1.5_glcm45_entropy` or
//! `s0_sig0_p25_sd`.

mod first_order;
mod glcm;
mod log_filter;

use std::path::Path;

use ndarray::{s, Array2};
use rayon::prelude::*;

use crate::error::{GgrError, Result};
use crate::cohort::CohortDataset;
use crate::preprocess::{preprocess, SlabImage, SlabMask};
use crate::table::FeatureTable;

pub use first_order::{first_order_features, percentile_sorted, PercentileMode, FIRST_ORDER_NAMES};
pub use glcm::{
    compute_glcm, compute_glcm_at, glcm_features, glcm_from_quantized, quantize, GlcmAngle, GlcmFeatures,
    GlcmMatrix,
};
pub use log_filter::{apply_log, log_kernel, log_response, LogKernel};

pub const SIGMAS: [f64; 5] = [0.0, 1.0, 1.5, 2.0, 2.5];
pub const FEATURES_PER_BAND: usize = 30;
pub const FEATURES_PER_SLICE: usize = SIGMAS.len() * FEATURES_PER_BAND;
pub const HANDCRAFTED_LEN: usize = 3 * FEATURES_PER_SLICE;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextureConfig {
    pub sigmas: Vec<f64>,
    pub levels: usize,
    pub distance: usize,
    pub percentile_mode: PercentileMode,
}

impl Default for TextureConfig {
    fn default() -> Self {
        Self {
            sigmas: SIGMAS.to_vec(),
            levels: 32,
            distance: 1,
            percentile_mode: PercentileMode::LowerTail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn feature_names(config: &TextureConfig) -> Vec<String> {
    let mut names = Vec::new();
    for ch in 0..3 {
        for sigma in &config.sigmas {
            let prefix = format!("s{ch}_sig{sigma}");
            for angle in GlcmAngle::ALL {
                for f in GlcmFeatures::NAMES {
                    names.push(format!("{prefix}_glcm{}_{f}", angle.degrees()));
                }
            }
            for f in FIRST_ORDER_NAMES {
                names.push(format!("{prefix}_{f}"));
            }
        }
    }
    names
}

fn band_features(
    channel: &Array2<f64>,
    mask: &Array2<u8>,
    kernel: &LogKernel,
    config: &TextureConfig,
) -> Result<Vec<f64>> {
    let band = apply_log(channel, kernel);
    let mut out = Vec::with_capacity(FEATURES_PER_BAND);
    for angle in GlcmAngle::ALL {
        let g = compute_glcm_at(band.view(), mask.view(), angle, config.levels, config.distance)?;
        out.extend(glcm_features(&g).to_array());
    }
    let values: Vec<f64> = band
        .iter()
        .zip(mask.iter())
        .filter(|(_, &m)| m != 0)
        .map(|(&v, _)| v)
        .collect();
    out.extend(first_order_features(&values, config.percentile_mode)?);
    Ok(out)
}

/// The handcrafted signature of one slab.
///
/// A side channel whose resampled mask has fewer than two pixels borrows the
/// centre channel's mask.
pub fn extract_handcrafted(slab: &SlabImage, mask: &SlabMask, config: &TextureConfig) -> Result<FeatureVector> {
    if slab.pixels.dim() != mask.pixels.dim() || slab.pixels.dim().0 != 3 {
        return Err(GgrError::Shape("slab and mask must both be 3 x H x W".into()));
    }
    let kernels = config
        .sigmas
        .iter()
        .map(|&s| log_kernel(s))
        .collect::<Result<Vec<_>>>()?;
    let center_mask = mask.pixels.slice(s![1, .., ..]).to_owned();
    let channel_masks: Vec<Array2<u8>> = (0..3)
        .map(|ch| {
            let m = mask.pixels.slice(s![ch, .., ..]).to_owned();
            if m.iter().filter(|&&v| v != 0).count() < 2 {
                center_mask.clone()
            } else {
                m
            }
        })
        .collect();
    let channels: Vec<Array2<f64>> = (0..3).map(|ch| slab.pixels.slice(s![ch, .., ..]).to_owned()).collect();

    let jobs: Vec<(usize, usize)> = (0..3).flat_map(|c| (0..kernels.len()).map(move |b| (c, b))).collect();
    let blocks = jobs
        .par_iter()
        .map(|&(c, b)| band_features(&channels[c], &channel_masks[c], &kernels[b], config))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = blocks.into_iter().flatten().collect();
    Ok(FeatureVector {
        names: feature_names(config),
        values,
    })
}

/// Preprocesses every patient and extracts the handcrafted signature, one
/// row per record in cohort order. Patients run in parallel.
pub fn extract_cohort(cohort: &CohortDataset, config: &TextureConfig) -> Result<FeatureTable> {
    let rows = cohort
        .records
        .par_iter()
        .map(|r| {
            let mask = r.mask.as_ref().ok_or_else(|| GgrError::MissingInput(format!("tumor mask for {}", r.id)))?;
            let (slab, slab_mask) = preprocess(&r.volume, mask).map_err(|e| match e {
                GgrError::EmptyMask(_) => GgrError::EmptyMask(format!(" for {}", r.id)),
                other => other,
            })?;
            Ok(extract_handcrafted(&slab, &slab_mask, config)?.values)
        })
        .collect::<Result<Vec<_>>>()?;
    let names = feature_names(config);
    let mut values = Array2::zeros((rows.len(), names.len()));
    for (i, row) in rows.iter().enumerate() {
        values.row_mut(i).assign(&ndarray::ArrayView1::from(row));
    }
    FeatureTable::new(cohort.ids(), names, values)
}

/// Deep features keyed by patient id, as produced by an external CNN.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepFeatures {
    pub table: FeatureTable,
}

impl DeepFeatures {
    pub fn dim(&self) -> usize {
        self.table.n_cols()
    }

    pub fn get(&self, id: &str) -> Result<FeatureVector> {
        let row = self
            .table
            .row_of(id)
            .ok_or_else(|| GgrError::UnknownPatient(id.to_string()))?;
        Ok(FeatureVector {
            names: self.table.names.clone(),
            values: self.table.values.row(row).to_vec(),
        })
    }
}

/// Deep-feature CSV: `id,<f0>,...,<fD-1>`, one row per patient.
pub fn load_deep_features(path: impl AsRef<Path>) -> Result<DeepFeatures> {
    Ok(DeepFeatures {
        table: FeatureTable::read_csv(path)?,
    })
}
