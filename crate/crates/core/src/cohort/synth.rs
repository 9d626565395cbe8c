//! Planted-signal synthetic cohort.
//!
//! Every random draw comes from [`SplitMix64`](crate::rng::SplitMix64), so a
//! seed reproduces the same cohort on any platform. Model, per patient:
//!
//! * latent `z ~ N(0, I_latent_dim)`;
//! * recurrence `~ Bernoulli(sigmoid(signal_strength * w.z))`, where `w` is a
//!   seeded direction scaled to norm `sqrt(latent_dim)`;
//! * gene `i`: `scale_i * softplus(a_i.z + b_i + noise * eps)`. Only the
//!   `n_informative` planted genes have non-zero loadings `a_i`, built as
//!   `c_i * w/|w| + 0.3 u_i` with `|c_i|` in `[0.8, 1.2]`;
//! * deep features: `softplus(B z + d + noise * eps)`, a stand-in for CNN
//!   activations;
//! * texture parameters `t = M z`: blob count, blob amplitude and blob radius
//!   are affine in `t`. The volume is -800 HU background plus an ellipsoidal
//!   lesion whose voxels lie in `[-100, +200]` HU.

use ndarray::Array3;

use super::{CohortDataset, CtVolume, PatientRecord, Provenance, TumorMask};
use crate::error::{GgrError, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    pub n_patients: usize,
    pub n_genes: usize,
    pub n_informative: usize,
    pub latent_dim: usize,
    pub signal_strength: f64,
    pub noise: f64,
    /// Volume dims `(slices, rows, cols)`.
    pub dims: (usize, usize, usize),
    pub deep_dim: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_patients: 200,
            n_genes: 200,
            n_informative: 5,
            latent_dim: 3,
            signal_strength: 4.0,
            noise: 0.5,
            dims: (9, 48, 48),
            deep_dim: 32,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients < 20 {
            return Err(GgrError::invalid("n_patients", "must be at least 20"));
        }
        if self.latent_dim == 0 || self.latent_dim > self.n_genes {
            return Err(GgrError::invalid("latent_dim", "must be in 1..=n_genes"));
        }
        if self.n_informative > self.n_genes {
            return Err(GgrError::invalid("n_informative", "exceeds n_genes"));
        }
        if !self.signal_strength.is_finite() || self.signal_strength < 0.0 {
            return Err(GgrError::invalid("signal_strength", "must be finite and >= 0"));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(GgrError::invalid("noise", "must be finite and >= 0"));
        }
        let (s, r, c) = self.dims;
        if s < 3 || r < 16 || c < 16 {
            return Err(GgrError::invalid("dims", "need at least 3 slices of 16x16"));
        }
        Ok(())
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normals(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let norm = dot(&v, &v).sqrt().max(1e-12);
    v.into_iter().map(|x| x / norm).collect()
}

struct Model {
    w: Vec<f64>,
    informative: Vec<usize>,
    loadings: Vec<Option<Vec<f64>>>,
    offsets: Vec<f64>,
    scales: Vec<f64>,
    deep_weights: Vec<Vec<f64>>,
    deep_bias: Vec<f64>,
    texture_map: Vec<Vec<f64>>,
}

impl Model {
    fn draw(spec: &SyntheticSpec, rng: &mut SplitMix64) -> Self {
        let d = spec.latent_dim;
        let dir = unit(normals(rng, d));
        let w: Vec<f64> = dir.iter().map(|x| x * (d as f64).sqrt()).collect();

        let mut perm: Vec<usize> = (0..spec.n_genes).collect();
        rng.shuffle(&mut perm);
        let mut informative = perm[..spec.n_informative].to_vec();
        informative.sort_unstable();

        let mut loadings = Vec::with_capacity(spec.n_genes);
        let mut offsets = Vec::with_capacity(spec.n_genes);
        let mut scales = Vec::with_capacity(spec.n_genes);
        for g in 0..spec.n_genes {
            offsets.push(0.5 * rng.normal());
            scales.push(rng.uniform_range(20f64.ln(), 2000f64.ln()).exp());
            if informative.binary_search(&g).is_ok() {
                let sign = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
                let c = sign * rng.uniform_range(0.8, 1.2);
                let u = normals(rng, d);
                loadings.push(Some(dir.iter().zip(&u).map(|(a, b)| c * a + 0.3 * b).collect()));
            } else {
                loadings.push(None);
            }
        }
        let deep_weights = (0..spec.deep_dim).map(|_| normals(rng, d)).collect();
        let deep_bias = (0..spec.deep_dim).map(|_| 0.5 * rng.normal()).collect();
        let texture_map = (0..3).map(|_| unit(normals(rng, d))).collect();
        Model {
            w,
            informative,
            loadings,
            offsets,
            scales,
            deep_weights,
            deep_bias,
            texture_map,
        }
    }
}

struct Lesion {
    center: [f64; 3],
    radii: [f64; 3],
}

impl Lesion {
    fn contains(&self, k: usize, i: usize, j: usize) -> bool {
        let p = [k as f64, i as f64, j as f64];
        (0..3)
            .map(|a| ((p[a] - self.center[a]) / self.radii[a]).powi(2))
            .sum::<f64>()
            <= 1.0
    }
}

fn render_patient(spec: &SyntheticSpec, t: &[f64], rng: &mut SplitMix64) -> (CtVolume, TumorMask) {
    let (ns, nr, nc) = spec.dims;
    let inplane = nr.min(nc) as f64;
    let lesion = Lesion {
        center: [
            (ns as f64 - 1.0) / 2.0,
            (nr as f64 - 1.0) / 2.0 + rng.uniform_range(-1.5, 1.5),
            (nc as f64 - 1.0) / 2.0 + rng.uniform_range(-1.5, 1.5),
        ],
        radii: [
            (ns as f64 / 2.0 - 0.5).max(1.5),
            inplane * rng.uniform_range(0.28, 0.36),
            inplane * rng.uniform_range(0.28, 0.36),
        ],
    };

    let blob_count = (6.0 + 2.5 * t[0]).round().clamp(1.0, 14.0) as usize;
    let amplitude = (120.0 + 50.0 * t[1]).clamp(20.0, 250.0);
    let radius = (2.5 + 0.8 * t[2]).clamp(1.0, 5.0);

    let blobs: Vec<[f64; 3]> = (0..blob_count)
        .map(|_| loop {
            let cand = [
                rng.uniform_range(0.0, ns as f64 - 1.0),
                rng.uniform_range(lesion.center[1] - lesion.radii[1], lesion.center[1] + lesion.radii[1]),
                rng.uniform_range(lesion.center[2] - lesion.radii[2], lesion.center[2] + lesion.radii[2]),
            ];
            let inside = (0..3)
                .map(|a| ((cand[a] - lesion.center[a]) / lesion.radii[a]).powi(2))
                .sum::<f64>()
                <= 1.0;
            if inside {
                break cand;
            }
        })
        .collect();

    let mut voxels = Array3::<i16>::zeros((ns, nr, nc));
    let mut mask = Array3::<u8>::zeros((ns, nr, nc));
    for k in 0..ns {
        for i in 0..nr {
            for j in 0..nc {
                let hu = if lesion.contains(k, i, j) {
                    mask[[k, i, j]] = 1;
                    let texture: f64 = blobs
                        .iter()
                        .map(|b| {
                            // Slices are thicker than pixels.
                            let d2 = (2.0 * (k as f64 - b[0])).powi(2)
                                + (i as f64 - b[1]).powi(2)
                                + (j as f64 - b[2]).powi(2);
                            amplitude * (-d2 / (2.0 * radius * radius)).exp()
                        })
                        .sum();
                    (-60.0 + texture + 8.0 * rng.normal()).clamp(-100.0, 200.0)
                } else {
                    -800.0 + 15.0 * rng.normal()
                };
                voxels[[k, i, j]] = hu.round() as i16;
            }
        }
    }
    (
        CtVolume::new(voxels, [2.5, 0.7, 0.7]).expect("positive dims"),
        TumorMask::new(mask).expect("binary mask"),
    )
}

pub fn generate_synthetic_cohort(spec: &SyntheticSpec, seed: u64) -> Result<CohortDataset> {
    spec.validate()?;
    let mut rng = SplitMix64::new(seed);
    let model = Model::draw(spec, &mut rng);

    let records = (0..spec.n_patients)
        .map(|p| {
            let mut rng = SplitMix64::derive(seed, &[1, p as u64]);
            let z = normals(&mut rng, spec.latent_dim);
            let recurrence = rng.bernoulli(sigmoid(spec.signal_strength * dot(&model.w, &z)));
            let genes: Vec<f64> = (0..spec.n_genes)
                .map(|g| {
                    let signal = model.loadings[g].as_ref().map_or(0.0, |a| dot(a, &z));
                    model.scales[g] * softplus(signal + model.offsets[g] + spec.noise * rng.normal())
                })
                .collect();
            let deep: Vec<f64> = model
                .deep_weights
                .iter()
                .zip(&model.deep_bias)
                .map(|(b, d)| softplus(dot(b, &z) + d + spec.noise * rng.normal()))
                .collect();
            let t: Vec<f64> = model.texture_map.iter().map(|m| dot(m, &z)).collect();
            let (volume, mask) = render_patient(spec, &t, &mut rng);
            PatientRecord {
                id: format!("SYN{p:04}"),
                volume,
                mask: Some(mask),
                genes: Some(genes),
                recurrence: Some(recurrence),
                deep_features: Some(deep),
            }
        })
        .collect();

    Ok(CohortDataset {
        records,
        gene_names: (0..spec.n_genes).map(|g| format!("GENE{g:04}")).collect(),
        provenance: Provenance {
            kind: "synthetic".into(),
            seed: Some(seed),
            informative_genes: model.informative,
            note: format!("{spec:?}"),
        },
        deep_feature_names: Some((0..spec.deep_dim).map(|d| format!("deep{d}")).collect()),
    })
}

/// Latent vectors the generator used, for oracle tests.
pub fn latent_vectors(spec: &SyntheticSpec, seed: u64) -> Vec<Vec<f64>> {
    (0..spec.n_patients)
        .map(|p| {
            let mut rng = SplitMix64::derive(seed, &[1, p as u64]);
            normals(&mut rng, spec.latent_dim)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            n_patients: 24,
            n_genes: 12,
            dims: (5, 24, 24),
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_synthetic_cohort(&small(), 11).unwrap();
        let b = generate_synthetic_cohort(&small(), 11).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_cohort(&small(), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn volume_ranges_and_mask() {
        let ds = generate_synthetic_cohort(&small(), 3).unwrap();
        for rec in &ds.records {
            let mask = rec.mask.as_ref().unwrap();
            assert!(!mask.is_empty());
            for (v, m) in rec.volume.voxels.iter().zip(mask.voxels.iter()) {
                if *m == 1 {
                    assert!((-100..=200).contains(v));
                } else {
                    assert!(*v < -600);
                }
            }
            assert!(rec.genes.as_ref().unwrap().iter().all(|g| *g >= 0.0));
        }
    }

    #[test]
    fn rejects_invalid_spec() {
        let mut s = small();
        s.n_patients = 5;
        assert!(generate_synthetic_cohort(&s, 0).is_err());
        let mut s = small();
        s.latent_dim = 50;
        assert!(generate_synthetic_cohort(&s, 0).is_err());
    }

    #[test]
    fn latent_vectors_match_generation_stream() {
        let spec = small();
        let z = latent_vectors(&spec, 5);
        assert_eq!(z.len(), spec.n_patients);
        assert_eq!(z[0].len(), spec.latent_dim);
    }
}
