use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ggr_core::cohort::{generate_synthetic_cohort, SyntheticSpec};
use ggr_core::net::{train, Activation, DenseNetwork, LayerSpec, TrainConfig};
use ggr_core::preprocess::preprocess;
use ggr_core::select::lasso_fit;
use ggr_core::texture::{apply_log, compute_glcm, extract_handcrafted, log_kernel, GlcmAngle, TextureConfig};
use ggr_core::SplitMix64;
use ndarray::Array2;

fn texture(c: &mut Criterion) {
    let spec = SyntheticSpec { n_patients: 20, ..SyntheticSpec::default() };
    let cohort = generate_synthetic_cohort(&spec, 1).unwrap();
    let rec = &cohort.records[0];
    let (slab, mask) = preprocess(&rec.volume, rec.mask.as_ref().unwrap()).unwrap();
    let channel = slab.pixels.index_axis(ndarray::Axis(0), 1).to_owned();
    let cmask = mask.pixels.index_axis(ndarray::Axis(0), 1).to_owned();
    let cfg = TextureConfig::default();

    c.bench_function("preprocess", |b| b.iter(|| preprocess(black_box(&rec.volume), rec.mask.as_ref().unwrap()).unwrap()));
    c.bench_function("glcm_224_32levels", |b| b.iter(|| compute_glcm(black_box(channel.view()), cmask.view(), GlcmAngle::Deg45, 32).unwrap()));
    let k = log_kernel(2.5).unwrap();
    c.bench_function("log_sigma2.5_224", |b| b.iter(|| apply_log(black_box(&channel), &k)));
    let mut g = c.benchmark_group("extract");
    g.sample_size(10);
    g.bench_function("extract_handcrafted_450", |b| b.iter(|| extract_handcrafted(black_box(&slab), &mask, &cfg).unwrap()));
    g.finish();
}

fn models(c: &mut Criterion) {
    let mut rng = SplitMix64::new(2);
    let x = Array2::from_shape_fn((180, 200), |_| rng.normal());
    let y: Vec<f64> = (0..180).map(|i| x[[i, 3]] - 0.5 * x[[i, 17]] + 0.1 * rng.normal()).collect();
    c.bench_function("lasso_180x200", |b| b.iter(|| lasso_fit(black_box(x.view()), &y, 20.0).unwrap()));

    let xs = Array2::from_shape_fn((180, 24), |_| rng.normal());
    let ys = Array2::from_shape_fn((180, 1), |(i, _)| f64::from(u8::from(xs[[i, 0]] > 0.0)));
    let specs = [LayerSpec::dense(24, 32, Activation::Relu), LayerSpec::dense(32, 1, Activation::Sigmoid)];
    let cfg = TrainConfig { epochs: 100, patience: None, ..TrainConfig::classifier() };
    c.bench_function("classifier_100_epochs", |b| {
        b.iter(|| {
            let mut net = DenseNetwork::new(&specs, 3).unwrap();
            train(&mut net, black_box(xs.view()), ys.view(), &cfg).unwrap()
        })
    });
}

criterion_group!(benches, texture, models);
criterion_main!(benches);
