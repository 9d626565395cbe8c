use ndarray::{array, Array2};

use super::*;
use crate::net::DenseNetwork;
use crate::rng::SplitMix64;

fn quick(config: &mut GgrConfig) {
    config.regressor.epochs = 150;
    config.classifier.epochs = 150;
}

/// Features where column 0 tracks the label and genes follow column 0.
fn toy(n: usize, hc: usize, deep: usize, genes: usize, seed: u64) -> (Array2<f64>, Array2<f64>, Array2<f64>, Vec<bool>) {
    let mut rng = SplitMix64::new(seed);
    let labels: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
    let z: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 } + 0.7 * rng.normal()).collect();
    let h = Array2::from_shape_fn((n, hc), |(i, j)| if j < 2 { z[i] + 0.3 * rng.normal() } else { rng.normal() });
    let d = Array2::from_shape_fn((n, deep), |(i, j)| if j == 0 { z[i] + 0.5 * rng.normal() } else { rng.normal() });
    let g = Array2::from_shape_fn((n, genes), |(i, j)| {
        if j < 2 {
            (300.0 + 80.0 * z[i] + 10.0 * rng.normal()).max(0.0)
        } else {
            50.0 + 5.0 * rng.uniform()
        }
    });
    (h, d, g, labels)
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("G{i}")).collect()
}

#[test]
fn regressor_parameter_count() {
    let net = build_gene_regressor(12, 100, 12, 16, 0).unwrap();
    assert_eq!(net.n_params(), 100 * 12 + 12 + 24 * 16 + 16 + 16 + 1);
    assert_eq!(net.n_params(), 1629);
    assert_eq!(net.input_width(), 112);
    let hc_only = build_gene_regressor(12, 0, 12, 16, 0).unwrap();
    assert_eq!(hc_only.input_width(), 12);
    assert_eq!(hc_only.layers.len(), 2);
    let deep_only = build_gene_regressor(0, 40, 12, 16, 0).unwrap();
    assert_eq!(deep_only.input_width(), 40);
    assert!(build_gene_regressor(0, 0, 12, 16, 0).is_err());
}

#[test]
fn zero_regressor_outputs_zero() {
    let net = DenseNetwork::zeros(&regressor_specs(12, 30, 12, 16).unwrap()).unwrap();
    assert_eq!(net.forward_one(&[0.0; 42]).unwrap(), vec![0.0]);
}

#[test]
fn mode_tags_round_trip() {
    for m in Mode::ALL {
        assert_eq!(m.tag().parse::<Mode>().unwrap(), m);
        assert_eq!(Mode::from_code(m.code()), Some(m));
    }
    assert!("ggr".parse::<Mode>().is_err());
}

#[test]
fn standardizer_inverts() {
    let x = array![[1.0, 5.0, 2.0], [3.0, 5.0, -2.0], [8.0, 5.0, 0.0]];
    let s = Standardizer::fit(x.view());
    let z = s.transform(x.view()).unwrap();
    assert!(z.column(1).iter().all(|&v| v == 0.0));
    let back = s.inverse(z.view()).unwrap();
    for (a, b) in back.iter().zip(x.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn linear_gene_is_recovered() {
    let mut rng = SplitMix64::new(4);
    let x = Array2::from_shape_fn((80, 12), |_| rng.normal());
    let x = Standardizer::fit(x.view()).transform(x.view()).unwrap();
    let genes = x.column(0).mapv(|v| 500.0 + 120.0 * v).insert_axis(Axis(1));
    let mut cfg = GgrConfig::default();
    cfg.regressor.epochs = 3000;
    cfg.regressor.patience = None;
    let (est, traces) = train_gene_estimators(x.view(), 12, genes.view(), &cfg).unwrap();
    let var = 120.0f64.powi(2);
    assert!(est.train_mse_raw[0] / var < 1e-4, "{}", est.train_mse_raw[0] / var);
    assert_eq!(traces.len(), 1);
    assert_eq!(est.estimate(x.view()).unwrap().dim(), (80, 1));
}

#[test]
fn classifier_separates_and_learns_prior() {
    let x = array![[0.0, 1.0], [0.2, 0.9], [1.0, 0.1], [0.9, 0.0], [0.1, 0.8], [0.8, 0.3]];
    let labels = [true, true, false, false, true, false];
    let cfg = TrainConfig { epochs: 2000, patience: None, ..TrainConfig::classifier() };
    let (net, _) = train_recurrence_classifier(x.view(), &labels, 32, &cfg).unwrap();
    let p = net.forward(x.view()).unwrap();
    for (pi, &l) in p.column(0).iter().zip(&labels) {
        assert_eq!(*pi >= 0.5, l);
        assert!(*pi > 0.0 && *pi < 1.0);
    }

    let same = Array2::from_elem((40, 3), 0.7);
    let labels: Vec<bool> = (0..40).map(|i| i < 26).collect();
    let (net, _) = train_recurrence_classifier(same.view(), &labels, 32, &TrainConfig::classifier()).unwrap();
    let p = net.forward_one(&[0.7, 0.7, 0.7]).unwrap()[0];
    assert!((p - 26.0 / 40.0).abs() < 0.05, "{p}");

    assert!(matches!(train_recurrence_classifier(same.view(), &[true; 40], 8, &TrainConfig::classifier()), Err(GgrError::SingleClass)));
}

#[test]
fn every_mode_fits_and_round_trips() {
    let (h, d, g, labels) = toy(60, 20, 15, 6, 3);
    let mut cfg = GgrConfig::default();
    quick(&mut cfg);
    let inputs = ModelInputs { handcrafted: Some(h.view()), deep: Some(d.view()), genes: Some(g.view()) };
    for mode in Mode::ALL {
        let (p, report) = GgrPipeline::fit(mode, &inputs, &labels, &names(6), &cfg).unwrap();
        let test = ModelInputs { genes: if mode.reads_test_genes() { inputs.genes } else { None }, ..inputs };
        let probs = p.predict_proba(&test).unwrap();
        assert_eq!(probs.len(), 60);
        assert!(probs.iter().all(|&v| v > 0.0 && v < 1.0), "{mode}");
        assert_eq!(p.predict_proba(&test).unwrap(), probs);
        if mode.is_ggr() {
            assert_eq!(p.n_regressors(), p.selections.genes.len());
            assert_eq!(report.gene_mse_raw.len(), p.selections.genes.len());
            assert_eq!(p.estimate_genes(&test).unwrap().ncols(), p.selections.genes.len());
        } else {
            assert_eq!(p.n_regressors(), 0);
            assert!(p.estimate_genes(&test).is_err());
        }
        let bytes = encode_pipeline(&p);
        let back = decode_pipeline(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(encode_pipeline(&back), bytes);
        let again = back.predict_proba(&test).unwrap();
        assert!(again.iter().zip(&probs).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(decode_pipeline(&bytes[..bytes.len() - 3]).is_err());
    }
}

#[test]
fn ggr_fits_are_deterministic() {
    let (h, d, g, labels) = toy(50, 16, 10, 5, 8);
    let mut cfg = GgrConfig { seed: 12, ..GgrConfig::default() };
    quick(&mut cfg);
    let inputs = ModelInputs { handcrafted: Some(h.view()), deep: Some(d.view()), genes: Some(g.view()) };
    let a = GgrPipeline::fit(Mode::GgrFusion, &inputs, &labels, &names(5), &cfg).unwrap().0;
    let b = GgrPipeline::fit(Mode::GgrFusion, &inputs, &labels, &names(5), &cfg).unwrap().0;
    assert_eq!(encode_pipeline(&a), encode_pipeline(&b));
}

#[test]
fn prediction_needs_no_genes_and_checks_inputs() {
    let (h, d, g, labels) = toy(45, 14, 9, 4, 1);
    let mut cfg = GgrConfig::default();
    quick(&mut cfg);
    let inputs = ModelInputs { handcrafted: Some(h.view()), deep: Some(d.view()), genes: Some(g.view()) };
    let (p, _) = GgrPipeline::fit(Mode::GgrFusion, &inputs, &labels, &names(4), &cfg).unwrap();
    let no_deep = ModelInputs { handcrafted: Some(h.view()), deep: None, genes: None };
    assert!(matches!(p.predict_proba(&no_deep), Err(GgrError::MissingInput(_))));
    let narrow = h.slice(ndarray::s![.., ..10]).to_owned();
    let bad = ModelInputs { handcrafted: Some(narrow.view()), deep: Some(d.view()), genes: None };
    assert!(matches!(p.predict_proba(&bad), Err(GgrError::Shape(_))));
    let missing = ModelInputs { handcrafted: Some(h.view()), deep: Some(d.view()), genes: None };
    assert!(GgrPipeline::fit(Mode::GeneTruth, &missing, &labels, &names(4), &cfg).is_err());
}

#[test]
fn estimated_gene_perturbation_follows_gradient_sign() {
    let (h, d, g, labels) = toy(60, 12, 8, 4, 6);
    let mut cfg = GgrConfig::default();
    quick(&mut cfg);
    let inputs = ModelInputs { handcrafted: Some(h.view()), deep: Some(d.view()), genes: Some(g.view()) };
    let (p, _) = GgrPipeline::fit(Mode::GgrFusion, &inputs, &labels, &names(4), &cfg).unwrap();
    let x = p.classifier_inputs(&ModelInputs { genes: None, ..inputs }).unwrap();
    let mut checked = 0;
    for row in x.rows() {
        let row = row.to_vec();
        let grad = p.classifier.input_gradient(&row).unwrap();
        let base = p.classifier.forward_one(&row).unwrap()[0];
        for (j, &gj) in grad.iter().enumerate() {
            if gj.abs() < 1e-6 {
                continue;
            }
            let mut moved = row.clone();
            moved[j] += 1e-6;
            let delta = p.classifier.forward_one(&moved).unwrap()[0] - base;
            assert_eq!(delta > 0.0, gj > 0.0);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn constant_features_give_chance_scores() {
    let (_, _, _, labels) = toy(40, 1, 1, 1, 2);
    let h = Array2::from_elem((40, 12), 3.0);
    let mut cfg = GgrConfig::default();
    quick(&mut cfg);
    let inputs = ModelInputs { handcrafted: Some(h.view()), ..Default::default() };
    let (p, _) = GgrPipeline::fit(Mode::DirectRadiomics, &inputs, &labels, &[], &cfg).unwrap();
    let probs = p.predict_proba(&inputs).unwrap();
    assert!(probs.iter().all(|&v| v == probs[0]));
}

#[test]
fn config_validation() {
    assert!(GgrConfig::default().validate().is_ok());
    let mut c = GgrConfig::default();
    c.classifier.loss = crate::net::Loss::Mse;
    assert!(c.validate().is_err());
    let c = GgrConfig { handcrafted_k: 0, ..GgrConfig::default() };
    assert!(matches!(c.validate(), Err(GgrError::InvalidArgument { field: "handcrafted_k", .. })));
}
