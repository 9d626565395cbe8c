//! The two-stage genotype-guided model and the single-stage baselines.
//!
//! Stage one trains one regressor per selected gene, mapping selected image
//! features to that gene's expression. Stage two trains the recurrence
//! classifier on the genes *estimated* for the training patients, so test
//! patients need CT-derived features only.

mod bundle;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GgrError, Result};
use crate::net::{train, Activation, DenseNetwork, LayerSpec, Loss, TrainConfig, TrainReport};
use crate::rng::SplitMix64;
use crate::select::{f_test_columns, select_by_pvalue, select_features, top_k_by_f, SelectionConfig};

pub use bundle::{decode_pipeline, encode_pipeline, load_pipeline, save_pipeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    GgrFusion,
    GgrHandcrafted,
    GgrDeep,
    DirectRadiomics,
    DirectDeep,
    DirectFusion,
    GeneTruth,
    GeneTruthPlusRadiomics,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::GgrFusion,
        Mode::GgrHandcrafted,
        Mode::GgrDeep,
        Mode::DirectRadiomics,
        Mode::DirectDeep,
        Mode::DirectFusion,
        Mode::GeneTruth,
        Mode::GeneTruthPlusRadiomics,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Mode::GgrFusion => "ggr_fusion",
            Mode::GgrHandcrafted => "ggr_handcrafted",
            Mode::GgrDeep => "ggr_deep",
            Mode::DirectRadiomics => "direct_radiomics",
            Mode::DirectDeep => "direct_deep",
            Mode::DirectFusion => "direct_fusion",
            Mode::GeneTruth => "gene_truth",
            Mode::GeneTruthPlusRadiomics => "gene_truth_plus_radiomics",
        }
    }

    /// Two-stage modes that estimate genes from image features.
    pub fn is_ggr(self) -> bool {
        matches!(self, Mode::GgrFusion | Mode::GgrHandcrafted | Mode::GgrDeep)
    }

    pub fn uses_handcrafted(self) -> bool {
        matches!(
            self,
            Mode::GgrFusion | Mode::GgrHandcrafted | Mode::DirectRadiomics | Mode::DirectFusion | Mode::GeneTruthPlusRadiomics
        )
    }

    pub fn uses_deep(self) -> bool {
        matches!(self, Mode::GgrFusion | Mode::GgrDeep | Mode::DirectDeep | Mode::DirectFusion)
    }

    /// Needs gene expression for training.
    pub fn needs_genes(self) -> bool {
        self.is_ggr() || self.reads_test_genes()
    }

    /// Reads measured genes at prediction time.
    pub fn reads_test_genes(self) -> bool {
        matches!(self, Mode::GeneTruth | Mode::GeneTruthPlusRadiomics)
    }

    pub(crate) fn code(self) -> u8 {
        Mode::ALL.iter().position(|&m| m == self).expect("listed") as u8
    }

    pub(crate) fn from_code(c: u8) -> Option<Mode> {
        Mode::ALL.get(c as usize).copied()
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Mode {
    type Err = GgrError;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .iter()
            .copied()
            .find(|m| m.tag() == s)
            .ok_or_else(|| GgrError::invalid("mode", format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeneScaling {
    /// Targets standardized with training-fold mean and SD.
    #[default]
    Standardized,
    /// Targets in raw FPKM.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GgrConfig {
    /// Handcrafted features kept by F-test rank.
    pub handcrafted_k: usize,
    /// Deep features kept at `p < deep_p_threshold`.
    pub deep_p_threshold: f64,
    /// Deep features kept by rank when none pass the threshold.
    pub deep_fallback_k: usize,
    pub gene_selection: SelectionConfig,
    /// Width the deep branch is reduced to before concatenation.
    pub reduce_width: usize,
    pub regressor_hidden: usize,
    pub classifier_hidden: usize,
    pub gene_scaling: GeneScaling,
    pub regressor: TrainConfig,
    pub classifier: TrainConfig,
    pub seed: u64,
}

impl Default for GgrConfig {
    fn default() -> Self {
        Self {
            handcrafted_k: 12,
            deep_p_threshold: 0.02,
            deep_fallback_k: 12,
            gene_selection: SelectionConfig::default(),
            reduce_width: 12,
            regressor_hidden: 16,
            classifier_hidden: 32,
            gene_scaling: GeneScaling::Standardized,
            regressor: TrainConfig::regressor(),
            classifier: TrainConfig::classifier(),
            seed: 0,
        }
    }
}

impl GgrConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("handcrafted_k", self.handcrafted_k),
            ("deep_fallback_k", self.deep_fallback_k),
            ("reduce_width", self.reduce_width),
            ("regressor_hidden", self.regressor_hidden),
            ("classifier_hidden", self.classifier_hidden),
        ] {
            if v == 0 {
                return Err(GgrError::invalid(field, "must be >= 1"));
            }
        }
        if !(self.deep_p_threshold > 0.0 && self.deep_p_threshold <= 1.0) {
            return Err(GgrError::invalid("deep_p_threshold", "must be in (0, 1]"));
        }
        if self.regressor.loss != Loss::Mse {
            return Err(GgrError::invalid("regressor.loss", "gene regressors use mse"));
        }
        if self.classifier.loss != Loss::Bce {
            return Err(GgrError::invalid("classifier.loss", "the recurrence classifier uses bce"));
        }
        self.gene_selection.validate()?;
        self.regressor.validate()?;
        self.classifier.validate()
    }
}

/// Column-wise affine scaling; zero-variance columns map to 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    /// Population mean and SD of each column.
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut sd = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / n;
            let v = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            sd.push(if v > 0.0 { v.sqrt() } else { 0.0 });
        }
        Self { mean, sd }
    }

    pub fn identity(width: usize) -> Self {
        Self { mean: vec![0.0; width], sd: vec![1.0; width] }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(x.ncols())?;
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.sd[j]);
            col.mapv_inplace(|v| if s > 0.0 { (v - m) / s } else { 0.0 });
        }
        Ok(out)
    }

    pub fn inverse(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(z.ncols())?;
        let mut out = z.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.sd[j]);
            col.mapv_inplace(|v| m + s * v);
        }
        Ok(out)
    }

    fn check(&self, width: usize) -> Result<()> {
        if width != self.width() {
            return Err(GgrError::Shape(format!("scaler of width {} applied to {width} columns", self.width())));
        }
        Ok(())
    }
}

/// Regressor for one gene. The first `n_handcrafted` inputs pass through
/// unchanged, the remaining `n_deep` are reduced to `reduce_width` by a
/// jointly trained linear layer; the concatenation feeds one relu hidden
/// layer and a linear output. Either branch may be absent.
pub fn build_gene_regressor(n_handcrafted: usize, n_deep: usize, reduce_width: usize, hidden: usize, seed: u64) -> Result<DenseNetwork> {
    DenseNetwork::new(&regressor_specs(n_handcrafted, n_deep, reduce_width, hidden)?, seed)
}

pub fn regressor_specs(n_handcrafted: usize, n_deep: usize, reduce_width: usize, hidden: usize) -> Result<Vec<LayerSpec>> {
    if n_handcrafted + n_deep == 0 || hidden == 0 || (n_deep > 0 && reduce_width == 0) {
        return Err(GgrError::invalid("layers", "regressor widths must be >= 1"));
    }
    let mut specs = Vec::with_capacity(3);
    let mut width = n_handcrafted;
    if n_deep > 0 {
        specs.push(LayerSpec { passthrough: n_handcrafted, inputs: n_deep, outputs: reduce_width, activation: Activation::Linear });
        width += reduce_width;
    }
    specs.push(LayerSpec::dense(width, hidden, Activation::Relu));
    specs.push(LayerSpec::dense(hidden, 1, Activation::Linear));
    Ok(specs)
}

pub fn classifier_specs(inputs: usize, hidden: usize) -> Result<Vec<LayerSpec>> {
    if inputs == 0 || hidden == 0 {
        return Err(GgrError::invalid("layers", "classifier widths must be >= 1"));
    }
    Ok(vec![LayerSpec::dense(inputs, hidden, Activation::Relu), LayerSpec::dense(hidden, 1, Activation::Sigmoid)])
}

/// Per-gene regressors with the target scaling they were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneEstimators {
    pub networks: Vec<DenseNetwork>,
    pub target_scaler: Standardizer,
    /// Training MSE of each gene in raw FPKM units.
    pub train_mse_raw: Vec<f64>,
}

impl GeneEstimators {
    /// Estimated genes in raw FPKM units, one column per regressor.
    pub fn estimate(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut z = Array2::zeros((x.nrows(), self.networks.len()));
        for (g, net) in self.networks.iter().enumerate() {
            z.column_mut(g).assign(&net.forward(x)?.column(0));
        }
        self.target_scaler.inverse(z.view())
    }
}

/// Trains one MSE regressor per column of `genes` on the (already scaled)
/// inputs `x`, whose first `n_handcrafted` columns form the pass-through
/// branch. Regressors train in parallel; gene `g` is seeded from
/// `(config.seed, 1, g)`.
pub fn train_gene_estimators(
    x: ArrayView2<f64>,
    n_handcrafted: usize,
    genes: ArrayView2<f64>,
    config: &GgrConfig,
) -> Result<(GeneEstimators, Vec<TrainReport>)> {
    if genes.ncols() == 0 {
        return Err(GgrError::invalid("genes", "no genes selected"));
    }
    if genes.nrows() != x.nrows() {
        return Err(GgrError::Shape(format!("{} feature rows vs {} gene rows", x.nrows(), genes.nrows())));
    }
    if n_handcrafted > x.ncols() {
        return Err(GgrError::Shape("handcrafted branch wider than input".into()));
    }
    let target_scaler = match config.gene_scaling {
        GeneScaling::Standardized => {
            let mut s = Standardizer::fit(genes);
            // constant genes keep their level through the mean
            s.sd.iter_mut().filter(|v| **v == 0.0).for_each(|v| *v = 1.0);
            s
        }
        GeneScaling::Raw => Standardizer::identity(genes.ncols()),
    };
    let targets = target_scaler.transform(genes)?;
    let n_deep = x.ncols() - n_handcrafted;
    let fitted: Vec<(DenseNetwork, TrainReport)> = (0..genes.ncols())
        .into_par_iter()
        .map(|g| {
            let seed = SplitMix64::derive(config.seed, &[1, g as u64]).next_u64();
            let wrap = |e| GgrError::GeneTraining { gene: format!("#{g}"), source: Box::new(e) };
            let mut net = build_gene_regressor(n_handcrafted, n_deep, config.reduce_width, config.regressor_hidden, seed).map_err(wrap)?;
            let y = targets.column(g).to_owned().insert_axis(Axis(1));
            let tc = TrainConfig { seed, ..config.regressor };
            let report = train(&mut net, x, y.view(), &tc).map_err(wrap)?;
            Ok((net, report))
        })
        .collect::<Result<_>>()?;
    let (networks, traces): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let mut est = GeneEstimators { networks, target_scaler, train_mse_raw: Vec::new() };
    let fitted_genes = est.estimate(x)?;
    est.train_mse_raw = (0..genes.ncols())
        .map(|g| {
            let d = &genes.column(g) - &fitted_genes.column(g);
            d.mapv(|v| v * v).mean().unwrap_or(0.0)
        })
        .collect();
    Ok((est, traces))
}

fn check_two_classes(labels: &[bool]) -> Result<()> {
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(GgrError::SingleClass);
    }
    Ok(())
}

/// `inputs -> hidden relu -> 1 sigmoid`, trained with BCE.
pub fn train_recurrence_classifier(x: ArrayView2<f64>, labels: &[bool], hidden: usize, config: &TrainConfig) -> Result<(DenseNetwork, TrainReport)> {
    if x.nrows() != labels.len() {
        return Err(GgrError::Shape(format!("{} rows vs {} labels", x.nrows(), labels.len())));
    }
    check_two_classes(labels)?;
    let mut net = DenseNetwork::new(&classifier_specs(x.ncols(), hidden)?, config.seed)?;
    let y = Array2::from_shape_fn((labels.len(), 1), |(i, _)| f64::from(u8::from(labels[i])));
    let report = train(&mut net, x, y.view(), config)?;
    Ok((net, report))
}

/// Full-width per-patient inputs; rows are patients. Genes are only read
/// when the mode needs them.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModelInputs<'a> {
    pub handcrafted: Option<ArrayView2<'a, f64>>,
    pub deep: Option<ArrayView2<'a, f64>>,
    pub genes: Option<ArrayView2<'a, f64>>,
}

impl<'a> ModelInputs<'a> {
    fn rows(&self) -> Option<usize> {
        self.handcrafted.or(self.deep).or(self.genes).map(|m| m.nrows())
    }
}

/// Feature subsets chosen on training data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Selections {
    pub handcrafted: Vec<usize>,
    pub deep: Vec<usize>,
    pub genes: Vec<usize>,
}

/// Selected handcrafted columns: the `k` best by F-test.
pub fn select_handcrafted(x: ArrayView2<f64>, labels: &[bool], k: usize) -> Result<Vec<usize>> {
    Ok(top_k_by_f(&f_test_columns(x, labels)?, k))
}

/// Deep columns with F-test `p < threshold`, or the `fallback_k` best when
/// none pass.
pub fn select_deep(x: ArrayView2<f64>, labels: &[bool], threshold: f64, fallback_k: usize) -> Result<Vec<usize>> {
    let stats = f_test_columns(x, labels)?;
    let p: Vec<f64> = stats.iter().map(|t| t.p_value).collect();
    let chosen = select_by_pvalue(&p, threshold);
    if chosen.is_empty() {
        log::warn!("no deep feature passes p < {threshold}; keeping the {fallback_k} strongest");
        return Ok(top_k_by_f(&stats, fallback_k));
    }
    Ok(chosen)
}

/// Gene selection under `config`; if nothing survives, the single
/// strongest gene by F-test.
pub fn select_genes(genes: ArrayView2<f64>, labels: &[bool], config: &SelectionConfig) -> Result<Vec<usize>> {
    let r = select_features(genes, labels, config)?;
    if r.selected.is_empty() {
        log::warn!("gene selection is empty; keeping the strongest gene by F-test");
        return Ok(top_k_by_f(&f_test_columns(genes, labels)?, 1));
    }
    Ok(r.selected)
}

/// Expected full widths of each input block, checked at prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InputWidths {
    pub handcrafted: usize,
    pub deep: usize,
    pub genes: usize,
}

/// A fitted model for one mode. Immutable once fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct GgrPipeline {
    pub mode: Mode,
    pub widths: InputWidths,
    pub selections: Selections,
    pub gene_names: Vec<String>,
    /// Scales `[handcrafted | deep]` regressor inputs (two-stage modes) or
    /// raw classifier inputs (single-stage modes).
    pub feature_scaler: Standardizer,
    pub estimators: Option<GeneEstimators>,
    /// Scales the classifier's gene block (estimated or measured).
    pub gene_scaler: Standardizer,
    pub classifier: DenseNetwork,
}

/// Training diagnostics that are not part of the fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub gene_mse_raw: Vec<f64>,
    pub classifier_trace: TrainReport,
}

fn take_columns(x: ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(1), idx)
}

fn require<'a>(m: Option<ArrayView2<'a, f64>>, what: &str, mode: Mode) -> Result<ArrayView2<'a, f64>> {
    m.ok_or_else(|| GgrError::MissingInput(format!("{what} required by mode {mode}")))
}

fn hstack(blocks: &[Array2<f64>], rows: usize) -> Result<Array2<f64>> {
    let views: Vec<ArrayView2<f64>> = blocks.iter().map(|b| b.view()).collect();
    if views.is_empty() {
        return Ok(Array2::zeros((rows, 0)));
    }
    concatenate(Axis(1), &views).map_err(|e| GgrError::Shape(e.to_string()))
}

impl GgrPipeline {
    /// Fits every stage on training rows only.
    pub fn fit(mode: Mode, inputs: &ModelInputs, labels: &[bool], gene_names: &[String], config: &GgrConfig) -> Result<(Self, FitReport)> {
        Self::fit_with(mode, inputs, labels, gene_names, config, None)
    }

    /// As [`GgrPipeline::fit`], optionally with a gene subset chosen
    /// elsewhere (used to reproduce whole-cohort gene selection).
    pub fn fit_with(
        mode: Mode,
        inputs: &ModelInputs,
        labels: &[bool],
        gene_names: &[String],
        config: &GgrConfig,
        preselected_genes: Option<&[usize]>,
    ) -> Result<(Self, FitReport)> {
        config.validate()?;
        let n = inputs.rows().ok_or_else(|| GgrError::MissingInput("no input blocks".into()))?;
        if n != labels.len() {
            return Err(GgrError::Shape(format!("{n} rows vs {} labels", labels.len())));
        }
        check_two_classes(labels)?;
        for m in [inputs.handcrafted, inputs.deep, inputs.genes].into_iter().flatten() {
            if m.nrows() != n {
                return Err(GgrError::Shape("input blocks disagree on row count".into()));
            }
        }
        let mut widths = InputWidths::default();
        let mut sel = Selections::default();
        let mut feature_blocks = Vec::new();
        if mode.uses_handcrafted() {
            let hc = require(inputs.handcrafted, "handcrafted features", mode)?;
            widths.handcrafted = hc.ncols();
            sel.handcrafted = select_handcrafted(hc, labels, config.handcrafted_k)?;
            feature_blocks.push(take_columns(hc, &sel.handcrafted));
        }
        if mode.uses_deep() {
            let deep = require(inputs.deep, "deep features", mode)?;
            widths.deep = deep.ncols();
            sel.deep = select_deep(deep, labels, config.deep_p_threshold, config.deep_fallback_k)?;
            feature_blocks.push(take_columns(deep, &sel.deep));
        }
        let mut gene_block = None;
        if mode.needs_genes() {
            let genes = require(inputs.genes, "gene expression", mode)?;
            if genes.ncols() != gene_names.len() {
                return Err(GgrError::Shape(format!("{} gene columns vs {} names", genes.ncols(), gene_names.len())));
            }
            widths.genes = genes.ncols();
            sel.genes = match preselected_genes {
                Some(g) => {
                    if g.is_empty() || g.iter().any(|&i| i >= genes.ncols()) {
                        return Err(GgrError::invalid("genes", "preselected gene indices out of range"));
                    }
                    g.to_vec()
                }
                None => select_genes(genes, labels, &config.gene_selection)?,
            };
            gene_block = Some(take_columns(genes, &sel.genes));
        }
        let features = hstack(&feature_blocks, n)?;
        let feature_scaler = Standardizer::fit(features.view());
        let scaled_features = feature_scaler.transform(features.view())?;

        let mut gene_mse_raw = Vec::new();
        let mut estimators = None;
        let (gene_scaler, classifier_x) = if mode.is_ggr() {
            let truth = gene_block.take().expect("ggr modes read genes");
            let (est, _) = train_gene_estimators(scaled_features.view(), sel.handcrafted.len(), truth.view(), config)?;
            let estimated = est.estimate(scaled_features.view())?;
            gene_mse_raw = est.train_mse_raw.clone();
            estimators = Some(est);
            let gs = Standardizer::fit(estimated.view());
            let x = gs.transform(estimated.view())?;
            (gs, x)
        } else if let Some(truth) = gene_block.take() {
            let gs = Standardizer::fit(truth.view());
            let x = gs.transform(truth.view())?;
            (gs, hstack(&[x, scaled_features], n)?)
        } else {
            (Standardizer::default(), scaled_features)
        };
        let cseed = SplitMix64::derive(config.seed, &[2]).next_u64();
        let (classifier, classifier_trace) =
            train_recurrence_classifier(classifier_x.view(), labels, config.classifier_hidden, &TrainConfig { seed: cseed, ..config.classifier })?;
        let pipeline = GgrPipeline {
            mode,
            widths,
            gene_names: sel.genes.iter().map(|&g| gene_names[g].clone()).collect(),
            selections: sel,
            feature_scaler,
            estimators,
            gene_scaler,
            classifier,
        };
        Ok((pipeline, FitReport { gene_mse_raw, classifier_trace }))
    }

    fn scaled_features(&self, inputs: &ModelInputs, n: usize) -> Result<Array2<f64>> {
        let mut blocks = Vec::new();
        if self.mode.uses_handcrafted() {
            let hc = require(inputs.handcrafted, "handcrafted features", self.mode)?;
            self.check_width(hc, self.widths.handcrafted, "handcrafted")?;
            blocks.push(take_columns(hc, &self.selections.handcrafted));
        }
        if self.mode.uses_deep() {
            let deep = require(inputs.deep, "deep features", self.mode)?;
            self.check_width(deep, self.widths.deep, "deep")?;
            blocks.push(take_columns(deep, &self.selections.deep));
        }
        self.feature_scaler.transform(hstack(&blocks, n)?.view())
    }

    fn check_width(&self, m: ArrayView2<f64>, want: usize, what: &str) -> Result<()> {
        if m.ncols() != want {
            return Err(GgrError::Shape(format!("{what} block has {} columns, model expects {want}", m.ncols())));
        }
        Ok(())
    }

    /// Gene expression estimated from image features, raw FPKM units. Never
    /// reads `inputs.genes`.
    pub fn estimate_genes(&self, inputs: &ModelInputs) -> Result<Array2<f64>> {
        let est = self
            .estimators
            .as_ref()
            .ok_or_else(|| GgrError::invalid("mode", format!("mode {} does not estimate genes", self.mode)))?;
        let n = inputs.handcrafted.or(inputs.deep).map(|m| m.nrows()).ok_or_else(|| GgrError::MissingInput("image features".into()))?;
        est.estimate(self.scaled_features(inputs, n)?.view())
    }

    /// Classifier input rows.
    pub fn classifier_inputs(&self, inputs: &ModelInputs) -> Result<Array2<f64>> {
        if self.mode.is_ggr() {
            let est = self.estimate_genes(inputs)?;
            return self.gene_scaler.transform(est.view());
        }
        let n = inputs.rows().ok_or_else(|| GgrError::MissingInput("no input blocks".into()))?;
        let features = self.scaled_features(inputs, n)?;
        if self.mode.reads_test_genes() {
            let genes = require(inputs.genes, "gene expression", self.mode)?;
            self.check_width(genes, self.widths.genes, "gene")?;
            let g = self.gene_scaler.transform(take_columns(genes, &self.selections.genes).view())?;
            return hstack(&[g, features], n);
        }
        Ok(features)
    }

    /// Recurrence probability for each row.
    pub fn predict_proba(&self, inputs: &ModelInputs) -> Result<Vec<f64>> {
        let x = self.classifier_inputs(inputs)?;
        Ok(self.classifier.forward(x.view())?.column(0).to_vec())
    }

    pub fn n_regressors(&self) -> usize {
        self.estimators.as_ref().map_or(0, |e| e.networks.len())
    }
}

#[cfg(test)]
mod tests;
