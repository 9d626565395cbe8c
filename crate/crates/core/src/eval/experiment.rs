use std::sync::Mutex;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{make_folds, Fold, FoldPlan};
use super::metrics::{auc, average_roc, confusion_metrics, roc_curve, ConfusionMetrics, RocPoint};
use crate::cohort::CohortDataset;
use crate::error::{GgrError, Result};
use crate::ggr::{select_genes, GgrConfig, GgrPipeline, Mode, ModelInputs};
use crate::rng::SplitMix64;
use crate::table::FeatureTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub k: usize,
    pub repeats: usize,
    /// Repeat `r` shuffles with `seed + r`.
    pub seed: u64,
    pub threshold: f64,
    /// Select genes once on the whole cohort instead of per training fold.
    /// Leaks test labels into selection; the hygiene audit reports it.
    pub global_selection: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { k: 10, repeats: 5, seed: 0, threshold: 0.5, global_selection: false }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(GgrError::invalid("k", "must be >= 2"));
        }
        if self.repeats == 0 {
            return Err(GgrError::invalid("repeats", "must be >= 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(GgrError::invalid("threshold", "must be in (0, 1)"));
        }
        Ok(())
    }
}

/// Cohort-level matrices aligned by row.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    pub ids: Vec<String>,
    pub labels: Vec<bool>,
    pub handcrafted: Option<Array2<f64>>,
    pub deep: Option<Array2<f64>>,
    pub genes: Option<Array2<f64>>,
    pub gene_names: Vec<String>,
}

impl ExperimentData {
    /// Labels and genes from the cohort; feature tables are aligned to the
    /// cohort's patient order.
    pub fn from_cohort(cohort: &CohortDataset, handcrafted: Option<&FeatureTable>, deep: Option<&FeatureTable>) -> Result<Self> {
        let ids = cohort.ids();
        let labels = cohort
            .records
            .iter()
            .map(|r| r.recurrence.ok_or_else(|| GgrError::MissingInput(format!("recurrence label for {}", r.id))))
            .collect::<Result<Vec<_>>>()?;
        let genes = if cohort.gene_names.is_empty() { None } else { Some(cohort.gene_matrix().values) };
        let deep = match deep {
            Some(t) => Some(t.align_to(&ids)?.values),
            None => cohort.deep_matrix().map(|t| t.values),
        };
        Ok(Self {
            handcrafted: handcrafted.map(|t| t.align_to(&ids)).transpose()?.map(|t| t.values),
            deep,
            genes,
            gene_names: cohort.gene_names.clone(),
            ids,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let pick = |m: &Option<Array2<f64>>| m.as_ref().map(|m| m.select(Axis(0), rows));
        Self {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            handcrafted: pick(&self.handcrafted),
            deep: pick(&self.deep),
            genes: pick(&self.genes),
            gene_names: self.gene_names.clone(),
        }
    }

    /// Blocks `mode` reads; genes only when `with_genes` is set.
    pub fn inputs(&self, mode: Mode, with_genes: bool) -> ModelInputs<'_> {
        fn view(use_it: bool, m: &Option<Array2<f64>>) -> Option<ArrayView2<'_, f64>> {
            m.as_ref().filter(|_| use_it).map(|m| m.view())
        }
        ModelInputs {
            handcrafted: view(mode.uses_handcrafted(), &self.handcrafted),
            deep: view(mode.uses_deep(), &self.deep),
            genes: view(with_genes && mode.needs_genes(), &self.genes),
        }
    }

    /// Same data with labels permuted by `seed`.
    pub fn with_permuted_labels(&self, seed: u64) -> Self {
        let mut labels = self.labels.clone();
        SplitMix64::new(seed).shuffle(&mut labels);
        Self { labels, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Fit,
    Predict,
    Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Labels,
    Handcrafted,
    Deep,
    Genes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessEvent {
    pub phase: Phase,
    pub block: Block,
    pub rows: Vec<usize>,
}

/// Every row read during one fold, in order.
#[derive(Debug, Default)]
pub struct AccessLog {
    events: Mutex<Vec<AccessEvent>>,
}

impl AccessLog {
    pub fn record(&self, phase: Phase, block: Block, rows: &[usize]) {
        self.events.lock().expect("access log poisoned").push(AccessEvent { phase, block, rows: rows.to_vec() });
    }

    pub fn events(&self) -> Vec<AccessEvent> {
        self.events.lock().expect("access log poisoned").clone()
    }

    /// Checks the log against the fold's test rows.
    pub fn audit(&self, test: &[usize], mode: Mode) -> HygieneReport {
        let events = self.events();
        let is_test = |i: &usize| test.binary_search(i).is_ok();
        let mut report = HygieneReport::default();
        let last_fit = events.iter().rposition(|e| e.phase == Phase::Fit);
        let first_predict = events.iter().position(|e| e.phase != Phase::Fit);
        report.predict_after_fit = matches!((last_fit, first_predict), (Some(f), Some(p)) if f < p);
        for e in &events {
            let hits = e.rows.iter().filter(|i| is_test(i)).count();
            match e.phase {
                Phase::Fit => {
                    report.fit_row_reads += e.rows.len();
                    report.test_rows_read_in_fit += hits;
                }
                Phase::Predict | Phase::Score => {
                    if e.block == Block::Genes && !mode.reads_test_genes() {
                        report.test_gene_reads += hits;
                    }
                    if e.phase == Phase::Predict && e.block == Block::Labels {
                        report.test_labels_read_in_predict += hits;
                    }
                }
            }
        }
        report.clean = report.predict_after_fit
            && report.test_rows_read_in_fit == 0
            && report.test_gene_reads == 0
            && report.test_labels_read_in_predict == 0;
        report
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HygieneReport {
    pub fit_row_reads: usize,
    pub test_rows_read_in_fit: usize,
    /// Measured genes of test patients read by a mode that must not see them.
    pub test_gene_reads: usize,
    pub test_labels_read_in_predict: usize,
    pub predict_after_fit: bool,
    pub clean: bool,
}

/// Row access to [`ExperimentData`] that goes through an [`AccessLog`].
struct Gatherer<'a> {
    data: &'a ExperimentData,
    log: &'a AccessLog,
}

impl Gatherer<'_> {
    fn block(&self, block: Block, rows: &[usize], phase: Phase) -> Result<Array2<f64>> {
        let m = match block {
            Block::Handcrafted => &self.data.handcrafted,
            Block::Deep => &self.data.deep,
            Block::Genes => &self.data.genes,
            Block::Labels => unreachable!("labels are gathered with `labels`"),
        };
        let m = m.as_ref().ok_or_else(|| GgrError::MissingInput(format!("{block:?} matrix")))?;
        self.log.record(phase, block, rows);
        Ok(m.select(Axis(0), rows))
    }

    fn labels(&self, rows: &[usize], phase: Phase) -> Vec<bool> {
        self.log.record(phase, Block::Labels, rows);
        rows.iter().map(|&i| self.data.labels[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub n_train: usize,
    pub test_rows: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub metrics: ConfusionMetrics,
    /// `None` when the test fold holds a single class.
    pub auc: Option<f64>,
    pub roc: Vec<RocPoint>,
    pub n_genes: usize,
    /// Mean training MSE of the gene regressors in raw units.
    pub gene_mse_raw: Option<f64>,
    pub hygiene: HygieneReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample SD; 0 for a single value.
    pub sd: f64,
    /// Folds where the metric is defined.
    pub count: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        Some(Stat { mean, sd, count: values.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub accuracy: Option<Stat>,
    pub sensitivity: Option<Stat>,
    pub specificity: Option<Stat>,
    pub auc: Option<Stat>,
}

impl Summary {
    pub fn of(folds: &[FoldResult]) -> Self {
        let collect = |f: &dyn Fn(&FoldResult) -> Option<f64>| Stat::of(&folds.iter().filter_map(f).collect::<Vec<_>>());
        Summary {
            accuracy: collect(&|r| Some(r.metrics.accuracy)),
            sensitivity: collect(&|r| r.metrics.sensitivity),
            specificity: collect(&|r| r.metrics.specificity),
            auc: collect(&|r| r.auc),
        }
    }

    pub fn mean_auc(&self) -> Option<f64> {
        self.auc.map(|s| s.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub mode: Mode,
    pub folds: Vec<FoldResult>,
    pub summary: Summary,
    pub average_roc: Vec<RocPoint>,
    pub eval: EvalConfig,
    pub ggr: GgrConfig,
}

impl CvReport {
    pub fn all_clean(&self) -> bool {
        self.folds.iter().all(|f| f.hygiene.clean)
    }
}

/// Seed of the pipeline fitted on `(repeat, fold)`.
pub fn fold_seed(base: u64, repeat: usize, fold: usize) -> u64 {
    SplitMix64::derive(base, &[repeat as u64, fold as u64]).next_u64()
}

/// Fits on the fold's training rows and scores its test rows.
pub fn run_fold(
    data: &ExperimentData,
    mode: Mode,
    fold: &Fold,
    ggr: &GgrConfig,
    eval: &EvalConfig,
    global_genes: Option<&[usize]>,
) -> Result<(FoldResult, GgrPipeline)> {
    let log = AccessLog::default();
    let g = Gatherer { data, log: &log };
    if global_genes.is_some() {
        let all: Vec<usize> = (0..data.len()).collect();
        log.record(Phase::Fit, Block::Genes, &all);
        log.record(Phase::Fit, Block::Labels, &all);
    }
    let gather = |use_it: bool, block: Block, rows: &[usize], phase: Phase| -> Result<Option<Array2<f64>>> {
        if use_it {
            g.block(block, rows, phase).map(Some)
        } else {
            Ok(None)
        }
    };

    let train_labels = g.labels(&fold.train, Phase::Fit);
    let hc = gather(mode.uses_handcrafted(), Block::Handcrafted, &fold.train, Phase::Fit)?;
    let deep = gather(mode.uses_deep(), Block::Deep, &fold.train, Phase::Fit)?;
    let genes = gather(mode.needs_genes(), Block::Genes, &fold.train, Phase::Fit)?;
    let inputs = ModelInputs { handcrafted: hc.as_ref().map(|m| m.view()), deep: deep.as_ref().map(|m| m.view()), genes: genes.as_ref().map(|m| m.view()) };
    let cfg = GgrConfig { seed: fold_seed(ggr.seed, fold.repeat, fold.fold), ..ggr.clone() };
    let (pipeline, fit) = GgrPipeline::fit_with(mode, &inputs, &train_labels, &data.gene_names, &cfg, global_genes)?;

    let hc = gather(mode.uses_handcrafted(), Block::Handcrafted, &fold.test, Phase::Predict)?;
    let deep = gather(mode.uses_deep(), Block::Deep, &fold.test, Phase::Predict)?;
    let genes = gather(mode.reads_test_genes(), Block::Genes, &fold.test, Phase::Predict)?;
    let test_inputs =
        ModelInputs { handcrafted: hc.as_ref().map(|m| m.view()), deep: deep.as_ref().map(|m| m.view()), genes: genes.as_ref().map(|m| m.view()) };
    let probabilities = pipeline.predict_proba(&test_inputs)?;

    let test_labels = g.labels(&fold.test, Phase::Score);
    let metrics = confusion_metrics(&probabilities, &test_labels, eval.threshold)?;
    let (auc_value, roc) = match roc_curve(&probabilities, &test_labels) {
        Ok(curve) => (Some(auc(&probabilities, &test_labels)?), curve),
        Err(GgrError::SingleClass) => (None, Vec::new()),
        Err(e) => return Err(e),
    };
    let hygiene = log.audit(&fold.test, mode);
    if !hygiene.clean && global_genes.is_none() {
        return Err(GgrError::Leakage(format!("{hygiene:?}")));
    }
    let gene_mse_raw = (!fit.gene_mse_raw.is_empty()).then(|| fit.gene_mse_raw.iter().sum::<f64>() / fit.gene_mse_raw.len() as f64);
    let result = FoldResult {
        repeat: fold.repeat,
        fold: fold.fold,
        n_train: fold.train.len(),
        test_rows: fold.test.clone(),
        probabilities,
        metrics,
        auc: auc_value,
        roc,
        n_genes: pipeline.selections.genes.len(),
        gene_mse_raw,
        hygiene,
    };
    Ok((result, pipeline))
}

/// Gene subset chosen on every patient, for `global_selection`.
pub fn global_gene_selection(data: &ExperimentData, ggr: &GgrConfig) -> Result<Vec<usize>> {
    let genes = data.genes.as_ref().ok_or_else(|| GgrError::MissingInput("gene matrix".into()))?;
    select_genes(genes.view(), &data.labels, &ggr.gene_selection)
}

/// Cross-validates one mode over an existing plan. Folds run in parallel;
/// results come back in plan order.
pub fn run_with_plan(data: &ExperimentData, mode: Mode, plan: &FoldPlan, ggr: &GgrConfig, eval: &EvalConfig) -> Result<CvReport> {
    eval.validate()?;
    ggr.validate()?;
    if plan.n != data.len() {
        return Err(GgrError::Shape(format!("fold plan for {} patients, data has {}", plan.n, data.len())));
    }
    let global = if eval.global_selection && mode.needs_genes() { Some(global_gene_selection(data, ggr)?) } else { None };
    let folds = plan
        .folds
        .par_iter()
        .map(|f| {
            run_fold(data, mode, f, ggr, eval, global.as_deref())
                .map(|(r, _)| r)
                .map_err(|e| GgrError::Fold { repeat: f.repeat, fold: f.fold, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let curves: Vec<Vec<RocPoint>> = folds.iter().filter(|f| !f.roc.is_empty()).map(|f| f.roc.clone()).collect();
    Ok(CvReport {
        mode,
        summary: Summary::of(&folds),
        average_roc: average_roc(&curves),
        folds,
        eval: eval.clone(),
        ggr: ggr.clone(),
    })
}

pub fn run_experiment(data: &ExperimentData, mode: Mode, ggr: &GgrConfig, eval: &EvalConfig) -> Result<CvReport> {
    eval.validate()?;
    let plan = make_folds(&data.labels, eval.k, eval.repeats, eval.seed)?;
    run_with_plan(data, mode, &plan, ggr, eval)
}

/// Every mode on one shared fold plan, so comparisons are paired.
pub fn run_comparison(data: &ExperimentData, modes: &[Mode], ggr: &GgrConfig, eval: &EvalConfig) -> Result<(FoldPlan, Vec<CvReport>)> {
    eval.validate()?;
    let plan = make_folds(&data.labels, eval.k, eval.repeats, eval.seed)?;
    let reports = modes.iter().map(|&m| run_with_plan(data, m, &plan, ggr, eval)).collect::<Result<Vec<_>>>()?;
    Ok((plan, reports))
}
