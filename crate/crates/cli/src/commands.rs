use std::fs;
use std::path::{Path, PathBuf};

use ggr_core::cohort::{generate_synthetic_cohort, load_cohort_dir_with, save_cohort_dir};
use ggr_core::config::ConfigFile;
use ggr_core::eval::{fold_seed, make_folds, report::write_reports, run_comparison};
use ggr_core::ggr::{load_pipeline, save_pipeline, select_deep, select_genes, select_handcrafted};
use ggr_core::preprocess::{load_slab, preprocess as preprocess_slab, save_slab};
use ggr_core::select::select_features;
use ggr_core::texture::{extract_cohort, extract_handcrafted, feature_names};
use ggr_core::{CohortDataset, ExperimentData, FeatureTable, GgrConfig, GgrError, GgrPipeline, Mode, Result, RunConfig, SyntheticSpec};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{parse_dims, parse_modes, CohortArgs, EvaluateArgs, ExtractArgs, FoldId, Global, ModelArgs, PredictArgs, StageArgs, SynthArgs, TrainArgs};
use crate::manifest;

const HANDCRAFTED_CSV: &str = "features/handcrafted.csv";

fn resolve(global: &Global, overlay: ConfigFile) -> Result<RunConfig> {
    let base = match &global.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let flags = ConfigFile { seed: global.seed, jobs: global.jobs, ..overlay };
    let config = base.merge(flags).resolve()?;
    config.check_paths()?;
    if let Some(j) = config.jobs {
        if rayon::ThreadPoolBuilder::new().num_threads(j).build_global().is_err() {
            log::warn!("thread pool already initialised; --jobs ignored");
        }
    }
    Ok(config)
}

fn overlay(cohort: Option<&CohortArgs>, model: Option<&ModelArgs>) -> ConfigFile {
    let mut c = model.map(ModelArgs::overlay).unwrap_or_default();
    c.paths = cohort.map(CohortArgs::overlay).unwrap_or_default();
    c
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GgrError::io(dir, e))
}

fn cohort_dir(config: &RunConfig, out: &Path) -> PathBuf {
    config.paths.cohort.clone().unwrap_or_else(|| out.join("cohort"))
}

fn load_cohort(config: &RunConfig, out: &Path) -> Result<(CohortDataset, Vec<PathBuf>)> {
    let dir = cohort_dir(config, out);
    let cohort = load_cohort_dir_with(&dir, config.paths.genes.as_deref())?;
    let mut inputs = vec![dir];
    inputs.extend(config.paths.genes.clone());
    inputs.extend(config.paths.deep_features.clone());
    Ok((cohort, inputs))
}

/// Reads `explicit`, else `<out>/features/handcrafted.csv`, else extracts
/// from the cohort.
fn handcrafted(config: &RunConfig, cohort: &CohortDataset, explicit: Option<&Path>, out: &Path, inputs: &mut Vec<PathBuf>) -> Result<FeatureTable> {
    let default = out.join(HANDCRAFTED_CSV);
    let path = explicit.map(Path::to_path_buf).or_else(|| default.exists().then_some(default));
    match path {
        Some(p) => {
            let t = FeatureTable::read_csv(&p)?;
            inputs.push(p);
            Ok(t)
        }
        None => {
            log::info!("extracting handcrafted features for {} patients", cohort.len());
            extract_cohort(cohort, &config.texture)
        }
    }
}

fn experiment_data(config: &RunConfig, out: &Path, features: Option<&Path>, need_handcrafted: bool) -> Result<(ExperimentData, Vec<PathBuf>)> {
    let (cohort, mut inputs) = load_cohort(config, out)?;
    let hc = if need_handcrafted { Some(handcrafted(config, &cohort, features, out, &mut inputs)?) } else { None };
    let deep = config.paths.deep_features.as_ref().map(FeatureTable::read_csv).transpose()?;
    Ok((ExperimentData::from_cohort(&cohort, hc.as_ref(), deep.as_ref())?, inputs))
}

/// Training rows of `fold`, or every row.
fn train_rows(config: &RunConfig, data: &ExperimentData, fold: Option<FoldId>) -> Result<Vec<usize>> {
    match fold {
        None => Ok((0..data.len()).collect()),
        Some(id) => Ok(fold_of(config, data, id)?.0),
    }
}

fn fold_of(config: &RunConfig, data: &ExperimentData, id: FoldId) -> Result<(Vec<usize>, Vec<usize>)> {
    let plan = make_folds(&data.labels, config.eval.k, config.eval.repeats, config.eval.seed)?;
    let f = plan
        .get(id.repeat, id.fold)
        .ok_or_else(|| GgrError::invalid("fold", format!("no fold {}:{} in a {}x{} plan", id.repeat, id.fold, config.eval.repeats, config.eval.k)))?;
    Ok((f.train.clone(), f.test.clone()))
}

fn fit_config(config: &RunConfig, fold: Option<FoldId>) -> GgrConfig {
    let seed = match fold {
        Some(id) => fold_seed(config.ggr.seed, id.repeat, id.fold),
        None => config.ggr.seed,
    };
    GgrConfig { seed, ..config.ggr.clone() }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| GgrError::format("json", e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| GgrError::io(path, e))
}

fn paths(v: &[PathBuf]) -> Vec<&Path> {
    v.iter().map(PathBuf::as_path).collect()
}

pub fn synth(global: &Global, a: &SynthArgs) -> Result<()> {
    let config = resolve(global, ConfigFile::default())?;
    let spec = SyntheticSpec {
        n_patients: a.patients,
        n_genes: a.genes,
        n_informative: a.informative,
        latent_dim: a.latent_dim,
        signal_strength: a.signal_strength,
        noise: a.noise,
        dims: parse_dims(&a.dims)?,
        deep_dim: a.deep_dim,
    };
    let cohort = generate_synthetic_cohort(&spec, config.seed)?;
    let dir = global.out.join("cohort");
    save_cohort_dir(&dir, &cohort)?;
    println!("{} patients, {} genes -> {}", cohort.len(), cohort.gene_names.len(), dir.display());
    manifest::write(&global.out, "synth", &config, &[], &[&dir])
}

pub fn preprocess(global: &Global, a: &crate::args::PreprocessArgs) -> Result<()> {
    let config = resolve(global, overlay(Some(&a.cohort), None))?;
    let (cohort, inputs) = load_cohort(&config, &global.out)?;
    let dir = global.out.join("slabs");
    mkdir(&dir)?;
    cohort.records.par_iter().try_for_each(|r| {
        let mask = r.mask.as_ref().ok_or_else(|| GgrError::MissingInput(format!("tumor mask for {}", r.id)))?;
        let (slab, slab_mask) = preprocess_slab(&r.volume, mask).map_err(|e| match e {
            GgrError::EmptyMask(_) => GgrError::EmptyMask(format!(" for {}", r.id)),
            other => other,
        })?;
        save_slab(dir.join(format!("{}.ggrslab", r.id)), &slab, &slab_mask)
    })?;
    println!("{} slabs -> {}", cohort.len(), dir.display());
    manifest::write(&global.out, "preprocess", &config, &paths(&inputs), &[&dir])
}

pub fn extract_features(global: &Global, a: &ExtractArgs) -> Result<()> {
    let config = resolve(global, overlay(None, Some(&a.model)))?;
    let dir = a.slabs.clone().unwrap_or_else(|| global.out.join("slabs"));
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| GgrError::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ggrslab"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(GgrError::MissingInput(format!("no .ggrslab files in {}", dir.display())));
    }
    let rows = files
        .par_iter()
        .map(|p| {
            let (slab, mask) = load_slab(p)?;
            Ok(extract_handcrafted(&slab, &mask, &config.texture)?.values)
        })
        .collect::<Result<Vec<_>>>()?;
    let names = feature_names(&config.texture);
    let ids = files.iter().map(|p| p.file_stem().unwrap_or_default().to_string_lossy().into_owned()).collect();
    let mut values = Array2::zeros((rows.len(), names.len()));
    for (i, row) in rows.iter().enumerate() {
        values.row_mut(i).assign(&ndarray::ArrayView1::from(row));
    }
    let table = FeatureTable::new(ids, names, values)?;
    let path = global.out.join(HANDCRAFTED_CSV);
    mkdir(path.parent().expect("has parent"))?;
    table.write_csv(&path)?;
    println!("{} x {} features -> {}", table.n_rows(), table.n_cols(), path.display());
    manifest::write(&global.out, "extract-features", &config, &[&dir], &[&path])
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GeneSelection {
    pub names: Vec<String>,
    pub indices: Vec<usize>,
    /// Per-gene score and p-value over all genes.
    pub scores: Vec<f64>,
    pub p_values: Vec<Option<f64>>,
    pub fell_back: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectionFile {
    pub mode: Mode,
    pub fold: Option<(usize, usize)>,
    pub n_train: usize,
    pub method: String,
    pub genes: Option<GeneSelection>,
    pub handcrafted: Option<Vec<usize>>,
    pub deep: Option<Vec<usize>>,
}

pub fn select(global: &Global, a: &StageArgs) -> Result<()> {
    let config = resolve(global, overlay(Some(&a.cohort), Some(&a.model)))?;
    let (data, inputs) = experiment_data(&config, &global.out, a.features.as_deref(), a.mode.uses_handcrafted())?;
    let train = data.subset(&train_rows(&config, &data, a.fold)?);
    let labels = &train.labels;
    let genes = match (&train.genes, a.mode.needs_genes()) {
        (Some(g), true) => {
            let full = select_features(g.view(), labels, &config.ggr.gene_selection)?;
            let indices = select_genes(g.view(), labels, &config.ggr.gene_selection)?;
            Some(GeneSelection {
                names: indices.iter().map(|&i| train.gene_names[i].clone()).collect(),
                fell_back: full.fell_back || full.selected.is_empty(),
                indices,
                scores: full.scores,
                p_values: full.p_values,
            })
        }
        (None, true) => return Err(GgrError::MissingInput("gene matrix".into())),
        _ => None,
    };
    let hc = match (&train.handcrafted, a.mode.uses_handcrafted()) {
        (Some(x), true) => Some(select_handcrafted(x.view(), labels, config.ggr.handcrafted_k)?),
        _ => None,
    };
    let deep = match (&train.deep, a.mode.uses_deep()) {
        (Some(x), true) => Some(select_deep(x.view(), labels, config.ggr.deep_p_threshold, config.ggr.deep_fallback_k)?),
        (None, true) => return Err(GgrError::MissingInput(format!("deep features required by mode {}", a.mode))),
        _ => None,
    };
    let file = SelectionFile {
        mode: a.mode,
        fold: a.fold.map(|f| (f.repeat, f.fold)),
        n_train: train.len(),
        method: config.ggr.gene_selection.method.tag().to_string(),
        genes,
        handcrafted: hc,
        deep,
    };
    mkdir(&global.out)?;
    let path = global.out.join("selection.json");
    write_json(&path, &file)?;
    if let Some(g) = &file.genes {
        println!("{} genes selected: {}", g.names.len(), g.names.join(","));
    }
    manifest::write(&global.out, "select", &config, &paths(&inputs), &[&path])
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    mode: Mode,
    fold: Option<(usize, usize)>,
    seed: u64,
    n_train: usize,
    genes: Vec<String>,
    gene_mse_raw: Vec<f64>,
    classifier_final_loss: Option<f64>,
    classifier_epochs: usize,
    classifier_stopped_early: bool,
}

pub fn train_ggr(global: &Global, a: &TrainArgs) -> Result<()> {
    let s = &a.stage;
    let config = resolve(global, overlay(Some(&s.cohort), Some(&s.model)))?;
    let (data, mut inputs) = experiment_data(&config, &global.out, s.features.as_deref(), s.mode.uses_handcrafted())?;
    let train = data.subset(&train_rows(&config, &data, s.fold)?);
    let preselected = match &a.selection {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| GgrError::io(p, e))?;
            let sel: SelectionFile = serde_json::from_str(&text).map_err(|e| GgrError::format("selection json", e.to_string()))?;
            if sel.fold != s.fold.map(|f| (f.repeat, f.fold)) {
                return Err(GgrError::invalid("selection", "selection was made on a different fold"));
            }
            inputs.push(p.clone());
            sel.genes.map(|g| g.indices)
        }
        None => None,
    };
    let cfg = fit_config(&config, s.fold);
    let (pipeline, report) = GgrPipeline::fit_with(s.mode, &train.inputs(s.mode, true), &train.labels, &train.gene_names, &cfg, preselected.as_deref())?;
    mkdir(&global.out)?;
    let path = global.out.join("pipeline.ggrpipe");
    save_pipeline(&pipeline, &path)?;
    let summary = TrainSummary {
        mode: s.mode,
        fold: s.fold.map(|f| (f.repeat, f.fold)),
        seed: cfg.seed,
        n_train: train.len(),
        genes: pipeline.gene_names.clone(),
        gene_mse_raw: report.gene_mse_raw,
        classifier_final_loss: report.classifier_trace.final_loss(),
        classifier_epochs: report.classifier_trace.loss_trace.len(),
        classifier_stopped_early: report.classifier_trace.stopped_early,
    };
    let rpath = global.out.join("train_report.json");
    write_json(&rpath, &summary)?;
    println!("{} fitted on {} patients -> {}", s.mode, train.len(), path.display());
    manifest::write(&global.out, "train-ggr", &config, &paths(&inputs), &[&path, &rpath])
}

pub fn predict(global: &Global, a: &PredictArgs) -> Result<()> {
    let config = resolve(global, overlay(Some(&a.cohort), Some(&a.model)))?;
    let ppath = a.pipeline.clone().unwrap_or_else(|| global.out.join("pipeline.ggrpipe"));
    let pipeline = load_pipeline(&ppath)?;
    let mode = pipeline.mode;
    let (data, mut inputs) = experiment_data(&config, &global.out, a.features.as_deref(), mode.uses_handcrafted())?;
    inputs.push(ppath);
    let rows = match a.fold {
        Some(id) => fold_of(&config, &data, id)?.1,
        None => (0..data.len()).collect(),
    };
    let test = data.subset(&rows);
    let probabilities = pipeline.predict_proba(&test.inputs(mode, mode.reads_test_genes()))?;
    mkdir(&global.out)?;
    let path = global.out.join("predictions.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["id", "probability", "label"])?;
    for ((id, p), l) in test.ids.iter().zip(&probabilities).zip(&test.labels) {
        w.write_record([id.clone(), format!("{p}"), u8::from(*l).to_string()])?;
    }
    w.flush().map_err(|e| GgrError::io(&path, e))?;
    println!("{} predictions -> {}", probabilities.len(), path.display());
    manifest::write(&global.out, "predict", &config, &paths(&inputs), &[&path])
}

pub fn evaluate(global: &Global, a: &EvaluateArgs) -> Result<()> {
    let mut o = overlay(Some(&a.cohort), Some(&a.model));
    o.modes = match (&a.mode, &a.modes) {
        (Some(m), _) => Some(vec![*m]),
        (None, Some(s)) => Some(parse_modes(s)?),
        (None, None) => None,
    };
    let config = resolve(global, o)?;
    let need_hc = config.modes.iter().any(|m| m.uses_handcrafted());
    let (data, inputs) = experiment_data(&config, &global.out, a.features.as_deref(), need_hc)?;
    let (plan, reports) = run_comparison(&data, &config.modes, &config.ggr, &config.eval)?;
    let dir = global.out.join("reports");
    mkdir(&dir)?;
    let written = write_reports(&dir, &plan, &reports, &data.ids, &data.labels)?;
    println!("{:<28} {:>8} {:>8} {:>8} {:>8}", "mode", "auc", "acc", "sens", "spec");
    let fmt = |s: &Option<ggr_core::eval::Stat>| s.as_ref().map_or("NA".to_string(), |s| format!("{:.3}", s.mean));
    for r in &reports {
        let s = &r.summary;
        println!("{:<28} {:>8} {:>8} {:>8} {:>8}", r.mode.tag(), fmt(&s.auc), fmt(&s.accuracy), fmt(&s.sensitivity), fmt(&s.specificity));
        if !r.all_clean() {
            log::warn!("{}: genes were selected on the whole cohort; test labels influenced training", r.mode);
        }
    }
    manifest::write(&global.out, "evaluate", &config, &paths(&inputs), &paths(&written))
}
