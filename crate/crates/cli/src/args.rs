use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ggr_core::config::{ConfigFile, EvalSection, FeatureSection, ModelSection, PathsSection, SelectionSection, TrainSection};
use ggr_core::ggr::{GeneScaling, Mode};
use ggr_core::select::SelectionMethod;
use ggr_core::{GgrError, Result};

#[derive(Debug, Parser)]
#[command(name = "ggr", version, about = "Genotype-guided radiomics: recurrence prediction from CT via estimated genes")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "GGR_OUT_DIR", default_value = "ggr_out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a planted-signal synthetic cohort to `<out>/cohort`.
    Synth(SynthArgs),
    /// Window, slab-select and crop every patient into `<out>/slabs`.
    Preprocess(PreprocessArgs),
    /// Handcrafted features from slabs into `<out>/features/handcrafted.csv`.
    ExtractFeatures(ExtractArgs),
    /// Gene and feature selection on the training rows into `<out>/selection.json`.
    Select(StageArgs),
    /// Fit one pipeline into `<out>/pipeline.ggrpipe`.
    TrainGgr(TrainArgs),
    /// Score patients with a fitted pipeline into `<out>/predictions.csv`.
    Predict(PredictArgs),
    /// Repeated cross-validation of one or more modes into `<out>/reports`.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub patients: usize,
    #[arg(long, default_value_t = 200)]
    pub genes: usize,
    #[arg(long, default_value_t = 5)]
    pub informative: usize,
    #[arg(long, default_value_t = 3)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 4.0)]
    pub signal_strength: f64,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    /// Volume size as `slices,rows,cols`.
    #[arg(long, default_value = "9,48,48")]
    pub dims: String,
    #[arg(long, default_value_t = 32)]
    pub deep_dim: usize,
}

#[derive(Debug, Args)]
pub struct CohortArgs {
    /// Cohort directory (default `<out>/cohort`).
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// Gene CSV replacing the cohort's own gene table.
    #[arg(long)]
    pub genes: Option<PathBuf>,
    /// Deep-feature CSV (default: the cohort's `deep_features.csv`).
    #[arg(long)]
    pub deep_features: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub cohort: CohortArgs,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Slab directory (default `<out>/slabs`).
    #[arg(long)]
    pub slabs: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldId {
    pub repeat: usize,
    pub fold: usize,
}

fn parse_fold(s: &str) -> std::result::Result<FoldId, String> {
    let (r, f) = s.split_once(':').ok_or("expected REPEAT:FOLD")?;
    Ok(FoldId { repeat: r.parse().map_err(|e| format!("repeat: {e}"))?, fold: f.parse().map_err(|e| format!("fold: {e}"))? })
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: GgrError| e.to_string())
}

#[derive(Debug, Args)]
pub struct StageArgs {
    #[command(flatten)]
    pub cohort: CohortArgs,
    /// Handcrafted feature CSV (default `<out>/features/handcrafted.csv`).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Restrict to the training rows of cross-validation fold `REPEAT:FOLD`.
    #[arg(long, value_parser = parse_fold)]
    pub fold: Option<FoldId>,
    #[arg(long, value_parser = parse_mode, default_value = "ggr_fusion")]
    pub mode: Mode,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub stage: StageArgs,
    /// Take the gene subset from a `select` output instead of reselecting.
    #[arg(long)]
    pub selection: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub cohort: CohortArgs,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Pipeline bundle (default `<out>/pipeline.ggrpipe`).
    #[arg(long)]
    pub pipeline: Option<PathBuf>,
    /// Score only the test rows of fold `REPEAT:FOLD`.
    #[arg(long, value_parser = parse_fold)]
    pub fold: Option<FoldId>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub cohort: CohortArgs,
    /// Handcrafted feature CSV; extracted from the cohort when absent.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Single mode (alias of `--modes`).
    #[arg(long, value_parser = parse_mode, conflicts_with = "modes")]
    pub mode: Option<Mode>,
    /// Comma-separated modes, or `all`.
    #[arg(long)]
    pub modes: Option<String>,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Flags that overlay the configuration file.
#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Gene selection p-value threshold.
    #[arg(long)]
    pub pvalue: Option<f64>,
    #[arg(long)]
    pub lambda_frac: Option<f64>,
    #[arg(long, value_parser = |s: &str| s.parse::<SelectionMethod>().map_err(|e| e.to_string()))]
    pub selection_method: Option<SelectionMethod>,
    /// Select genes once on the whole cohort (leaks test labels; audited).
    #[arg(long)]
    pub global_selection: bool,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, value_parser = parse_scaling)]
    pub gene_scaling: Option<GeneScaling>,
    #[arg(long)]
    pub regressor_lr: Option<f64>,
    #[arg(long)]
    pub regressor_epochs: Option<usize>,
    #[arg(long)]
    pub classifier_lr: Option<f64>,
    #[arg(long)]
    pub classifier_epochs: Option<usize>,
    /// GLCM gray levels.
    #[arg(long)]
    pub levels: Option<usize>,
}

fn parse_scaling(s: &str) -> std::result::Result<GeneScaling, String> {
    match s {
        "standardized" => Ok(GeneScaling::Standardized),
        "raw" => Ok(GeneScaling::Raw),
        _ => Err("expected `standardized` or `raw`".into()),
    }
}

impl ModelArgs {
    pub fn overlay(&self) -> ConfigFile {
        ConfigFile {
            selection: SelectionSection {
                method: self.selection_method,
                pvalue: self.pvalue,
                lambda_frac: self.lambda_frac,
                global: self.global_selection.then_some(true),
            },
            features: FeatureSection { levels: self.levels, ..Default::default() },
            model: ModelSection { gene_scaling: self.gene_scaling, ..Default::default() },
            regressor: TrainSection { learning_rate: self.regressor_lr, epochs: self.regressor_epochs, ..Default::default() },
            classifier: TrainSection { learning_rate: self.classifier_lr, epochs: self.classifier_epochs, ..Default::default() },
            eval: EvalSection { k: self.k, repeats: self.repeats, ..Default::default() },
            ..Default::default()
        }
    }
}

impl CohortArgs {
    pub fn overlay(&self) -> PathsSection {
        PathsSection { cohort: self.cohort.clone(), genes: self.genes.clone(), deep_features: self.deep_features.clone(), out: None }
    }
}

pub fn parse_modes(s: &str) -> Result<Vec<Mode>> {
    if s == "all" {
        return Ok(Mode::ALL.to_vec());
    }
    s.split(',').map(|m| m.trim().parse()).collect()
}

pub fn parse_dims(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| GgrError::invalid("dims", e.to_string()))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(GgrError::invalid("dims", "expected slices,rows,cols")),
    }
}
