//! Run configuration: a TOML file and command-line overrides share the
//! all-optional [`ConfigFile`] layout, are merged (overrides win), then
//! resolved into a validated [`RunConfig`] with defaults filled in.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{GgrError, Result};
use crate::eval::EvalConfig;
use crate::ggr::{GeneScaling, GgrConfig, Mode};
use crate::net::TrainConfig;
use crate::select::{SelectionConfig, SelectionMethod};
use crate::texture::{PercentileMode, TextureConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub cohort: Option<PathBuf>,
    /// Gene CSV replacing the cohort's `genes.csv`.
    pub genes: Option<PathBuf>,
    pub deep_features: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSection {
    pub method: Option<SelectionMethod>,
    pub pvalue: Option<f64>,
    pub lambda_frac: Option<f64>,
    pub global: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSection {
    pub handcrafted_k: Option<usize>,
    pub deep_pvalue: Option<f64>,
    pub deep_fallback_k: Option<usize>,
    pub levels: Option<usize>,
    pub percentile_mode: Option<PercentileMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub reduce_width: Option<usize>,
    pub regressor_hidden: Option<usize>,
    pub classifier_hidden: Option<usize>,
    pub gene_scaling: Option<GeneScaling>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub decay: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub patience: Option<usize>,
    pub min_delta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub k: Option<usize>,
    pub repeats: Option<usize>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub modes: Option<Vec<Mode>>,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub selection: SelectionSection,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub regressor: TrainSection,
    #[serde(default)]
    pub classifier: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
}

macro_rules! overlay {
    ($base:expr, $top:expr; $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )+
    };
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GgrError::Config(e.to_string().trim().replace('\n', " ")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GgrError::io(path, e))?;
        Self::parse(&text)
    }

    /// Fields set in `top` replace those in `self`.
    pub fn merge(mut self, top: ConfigFile) -> ConfigFile {
        overlay!(self, top; seed, jobs, modes);
        overlay!(self.paths, top.paths; cohort, genes, deep_features, out);
        overlay!(self.selection, top.selection; method, pvalue, lambda_frac, global);
        overlay!(self.features, top.features; handcrafted_k, deep_pvalue, deep_fallback_k, levels, percentile_mode);
        overlay!(self.model, top.model; reduce_width, regressor_hidden, classifier_hidden, gene_scaling);
        overlay!(self.regressor, top.regressor; learning_rate, momentum, decay, epochs, batch_size, patience, min_delta);
        overlay!(self.classifier, top.classifier; learning_rate, momentum, decay, epochs, batch_size, patience, min_delta);
        overlay!(self.eval, top.eval; k, repeats, threshold);
        self
    }

    /// Fills defaults and validates every numeric contract. The regressor
    /// learning rate defaults to 5e-6 for raw FPKM targets and 0.01 for
    /// standardized ones.
    pub fn resolve(self) -> Result<RunConfig> {
        let seed = self.seed.unwrap_or(0);
        let gene_scaling = self.model.gene_scaling.unwrap_or_default();
        let regressor_base = match gene_scaling {
            GeneScaling::Standardized => TrainConfig::regressor(),
            GeneScaling::Raw => TrainConfig::regressor_raw(),
        };
        let d = GgrConfig::default();
        let ggr = GgrConfig {
            handcrafted_k: self.features.handcrafted_k.unwrap_or(d.handcrafted_k),
            deep_p_threshold: self.features.deep_pvalue.unwrap_or(d.deep_p_threshold),
            deep_fallback_k: self.features.deep_fallback_k.unwrap_or(d.deep_fallback_k),
            gene_selection: SelectionConfig {
                method: self.selection.method.unwrap_or(d.gene_selection.method),
                p_threshold: self.selection.pvalue.unwrap_or(d.gene_selection.p_threshold),
                lambda_frac: self.selection.lambda_frac.unwrap_or(d.gene_selection.lambda_frac),
            },
            reduce_width: self.model.reduce_width.unwrap_or(d.reduce_width),
            regressor_hidden: self.model.regressor_hidden.unwrap_or(d.regressor_hidden),
            classifier_hidden: self.model.classifier_hidden.unwrap_or(d.classifier_hidden),
            gene_scaling,
            regressor: apply_train(regressor_base, &self.regressor),
            classifier: apply_train(TrainConfig::classifier(), &self.classifier),
            seed,
        };
        let de = EvalConfig::default();
        let eval = EvalConfig {
            k: self.eval.k.unwrap_or(de.k),
            repeats: self.eval.repeats.unwrap_or(de.repeats),
            seed,
            threshold: self.eval.threshold.unwrap_or(de.threshold),
            global_selection: self.selection.global.unwrap_or(false),
        };
        let dt = TextureConfig::default();
        let texture = TextureConfig {
            levels: self.features.levels.unwrap_or(dt.levels),
            percentile_mode: self.features.percentile_mode.unwrap_or(dt.percentile_mode),
            ..dt
        };
        let config = RunConfig {
            seed,
            jobs: self.jobs,
            modes: self.modes.unwrap_or_else(|| vec![Mode::GgrFusion]),
            paths: self.paths,
            texture,
            ggr,
            eval,
        };
        config.validate()?;
        Ok(config)
    }
}

fn apply_train(mut base: TrainConfig, s: &TrainSection) -> TrainConfig {
    if let Some(v) = s.learning_rate {
        base.learning_rate = v;
    }
    if let Some(v) = s.momentum {
        base.momentum = v;
    }
    if let Some(v) = s.decay {
        base.decay = v;
    }
    if let Some(v) = s.epochs {
        base.epochs = v;
    }
    if s.batch_size.is_some() {
        base.batch_size = s.batch_size;
    }
    if s.patience.is_some() {
        base.patience = s.patience;
    }
    if let Some(v) = s.min_delta {
        base.min_delta = v;
    }
    base
}

/// Fully resolved run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: Option<usize>,
    pub modes: Vec<Mode>,
    pub paths: PathsSection,
    pub texture: TextureConfig,
    pub ggr: GgrConfig,
    pub eval: EvalConfig,
}

fn prefix(section: &'static str, e: GgrError) -> GgrError {
    match e {
        GgrError::InvalidArgument { field, detail } => GgrError::Config(format!("{section}.{field}: {detail}")),
        other => other,
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.ggr.regressor.validate().map_err(|e| prefix("regressor", e))?;
        self.ggr.classifier.validate().map_err(|e| prefix("classifier", e))?;
        self.ggr.validate().map_err(|e| prefix("model", e))?;
        self.eval.validate().map_err(|e| prefix("eval", e))?;
        if self.texture.levels < 2 {
            return Err(GgrError::Config("features.levels: must be >= 2".into()));
        }
        if self.jobs == Some(0) {
            return Err(GgrError::Config("jobs: must be >= 1".into()));
        }
        if self.modes.is_empty() {
            return Err(GgrError::Config("modes: at least one mode required".into()));
        }
        Ok(())
    }

    /// Every configured input path must exist.
    pub fn check_paths(&self) -> Result<()> {
        let p = &self.paths;
        for (name, path) in [("paths.cohort", &p.cohort), ("paths.genes", &p.genes), ("paths.deep_features", &p.deep_features)] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(GgrError::Config(format!("{name}: {} does not exist", path.display())));
                }
            }
        }
        Ok(())
    }

    /// The fully populated file form; parsing it back resolves to `self`.
    pub fn to_file(&self) -> ConfigFile {
        let t = |c: &TrainConfig| TrainSection {
            learning_rate: Some(c.learning_rate),
            momentum: Some(c.momentum),
            decay: Some(c.decay),
            epochs: Some(c.epochs),
            batch_size: c.batch_size,
            patience: c.patience,
            min_delta: Some(c.min_delta),
        };
        ConfigFile {
            seed: Some(self.seed),
            jobs: self.jobs,
            modes: Some(self.modes.clone()),
            paths: self.paths.clone(),
            selection: SelectionSection {
                method: Some(self.ggr.gene_selection.method),
                pvalue: Some(self.ggr.gene_selection.p_threshold),
                lambda_frac: Some(self.ggr.gene_selection.lambda_frac),
                global: Some(self.eval.global_selection),
            },
            features: FeatureSection {
                handcrafted_k: Some(self.ggr.handcrafted_k),
                deep_pvalue: Some(self.ggr.deep_p_threshold),
                deep_fallback_k: Some(self.ggr.deep_fallback_k),
                levels: Some(self.texture.levels),
                percentile_mode: Some(self.texture.percentile_mode),
            },
            model: ModelSection {
                reduce_width: Some(self.ggr.reduce_width),
                regressor_hidden: Some(self.ggr.regressor_hidden),
                classifier_hidden: Some(self.ggr.classifier_hidden),
                gene_scaling: Some(self.ggr.gene_scaling),
            },
            regressor: t(&self.ggr.regressor),
            classifier: t(&self.ggr.classifier),
            eval: EvalSection { k: Some(self.eval.k), repeats: Some(self.eval.repeats), threshold: Some(self.eval.threshold) },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_has_documented_defaults() {
        let c = ConfigFile::parse("").unwrap().resolve().unwrap();
        assert_eq!(c.ggr.classifier.learning_rate, 0.05);
        assert_eq!(c.ggr.classifier.momentum, 0.9);
        assert_eq!(c.ggr.classifier.decay, 1e-6);
        assert_eq!(c.ggr.regressor.momentum, 0.9);
        assert_eq!(c.ggr.regressor.decay, 1e-6);
        assert_eq!((c.eval.k, c.eval.repeats), (10, 5));
        assert_eq!(c.ggr.gene_selection.p_threshold, 0.02);
        assert_eq!(c.ggr.handcrafted_k, 12);
        let raw = ConfigFile::parse("[model]\ngene_scaling = \"raw\"\n").unwrap().resolve().unwrap();
        assert_eq!(raw.ggr.regressor.learning_rate, 5e-6);
    }

    #[test]
    fn overrides_win() {
        let file = ConfigFile::parse("seed = 3\n[selection]\npvalue = 0.02\n[eval]\nk = 5\n").unwrap();
        let flags = ConfigFile { selection: SelectionSection { pvalue: Some(0.05), ..Default::default() }, ..Default::default() };
        let c = file.merge(flags).resolve().unwrap();
        assert_eq!(c.ggr.gene_selection.p_threshold, 0.05);
        assert_eq!(c.eval.k, 5);
        assert_eq!(c.seed, 3);
        assert_eq!(c.eval.seed, 3);
    }

    #[test]
    fn errors_name_the_field() {
        let e = ConfigFile::parse("[classifier]\nlearning_rate = -0.1\n").unwrap().resolve().unwrap_err();
        assert!(e.to_string().contains("classifier.learning_rate"), "{e}");
        let e = ConfigFile::parse("[eval]\nfolds = 3\n").unwrap_err();
        assert!(e.to_string().contains("folds"), "{e}");
        assert!(ConfigFile::parse("modes = [\"nope\"]\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = ConfigFile::parse("modes = [\"ggr_deep\", \"gene_truth\"]\njobs = 2\n[regressor]\nepochs = 40\n[paths]\nout = \"x\"\n")
            .unwrap()
            .resolve()
            .unwrap();
        let back = ConfigFile::parse(&c.to_toml()).unwrap().resolve().unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn missing_paths_are_reported() {
        let mut c = ConfigFile::default().resolve().unwrap();
        c.paths.cohort = Some(PathBuf::from("/definitely/not/here"));
        assert!(c.check_paths().unwrap_err().to_string().contains("paths.cohort"));
    }
}
