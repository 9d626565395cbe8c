//! Genotype-guided radiomics: estimate gene expression from CT texture
//! features, then predict post-resection recurrence of NSCLC from the
//! estimated genes.
//!
//! The pipeline stages map onto modules:
//! [`cohort`] loads and synthesizes data, [`preprocess`] turns CT volumes into
//! three-slice slabs, [`texture`] extracts the 450 handcrafted features,
//! [`select`] ranks features and genes, [`net`] is the dense network engine,
//! [`ggr`] assembles the two-stage model and baselines, and [`eval`] runs
//! repeated stratified cross-validation. [`config`] resolves run settings.

pub mod cohort;
pub mod config;
pub mod error;
pub mod eval;
pub mod ggr;
pub mod net;
pub mod preprocess;
pub mod rng;
pub mod select;
pub mod table;
pub mod texture;

pub use cohort::{CohortDataset, CtVolume, PatientRecord, SyntheticSpec, TumorMask};
pub use config::{ConfigFile, RunConfig};
pub use error::{GgrError, Result};
pub use eval::{CvReport, EvalConfig, ExperimentData, FoldPlan};
pub use ggr::{GgrConfig, GgrPipeline, Mode};
pub use net::{DenseNetwork, TrainConfig};
pub use rng::SplitMix64;
pub use table::FeatureTable;
