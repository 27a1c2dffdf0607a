//! Run configuration shared by every pipeline subcommand.

use std::path::{Path, PathBuf};

use floodseg_core::classifiers::{ModelKind, ParamGrid, ScoreKind};
use floodseg_core::crf::CrfParams;
use floodseg_core::features::{HogParams, LbpParams};
use floodseg_core::superpixels::SlicParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    #[default]
    Classify,
    Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Lbp,
    Hog,
    Embedding,
    Region,
}

/// Offsets added to the run seed for each randomized stage.
pub mod seeds {
    pub const SPLIT: u64 = 0;
    pub const CROSS_VALIDATION: u64 = 1;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineKind,
    /// Defaults to LBP for classification and region features for
    /// segmentation.
    pub feature: Option<FeatureKind>,
    pub classifier: ModelKind,
    /// Defaults to the built-in grid for `classifier`.
    pub grid: Option<ParamGrid>,
    pub folds: usize,
    pub score: ScoreKind,
    pub lbp: LbpParams,
    pub hog: HogParams,
    pub slic: SlicParams,
    pub crf: CrfParams,
    /// Flood fraction at which a superpixel counts as flood for training.
    pub region_label_threshold: f64,
    /// Side of the square images fed to the classification features.
    pub classify_size: usize,
    pub overlay_alpha: f64,
    pub embeddings: Option<PathBuf>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineKind::Classify,
            feature: None,
            classifier: ModelKind::Logistic,
            grid: None,
            folds: 5,
            score: ScoreKind::F1,
            lbp: LbpParams::default(),
            hog: HogParams::default(),
            slic: SlicParams::default(),
            crf: CrfParams::default(),
            region_label_threshold: 0.5,
            classify_size: 224,
            overlay_alpha: 0.5,
            embeddings: None,
            seed: 42,
            out: None,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })
    }

    pub fn feature(&self) -> FeatureKind {
        self.feature.unwrap_or(match self.pipeline {
            PipelineKind::Classify => FeatureKind::Lbp,
            PipelineKind::Segment => FeatureKind::Region,
        })
    }

    pub fn grid(&self) -> ParamGrid {
        self.grid.clone().unwrap_or_else(|| match self.classifier {
            ModelKind::Logistic => ParamGrid::default_logistic(),
            ModelKind::Knn => ParamGrid::default_knn(),
            ModelKind::Tree => ParamGrid::default_tree(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        let feature = self.feature();
        match (self.pipeline, feature) {
            (PipelineKind::Classify, FeatureKind::Region) => {
                return bad("region features are only used by the segment pipeline".into())
            }
            (PipelineKind::Segment, f) if f != FeatureKind::Region => {
                return bad(format!(
                    "the segment pipeline uses region features, not {f:?}"
                ))
            }
            _ => {}
        }
        if feature == FeatureKind::Embedding && self.embeddings.is_none() {
            return bad("embedding features need an embedding file (--embeddings)".into());
        }
        let grid_kind = match self.grid() {
            ParamGrid::Logistic { .. } => ModelKind::Logistic,
            ParamGrid::Knn { .. } => ModelKind::Knn,
            ParamGrid::Tree { .. } => ModelKind::Tree,
        };
        if grid_kind != self.classifier {
            return bad(format!(
                "grid is for {grid_kind:?} but the classifier is {:?}",
                self.classifier
            ));
        }
        if self.grid().candidates().is_empty() {
            return bad("the hyperparameter grid is empty".into());
        }
        if self.folds < 2 {
            return bad(format!("need at least 2 folds, got {}", self.folds));
        }
        if self.classify_size < 16 {
            return bad(format!("classify_size {} is too small", self.classify_size));
        }
        if !(self.region_label_threshold > 0.0 && self.region_label_threshold <= 1.0) {
            return bad("region_label_threshold must be in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.overlay_alpha) {
            return bad("overlay_alpha must be in [0, 1]".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        let core = |r: floodseg_core::Result<()>| r.map_err(|e| Error::Validation(e.to_string()));
        core(self.lbp.validate())?;
        core(self.hog.validate())?;
        core(self.slic.validate())?;
        core(self.crf.validate())?;
        Ok(())
    }

    /// The configuration with defaults filled in and machine-local fields
    /// (output directory, worker count) removed.
    pub fn canonical(&self) -> RunConfig {
        RunConfig {
            feature: Some(self.feature()),
            grid: Some(self.grid()),
            out: None,
            workers: None,
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical configuration's JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.canonical()).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn stage_seed(&self, offset: u64) -> u64 {
        self.seed.wrapping_add(offset)
    }
}
