//! Metric reports and model files.
//!
//! Both are plain JSON with no timestamps or host details, so identical runs
//! produce identical bytes.

use std::path::Path;

use floodseg_core::classifiers::{CandidateScore, HyperParams, Model, ModelKind, ScoreKind};
use floodseg_core::eval::{scores, ConfusionMatrix, Degenerate};
use serde::{Deserialize, Serialize};

use crate::config::{FeatureKind, PipelineKind, RunConfig};
use crate::reference::{self, ReferenceScores};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One prediction per image.
    Image,
    /// Pixel counts pooled over all test images.
    Micro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub image: String,
    pub confusion: ConfusionMatrix,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub image: String,
    pub label: u8,
    pub predicted: u8,
    pub p_flood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub name: String,
    pub aggregation: Aggregation,
    pub confusion: ConfusionMatrix,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: Degenerate,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predictions: Vec<Prediction>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_image: Vec<ImageScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_image_mean: Option<MeanScores>,
}

impl ModelResult {
    pub fn new(name: &str, aggregation: Aggregation, confusion: ConfusionMatrix) -> Self {
        let s = scores(&confusion);
        Self {
            name: name.to_owned(),
            aggregation,
            confusion,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            degenerate: s.degenerate,
            predictions: Vec::new(),
            per_image: Vec::new(),
            per_image_mean: None,
        }
    }

    /// Adds per-image scores and their unweighted mean.
    pub fn with_per_image(mut self, per_image: Vec<(String, ConfusionMatrix)>) -> Self {
        self.per_image = per_image
            .into_iter()
            .map(|(image, confusion)| {
                let s = scores(&confusion);
                ImageScore {
                    image,
                    confusion,
                    precision: s.precision,
                    recall: s.recall,
                    f1: s.f1,
                }
            })
            .collect();
        if !self.per_image.is_empty() {
            let n = self.per_image.len() as f64;
            let mean = |f: fn(&ImageScore) -> f64| self.per_image.iter().map(f).sum::<f64>() / n;
            self.per_image_mean = Some(MeanScores {
                precision: mean(|s| s.precision),
                recall: mean(|s| s.recall),
                f1: mean(|s| s.f1),
            });
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: usize,
    pub score: ScoreKind,
    pub candidates: Vec<CandidateScore>,
    pub best_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub train_images: usize,
    pub test_images: usize,
    /// Training rows: images for classification, superpixels for
    /// segmentation. Absent when re-evaluating a saved model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_rows: Option<usize>,
}

/// Published scores for the same feature and classifier, and this run's
/// difference from them (ours minus published).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceComparison {
    pub compared_result: String,
    pub published: ReferenceScores,
    pub delta: ReferenceScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub format_version: u32,
    pub pipeline: PipelineKind,
    pub feature: FeatureKind,
    pub classifier: ModelKind,
    pub config_hash: String,
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_validation: Option<CvSummary>,
    pub best_params: HyperParams,
    pub results: Vec<ModelResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceComparison>,
}

impl MetricReport {
    /// Fills in the published comparison for `compared` (a result name).
    pub fn attach_reference(&mut self, compared: &str) {
        let published = reference::lookup(self.pipeline, self.feature, self.classifier);
        let result = self.results.iter().find(|r| r.name == compared);
        self.reference = match (published, result) {
            (Some(published), Some(r)) => Some(ReferenceComparison {
                compared_result: compared.to_owned(),
                published,
                delta: ReferenceScores {
                    precision: r.precision - published.precision,
                    recall: r.recall - published.recall,
                    f1: r.f1 - published.f1,
                },
            }),
            _ => None,
        };
    }

    pub fn result(&self, name: &str) -> Option<&ModelResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub seed: u64,
    pub train_fraction: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// A trained model together with everything needed to apply it again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub config: RunConfig,
    pub split: SplitRecord,
    pub best_params: HyperParams,
    pub model: Model,
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: ModelFile = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "{}: unsupported model format version {}",
                path.display(),
                m.format_version
            )));
        }
        Ok(m)
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
