//! Binary classifiers over feature vectors, plus k-fold cross-validation
//! and grid search.
//!
//! Every model standardizes its inputs with statistics captured at fit time,
//! so a serialized model is self-contained.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::{ExtractorId, FeatureVector};
use crate::{Error, Result};

mod cv;
mod knn;
mod logistic;
mod tree;

pub use cv::{
    evaluate_candidate, grid_search, kfold_split, select_best, CandidateScore, Fold,
    GridSearchResult, GridSearchSpec, ParamGrid, ScoreKind,
};
pub use knn::{train_knn, KnnModel};
pub use logistic::{
    sigmoid, train_logreg, LogisticModel, LogisticObjective, LogisticParams, Penalty,
};
pub use tree::{impurity, train_tree, Criterion, Node, TreeModel, TreeParams};

/// Labelled feature rows for binary classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    extractor: ExtractorId,
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(rows: Vec<(FeatureVector, u8)>) -> Result<Self> {
        let Some((first, _)) = rows.first() else {
            return Err(Error::Empty("dataset".into()));
        };
        let extractor = first.extractor();
        let mut features = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for (v, l) in rows.iter() {
            first.ensure_compatible(v)?;
            check_label(*l)?;
            labels.push(*l);
        }
        for (v, _) in rows {
            features.push(v.into_values());
        }
        Ok(Self {
            extractor,
            features,
            labels,
        })
    }

    /// Builds a dataset from raw rows, checking shape, finiteness and labels.
    pub fn from_rows(
        extractor: ExtractorId,
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Empty("dataset".into()));
        }
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                actual: labels.len(),
            });
        }
        let dim = features[0].len();
        if dim == 0 {
            return Err(Error::Empty("feature vector".into()));
        }
        for row in &features {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("dataset row".into()));
            }
        }
        for &l in &labels {
            check_label(l)?;
        }
        Ok(Self {
            extractor,
            features,
            labels,
        })
    }

    pub fn extractor(&self) -> ExtractorId {
        self.extractor
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Number of rows of class 0 and class 1.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }

    pub(crate) fn ensure_both_classes(&self) -> Result<()> {
        let [zeros, ones] = self.class_counts();
        if zeros == 0 || ones == 0 {
            return Err(Error::SingleClass);
        }
        Ok(())
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            extractor: self.extractor,
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

fn check_label(l: u8) -> Result<()> {
    if l > 1 {
        return Err(Error::InvalidParameter(format!(
            "class label must be 0 or 1, got {l}"
        )));
    }
    Ok(())
}

/// Per-feature mean and standard deviation captured at fit time.
///
/// Features whose deviation is below 1e-12 are frozen: they always map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    const MIN_STD: f64 = 1e-12;

    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let dim = rows[0].len();
        let mut mean = alloc::vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = alloc::vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| crate::math::sqrt(s / n)).collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| if *s < Self::MIN_STD { 0.0 } else { (v - m) / s })
            .collect())
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

/// Hyperparameters for any of the three model kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HyperParams {
    Logistic(LogisticParams),
    Knn { k: usize },
    Tree(TreeParams),
}

impl HyperParams {
    pub fn fit(&self, data: &Dataset) -> Result<Model> {
        Ok(match self {
            HyperParams::Logistic(p) => Model::Logistic(train_logreg(data, p)?),
            HyperParams::Knn { k } => Model::Knn(train_knn(data, *k)?),
            HyperParams::Tree(p) => Model::Tree(train_tree(data, p)?),
        })
    }
}

/// A trained classifier of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Logistic(LogisticModel),
    Knn(KnnModel),
    Tree(TreeModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Logistic(_) => ModelKind::Logistic,
            Model::Knn(_) => ModelKind::Knn,
            Model::Tree(_) => ModelKind::Tree,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Model::Logistic(m) => m.standardization.dim(),
            Model::Knn(m) => m.standardization.dim(),
            Model::Tree(m) => m.feature_dim,
        }
    }

    /// Probability of class 1.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Logistic(m) => m.predict_proba(x),
            Model::Knn(m) => m.predict_proba(x),
            Model::Tree(m) => m.predict_proba(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        match self {
            Model::Logistic(m) => m.predict(x),
            Model::Knn(m) => m.predict(x),
            Model::Tree(m) => m.predict(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Knn,
    Tree,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dataset_validation() {
        let a = FeatureVector::new(ExtractorId::Lbp, vec![1.0, 2.0]).unwrap();
        let b = FeatureVector::new(ExtractorId::Hog, vec![1.0, 2.0]).unwrap();
        let c = FeatureVector::new(ExtractorId::Lbp, vec![1.0]).unwrap();
        assert!(Dataset::new(vec![(a.clone(), 0), (b, 1)]).is_err());
        assert!(Dataset::new(vec![(a.clone(), 0), (c, 1)]).is_err());
        assert!(Dataset::new(vec![(a.clone(), 2)]).is_err());
        assert!(Dataset::new(vec![]).is_err());
        let d = Dataset::new(vec![(a.clone(), 0), (a, 1)]).unwrap();
        assert_eq!(d.class_counts(), [1, 1]);
        assert_eq!(d.feature_dim(), 2);
    }

    #[test]
    fn standardizer_freezes_constant_features() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(s.transform(&[3.0, 9.0]).unwrap(), vec![1.0, 0.0]);
        assert!(s.transform(&[1.0]).is_err());
    }
}
