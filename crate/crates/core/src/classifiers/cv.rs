use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Criterion, Dataset, HyperParams, LogisticParams, Model, Penalty, TreeParams};
use crate::eval::{confusion, scores};
use crate::{Error, Result};

/// One cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Shuffles `0..n` with a seeded ChaCha8 stream and cuts it into `folds`
/// contiguous validation blocks; the first `n % folds` blocks get one extra
/// index.
pub fn kfold_split(n: usize, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if folds > n {
        return Err(Error::InvalidParameter(format!(
            "{folds} folds for {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let validation = order[start..start + len].to_vec();
        let train = order[..start]
            .iter()
            .chain(&order[start + len..])
            .copied()
            .collect();
        out.push(Fold { train, validation });
        start += len;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    #[default]
    F1,
    Accuracy,
}

fn default_penalties() -> Vec<Penalty> {
    vec![Penalty::L2]
}

fn default_reg_strengths() -> Vec<f64> {
    vec![0.001, 0.01, 0.1, 1.0, 10.0]
}

fn default_epochs() -> usize {
    LogisticParams::default().epochs
}

fn default_ks() -> Vec<usize> {
    vec![1, 3, 5, 7, 11]
}

fn default_max_depths() -> Vec<Option<usize>> {
    vec![Some(3), Some(5), Some(10), None]
}

fn default_criteria() -> Vec<Criterion> {
    vec![Criterion::Gini, Criterion::Entropy]
}

fn default_min_samples_split() -> usize {
    TreeParams::default().min_samples_split
}

/// Candidate values per hyperparameter for one model kind. Omitted fields
/// take the default grid's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamGrid {
    Logistic {
        #[serde(default = "default_penalties")]
        penalties: Vec<Penalty>,
        #[serde(default = "default_reg_strengths")]
        reg_strengths: Vec<f64>,
        #[serde(default)]
        lr: Option<f64>,
        #[serde(default = "default_epochs")]
        epochs: usize,
    },
    Knn {
        #[serde(default = "default_ks")]
        ks: Vec<usize>,
    },
    Tree {
        #[serde(default = "default_max_depths")]
        max_depths: Vec<Option<usize>>,
        #[serde(default = "default_criteria")]
        criteria: Vec<Criterion>,
        #[serde(default = "default_min_samples_split")]
        min_samples_split: usize,
    },
}

impl ParamGrid {
    pub fn default_logistic() -> Self {
        ParamGrid::Logistic {
            penalties: default_penalties(),
            reg_strengths: default_reg_strengths(),
            lr: None,
            epochs: default_epochs(),
        }
    }

    pub fn default_knn() -> Self {
        ParamGrid::Knn { ks: default_ks() }
    }

    pub fn default_tree() -> Self {
        ParamGrid::Tree {
            max_depths: default_max_depths(),
            criteria: default_criteria(),
            min_samples_split: default_min_samples_split(),
        }
    }

    /// Grid points in nesting order (outer list first).
    pub fn candidates(&self) -> Vec<HyperParams> {
        match self {
            ParamGrid::Logistic {
                penalties,
                reg_strengths,
                lr,
                epochs,
            } => penalties
                .iter()
                .flat_map(|&penalty| {
                    reg_strengths.iter().map(move |&reg_strength| {
                        HyperParams::Logistic(LogisticParams {
                            penalty,
                            reg_strength,
                            lr: *lr,
                            epochs: *epochs,
                        })
                    })
                })
                .collect(),
            ParamGrid::Knn { ks } => ks.iter().map(|&k| HyperParams::Knn { k }).collect(),
            ParamGrid::Tree {
                max_depths,
                criteria,
                min_samples_split,
            } => max_depths
                .iter()
                .flat_map(|&max_depth| {
                    criteria.iter().map(move |&criterion| {
                        HyperParams::Tree(TreeParams {
                            criterion,
                            max_depth,
                            min_samples_split: *min_samples_split,
                        })
                    })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchSpec {
    pub grid: ParamGrid,
    pub folds: usize,
    pub seed: u64,
    pub score: ScoreKind,
}

impl GridSearchSpec {
    pub fn new(grid: ParamGrid, seed: u64) -> Self {
        Self {
            grid,
            folds: 5,
            seed,
            score: ScoreKind::F1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter(
                "grid search needs at least 2 folds".into(),
            ));
        }
        if self.grid.candidates().is_empty() {
            return Err(Error::Empty("parameter grid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub params: HyperParams,
    pub mean_score: f64,
    pub fold_scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub candidates: Vec<CandidateScore>,
    pub best_index: usize,
    /// Best candidate refit on the whole dataset.
    pub model: Model,
}

impl GridSearchResult {
    pub fn best(&self) -> &CandidateScore {
        &self.candidates[self.best_index]
    }
}

fn score_predictions(pred: &[u8], truth: &[u8], kind: ScoreKind) -> Result<f64> {
    let cm = confusion(pred, truth)?;
    Ok(match kind {
        ScoreKind::F1 => scores(&cm).f1,
        ScoreKind::Accuracy => cm.accuracy(),
    })
}

/// Mean validation score of one grid point. A fold whose training split
/// cannot be fit (for instance a single class) scores 0.
pub fn evaluate_candidate(
    data: &Dataset,
    folds: &[Fold],
    params: &HyperParams,
    kind: ScoreKind,
) -> Result<CandidateScore> {
    let mut fold_scores = Vec::with_capacity(folds.len());
    for (i, fold) in folds.iter().enumerate() {
        let train = data.subset(&fold.train);
        let model = match params.fit(&train) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("fold {i} of {params:?} could not be trained ({e}); scored 0");
                fold_scores.push(0.0);
                continue;
            }
        };
        let pred = fold
            .validation
            .iter()
            .map(|&j| model.predict(&data.features()[j]))
            .collect::<Result<Vec<u8>>>()?;
        let truth: Vec<u8> = fold.validation.iter().map(|&j| data.labels()[j]).collect();
        fold_scores.push(score_predictions(&pred, &truth, kind)?);
    }
    let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    Ok(CandidateScore {
        params: params.clone(),
        mean_score,
        fold_scores,
    })
}

/// Index of the highest mean score; ties keep the earliest candidate.
pub fn select_best(candidates: &[CandidateScore]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list".into()));
    }
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if c.mean_score > candidates[best].mean_score {
            best = i;
        }
    }
    Ok(best)
}

/// Exhaustive grid search with k-fold cross-validation, then a refit of the
/// winner on all of `data`.
pub fn grid_search(data: &Dataset, spec: &GridSearchSpec) -> Result<GridSearchResult> {
    spec.validate()?;
    let folds = kfold_split(data.len(), spec.folds, spec.seed)?;
    let candidates = spec
        .grid
        .candidates()
        .iter()
        .map(|p| evaluate_candidate(data, &folds, p, spec.score))
        .collect::<Result<Vec<_>>>()?;
    let best_index = select_best(&candidates)?;
    let model = candidates[best_index].params.fit(data)?;
    Ok(GridSearchResult {
        candidates,
        best_index,
        model,
    })
}
