use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Dataset, Standardizer};
use crate::{Error, Result};

/// Brute-force Euclidean k-nearest-neighbours over standardized rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub standardization: Standardizer,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

pub fn train_knn(data: &Dataset, k: usize) -> Result<KnnModel> {
    if k == 0 || k > data.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must be between 1 and the training size {}",
            data.len()
        )));
    }
    let standardization = Standardizer::fit(data.features());
    let rows = standardization.transform_all(data.features())?;
    Ok(KnnModel {
        k,
        standardization,
        rows,
        labels: data.labels().to_vec(),
    })
}

impl KnnModel {
    /// Indices of the `k` nearest rows, nearest first; equal distances keep
    /// the lower row index first.
    fn neighbors(&self, x: &[f64]) -> Result<Vec<usize>> {
        let q = self.standardization.transform(x)?;
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(dist.iter().take(self.k).map(|&(_, i)| i).collect())
    }

    /// Fraction of the `k` neighbours that are class 1.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        let nb = self.neighbors(x)?;
        let ones = nb.iter().filter(|&&i| self.labels[i] == 1).count();
        Ok(ones as f64 / nb.len() as f64)
    }

    /// Majority vote; a split vote goes to the single nearest neighbour.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        let nb = self.neighbors(x)?;
        let ones = nb.iter().filter(|&&i| self.labels[i] == 1).count();
        let zeros = nb.len() - ones;
        Ok(match ones.cmp(&zeros) {
            core::cmp::Ordering::Greater => 1,
            core::cmp::Ordering::Less => 0,
            core::cmp::Ordering::Equal => self.labels[nb[0]],
        })
    }
}
