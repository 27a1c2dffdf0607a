use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Dataset, Standardizer};
use crate::math;
use crate::{Error, Result};

/// `1 / (1 + e^-t)`, evaluated as `e^t / (1 + e^t)` for negative `t` so the
/// exponential never overflows.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + math::exp(-t))
    } else {
        let e = math::exp(t);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + math::ln_1p(math::exp(-math::abs(z)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub penalty: Penalty,
    /// Regularization strength `lambda`.
    pub reg_strength: f64,
    /// Gradient step. `None` picks `1 / L` from a power-iteration estimate
    /// of the loss curvature `L` on the standardized training data.
    pub lr: Option<f64>,
    pub epochs: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            penalty: Penalty::L2,
            reg_strength: 0.01,
            lr: None,
            epochs: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub penalty: Penalty,
    pub reg_strength: f64,
    pub standardization: Standardizer,
    /// Objective before training followed by its value after every epoch.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_history: Vec<f64>,
}

impl LogisticModel {
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        let z = self.standardization.transform(x)?;
        Ok(sigmoid(dot(&self.weights, &z) + self.bias))
    }

    /// 1 iff the probability is at least 0.5.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)? >= 0.5))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regularized mean negative log-likelihood over already-standardized rows.
///
/// L2 adds `lambda / 2 * |w|^2`, L1 adds `lambda * |w|_1`; the bias is never
/// penalized.
pub struct LogisticObjective<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [u8],
    penalty: Penalty,
    lambda: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(rows: &'a [Vec<f64>], labels: &'a [u8], penalty: Penalty, lambda: f64) -> Self {
        Self {
            rows,
            labels,
            penalty,
            lambda,
        }
    }

    fn margins(&self, w: &[f64], b: f64) -> Vec<f64> {
        self.rows.iter().map(|r| dot(w, r) + b).collect()
    }

    fn penalty_value(&self, w: &[f64]) -> f64 {
        match self.penalty {
            Penalty::L2 => 0.5 * self.lambda * w.iter().map(|v| v * v).sum::<f64>(),
            Penalty::L1 => self.lambda * w.iter().map(|v| math::abs(*v)).sum::<f64>(),
        }
    }

    fn data_loss_at(&self, margins: &[f64]) -> f64 {
        margins
            .iter()
            .zip(self.labels)
            .map(|(&z, &y)| softplus(z) - y as f64 * z)
            .sum::<f64>()
            / self.rows.len() as f64
    }

    /// Mean negative log-likelihood without the penalty.
    pub fn data_loss(&self, w: &[f64], b: f64) -> f64 {
        self.data_loss_at(&self.margins(w, b))
    }

    pub fn loss(&self, w: &[f64], b: f64) -> f64 {
        self.data_loss(w, b) + self.penalty_value(w)
    }

    fn data_gradient_at(&self, margins: &[f64]) -> (Vec<f64>, f64) {
        let n = self.rows.len() as f64;
        let mut gw = vec![0.0; self.rows[0].len()];
        let mut gb = 0.0;
        for ((row, &y), &z) in self.rows.iter().zip(self.labels).zip(margins) {
            let r = (sigmoid(z) - y as f64) / n;
            gb += r;
            for (g, v) in gw.iter_mut().zip(row) {
                *g += r * v;
            }
        }
        (gw, gb)
    }

    /// Full gradient; for L1 the subgradient `lambda * sign(w)` (0 at 0).
    pub fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        self.gradient_at(&self.margins(w, b), w)
    }

    fn gradient_at(&self, margins: &[f64], w: &[f64]) -> (Vec<f64>, f64) {
        let (mut gw, gb) = self.data_gradient_at(margins);
        for (g, &v) in gw.iter_mut().zip(w) {
            *g += match self.penalty {
                Penalty::L2 => self.lambda * v,
                Penalty::L1 if v > 0.0 => self.lambda,
                Penalty::L1 if v < 0.0 => -self.lambda,
                Penalty::L1 => 0.0,
            };
        }
        (gw, gb)
    }

    /// Upper estimate of the Lipschitz constant of the data-term gradient:
    /// a quarter of the top eigenvalue of `[X 1]^T [X 1] / n`, by power
    /// iteration, with 10% headroom.
    pub fn curvature_bound(&self) -> f64 {
        let n = self.rows.len() as f64;
        let dim = self.rows[0].len() + 1;
        let mut v = vec![1.0 / math::sqrt(dim as f64); dim];
        let mut eig = 0.0;
        for _ in 0..50 {
            let mut next = vec![0.0; dim];
            for row in self.rows {
                let u = dot(&v[..dim - 1], row) + v[dim - 1];
                for (acc, x) in next.iter_mut().zip(row) {
                    *acc += u * x;
                }
                next[dim - 1] += u;
            }
            next.iter_mut().for_each(|x| *x /= n);
            let norm = math::sqrt(next.iter().map(|x| x * x).sum::<f64>());
            if norm == 0.0 {
                break;
            }
            eig = norm;
            next.iter_mut().for_each(|x| *x /= norm);
            v = next;
        }
        let l2 = match self.penalty {
            Penalty::L2 => self.lambda,
            Penalty::L1 => 0.0,
        };
        1.1 * eig / 4.0 + l2
    }
}

/// Full-batch gradient descent on standardized features, starting from zero
/// weights and the class-prior log-odds as bias.
///
/// L2 is folded into the gradient. L1 is applied as a proximal
/// soft-threshold after each gradient step, which keeps the objective
/// monotone for steps below `1 / L`.
pub fn train_logreg(data: &Dataset, p: &LogisticParams) -> Result<LogisticModel> {
    data.ensure_both_classes()?;
    if !(p.reg_strength >= 0.0 && p.reg_strength.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "regularization strength must be >= 0, got {}",
            p.reg_strength
        )));
    }
    if let Some(lr) = p.lr {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be > 0, got {lr}"
            )));
        }
    }
    let standardization = Standardizer::fit(data.features());
    let rows = standardization.transform_all(data.features())?;
    let objective = LogisticObjective::new(&rows, data.labels(), p.penalty, p.reg_strength);
    let lr = match p.lr {
        Some(lr) => lr,
        None => 1.0 / objective.curvature_bound().max(1e-12),
    };

    let [zeros, ones] = data.class_counts();
    let mut w = vec![0.0; data.feature_dim()];
    let mut b = math::ln(ones as f64 / zeros as f64);
    let mut loss_history = Vec::with_capacity(p.epochs + 1);
    let mut z = objective.margins(&w, b);
    loss_history.push(objective.data_loss_at(&z) + objective.penalty_value(&w));
    for _ in 0..p.epochs {
        match p.penalty {
            Penalty::L2 => {
                let (gw, gb) = objective.gradient_at(&z, &w);
                w.iter_mut().zip(&gw).for_each(|(v, g)| *v -= lr * g);
                b -= lr * gb;
            }
            Penalty::L1 => {
                let (gw, gb) = objective.data_gradient_at(&z);
                let shrink = lr * p.reg_strength;
                for (v, g) in w.iter_mut().zip(&gw) {
                    let step = *v - lr * g;
                    *v = if step > shrink {
                        step - shrink
                    } else if step < -shrink {
                        step + shrink
                    } else {
                        0.0
                    };
                }
                b -= lr * gb;
            }
        }
        z = objective.margins(&w, b);
        loss_history.push(objective.data_loss_at(&z) + objective.penalty_value(&w));
    }
    if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(Error::NonFinite(
            "logistic weights (learning rate too large?)".into(),
        ));
    }
    Ok(LogisticModel {
        weights: w,
        bias: b,
        penalty: p.penalty,
        reg_strength: p.reg_strength,
        standardization,
        loss_history,
    })
}
