//! Confusion counts and precision / recall / F1, with flood (1) as the
//! positive class.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Pools counts, as for micro-averaging across images.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / total as f64
        }
    }
}

pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("prediction list".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            (0, 0) => cm.tn += 1,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "labels must be 0 or 1, got prediction {p} / truth {t}"
                )))
            }
        }
    }
    Ok(cm)
}

/// Which ratios hit a zero denominator and were reported as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degenerate {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: Degenerate,
}

pub fn scores(cm: &ConfusionMatrix) -> Scores {
    fn ratio(num: f64, den: f64) -> (f64, bool) {
        if den == 0.0 {
            (0.0, true)
        } else {
            (num / den, false)
        }
    }
    let tp = cm.tp as f64;
    let (precision, dp) = ratio(tp, tp + cm.fp as f64);
    let (recall, dr) = ratio(tp, tp + cm.fn_ as f64);
    let (f1, df) = ratio(2.0 * precision * recall, precision + recall);
    Scores {
        precision,
        recall,
        f1,
        degenerate: Degenerate {
            precision: dp,
            recall: dr,
            f1: df,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_table_cells() {
        let cm = confusion(&[1, 1, 1, 1], &[1, 1, 1, 1]).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 4,
                fp: 0,
                fn_: 0,
                tn: 0
            }
        );
        let cm = confusion(&[1, 1, 1, 0], &[1, 1, 0, 0]).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 2,
                fp: 1,
                fn_: 0,
                tn: 1
            }
        );
        let s = scores(&cm);
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.recall, 1.0);
        assert!((s.f1 - 0.8).abs() < 1e-15);
        assert!(!s.degenerate.any());
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let s = scores(&ConfusionMatrix {
            tp: 0,
            fp: 0,
            fn_: 3,
            tn: 2,
        });
        assert_eq!(s.precision, 0.0);
        assert!(s.degenerate.precision && !s.degenerate.recall && s.degenerate.f1);
    }

    #[test]
    fn input_errors() {
        assert!(confusion(&[1], &[1, 0]).is_err());
        assert!(confusion(&[], &[]).is_err());
        assert!(confusion(&[2], &[1]).is_err());
    }

    #[test]
    fn published_triple_is_consistent() {
        let (p, r) = (0.94f64, 0.97f64);
        let f1 = 2.0 * p * r / (p + r);
        assert!((f1 - 0.955).abs() < 1e-3);
        assert_eq!((f1 * 100.0).round() / 100.0, 0.95);
    }

    proptest! {
        #[test]
        fn swap_transposes_errors(pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..100)) {
            let (p, t): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let a = confusion(&p, &t).unwrap();
            let b = confusion(&t, &p).unwrap();
            prop_assert_eq!((a.tp, a.fp, a.fn_, a.tn), (b.tp, b.fn_, b.fp, b.tn));
            let (sa, sb) = (scores(&a), scores(&b));
            prop_assert_eq!(sa.precision, sb.recall);
            prop_assert_eq!(sa.recall, sb.precision);
            if sa.precision > 0.0 && sa.recall > 0.0 {
                prop_assert!(sa.f1 <= sa.precision.max(sa.recall) + 1e-15);
                prop_assert!(sa.f1 >= sa.precision.min(sa.recall) - 1e-15);
            }
        }
    }
}
