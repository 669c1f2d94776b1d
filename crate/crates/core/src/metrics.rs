//! Confusion matrix, accuracy, and macro/weighted F1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// K x K counts; rows are gold classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        ConfusionMatrix {
            k,
            counts: vec![0; k * k],
        }
    }

    /// From explicit rows (gold-major).
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix {
            k,
            counts: rows.concat(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        (0..self.k).map(|p| self.get(class, p)).sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        (0..self.k).map(|g| self.get(g, class)).sum()
    }
}

/// Tallies predictions against gold labels.
pub fn confusion(preds: &[usize], golds: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if preds.len() != golds.len() {
        return Err(Error::Shape(format!(
            "{} predictions but {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    let mut m = ConfusionMatrix::zeros(k);
    for (&p, &g) in preds.iter().zip(golds) {
        for id in [p, g] {
            if id >= k {
                return Err(Error::ClassIdOutOfRange { id, num_classes: k });
            }
        }
        m.counts[g * k + p] += 1;
    }
    Ok(m)
}

/// Which classes the macro mean divides over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroAverage {
    /// Every class of the label space.
    #[default]
    AllClasses,
    /// Only classes with nonzero gold support.
    PresentOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub per_class_f1: Vec<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn scores(m: &ConfusionMatrix) -> Result<Scores> {
    scores_with(m, MacroAverage::AllClasses)
}

/// Precision, recall and F1 per class with `0/0 = 0`; accuracy is
/// trace/total; weighted F1 weights by gold support.
pub fn scores_with(m: &ConfusionMatrix, average: MacroAverage) -> Result<Scores> {
    let total = m.total();
    if total == 0 {
        return Err(Error::invalid("cannot score an empty confusion matrix"));
    }
    let per_class_f1: Vec<f64> = (0..m.k)
        .map(|c| {
            let tp = m.get(c, c);
            let precision = ratio(tp, m.predicted(c));
            let recall = ratio(tp, m.support(c));
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        })
        .collect();
    let included: Vec<usize> = match average {
        MacroAverage::AllClasses => (0..m.k).collect(),
        MacroAverage::PresentOnly => (0..m.k).filter(|&c| m.support(c) > 0).collect(),
    };
    let f1_macro = if included.is_empty() {
        0.0
    } else {
        included.iter().map(|&c| per_class_f1[c]).sum::<f64>() / included.len() as f64
    };
    let f1_weighted = (0..m.k)
        .map(|c| per_class_f1[c] * m.support(c) as f64)
        .sum::<f64>()
        / total as f64;
    Ok(Scores {
        accuracy: m.trace() as f64 / total as f64,
        f1_macro,
        f1_weighted,
        per_class_f1,
    })
}

impl Scores {
    /// Flat key-value view.
    pub fn to_kv(&self) -> BTreeMap<String, f64> {
        let mut kv = BTreeMap::new();
        kv.insert("accuracy".into(), self.accuracy);
        kv.insert("f1_macro".into(), self.f1_macro);
        kv.insert("f1_weighted".into(), self.f1_weighted);
        for (i, f) in self.per_class_f1.iter().enumerate() {
            kv.insert(format!("f1_class_{i}"), *f);
        }
        kv
    }

    /// `method,accuracy,f1_macro,f1_weighted` row.
    pub fn table_row(&self, method: &str) -> String {
        format!(
            "{},{:.4},{:.4},{:.4}",
            method, self.accuracy, self.f1_macro, self.f1_weighted
        )
    }
}

pub const TABLE_HEADER: &str = "method,accuracy,f1_macro,f1_weighted";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tallies() {
        let m = confusion(&[0, 1], &[0, 1], 2).unwrap();
        assert_eq!(m, ConfusionMatrix::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap());
        let anti = confusion(&[1, 0], &[0, 1], 2).unwrap();
        assert_eq!(
            anti,
            ConfusionMatrix::from_rows(&[vec![0, 1], vec![1, 0]]).unwrap()
        );
        assert_eq!(confusion(&[], &[], 3).unwrap(), ConfusionMatrix::zeros(3));
    }

    #[test]
    fn tally_errors() {
        assert!(confusion(&[0], &[0, 1], 2).is_err());
        assert!(confusion(&[2], &[0], 2).is_err());
    }

    #[test]
    fn perfect_and_half() {
        let s = scores(&confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap()).unwrap();
        assert_eq!((s.accuracy, s.f1_macro, s.f1_weighted), (1.0, 1.0, 1.0));
        let half = scores(&ConfusionMatrix::from_rows(&[vec![1, 1], vec![1, 1]]).unwrap()).unwrap();
        assert_eq!(half.accuracy, 0.5);
        assert_eq!(half.per_class_f1, [0.5, 0.5]);
        assert_eq!((half.f1_macro, half.f1_weighted), (0.5, 0.5));
    }

    #[test]
    fn absent_class_still_divides_macro() {
        let m = confusion(&[0, 1], &[0, 1], 3).unwrap();
        let s = scores(&m).unwrap();
        assert_eq!(s.per_class_f1[2], 0.0);
        assert!((s.f1_macro - 2.0 / 3.0).abs() < 1e-15);
        let present = scores_with(&m, MacroAverage::PresentOnly).unwrap();
        assert_eq!(present.f1_macro, 1.0);
    }

    #[test]
    fn empty_matrix_fails() {
        assert!(scores(&ConfusionMatrix::zeros(2)).is_err());
    }

    #[test]
    fn report_shapes() {
        let s = scores(&confusion(&[0, 0], &[0, 1], 2).unwrap()).unwrap();
        assert_eq!(s.table_row("baseline"), "baseline,0.5000,0.3333,0.3333");
        assert!(s.to_kv().contains_key("f1_class_1"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn weighted_equals_macro_under_equal_support(
                k in 1usize..5,
                per in 1u64..6,
                cells in proptest::collection::vec(0u64..100, 25),
            ) {
                // distribute `per` items of each gold class over predictions
                let mut rows = vec![vec![0u64; k]; k];
                for (g, row) in rows.iter_mut().enumerate() {
                    for i in 0..per {
                        row[(cells[(g * 5 + i as usize) % 25] as usize) % k] += 1;
                    }
                }
                let s = scores(&ConfusionMatrix::from_rows(&rows).unwrap()).unwrap();
                prop_assert!((s.f1_macro - s.f1_weighted).abs() < 1e-12);
                let m = ConfusionMatrix::from_rows(&rows).unwrap();
                prop_assert_eq!(s.accuracy, m.trace() as f64 / m.total() as f64);
            }
        }
    }
}
