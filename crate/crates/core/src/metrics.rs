//! Per-pixel accuracy and per-class precision / recall / F-measure.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::labels::{LabelMap, IGNORE};

/// Square confusion matrix; rows are ground truth, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    classes: usize,
    counts: Vec<u64>,
}

impl Confusion {
    pub fn new(classes: usize) -> Self {
        Confusion { classes, counts: vec![0; classes * classes] }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::Shape(format!("{} counts for {classes} classes", counts.len())));
        }
        Ok(Confusion { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Adds every pixel whose ground truth is not [`IGNORE`].
    pub fn add_maps(&mut self, truth: &LabelMap, pred: &LabelMap) -> Result<()> {
        if (truth.height(), truth.width()) != (pred.height(), pred.width()) {
            return Err(Error::Shape(format!(
                "prediction {}x{} vs ground truth {}x{}",
                pred.height(),
                pred.width(),
                truth.height(),
                truth.width()
            )));
        }
        if truth.vocab() != pred.vocab() {
            return Err(Error::Vocabulary(format!(
                "{} ground truth scored against {} prediction",
                truth.vocab().tag(),
                pred.vocab().tag()
            )));
        }
        for (&t, &p) in truth.data().iter().zip(pred.data()) {
            if t == IGNORE || p == IGNORE {
                continue;
            }
            self.counts[t as usize * self.classes + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Confusion) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Shape("confusion matrices differ in size".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Scores derived from a confusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub accuracy: f64,
    pub per_class: Vec<ClassScore>,
}

impl Scores {
    pub fn from_confusion(c: &Confusion) -> Scores {
        let total = c.total();
        let accuracy = if total == 0 { 0.0 } else { c.trace() as f64 / total as f64 };
        let per_class = (0..c.classes)
            .map(|k| {
                let tp = c.get(k, k) as f64;
                let predicted: u64 = (0..c.classes).map(|t| c.get(t, k)).sum();
                let actual: u64 = (0..c.classes).map(|p| c.get(k, p)).sum();
                let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
                let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
                let f_measure = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassScore { precision, recall, f_measure }
            })
            .collect();
        Scores { accuracy, per_class }
    }

    /// Mean F-measure over the listed classes.
    pub fn mean_f(&self, classes: &[u8]) -> f64 {
        if classes.is_empty() {
            return 0.0;
        }
        classes.iter().map(|&c| self.per_class[c as usize].f_measure).sum::<f64>() / classes.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Vocabulary;

    #[test]
    fn symmetric_two_class() {
        let c = Confusion::from_counts(2, vec![8, 2, 2, 8]).unwrap();
        let s = Scores::from_confusion(&c);
        assert_eq!(s.accuracy, 0.8);
        for k in &s.per_class {
            assert!((k.f_measure - 0.8).abs() < 1e-15);
        }
    }

    #[test]
    fn perfect_and_constant_predictions() {
        let truth = LabelMap::from_vec(1, 6, Vocabulary::Coarse, vec![0, 1, 2, 0, 1, 2]).unwrap();
        let mut c = Confusion::new(3);
        c.add_maps(&truth, &truth).unwrap();
        let s = Scores::from_confusion(&c);
        assert_eq!(s.accuracy, 1.0);
        assert!(s.per_class.iter().all(|k| k.f_measure == 1.0));

        let constant = LabelMap::filled(1, 6, Vocabulary::Coarse, 1);
        let mut c = Confusion::new(3);
        c.add_maps(&truth, &constant).unwrap();
        let s = Scores::from_confusion(&c);
        assert_eq!(s.per_class[1].recall, 1.0);
        assert_eq!(s.per_class[0].f_measure, 0.0);
        assert_eq!(s.per_class[2].f_measure, 0.0);
    }

    #[test]
    fn vocabulary_mismatch() {
        let a = LabelMap::filled(1, 1, Vocabulary::Coarse, 0);
        let b = LabelMap::filled(1, 1, Vocabulary::Fine, 0);
        assert!(matches!(Confusion::new(3).add_maps(&a, &b), Err(Error::Vocabulary(_))));
    }
}
