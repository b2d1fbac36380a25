//! Precision, recall and F1 against sure/possible gold edges.

use crate::corpus::{AlignmentSet, GoldAlignment};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// |A|, after restricting to gold-covered sentences.
    pub predicted: usize,
    /// |A ∩ P|
    pub predicted_possible: usize,
    /// |A ∩ S|
    pub predicted_sure: usize,
    /// |S|
    pub sure: usize,
}

impl Metrics {
    /// Metrics from the four counts. `|A| = 0` gives precision 0.
    pub fn from_counts(
        predicted: usize,
        predicted_possible: usize,
        predicted_sure: usize,
        sure: usize,
    ) -> Result<Self> {
        if sure == 0 {
            return Err(Error::InvalidGold("the gold standard has no sure edges".into()));
        }
        let precision = if predicted == 0 { 0.0 } else { predicted_possible as f64 / predicted as f64 };
        let recall = predicted_sure as f64 / sure as f64;
        Ok(Self { precision, recall, f1: f1(precision, recall), predicted, predicted_possible, predicted_sure, sure })
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Scores `predicted` against `gold`. Links on sentences the gold standard
/// does not cover are ignored.
pub fn score(predicted: &AlignmentSet, gold: &GoldAlignment) -> Result<Metrics> {
    let covered = gold.covered_sentences();
    let (mut a, mut ap, mut as_) = (0, 0, 0);
    for l in predicted.iter().filter(|l| covered.contains(&l.sentence)) {
        a += 1;
        if gold.possible().contains(l) {
            ap += 1;
        }
        if gold.sure().contains(l) {
            as_ += 1;
        }
    }
    Metrics::from_counts(a, ap, as_, gold.sure().len())
}
