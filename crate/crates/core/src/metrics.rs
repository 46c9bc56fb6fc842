//! Evaluation metrics: confusion matrices, per-class F1, and the sensing
//! probability chain.
//!
//! The two-stage pipeline is scored by three linked quantities: the sensing
//! probability (prior-weighted accuracy of the occupied/empty decision), the
//! classification probability (accuracy of the class decision over occupied
//! records), and their product, the overall probability of a record being
//! both sensed and classified correctly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// K x K confusion counts, rows = true class, cols = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid("confusion matrix needs >= 1 class"));
        }
        Ok(ConfusionMatrix {
            k: num_classes,
            counts: vec![0; num_classes * num_classes],
        })
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn record(&mut self, true_class: usize, predicted: usize) -> Result<()> {
        if true_class >= self.k || predicted >= self.k {
            return Err(Error::invalid(format!(
                "class out of range: true {true_class}, predicted {predicted}, k {}",
                self.k
            )));
        }
        self.counts[true_class * self.k + predicted] += 1;
        Ok(())
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> usize {
        self.counts[true_class * self.k + predicted]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Fraction of records on the diagonal; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let hits: usize = (0..self.k).map(|i| self.count(i, i)).sum();
        hits as f64 / total as f64
    }

    /// (precision, recall, f1) for one class, with empty denominators
    /// scoring 0 rather than NaN.
    pub fn precision_recall_f1(&self, class: usize) -> (f64, f64, f64) {
        let tp = self.count(class, class) as f64;
        let predicted: usize = (0..self.k).map(|t| self.count(t, class)).sum();
        let actual: usize = (0..self.k).map(|p| self.count(class, p)).sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        (precision, recall, f1)
    }

    /// Unweighted mean of per-class F1 scores.
    pub fn macro_f1(&self) -> f64 {
        (0..self.k)
            .map(|c| self.precision_recall_f1(c).2)
            .sum::<f64>()
            / self.k as f64
    }

    /// Row-major copy of the counts.
    pub fn to_rows(&self) -> Vec<Vec<usize>> {
        (0..self.k)
            .map(|t| (0..self.k).map(|p| self.count(t, p)).collect())
            .collect()
    }
}

/// Occupancy-decision quality over a labeled set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionStats {
    /// P(decide occupied | occupied).
    pub p_detection: f64,
    /// P(decide occupied | empty).
    pub p_false_alarm: f64,
    /// Prior-weighted correct-decision probability with empirical priors;
    /// equals plain accuracy of the occupancy decision.
    pub prob_sensing: f64,
    pub n_occupied: usize,
    pub n_empty: usize,
}

/// Scores occupied/empty decisions against ground truth.
pub fn detection_stats(truth_occupied: &[bool], decided_occupied: &[bool]) -> Result<DetectionStats> {
    if truth_occupied.len() != decided_occupied.len() {
        return Err(Error::Shape {
            expected: format!("{}", truth_occupied.len()),
            got: format!("{}", decided_occupied.len()),
            context: "detection decisions",
        });
    }
    if truth_occupied.is_empty() {
        return Err(Error::invalid("no detection records"));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut n_occ = 0usize;
    let mut n_emp = 0usize;
    for (&t, &d) in truth_occupied.iter().zip(decided_occupied) {
        if t {
            n_occ += 1;
            if d {
                tp += 1;
            }
        } else {
            n_emp += 1;
            if d {
                fp += 1;
            }
        }
    }
    let p_d = if n_occ == 0 { 0.0 } else { tp as f64 / n_occ as f64 };
    let p_fa = if n_emp == 0 { 0.0 } else { fp as f64 / n_emp as f64 };
    let n = truth_occupied.len() as f64;
    let prob_sensing = (n_occ as f64 * p_d + n_emp as f64 * (1.0 - p_fa)) / n;
    Ok(DetectionStats {
        p_detection: p_d,
        p_false_alarm: p_fa,
        prob_sensing,
        n_occupied: n_occ,
        n_empty: n_emp,
    })
}

/// Probability that a record is both sensed and classified correctly, under
/// independence of the two stages.
pub fn overall_probability(prob_sensing: f64, prob_classification: f64) -> f64 {
    prob_sensing * prob_classification
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled() -> ConfusionMatrix {
        // True 0: 8 right, 2 as class 1. True 1: 6 right, 4 as class 0.
        let mut m = ConfusionMatrix::new(2).unwrap();
        for _ in 0..8 {
            m.record(0, 0).unwrap();
        }
        for _ in 0..2 {
            m.record(0, 1).unwrap();
        }
        for _ in 0..6 {
            m.record(1, 1).unwrap();
        }
        for _ in 0..4 {
            m.record(1, 0).unwrap();
        }
        m
    }

    // --- confusion matrix ---

    #[test]
    fn counts_and_accuracy() {
        let m = filled();
        assert_eq!(m.total(), 20);
        assert_eq!(m.count(0, 1), 2);
        assert_eq!(m.count(1, 0), 4);
        assert!((m.accuracy() - 0.7).abs() < 1e-12);
        assert_eq!(m.to_rows(), vec![vec![8, 2], vec![4, 6]]);
    }

    #[test]
    fn precision_recall_f1_values() {
        let m = filled();
        let (p0, r0, f0) = m.precision_recall_f1(0);
        assert!((p0 - 8.0 / 12.0).abs() < 1e-12);
        assert!((r0 - 0.8).abs() < 1e-12);
        let expect_f0 = 2.0 * (8.0 / 12.0) * 0.8 / (8.0 / 12.0 + 0.8);
        assert!((f0 - expect_f0).abs() < 1e-12);
        let (_, _, f1) = m.precision_recall_f1(1);
        assert!((m.macro_f1() - 0.5 * (f0 + f1)).abs() < 1e-12);
    }

    #[test]
    fn empty_denominators_score_zero() {
        // Class 2 never true and never predicted; class 1 never predicted.
        let mut m = ConfusionMatrix::new(3).unwrap();
        m.record(0, 0).unwrap();
        m.record(1, 0).unwrap();
        let (p1, r1, f1) = m.precision_recall_f1(1);
        assert_eq!((p1, r1, f1), (0.0, 0.0, 0.0));
        let (p2, r2, f2) = m.precision_recall_f1(2);
        assert_eq!((p2, r2, f2), (0.0, 0.0, 0.0));
        assert_eq!(ConfusionMatrix::new(2).unwrap().accuracy(), 0.0);
    }

    #[test]
    fn record_validates_classes() {
        let mut m = ConfusionMatrix::new(2).unwrap();
        assert!(m.record(2, 0).is_err());
        assert!(m.record(0, 2).is_err());
        assert!(ConfusionMatrix::new(0).is_err());
    }

    #[test]
    fn perfect_predictions() {
        let mut m = ConfusionMatrix::new(3).unwrap();
        for c in 0..3 {
            for _ in 0..5 {
                m.record(c, c).unwrap();
            }
        }
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!(m.macro_f1(), 1.0);
    }

    // --- detection ---

    #[test]
    fn detection_example_half_missed() {
        // Two occupied (one detected), two empty (none flagged).
        let truth = [true, true, false, false];
        let decided = [true, false, false, false];
        let s = detection_stats(&truth, &decided).unwrap();
        assert!((s.p_detection - 0.5).abs() < 1e-12);
        assert_eq!(s.p_false_alarm, 0.0);
        assert!((s.prob_sensing - 0.75).abs() < 1e-12);
    }

    #[test]
    fn false_alarms_only_count_empty_records() {
        let truth = [true, false, false, false];
        let decided = [true, true, true, false];
        let s = detection_stats(&truth, &decided).unwrap();
        assert_eq!(s.p_detection, 1.0);
        assert!((s.p_false_alarm - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.prob_sensing - 0.5).abs() < 1e-12);
        assert_eq!((s.n_occupied, s.n_empty), (1, 3));
    }

    #[test]
    fn detection_validates_input() {
        assert!(detection_stats(&[true], &[true, false]).is_err());
        assert!(detection_stats(&[], &[]).is_err());
    }

    // --- chain ---

    #[test]
    fn overall_probability_is_product() {
        let p = overall_probability(0.96, 0.985);
        assert!((p - 0.9456).abs() < 1e-12);
        assert_eq!(overall_probability(1.0, 0.5), 0.5);
        assert_eq!(overall_probability(0.0, 0.9), 0.0);
    }
}
