//! Evaluation metrics (Hamming score, exact match, Jaccard accuracy),
//! rank aggregation, and the Nemenyi critical distance.

use serde::{Deserialize, Serialize};

use crate::data::LabelMatrix;
use crate::error::{Error, Result};

/// Scores and timings for one (dataset, method) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: String,
    pub method: String,
    pub hamming: f64,
    pub exact_match: f64,
    pub jaccard_accuracy: f64,
    pub train_seconds: f64,
    pub test_seconds: f64,
    pub n: usize,
    pub l: usize,
}

impl EvaluationReport {
    /// `dataset,method,hamming,exact,jaccard,train_s,test_s`
    pub fn csv_header() -> &'static str {
        "dataset,method,hamming,exact,jaccard,train_s,test_s"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.3},{:.3}",
            self.dataset,
            self.method,
            self.hamming,
            self.exact_match,
            self.jaccard_accuracy,
            self.train_seconds,
            self.test_seconds
        )
    }
}

fn check_shapes(truth: &LabelMatrix, pred: &LabelMatrix) {
    assert_eq!(truth.rows(), pred.rows(), "row counts differ");
    assert_eq!(truth.cols(), pred.cols(), "label counts differ");
    assert!(truth.rows() > 0, "metrics need at least one row");
}

/// Fraction of correctly predicted individual bits.
pub fn hamming_score(truth: &LabelMatrix, pred: &LabelMatrix) -> f64 {
    check_shapes(truth, pred);
    let mut hits = 0usize;
    for (t, p) in truth.iter_rows().zip(pred.iter_rows()) {
        hits += t.iter().zip(p).filter(|(a, b)| a == b).count();
    }
    hits as f64 / (truth.rows() * truth.cols()) as f64
}

/// Fraction of rows predicted exactly.
pub fn exact_match(truth: &LabelMatrix, pred: &LabelMatrix) -> f64 {
    check_shapes(truth, pred);
    let hits = truth
        .iter_rows()
        .zip(pred.iter_rows())
        .filter(|(t, p)| t == p)
        .count();
    hits as f64 / truth.rows() as f64
}

/// Mean per-row |AND| / |OR| of the active label sets. Rows where both
/// vectors are all-zero score 1 (the 0/0 convention).
pub fn jaccard_accuracy(truth: &LabelMatrix, pred: &LabelMatrix) -> f64 {
    check_shapes(truth, pred);
    let mut total = 0.0;
    for (t, p) in truth.iter_rows().zip(pred.iter_rows()) {
        let mut and = 0usize;
        let mut or = 0usize;
        for (a, b) in t.iter().zip(p) {
            and += (a & b) as usize;
            or += (a | b) as usize;
        }
        total += if or == 0 { 1.0 } else { and as f64 / or as f64 };
    }
    total / truth.rows() as f64
}

/// Mean rank per method over datasets. `scores[method][dataset]`; within
/// each dataset the best method gets rank 1 and ties share the mean of
/// their ranks.
pub fn average_ranks(scores: &[Vec<f64>], higher_is_better: bool) -> Result<Vec<f64>> {
    let n_methods = scores.len();
    if n_methods == 0 {
        return Err(Error::input("rank matrix has no methods"));
    }
    let n_datasets = scores[0].len();
    if n_datasets == 0 || scores.iter().any(|row| row.len() != n_datasets) {
        return Err(Error::input("rank matrix must be rectangular and non-empty"));
    }
    let mut sums = vec![0.0; n_methods];
    for dataset in 0..n_datasets {
        let mut column: Vec<(f64, usize)> = (0..n_methods)
            .map(|m| (scores[m][dataset], m))
            .collect();
        column.sort_by(|a, b| {
            if higher_is_better {
                b.0.total_cmp(&a.0)
            } else {
                a.0.total_cmp(&b.0)
            }
        });
        let mut i = 0;
        while i < n_methods {
            let mut j = i;
            while j + 1 < n_methods && column[j + 1].0 == column[i].0 {
                j += 1;
            }
            // Positions i..=j share the mean rank (1-based).
            let rank = (i + 1 + j + 1) as f64 / 2.0;
            for entry in &column[i..=j] {
                sums[entry.1] += rank;
            }
            i = j + 1;
        }
    }
    Ok(sums.into_iter().map(|s| s / n_datasets as f64).collect())
}

/// Nemenyi critical distance `q_p * sqrt(N_A (N_A + 1) / (6 N_D))`.
pub fn nemenyi_cd(n_algorithms: usize, n_datasets: usize, q_p: f64) -> Result<f64> {
    if n_algorithms < 2 {
        return Err(Error::config("the Nemenyi test needs at least 2 algorithms"));
    }
    if n_datasets < 1 {
        return Err(Error::config("the Nemenyi test needs at least 1 dataset"));
    }
    if !(q_p > 0.0) {
        return Err(Error::config("q_p must be positive"));
    }
    let na = n_algorithms as f64;
    Ok(q_p * (na * (na + 1.0) / (6.0 * n_datasets as f64)).sqrt())
}
