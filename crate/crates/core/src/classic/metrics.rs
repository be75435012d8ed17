//! Evaluation metrics: accuracy, macro recall/precision, F-measure, and
//! the confusion matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square confusion matrix with class-name axis labels. Rows are true
/// classes, columns are predicted classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Number of true instances of a class (its row sum).
    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    fn predicted_total(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }
}

/// Metrics computed from one prediction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub macro_recall: f64,
    pub macro_precision: f64,
    pub f_measure: f64,
    pub confusion_matrix: ConfusionMatrix,
}

/// Score predictions against truth. Per-class precision and recall define
/// 0/0 as 0; macro averages run over classes with nonzero support in the
/// truth; the F-measure is the harmonic mean of the two macro values.
pub fn evaluate(predicted: &[usize], truth: &[usize], class_names: &[String]) -> Result<Evaluation> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "prediction count {} does not match truth count {}",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate zero samples".into()));
    }
    let n_classes = class_names.len();
    if let Some(&bad) = predicted.iter().chain(truth).find(|&&c| c >= n_classes) {
        return Err(Error::InvalidInput(format!(
            "class index {bad} out of range for {n_classes} classes"
        )));
    }

    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        counts[t][p] += 1;
    }
    let confusion_matrix = ConfusionMatrix {
        labels: class_names.to_vec(),
        counts,
    };

    let total = confusion_matrix.total();
    let accuracy = confusion_matrix.trace() as f64 / total as f64;

    let mut recall_sum = 0.0;
    let mut precision_sum = 0.0;
    let mut supported = 0usize;
    for class in 0..n_classes {
        let support = confusion_matrix.support(class);
        if support == 0 {
            continue;
        }
        supported += 1;
        let tp = confusion_matrix.counts[class][class];
        recall_sum += tp as f64 / support as f64;
        let predicted_total = confusion_matrix.predicted_total(class);
        precision_sum += if predicted_total == 0 {
            0.0
        } else {
            tp as f64 / predicted_total as f64
        };
    }
    let macro_recall = recall_sum / supported as f64;
    let macro_precision = precision_sum / supported as f64;
    let f_measure = if macro_precision + macro_recall == 0.0 {
        0.0
    } else {
        2.0 * macro_precision * macro_recall / (macro_precision + macro_recall)
    };

    Ok(Evaluation {
        accuracy,
        macro_recall,
        macro_precision,
        f_measure,
        confusion_matrix,
    })
}
