//! Classical classifiers (SVM, KNN, decision tree) over the feature
//! dataset, run in the three evaluation modes.
//!
//! `single` predicts a metadata target from opcode features alone,
//! `multi` additionally feeds the remaining metadata labels as
//! ordinal-encoded features, and `all` feeds every metadata label with
//! the file name as the target.

mod knn;
mod metrics;
mod svm;
mod tree;

pub use knn::{predict_knn, train_knn, KnnModel};
pub use metrics::{evaluate, ConfusionMatrix, Evaluation};
pub use svm::{
    predict_svm, train_svm, SvmModel, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE,
    DEFAULT_REGULARIZATION,
};
pub use tree::{predict_tree, train_decision_tree, TreeModel, TreeNode};

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram::FeatureDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    Svm,
    Knn,
    DecisionTree,
    Cnn,
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classifier::Svm => write!(f, "svm"),
            Classifier::Knn => write!(f, "knn"),
            Classifier::DecisionTree => write!(f, "decision_tree"),
            Classifier::Cnn => write!(f, "cnn"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Single,
    Multi,
    All,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Single => write!(f, "single"),
            Mode::Multi => write!(f, "multi"),
            Mode::All => write!(f, "all"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Group,
    Name,
    Type,
    FileName,
}

impl Target {
    pub fn column(&self) -> &'static str {
        match self {
            Target::Group => "group",
            Target::Name => "name",
            Target::Type => "type",
            Target::FileName => "file_name",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.column())
    }
}

/// A validated (mode, target) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeSpec {
    pub mode: Mode,
    pub target: Target,
}

impl ModeSpec {
    pub fn new(mode: Mode, target: Target) -> Result<Self> {
        let valid = match mode {
            Mode::All => target == Target::FileName,
            Mode::Single | Mode::Multi => target != Target::FileName,
        };
        if !valid {
            return Err(Error::InvalidInput(format!(
                "mode '{mode}' cannot be combined with target '{target}'"
            )));
        }
        Ok(ModeSpec { mode, target })
    }
}

/// Numeric design matrix ready for training: features, encoded targets,
/// and the name tables for both axes.
#[derive(Debug, Clone)]
pub struct EncodedDesign {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
}

/// Map labels onto indices into their sorted unique values.
pub fn ordinal_encode(labels: &[String]) -> Result<(Vec<usize>, Vec<String>)> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("cannot encode an empty label list".into()));
    }
    let mut class_names: Vec<String> = labels.to_vec();
    class_names.sort();
    class_names.dedup();
    let codes = labels
        .iter()
        .map(|l| class_names.binary_search(l).expect("label present"))
        .collect();
    Ok((codes, class_names))
}

fn label_column(dataset: &FeatureDataset, column: &str) -> Vec<String> {
    dataset
        .rows
        .iter()
        .map(|r| r.labels.get(column).expect("known label column").to_string())
        .collect()
}

/// Build the design matrix for a mode: `single` uses frequency columns
/// only; `multi` appends the ordinal codes of the two non-target metadata
/// labels; `all` appends the codes of all three and targets the file
/// name.
pub fn assemble_design(dataset: &FeatureDataset, spec: ModeSpec) -> Result<EncodedDesign> {
    if dataset.rows.is_empty() {
        return Err(Error::InvalidInput("dataset has no rows".into()));
    }

    let metadata_columns: Vec<&str> = match spec.mode {
        Mode::Single => vec![],
        Mode::Multi => ["group", "name", "type"]
            .into_iter()
            .filter(|c| *c != spec.target.column())
            .collect(),
        Mode::All => vec!["group", "name", "type"],
    };

    let mut x: Vec<Vec<f64>> = dataset.rows.iter().map(|r| r.features.clone()).collect();
    let mut feature_names = dataset.feature_names.clone();
    for column in metadata_columns {
        let (codes, _) = ordinal_encode(&label_column(dataset, column))?;
        for (row, code) in x.iter_mut().zip(&codes) {
            row.push(*code as f64);
        }
        feature_names.push(column.to_string());
    }

    let (y, class_names) = ordinal_encode(&label_column(dataset, spec.target.column()))?;
    Ok(EncodedDesign {
        x,
        y,
        class_names,
        feature_names,
    })
}

fn round6<S: serde::Serializer>(value: &f64, serializer: S) -> std::result::Result<S::Ok, S::Error> {
    serializer.serialize_f64((value * 1e6).round() / 1e6)
}

/// Outcome of one classifier/mode/target combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierResult {
    pub classifier: Classifier,
    pub mode: Mode,
    pub target: Target,
    #[serde(serialize_with = "round6")]
    pub accuracy: f64,
    #[serde(serialize_with = "round6")]
    pub macro_recall: f64,
    #[serde(serialize_with = "round6")]
    pub macro_precision: f64,
    #[serde(serialize_with = "round6")]
    pub f_measure: f64,
    pub confusion_matrix: ConfusionMatrix,
    #[serde(serialize_with = "round6")]
    pub training_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl ClassifierResult {
    pub fn combination(&self) -> String {
        format!("{} {} {}", self.classifier, self.mode, self.target)
    }

    fn failed(classifier: Classifier, spec: ModeSpec, message: String) -> Self {
        ClassifierResult {
            classifier,
            mode: spec.mode,
            target: spec.target,
            accuracy: 0.0,
            macro_recall: 0.0,
            macro_precision: 0.0,
            f_measure: 0.0,
            confusion_matrix: ConfusionMatrix {
                labels: vec![],
                counts: vec![],
            },
            training_seconds: 0.0,
            diagnostic: Some(message),
        }
    }
}

/// Settings shared by every combination in the suite.
#[derive(Debug, Clone)]
pub struct SuiteOptions {
    /// Held-out evaluation fraction. `None` (the default) trains and
    /// evaluates on the same rows.
    pub holdout: Option<f64>,
    pub seed: u64,
    pub knn_k: usize,
    pub svm_epochs: usize,
    pub svm_learning_rate: f64,
    pub svm_regularization: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            holdout: None,
            seed: 42,
            knn_k: 3,
            svm_epochs: DEFAULT_EPOCHS,
            svm_learning_rate: DEFAULT_LEARNING_RATE,
            svm_regularization: DEFAULT_REGULARIZATION,
        }
    }
}

/// The 21 combinations in report order: single then multi across the
/// three classifiers and targets, then the three all-mode rows.
pub fn suite_combinations() -> Vec<(Classifier, ModeSpec)> {
    let classifiers = [Classifier::Svm, Classifier::Knn, Classifier::DecisionTree];
    let targets = [Target::Group, Target::Name, Target::Type];
    let mut combos = Vec::with_capacity(21);
    for mode in [Mode::Single, Mode::Multi] {
        for classifier in classifiers {
            for target in targets {
                combos.push((classifier, ModeSpec::new(mode, target).unwrap()));
            }
        }
    }
    for classifier in classifiers {
        combos.push((classifier, ModeSpec::new(Mode::All, Target::FileName).unwrap()));
    }
    combos
}

fn split_indices(n: usize, holdout: Option<f64>, seed: u64) -> (Vec<usize>, Vec<usize>) {
    match holdout {
        None => ((0..n).collect(), (0..n).collect()),
        Some(fraction) => {
            let mut indices: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            indices.shuffle(&mut rng);
            let held = ((n as f64) * fraction).floor() as usize;
            let held = held.clamp(1, n.saturating_sub(1).max(1));
            let eval = indices[..held].to_vec();
            let train = indices[held..].to_vec();
            (train, eval)
        }
    }
}

fn select(design: &EncodedDesign, indices: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
    (
        indices.iter().map(|&i| design.x[i].clone()).collect(),
        indices.iter().map(|&i| design.y[i]).collect(),
    )
}

/// Train and evaluate one combination.
pub fn run_combination(
    dataset: &FeatureDataset,
    classifier: Classifier,
    spec: ModeSpec,
    options: &SuiteOptions,
) -> Result<ClassifierResult> {
    if let Some(fraction) = options.holdout {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "holdout fraction {fraction} must be strictly between 0 and 1"
            )));
        }
    }
    let design = assemble_design(dataset, spec)?;
    let (train_idx, eval_idx) = split_indices(design.x.len(), options.holdout, options.seed);
    let (train_x, train_y) = select(&design, &train_idx);
    let (eval_x, eval_y) = select(&design, &eval_idx);
    let train_design = EncodedDesign {
        x: train_x,
        y: train_y,
        class_names: design.class_names.clone(),
        feature_names: design.feature_names.clone(),
    };

    let started = Instant::now();
    let predicted = match classifier {
        Classifier::Svm => {
            let model = train_svm(
                &train_design,
                options.svm_epochs,
                options.svm_learning_rate,
                options.svm_regularization,
                options.seed,
            )?;
            predict_svm(&model, &eval_x)
        }
        Classifier::Knn => {
            let model = train_knn(&train_design, options.knn_k)?;
            predict_knn(&model, &eval_x)
        }
        Classifier::DecisionTree => {
            let model = train_decision_tree(&train_design)?;
            predict_tree(&model, &eval_x)
        }
        Classifier::Cnn => {
            return Err(Error::InvalidInput(
                "the cnn classifier is trained on sequences, not feature datasets".into(),
            ))
        }
    };
    let training_seconds = started.elapsed().as_secs_f64();

    let evaluation = evaluate(&predicted, &eval_y, &design.class_names)?;
    Ok(ClassifierResult {
        classifier,
        mode: spec.mode,
        target: spec.target,
        accuracy: evaluation.accuracy,
        macro_recall: evaluation.macro_recall,
        macro_precision: evaluation.macro_precision,
        f_measure: evaluation.f_measure,
        confusion_matrix: evaluation.confusion_matrix,
        training_seconds,
        diagnostic: None,
    })
}

/// Run every suite combination. Per-combination failures are captured in
/// the result's diagnostic instead of aborting the suite.
pub fn run_suite(dataset: &FeatureDataset, options: &SuiteOptions) -> Vec<ClassifierResult> {
    suite_combinations()
        .into_par_iter()
        .map(|(classifier, spec)| {
            run_combination(dataset, classifier, spec, options)
                .unwrap_or_else(|err| ClassifierResult::failed(classifier, spec, err.to_string()))
        })
        .collect()
}

/// Write results as a JSON array with stable field order and metric
/// floats rounded to 6 decimals.
pub fn serialize_results(results: &[ClassifierResult], path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(results)?;
    std::fs::write(path, json.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Load results previously written by [`serialize_results`].
pub fn load_results(path: &Path) -> Result<Vec<ClassifierResult>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
