//! One-vs-rest linear SVM trained by subgradient descent on
//! L2-regularized hinge loss.
//!
//! Samples are visited in a fixed order every epoch and weights are
//! initialized from a seeded generator, so training is fully
//! deterministic for a given seed.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::EncodedDesign;

/// Training hyperparameters used by the suite and the CLI.
pub const DEFAULT_EPOCHS: usize = 200;
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_REGULARIZATION: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SvmModel {
    /// One weight vector per class, in class-index order.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// Train one binary hinge-loss classifier per class.
pub fn train_svm(
    design: &EncodedDesign,
    epochs: usize,
    learning_rate: f64,
    regularization: f64,
    seed: u64,
) -> Result<SvmModel> {
    let n_classes = design.class_names.len();
    if n_classes < 2 {
        return Err(Error::InvalidInput(format!(
            "svm needs at least 2 classes, got {n_classes}"
        )));
    }
    if design.x.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let n_features = design.x[0].len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| (0..n_features).map(|_| rng.random_range(-0.01..0.01)).collect())
        .collect();
    let mut biases = vec![0.0f64; n_classes];

    for class in 0..n_classes {
        let w = &mut weights[class];
        let b = &mut biases[class];
        for _ in 0..epochs {
            for (row, &label) in design.x.iter().zip(&design.y) {
                let target = if label == class { 1.0 } else { -1.0 };
                let score: f64 = w.iter().zip(row).map(|(wi, xi)| wi * xi).sum::<f64>() + *b;
                let shrink = 1.0 - learning_rate * regularization;
                if target * score < 1.0 {
                    for (wi, xi) in w.iter_mut().zip(row) {
                        *wi = *wi * shrink + learning_rate * target * xi;
                    }
                    *b += learning_rate * target;
                } else {
                    for wi in w.iter_mut() {
                        *wi *= shrink;
                    }
                }
            }
        }
    }

    Ok(SvmModel { weights, biases })
}

/// Predict the class with the largest decision value; exact ties go to
/// the lowest class index.
pub fn predict_svm(model: &SvmModel, queries: &[Vec<f64>]) -> Vec<usize> {
    queries
        .iter()
        .map(|q| {
            let mut best = 0usize;
            let mut best_score = f64::NEG_INFINITY;
            for (class, (w, b)) in model.weights.iter().zip(&model.biases).enumerate() {
                let score: f64 = w.iter().zip(q).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
                if score > best_score {
                    best = class;
                    best_score = score;
                }
            }
            best
        })
        .collect()
}
