//! Seeded training loop: stratified validation split, per-epoch shuffle,
//! Adam updates, and per-epoch loss/accuracy history.

use std::path::Path;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::classic::{evaluate, Classifier, ClassifierResult, Mode, Target};
use crate::error::{Error, Result};

use super::adam::{adam_step, AdamState};
use super::data::SequenceDataset;
use super::model::{backward, forward, mean_cross_entropy, CnnConfig, CnnModel, DropoutMode};

/// One epoch's metrics, computed in inference mode after the updates.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    /// NaN when there is no validation split.
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// History plus the split that produced it.
#[derive(Debug, Clone, Default)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub warnings: Vec<String>,
}

fn mix_seed(base: u64, salt: u64, value: u64) -> u64 {
    // splitmix64 finalizer over the combined inputs.
    let mut z = base
        .wrapping_add(salt.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(value.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Split sample indices into train/validation sets, stratified by class
/// where possible. Falls back to an unstratified split (with a warning)
/// when stratification would leave the validation set empty.
fn split_dataset(
    dataset: &SequenceDataset,
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>, Vec<String>) {
    let n = dataset.len();
    let mut warnings = Vec::new();
    if fraction == 0.0 {
        return ((0..n).collect(), Vec::new(), warnings);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5EED, 0));
    let n_classes = dataset.class_names.len();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &label) in dataset.labels.iter().enumerate() {
        by_class[label].push(i);
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    for indices in &mut by_class {
        indices.shuffle(&mut rng);
        let take = (fraction * indices.len() as f64).floor() as usize;
        val.extend_from_slice(&indices[..take]);
        train.extend_from_slice(&indices[take..]);
    }

    if val.is_empty() {
        let overall = (fraction * n as f64).floor() as usize;
        if overall >= 1 && n > overall {
            warnings.push(
                "stratified split left the validation set empty; using an unstratified split"
                    .to_string(),
            );
            let mut indices: Vec<usize> = (0..n).collect();
            indices.shuffle(&mut rng);
            val = indices[..overall].to_vec();
            train = indices[overall..].to_vec();
        } else {
            warnings.push("validation split too small for this dataset; training on all samples".to_string());
            train = (0..n).collect();
        }
    }

    train.sort_unstable();
    val.sort_unstable();
    (train, val, warnings)
}

fn gather(dataset: &SequenceDataset, indices: &[usize]) -> (Vec<Vec<u32>>, Vec<usize>) {
    (
        indices.iter().map(|&i| dataset.sequences[i].clone()).collect(),
        indices.iter().map(|&i| dataset.labels[i]).collect(),
    )
}

fn score(model: &CnnModel, sequences: &[Vec<u32>], labels: &[usize]) -> Result<(f64, f64)> {
    if sequences.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let out = forward(model, sequences, DropoutMode::Inference)?;
    let loss = mean_cross_entropy(&out.probs, labels);
    let correct = out
        .probs
        .iter()
        .zip(labels)
        .filter(|(p, &y)| argmax(p) == y)
        .count();
    Ok((loss, correct as f64 / labels.len() as f64))
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Train in place for `config.epochs` epochs. Fully determined by the
/// seed, the dataset, and the configuration.
pub fn train(
    model: &mut CnnModel,
    dataset: &SequenceDataset,
    config: &CnnConfig,
) -> Result<TrainingHistory> {
    config.validate()?;
    if dataset.class_names.len() < 2 {
        return Err(Error::InvalidInput(
            "training needs at least 2 classes".into(),
        ));
    }

    let (train_indices, val_indices, warnings) =
        split_dataset(dataset, config.validation_split, config.seed);
    let (train_x, train_y) = gather(dataset, &train_indices);
    let (val_x, val_y) = gather(dataset, &val_indices);

    let mut history = TrainingHistory {
        epochs: Vec::with_capacity(config.epochs),
        train_indices,
        val_indices,
        warnings,
    };
    if config.epochs == 0 {
        return Ok(history);
    }

    let mut adam = AdamState::for_parameters(&model.parameters());
    let mut step: u64 = 0;
    let mut order: Vec<usize> = (0..train_x.len()).collect();

    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x5F0F, epoch as u64));
        order.shuffle(&mut rng);

        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<Vec<u32>> = chunk.iter().map(|&i| train_x[i].clone()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train_y[i]).collect();
            let mask_seed = mix_seed(config.seed, epoch as u64, batch_no as u64);
            let fwd = forward(model, &batch, DropoutMode::Training { mask_seed })?;
            let grads = backward(model, &batch, &labels, &fwd)?;
            step += 1;
            let grad_refs: Vec<&super::tensor::Tensor> = grads.tensors.iter().collect();
            let mut params = model.parameters_mut();
            adam_step(&mut params, &grad_refs, &mut adam, step, config.learning_rate);
        }

        let (train_loss, train_accuracy) = score(model, &train_x, &train_y)?;
        let (val_loss, val_accuracy) = score(model, &val_x, &val_y)?;
        history.epochs.push(EpochStats {
            epoch: epoch + 1,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
    }

    Ok(history)
}

/// Argmax predictions over a dataset scored with the shared evaluation
/// metrics.
pub fn evaluate_cnn(
    model: &CnnModel,
    dataset: &SequenceDataset,
    target: Target,
) -> Result<ClassifierResult> {
    let started = Instant::now();
    let out = forward(model, &dataset.sequences, DropoutMode::Inference)?;
    let predicted: Vec<usize> = out.probs.iter().map(|p| argmax(p)).collect();
    let evaluation = evaluate(&predicted, &dataset.labels, &dataset.class_names)?;
    Ok(ClassifierResult {
        classifier: Classifier::Cnn,
        mode: Mode::Single,
        target,
        accuracy: evaluation.accuracy,
        macro_recall: evaluation.macro_recall,
        macro_precision: evaluation.macro_precision,
        f_measure: evaluation.f_measure,
        confusion_matrix: evaluation.confusion_matrix,
        training_seconds: started.elapsed().as_secs_f64(),
        diagnostic: None,
    })
}

/// Write the per-epoch history as CSV with the columns
/// `epoch,train_loss,train_acc,val_loss,val_acc`.
pub fn write_history_csv(history: &TrainingHistory, path: &Path) -> Result<()> {
    let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
    for stats in &history.epochs {
        let cell = |v: f64| {
            if v.is_nan() {
                String::new()
            } else {
                format!("{v:.6}")
            }
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            stats.epoch,
            cell(stats.train_loss),
            cell(stats.train_accuracy),
            cell(stats.val_loss),
            cell(stats.val_accuracy),
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
