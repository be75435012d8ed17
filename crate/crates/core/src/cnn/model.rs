//! From-scratch 1-D convolutional classifier over token-index sequences.
//!
//! Architecture: embedding lookup, two valid-padding conv+ReLU+maxpool(2)
//! stages, flatten, dense+ReLU, inverted dropout, dense, softmax. All
//! math runs in f64; the on-disk container stores little-endian f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Training and architecture parameters, all overridable from the CLI.
#[derive(Debug, Clone)]
pub struct CnnConfig {
    pub embedding_dim: usize,
    pub length_percentile: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_split: f64,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub dense_units: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            embedding_dim: 8,
            length_percentile: 50.0,
            epochs: 16,
            batch_size: 32,
            validation_split: 0.1,
            conv_filters: 64,
            conv_kernel: 8,
            dense_units: 128,
            dropout_rate: 0.5,
            learning_rate: 1e-3,
            seed: 42,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        check(self.embedding_dim >= 1, "embedding_dim must be positive")?;
        check(
            (0.0..=100.0).contains(&self.length_percentile),
            "length_percentile must be in [0, 100]",
        )?;
        check(self.batch_size >= 1, "batch_size must be positive")?;
        check(
            (0.0..1.0).contains(&self.validation_split),
            "validation_split must be in [0, 1)",
        )?;
        check(self.conv_filters >= 1, "conv_filters must be positive")?;
        check(self.conv_kernel >= 1, "conv_kernel must be positive")?;
        check(self.dense_units >= 1, "dense_units must be positive")?;
        check(
            (0.0..1.0).contains(&self.dropout_rate),
            "dropout_rate must be in [0, 1)",
        )?;
        check(self.learning_rate > 0.0, "learning_rate must be positive")?;
        Ok(())
    }
}

/// Sequence lengths at each stage of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerDims {
    pub max_len: usize,
    pub conv1_len: usize,
    pub pool1_len: usize,
    pub conv2_len: usize,
    pub pool2_len: usize,
    pub flat_len: usize,
}

/// Valid-convolution output length followed by a pool that halves it.
fn pooled(len: usize, kernel: usize) -> (usize, usize) {
    let conv = len + 1 - kernel.min(len + 1);
    (conv, conv / 2)
}

pub fn layer_dims(max_len: usize, kernel: usize, filters: usize) -> LayerDims {
    let (conv1_len, pool1_len) = pooled(max_len, kernel);
    let (conv2_len, pool2_len) = pooled(pool1_len, kernel);
    LayerDims {
        max_len,
        conv1_len,
        pool1_len,
        conv2_len,
        pool2_len,
        flat_len: pool2_len * filters,
    }
}

#[derive(Debug, Clone)]
pub struct CnnModel {
    pub vocab_size: usize,
    pub num_classes: usize,
    pub embedding_dim: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub dense_units: usize,
    pub dropout_rate: f64,
    pub dims: LayerDims,

    pub embedding: Tensor,  // (vocab_size + 1) x k
    pub conv1_weight: Tensor, // kernel x k x filters
    pub conv1_bias: Tensor,
    pub conv2_weight: Tensor, // kernel x filters x filters
    pub conv2_bias: Tensor,
    pub dense_weight: Tensor, // flat x dense_units
    pub dense_bias: Tensor,
    pub output_weight: Tensor, // dense_units x classes
    pub output_bias: Tensor,
}

/// Names of the parameter tensors, in the fixed traversal order used by
/// gradients, the optimizer state, and the on-disk container.
pub const PARAM_NAMES: [&str; 9] = [
    "embedding",
    "conv1_weight",
    "conv1_bias",
    "conv2_weight",
    "conv2_bias",
    "dense_weight",
    "dense_bias",
    "output_weight",
    "output_bias",
];

impl CnnModel {
    pub fn parameters(&self) -> Vec<&Tensor> {
        vec![
            &self.embedding,
            &self.conv1_weight,
            &self.conv1_bias,
            &self.conv2_weight,
            &self.conv2_bias,
            &self.dense_weight,
            &self.dense_bias,
            &self.output_weight,
            &self.output_bias,
        ]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.embedding,
            &mut self.conv1_weight,
            &mut self.conv1_bias,
            &mut self.conv2_weight,
            &mut self.conv2_bias,
            &mut self.dense_weight,
            &mut self.dense_bias,
            &mut self.output_weight,
            &mut self.output_bias,
        ]
    }
}

/// Gradients with the same shapes and order as the parameters.
#[derive(Debug, Clone)]
pub struct CnnGradients {
    pub tensors: Vec<Tensor>,
}

impl CnnGradients {
    fn zeros_like(model: &CnnModel) -> CnnGradients {
        CnnGradients {
            tensors: model
                .parameters()
                .iter()
                .map(|p| Tensor::zeros(&p.shape))
                .collect(),
        }
    }

    fn accumulate(&mut self, other: &CnnGradients) {
        for (mine, theirs) in self.tensors.iter_mut().zip(&other.tensors) {
            for (a, b) in mine.data.iter_mut().zip(&theirs.data) {
                *a += b;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for tensor in &mut self.tensors {
            for v in &mut tensor.data {
                *v *= factor;
            }
        }
    }
}

/// Build a model with seeded initialization: uniform(-0.05, 0.05) for the
/// embedding table, fan-in-scaled Gaussians for conv/dense weights, zero
/// biases.
pub fn build_model(
    config: &CnnConfig,
    vocab_size: usize,
    num_classes: usize,
    max_len: usize,
) -> Result<CnnModel> {
    config.validate()?;
    if num_classes < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    let dims = layer_dims(max_len, config.conv_kernel, config.conv_filters);
    if dims.pool2_len < 1 {
        let minimum = 3 * config.conv_kernel + 1;
        return Err(Error::InvalidInput(format!(
            "max_len {max_len} too small for two conv+pool stages with kernel {}; need at least {minimum}",
            config.conv_kernel
        )));
    }

    let k = config.embedding_dim;
    let filters = config.conv_filters;
    let kernel = config.conv_kernel;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut embedding = Tensor::zeros(&[vocab_size + 1, k]);
    embedding.fill_uniform(&mut rng, 0.05);
    let mut conv1_weight = Tensor::zeros(&[kernel, k, filters]);
    conv1_weight.fill_fan_in_gaussian(&mut rng, kernel * k);
    let mut conv2_weight = Tensor::zeros(&[kernel, filters, filters]);
    conv2_weight.fill_fan_in_gaussian(&mut rng, kernel * filters);
    let mut dense_weight = Tensor::zeros(&[dims.flat_len, config.dense_units]);
    dense_weight.fill_fan_in_gaussian(&mut rng, dims.flat_len);
    let mut output_weight = Tensor::zeros(&[config.dense_units, num_classes]);
    output_weight.fill_fan_in_gaussian(&mut rng, config.dense_units);

    Ok(CnnModel {
        vocab_size,
        num_classes,
        embedding_dim: k,
        conv_filters: filters,
        conv_kernel: kernel,
        dense_units: config.dense_units,
        dropout_rate: config.dropout_rate,
        dims,
        embedding,
        conv1_weight,
        conv1_bias: Tensor::zeros(&[filters]),
        conv2_weight,
        conv2_bias: Tensor::zeros(&[filters]),
        dense_weight,
        dense_bias: Tensor::zeros(&[config.dense_units]),
        output_weight,
        output_bias: Tensor::zeros(&[num_classes]),
    })
}

/// Whether a forward pass applies dropout, and from which mask stream.
#[derive(Debug, Clone, Copy)]
pub enum DropoutMode {
    Inference,
    /// Training mode: masks are drawn from per-sample ChaCha streams of
    /// this seed, so a batch's masks do not depend on thread scheduling.
    Training { mask_seed: u64 },
}

/// Everything the backward pass needs from one sample's forward pass.
pub struct SampleCache {
    embedded: Vec<f64>,    // max_len x k
    conv1_pre: Vec<f64>,   // conv1_len x filters
    pool1_out: Vec<f64>,   // pool1_len x filters
    pool1_arg: Vec<usize>, // pool1_len x filters
    conv2_pre: Vec<f64>,   // conv2_len x filters
    pool2_arg: Vec<usize>, // pool2_len x filters
    flat: Vec<f64>,        // flat_len
    dense_pre: Vec<f64>,   // dense_units
    dropped: Vec<f64>,     // dense_units, post-dropout activations
    mask_scale: Vec<f64>,  // dense_units, 0 or 1/(1-rate)
    pub probs: Vec<f64>,   // num_classes
}

pub struct BatchForward {
    pub probs: Vec<Vec<f64>>,
    pub caches: Vec<SampleCache>,
}

fn conv_forward(
    input: &[f64],
    input_len: usize,
    in_channels: usize,
    weight: &Tensor,
    bias: &Tensor,
    kernel: usize,
    filters: usize,
) -> Vec<f64> {
    let out_len = input_len + 1 - kernel;
    let mut out = vec![0.0; out_len * filters];
    for t in 0..out_len {
        for f in 0..filters {
            let mut acc = bias.data[f];
            for j in 0..kernel {
                let row = (t + j) * in_channels;
                let w_row = (j * in_channels) * filters;
                for c in 0..in_channels {
                    acc += input[row + c] * weight.data[w_row + c * filters + f];
                }
            }
            out[t * filters + f] = acc;
        }
    }
    out
}

fn maxpool_forward(input: &[f64], input_len: usize, filters: usize) -> (Vec<f64>, Vec<usize>) {
    let out_len = input_len / 2;
    let mut out = vec![0.0; out_len * filters];
    let mut arg = vec![0usize; out_len * filters];
    for p in 0..out_len {
        for f in 0..filters {
            let a = input[2 * p * filters + f];
            let b = input[(2 * p + 1) * filters + f];
            // Ties keep the earlier position.
            if a >= b {
                out[p * filters + f] = a;
                arg[p * filters + f] = 2 * p;
            } else {
                out[p * filters + f] = b;
                arg[p * filters + f] = 2 * p + 1;
            }
        }
    }
    (out, arg)
}

fn relu(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn forward_sample(model: &CnnModel, sequence: &[u32], mask_scale: Vec<f64>) -> SampleCache {
    let k = model.embedding_dim;
    let filters = model.conv_filters;
    let kernel = model.conv_kernel;
    let dims = model.dims;

    let mut embedded = vec![0.0; dims.max_len * k];
    for (t, &token) in sequence.iter().enumerate() {
        let row = token as usize * k;
        embedded[t * k..(t + 1) * k].copy_from_slice(&model.embedding.data[row..row + k]);
    }

    let conv1_pre = conv_forward(
        &embedded,
        dims.max_len,
        k,
        &model.conv1_weight,
        &model.conv1_bias,
        kernel,
        filters,
    );
    let conv1_act = relu(&conv1_pre);
    let (pool1_out, pool1_arg) = maxpool_forward(&conv1_act, dims.conv1_len, filters);

    let conv2_pre = conv_forward(
        &pool1_out,
        dims.pool1_len,
        filters,
        &model.conv2_weight,
        &model.conv2_bias,
        kernel,
        filters,
    );
    let conv2_act = relu(&conv2_pre);
    let (flat, pool2_arg) = maxpool_forward(&conv2_act, dims.conv2_len, filters);

    let mut dense_pre = model.dense_bias.data.clone();
    for (i, &x) in flat.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let row = i * model.dense_units;
        for u in 0..model.dense_units {
            dense_pre[u] += x * model.dense_weight.data[row + u];
        }
    }
    let dense_act = relu(&dense_pre);
    let dropped: Vec<f64> = dense_act
        .iter()
        .zip(&mask_scale)
        .map(|(a, m)| a * m)
        .collect();

    let mut logits = model.output_bias.data.clone();
    for (u, &d) in dropped.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = u * model.num_classes;
        for c in 0..model.num_classes {
            logits[c] += d * model.output_weight.data[row + c];
        }
    }
    let probs = softmax(&logits);

    SampleCache {
        embedded,
        conv1_pre,
        pool1_out,
        pool1_arg,
        conv2_pre,
        pool2_arg,
        flat,
        dense_pre,
        dropped,
        mask_scale,
        probs,
    }
}

fn dropout_mask(model: &CnnModel, mode: DropoutMode, sample_index: usize) -> Vec<f64> {
    match mode {
        DropoutMode::Inference => vec![1.0; model.dense_units],
        DropoutMode::Training { mask_seed } => {
            if model.dropout_rate == 0.0 {
                return vec![1.0; model.dense_units];
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
            rng.set_stream(sample_index as u64);
            let keep = 1.0 - model.dropout_rate;
            (0..model.dense_units)
                .map(|_| {
                    if rng.random_range(0.0..1.0) < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    }
}

/// Run the network over a batch. Each output row is a probability
/// distribution over the classes.
pub fn forward(model: &CnnModel, batch: &[Vec<u32>], mode: DropoutMode) -> Result<BatchForward> {
    for sequence in batch {
        if sequence.len() != model.dims.max_len {
            return Err(Error::InvalidInput(format!(
                "sequence length {} does not match model max_len {}",
                sequence.len(),
                model.dims.max_len
            )));
        }
        if let Some(&bad) = sequence.iter().find(|&&t| t as usize > model.vocab_size) {
            return Err(Error::InvalidInput(format!(
                "token index {bad} exceeds vocabulary size {}",
                model.vocab_size
            )));
        }
    }
    let caches: Vec<SampleCache> = batch
        .par_iter()
        .enumerate()
        .map(|(i, sequence)| forward_sample(model, sequence, dropout_mask(model, mode, i)))
        .collect();
    let probs = caches.iter().map(|c| c.probs.clone()).collect();
    Ok(BatchForward { probs, caches })
}

fn backward_sample(
    model: &CnnModel,
    sequence: &[u32],
    cache: &SampleCache,
    label: usize,
) -> CnnGradients {
    let k = model.embedding_dim;
    let filters = model.conv_filters;
    let kernel = model.conv_kernel;
    let dims = model.dims;
    let classes = model.num_classes;
    let units = model.dense_units;

    let mut grads = CnnGradients::zeros_like(model);
    let [g_embed, g_w1, g_b1, g_w2, g_b2, g_wd, g_bd, g_wo, g_bo] = {
        let mut iter = grads.tensors.iter_mut();
        [
            iter.next().unwrap(),
            iter.next().unwrap(),
            iter.next().unwrap(),
            iter.next().unwrap(),
            iter.next().unwrap(),
            iter.next().unwrap(),
            iter.next().unwrap(),
            iter.next().unwrap(),
            iter.next().unwrap(),
        ]
    };

    // Softmax + cross-entropy.
    let mut d_logits = cache.probs.clone();
    d_logits[label] -= 1.0;

    // Output layer.
    for u in 0..units {
        let d = cache.dropped[u];
        if d != 0.0 {
            let row = u * classes;
            for c in 0..classes {
                g_wo.data[row + c] += d * d_logits[c];
            }
        }
    }
    for c in 0..classes {
        g_bo.data[c] += d_logits[c];
    }
    let mut d_dense = vec![0.0; units];
    for u in 0..units {
        let row = u * classes;
        let mut acc = 0.0;
        for c in 0..classes {
            acc += model.output_weight.data[row + c] * d_logits[c];
        }
        // Dropout then ReLU derivative.
        acc *= cache.mask_scale[u];
        if cache.dense_pre[u] <= 0.0 {
            acc = 0.0;
        }
        d_dense[u] = acc;
    }

    // Dense layer.
    let mut d_flat = vec![0.0; dims.flat_len];
    for i in 0..dims.flat_len {
        let x = cache.flat[i];
        let row = i * units;
        let mut acc = 0.0;
        for u in 0..units {
            g_wd.data[row + u] += x * d_dense[u];
            acc += model.dense_weight.data[row + u] * d_dense[u];
        }
        d_flat[i] = acc;
    }
    for u in 0..units {
        g_bd.data[u] += d_dense[u];
    }

    // Unpool into conv2 activations, then through ReLU.
    let mut d_conv2 = vec![0.0; dims.conv2_len * filters];
    for p in 0..dims.pool2_len {
        for f in 0..filters {
            let src = p * filters + f;
            let t = cache.pool2_arg[src];
            if cache.conv2_pre[t * filters + f] > 0.0 {
                d_conv2[t * filters + f] += d_flat[src];
            }
        }
    }

    // Conv2 parameters and its input gradient.
    let mut d_pool1 = vec![0.0; dims.pool1_len * filters];
    for t in 0..dims.conv2_len {
        for f in 0..filters {
            let dz = d_conv2[t * filters + f];
            if dz == 0.0 {
                continue;
            }
            g_b2.data[f] += dz;
            for j in 0..kernel {
                let in_row = (t + j) * filters;
                let w_row = (j * filters) * filters;
                for g in 0..filters {
                    g_w2.data[w_row + g * filters + f] += cache.pool1_out[in_row + g] * dz;
                    d_pool1[in_row + g] += model.conv2_weight.data[w_row + g * filters + f] * dz;
                }
            }
        }
    }

    // Unpool into conv1 activations, through ReLU.
    let mut d_conv1 = vec![0.0; dims.conv1_len * filters];
    for p in 0..dims.pool1_len {
        for f in 0..filters {
            let src = p * filters + f;
            let t = cache.pool1_arg[src];
            if cache.conv1_pre[t * filters + f] > 0.0 {
                d_conv1[t * filters + f] += d_pool1[src];
            }
        }
    }

    // Conv1 parameters and the embedding gradient.
    let mut d_embedded = vec![0.0; dims.max_len * k];
    for t in 0..dims.conv1_len {
        for f in 0..filters {
            let dz = d_conv1[t * filters + f];
            if dz == 0.0 {
                continue;
            }
            g_b1.data[f] += dz;
            for j in 0..kernel {
                let in_row = (t + j) * k;
                let w_row = (j * k) * filters;
                for c in 0..k {
                    g_w1.data[w_row + c * filters + f] += cache.embedded[in_row + c] * dz;
                    d_embedded[in_row + c] += model.conv1_weight.data[w_row + c * filters + f] * dz;
                }
            }
        }
    }

    for (t, &token) in sequence.iter().enumerate() {
        let row = token as usize * k;
        for c in 0..k {
            g_embed.data[row + c] += d_embedded[t * k + c];
        }
    }

    grads
}

/// Gradients of the mean cross-entropy over the batch, for every
/// parameter tensor, reusing the forward caches.
pub fn backward(
    model: &CnnModel,
    batch: &[Vec<u32>],
    labels: &[usize],
    forward_pass: &BatchForward,
) -> Result<CnnGradients> {
    if batch.len() != labels.len() || batch.len() != forward_pass.caches.len() {
        return Err(Error::InvalidInput(
            "batch, labels, and forward cache sizes differ".into(),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= model.num_classes) {
        return Err(Error::InvalidInput(format!(
            "label {bad} out of range for {} classes",
            model.num_classes
        )));
    }
    let per_sample: Vec<CnnGradients> = batch
        .par_iter()
        .zip(forward_pass.caches.par_iter())
        .zip(labels.par_iter())
        .map(|((sequence, cache), &label)| backward_sample(model, sequence, cache, label))
        .collect();

    let mut total = CnnGradients::zeros_like(model);
    for grads in &per_sample {
        total.accumulate(grads);
    }
    total.scale(1.0 / batch.len() as f64);
    Ok(total)
}

/// Mean cross-entropy of a forward pass against integer labels.
pub fn mean_cross_entropy(probs: &[Vec<f64>], labels: &[usize]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| -(p[y].max(1e-12).ln()))
        .sum();
    total / labels.len() as f64
}

const MODEL_MAGIC: &[u8; 4] = b"OPNN";
const MODEL_VERSION: u32 = 1;

/// Write the model to the binary container: magic, version, architecture
/// header, shape table, then each tensor as little-endian f32.
pub fn save_model(model: &CnnModel, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut run = || -> std::io::Result<()> {
        out.write_all(MODEL_MAGIC)?;
        out.write_all(&MODEL_VERSION.to_le_bytes())?;
        for value in [
            model.vocab_size,
            model.num_classes,
            model.embedding_dim,
            model.conv_filters,
            model.conv_kernel,
            model.dense_units,
            model.dims.max_len,
        ] {
            out.write_all(&(value as u32).to_le_bytes())?;
        }
        out.write_all(&(model.dropout_rate as f32).to_le_bytes())?;

        let params = model.parameters();
        out.write_all(&(params.len() as u32).to_le_bytes())?;
        for (name, tensor) in PARAM_NAMES.iter().zip(&params) {
            out.write_all(&(name.len() as u32).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
            out.write_all(&(tensor.shape.len() as u32).to_le_bytes())?;
            for &dim in &tensor.shape {
                out.write_all(&(dim as u32).to_le_bytes())?;
            }
        }
        for tensor in &params {
            for &value in &tensor.data {
                out.write_all(&(value as f32).to_le_bytes())?;
            }
        }
        out.flush()
    };
    run().map_err(|e| Error::io(path, e))
}

struct ModelReader {
    input: BufReader<File>,
}

impl ModelReader {
    fn exact(&mut self, buf: &mut [u8], path: &Path) -> Result<()> {
        self.input.read_exact(buf).map_err(|_| Error::DatasetFormat {
            path: path.to_path_buf(),
            row: 0,
            column: 0,
            message: "truncated model file".into(),
        })
    }

    fn u32(&mut self, path: &Path) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.exact(&mut buf, path)?;
        Ok(u32::from_le_bytes(buf))
    }

    fn f32(&mut self, path: &Path) -> Result<f32> {
        let mut buf = [0u8; 4];
        self.exact(&mut buf, path)?;
        Ok(f32::from_le_bytes(buf))
    }
}

/// Load a model previously written by [`save_model`].
pub fn load_model(path: &Path) -> Result<CnnModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = ModelReader {
        input: BufReader::new(file),
    };
    let bad = |message: &str| Error::DatasetFormat {
        path: path.to_path_buf(),
        row: 0,
        column: 0,
        message: message.into(),
    };

    let mut magic = [0u8; 4];
    reader.exact(&mut magic, path)?;
    if &magic != MODEL_MAGIC {
        return Err(bad("bad magic bytes; not a model container"));
    }
    if reader.u32(path)? != MODEL_VERSION {
        return Err(bad("unsupported model version"));
    }
    let vocab_size = reader.u32(path)? as usize;
    let num_classes = reader.u32(path)? as usize;
    let embedding_dim = reader.u32(path)? as usize;
    let conv_filters = reader.u32(path)? as usize;
    let conv_kernel = reader.u32(path)? as usize;
    let dense_units = reader.u32(path)? as usize;
    let max_len = reader.u32(path)? as usize;
    let dropout_rate = reader.f32(path)? as f64;

    let count = reader.u32(path)? as usize;
    if count != PARAM_NAMES.len() {
        return Err(bad("unexpected parameter tensor count"));
    }
    let mut shapes = Vec::with_capacity(count);
    for expected in PARAM_NAMES {
        let name_len = reader.u32(path)? as usize;
        let mut name = vec![0u8; name_len];
        reader.exact(&mut name, path)?;
        if name != expected.as_bytes() {
            return Err(bad(&format!("expected tensor '{expected}' in shape table")));
        }
        let rank = reader.u32(path)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(reader.u32(path)? as usize);
        }
        shapes.push(shape);
    }
    let mut tensors = Vec::with_capacity(count);
    for shape in shapes {
        let mut tensor = Tensor::zeros(&shape);
        for v in &mut tensor.data {
            *v = reader.f32(path)? as f64;
        }
        tensors.push(tensor);
    }

    let mut iter = tensors.into_iter();
    Ok(CnnModel {
        vocab_size,
        num_classes,
        embedding_dim,
        conv_filters,
        conv_kernel,
        dense_units,
        dropout_rate,
        dims: layer_dims(max_len, conv_kernel, conv_filters),
        embedding: iter.next().unwrap(),
        conv1_weight: iter.next().unwrap(),
        conv1_bias: iter.next().unwrap(),
        conv2_weight: iter.next().unwrap(),
        conv2_bias: iter.next().unwrap(),
        dense_weight: iter.next().unwrap(),
        dense_bias: iter.next().unwrap(),
        output_weight: iter.next().unwrap(),
        output_bias: iter.next().unwrap(),
    })
}
