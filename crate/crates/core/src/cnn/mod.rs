//! One-to-one corpus preparation and the from-scratch 1-D convolutional
//! classifier: embedding, two conv+pool stages, dense+dropout, softmax,
//! trained with Adam on categorical cross-entropy.

mod adam;
mod data;
mod dedup;
mod model;
mod tensor;
mod train;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use data::{build_sequence_dataset, SequenceDataset, MIN_SEQUENCE_LEN};
pub use dedup::{dedup_one_to_one, DedupReport};
pub use model::{
    backward, build_model, forward, layer_dims, load_model, mean_cross_entropy, save_model,
    BatchForward, CnnConfig, CnnGradients, CnnModel, DropoutMode, LayerDims, PARAM_NAMES,
};
pub use tensor::Tensor;
pub use train::{evaluate_cnn, train, write_history_csv, EpochStats, TrainingHistory};
