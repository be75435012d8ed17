//! Batch toolkit that turns a tree of opcode listings into n-gram feature
//! datasets and trains classical classifiers plus a 1-D convolutional
//! network to attribute samples to group, software name, and type.

pub mod classic;
pub mod cnn;
pub mod corpus;
mod error;
pub mod extract;
pub mod ngram;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
