//! Integer-encoded sequence dataset for the convolutional classifier.

use crate::classic::{ordinal_encode, Target};
use crate::corpus::OpcodeDocument;
use crate::error::{Error, Result};
use crate::ngram::percentile_linear;

/// Shortest sequence length the dataset will use regardless of the
/// percentile outcome.
pub const MIN_SEQUENCE_LEN: usize = 4;

/// Fixed-length token-index sequences with encoded labels. Index 0 is
/// reserved for padding; real opcodes map to `1..=vocab_size`.
#[derive(Debug, Clone)]
pub struct SequenceDataset {
    pub sequences: Vec<Vec<u32>>,
    pub labels: Vec<usize>,
    /// Sorted unique opcodes; position `i` corresponds to index `i + 1`.
    pub vocab: Vec<String>,
    pub class_names: Vec<String>,
    pub max_len: usize,
}

impl SequenceDataset {
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

/// Build the sequence dataset: vocabulary over sorted unique opcodes,
/// max_len from the percentile of document lengths (rounded up, at least
/// [`MIN_SEQUENCE_LEN`]), longer documents truncated at the tail, shorter
/// ones right-padded with 0, labels ordinal-encoded on the target.
pub fn build_sequence_dataset(
    documents: &[OpcodeDocument],
    target: Target,
    percentile: f64,
) -> Result<SequenceDataset> {
    if documents.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    if target == Target::FileName {
        return Err(Error::InvalidInput(
            "sequence dataset targets are group, name, or type".into(),
        ));
    }
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::InvalidInput(format!(
            "percentile {percentile} outside [0, 100]"
        )));
    }

    let mut vocab: Vec<String> = documents
        .iter()
        .flat_map(|d| d.tokens.iter().cloned())
        .collect();
    vocab.sort();
    vocab.dedup();
    let index_of = |token: &String| vocab.binary_search(token).expect("token in vocabulary") as u32 + 1;

    let lengths: Vec<f64> = documents.iter().map(|d| d.tokens.len() as f64).collect();
    let max_len = (percentile_linear(&lengths, percentile).ceil() as usize).max(MIN_SEQUENCE_LEN);

    let sequences = documents
        .iter()
        .map(|doc| {
            let mut seq: Vec<u32> = doc.tokens.iter().take(max_len).map(index_of).collect();
            seq.resize(max_len, 0);
            seq
        })
        .collect();

    let label_values: Vec<String> = documents
        .iter()
        .map(|d| match target {
            Target::Group => d.record.group.clone(),
            Target::Name => d.record.software_name.clone(),
            Target::Type => d.record.malware_type.clone(),
            Target::FileName => unreachable!(),
        })
        .collect();
    let (labels, class_names) = ordinal_encode(&label_values)?;

    Ok(SequenceDataset {
        sequences,
        labels,
        vocab,
        class_names,
        max_len,
    })
}
