//! N-gram vocabulary construction and normalized-frequency featurization.
//!
//! Token streams are padded with a literal `PAD` token until their length
//! is divisible by the n-gram size, then partitioned into consecutive
//! non-overlapping chunks of n tokens. A gram is the chunk's tokens joined
//! by a single space. Feature values are gram counts normalized by the
//! document's total gram count.

mod dataset;
mod prune;

pub use dataset::{read_dataset, write_dataset, DatasetFormat, DatasetRow, FeatureDataset, SampleLabels};
pub use prune::{percentile_linear, variance_prune, PruneSpec};

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use crate::corpus::OpcodeDocument;
use crate::error::{Error, Result};

/// Literal token appended until a stream's length divides the n-gram size.
pub const PAD_TOKEN: &str = "PAD";

/// How consecutive grams are taken from a padded token stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GramMode {
    /// Non-overlapping chunks of n tokens (the tested contract).
    #[default]
    Chunked,
    /// Overlapping windows of n tokens, offered for experimentation.
    Sliding,
}

/// An ordered set of unique grams with their column positions.
#[derive(Debug, Clone)]
pub struct NGramVocabulary {
    pub n: usize,
    pub grams: Vec<String>,
    index: HashMap<String, usize>,
}

impl NGramVocabulary {
    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn position(&self, gram: &str) -> Option<usize> {
        self.index.get(gram).copied()
    }
}

/// Append `PAD` tokens until the length is divisible by `n`. Empty input
/// stays empty.
pub fn pad_tokens(tokens: &[String], n: usize) -> Vec<String> {
    assert!(n >= 1, "n-gram size must be at least 1");
    let mut padded = tokens.to_vec();
    if !padded.is_empty() {
        while padded.len() % n != 0 {
            padded.push(PAD_TOKEN.to_string());
        }
    }
    padded
}

/// Partition an already-padded token stream into grams.
///
/// In chunked mode the stream length must be divisible by `n`; callers
/// pad first.
pub fn generate_ngrams(tokens: &[String], n: usize, mode: GramMode) -> Result<Vec<String>> {
    if n == 0 {
        return Err(Error::InvalidInput("n-gram size must be at least 1".into()));
    }
    match mode {
        GramMode::Chunked => {
            if tokens.len() % n != 0 {
                return Err(Error::InvalidInput(format!(
                    "token count {} is not divisible by n={}; pad first",
                    tokens.len(),
                    n
                )));
            }
            Ok(tokens.chunks(n).map(|chunk| chunk.join(" ")).collect())
        }
        GramMode::Sliding => {
            if tokens.len() < n {
                return Ok(Vec::new());
            }
            Ok(tokens.windows(n).map(|w| w.join(" ")).collect())
        }
    }
}

fn document_grams(doc: &OpcodeDocument, n: usize, mode: GramMode) -> Vec<String> {
    let padded = pad_tokens(&doc.tokens, n);
    generate_ngrams(&padded, n, mode).expect("padded stream always chunks")
}

/// Build the sorted union of all documents' grams.
///
/// Deterministic: the result depends only on the set of documents, not
/// their order.
pub fn build_vocabulary(documents: &[OpcodeDocument], n: usize, mode: GramMode) -> NGramVocabulary {
    let sets: Vec<BTreeSet<String>> = documents
        .par_iter()
        .map(|doc| document_grams(doc, n, mode).into_iter().collect())
        .collect();
    let mut union = BTreeSet::new();
    for set in sets {
        union.extend(set);
    }
    let grams: Vec<String> = union.into_iter().collect();
    let index = grams
        .iter()
        .enumerate()
        .map(|(i, g)| (g.clone(), i))
        .collect();
    NGramVocabulary { n, grams, index }
}

/// Compute a document's normalized gram-frequency vector against a
/// vocabulary. Grams absent from the vocabulary still count toward the
/// normalizing total; an empty document yields the zero vector.
pub fn featurize(doc: &OpcodeDocument, vocabulary: &NGramVocabulary, mode: GramMode) -> Vec<f64> {
    let grams = document_grams(doc, vocabulary.n, mode);
    let mut counts = vec![0u64; vocabulary.len()];
    for gram in &grams {
        if let Some(pos) = vocabulary.position(gram) {
            counts[pos] += 1;
        }
    }
    let total = grams.len();
    if total == 0 {
        return vec![0.0; vocabulary.len()];
    }
    counts
        .into_iter()
        .map(|c| c as f64 / total as f64)
        .collect()
}

/// Build the full feature dataset for one n-gram size: vocabulary over
/// all documents, then one row per document in the given order.
pub fn build_dataset(documents: &[OpcodeDocument], n: usize, mode: GramMode) -> FeatureDataset {
    let vocabulary = build_vocabulary(documents, n, mode);
    let rows: Vec<DatasetRow> = documents
        .par_iter()
        .map(|doc| DatasetRow {
            labels: SampleLabels {
                group: doc.record.group.clone(),
                name: doc.record.software_name.clone(),
                malware_type: doc.record.malware_type.clone(),
                file_name: doc.record.file_name.clone(),
            },
            features: featurize(doc, &vocabulary, mode),
        })
        .collect();
    FeatureDataset {
        feature_names: vocabulary.grams,
        rows,
    }
}

#[cfg(test)]
pub(crate) fn doc_from_tokens(tokens: &[&str]) -> OpcodeDocument {
    use crate::corpus::SampleRecord;
    use std::path::PathBuf;
    OpcodeDocument {
        record: SampleRecord {
            absolute_path: PathBuf::new(),
            relative_path: PathBuf::new(),
            group: "g".into(),
            software_name: "s".into(),
            malware_type: "t".into(),
            file_name: "f".into(),
        },
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
    }
}
