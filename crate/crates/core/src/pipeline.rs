//! End-to-end pipeline: extract, preprocess, classify, dedup, CNN
//! training, and chart emission, with per-stage timing and a fixed
//! results layout (`results/{extract,ngram,classic,cnn}/`).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classic::{run_suite, serialize_results, ClassifierResult, SuiteOptions, Target};
use crate::cnn::{
    build_model, build_sequence_dataset, dedup_one_to_one, evaluate_cnn, save_model, train,
    write_history_csv, CnnConfig,
};
use crate::corpus::load_corpus;
use crate::error::{Error, Result};
use crate::extract::{run_extraction, write_report, ManagerConfig};
use crate::ngram::{
    build_dataset, variance_prune, write_dataset, DatasetFormat, FeatureDataset, GramMode,
    PruneSpec,
};
use crate::report::render_charts;

/// Everything a full run needs. The single variance percentile is applied
/// to every n-gram size, and the classifiers run on the largest-n
/// dataset.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus_root: PathBuf,
    pub results_root: PathBuf,
    pub extractor_command_template: String,
    pub threads: usize,
    pub skip_existing: bool,
    pub timeout_seconds: u64,
    pub ngram_max: usize,
    pub percentile: f64,
    pub holdout: Option<f64>,
    pub cnn: CnnConfig,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(
        corpus_root: impl Into<PathBuf>,
        results_root: impl Into<PathBuf>,
        extractor: impl Into<String>,
    ) -> Self {
        PipelineConfig {
            corpus_root: corpus_root.into(),
            results_root: results_root.into(),
            extractor_command_template: extractor.into(),
            threads: 4,
            skip_existing: false,
            timeout_seconds: 1200,
            ngram_max: 2,
            percentile: 80.0,
            holdout: None,
            cnn: CnnConfig::default(),
            seed: 42,
        }
    }
}

/// One executed stage: wall-clock seconds, artifacts, and a summary line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub outputs: Vec<PathBuf>,
    pub detail: String,
}

/// The whole run's stage log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineRun {
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

fn stage_error(stage: &str, err: Error) -> Error {
    Error::Stage {
        stage: stage.to_string(),
        message: err.to_string(),
    }
}

struct StageLog {
    run: PipelineRun,
}

impl StageLog {
    fn record<T>(
        &mut self,
        name: &str,
        work: impl FnOnce() -> Result<(T, Vec<PathBuf>, String)>,
    ) -> Result<T> {
        let started = Instant::now();
        let (value, outputs, detail) = work().map_err(|e| match e {
            err @ Error::Stage { .. } => err,
            err => stage_error(name, err),
        })?;
        self.run.stages.push(StageRecord {
            name: name.to_string(),
            seconds: started.elapsed().as_secs_f64(),
            outputs,
            detail,
        });
        Ok(value)
    }
}

fn percentile_tag(percentile: f64) -> String {
    if percentile.fract() == 0.0 {
        format!("{}", percentile as i64)
    } else {
        format!("{percentile}")
    }
}

/// Name of the CSV a preprocess run writes for one (n, percentile) pair.
pub fn dataset_file_name(n: usize, percentile: f64) -> String {
    format!("{n}gram_p{}.csv", percentile_tag(percentile))
}

/// Build, prune, and persist the dataset for one n-gram size. Returns
/// the pruned dataset and the paths written (CSV plus binary cache).
pub fn preprocess_one(
    documents: &[crate::corpus::OpcodeDocument],
    n: usize,
    percentile: f64,
    output_dir: &Path,
) -> Result<(FeatureDataset, Vec<PathBuf>)> {
    let dataset = build_dataset(documents, n, GramMode::Chunked);
    let (pruned, _) = variance_prune(&dataset, PruneSpec { percentile })?;
    let csv_path = output_dir.join(dataset_file_name(n, percentile));
    let bin_path = csv_path.with_extension("bin");
    write_dataset(&pruned, &csv_path, DatasetFormat::Csv)?;
    write_dataset(&pruned, &bin_path, DatasetFormat::Binary)?;
    Ok((pruned, vec![csv_path, bin_path]))
}

/// Run every stage in order. A stage failure halts the run and surfaces
/// as [`Error::Stage`] naming the stage.
pub fn run_all(config: &PipelineConfig) -> Result<PipelineRun> {
    if !config.corpus_root.is_dir() {
        return Err(stage_error(
            "extract",
            Error::InvalidInput(format!(
                "corpus {} does not exist",
                config.corpus_root.display()
            )),
        ));
    }
    let results = &config.results_root;
    for sub in ["extract", "ngram", "classic", "cnn"] {
        let dir = results.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let mut log = StageLog {
        run: PipelineRun {
            seed: config.seed,
            stages: Vec::new(),
        },
    };

    // Stage 1: opcode extraction via the external extractor.
    let opcodes_root = results.join("extract").join("opcodes");
    log.record("extract", || {
        let manager = ManagerConfig {
            extractor_command_template: config.extractor_command_template.clone(),
            threads: config.threads,
            skip_existing: config.skip_existing,
            timeout_seconds: config.timeout_seconds,
            corpus_root: config.corpus_root.clone(),
            output_root: opcodes_root.clone(),
        };
        let report = run_extraction(&manager)?;
        let report_path = results.join("extract").join("extraction_report.json");
        write_report(&report, &report_path)?;
        if report.done + report.skipped == 0 {
            return Err(Error::InvalidInput(format!(
                "no opcode files produced ({} failed, {} timed out)",
                report.failed, report.timed_out
            )));
        }
        let detail = format!(
            "{} done, {} skipped, {} failed, {} timed out",
            report.done, report.skipped, report.failed, report.timed_out
        );
        Ok(((), vec![report_path, opcodes_root.clone()], detail))
    })?;

    // Stage 2: n-gram datasets, one per size, pruned at the percentile.
    let classify_dataset = log.record("preprocess", || {
        let (documents, warnings) = load_corpus(&opcodes_root, "opcode")?;
        if documents.is_empty() {
            return Err(Error::InvalidInput("no opcode documents found".into()));
        }
        let mut outputs = Vec::new();
        let mut largest = None;
        for n in 1..=config.ngram_max.max(1) {
            let (pruned, paths) =
                preprocess_one(&documents, n, config.percentile, &results.join("ngram"))?;
            outputs.extend(paths);
            largest = Some(pruned);
        }
        let detail = format!(
            "{} documents, {} datasets, {} scan warnings",
            documents.len(),
            config.ngram_max.max(1),
            warnings.len()
        );
        Ok((largest.unwrap(), outputs, detail))
    })?;

    // Stage 3: the 21-combination classifier suite on the largest-n set.
    log.record("classify", || {
        let options = SuiteOptions {
            holdout: config.holdout,
            seed: config.seed,
            ..SuiteOptions::default()
        };
        let suite = run_suite(&classify_dataset, &options);
        let results_path = results.join("classic").join("results.json");
        serialize_results(&suite, &results_path)?;
        let mut outputs = vec![results_path];
        outputs.extend(render_charts(&suite, &results.join("classic").join("charts"))?);
        let detail = format!("{} results", suite.len());
        Ok(((), outputs, detail))
    })?;

    // Stage 4: one-to-one dedup of the opcode tree. Reruns regenerate
    // the copy, so a previous run's tree is cleared first.
    let deduped_root = results.join("cnn").join("corpus_one_to_one");
    log.record("cnn-preprocess", || {
        if deduped_root.exists() {
            fs::remove_dir_all(&deduped_root).map_err(|e| Error::io(&deduped_root, e))?;
        }
        let report = dedup_one_to_one(&opcodes_root, &deduped_root)?;
        let report_path = results.join("cnn").join("dedup_report.json");
        let json = serde_json::to_string_pretty(&report)?;
        fs::write(&report_path, json).map_err(|e| Error::io(&report_path, e))?;
        let detail = format!(
            "{} directories removed, {:.2}% file reduction",
            report.removed_directories.len(),
            report.reduction_percent
        );
        Ok(((), vec![report_path, deduped_root.clone()], detail))
    })?;

    // Stage 5: CNN training on the deduped corpus, one model per target.
    log.record("cnn-train", || {
        let (documents, _) = load_corpus(&deduped_root, "opcode")?;
        if documents.is_empty() {
            return Err(Error::InvalidInput("deduped corpus is empty".into()));
        }
        let cnn_dir = results.join("cnn");
        let mut outputs = Vec::new();
        let mut cnn_results: Vec<ClassifierResult> = Vec::new();
        let mut skipped = Vec::new();
        for target in [Target::Group, Target::Name, Target::Type] {
            let dataset =
                build_sequence_dataset(&documents, target, config.cnn.length_percentile)?;
            if dataset.class_names.len() < 2 {
                skipped.push(format!("{target} (single class)"));
                continue;
            }
            let mut model = build_model(
                &config.cnn,
                dataset.vocab_size(),
                dataset.class_names.len(),
                dataset.max_len,
            )?;
            let history = train(&mut model, &dataset, &config.cnn)?;
            let history_path = cnn_dir.join(format!("history_{target}.csv"));
            write_history_csv(&history, &history_path)?;
            let model_path = cnn_dir.join(format!("model_{target}.bin"));
            save_model(&model, &model_path)?;
            cnn_results.push(evaluate_cnn(&model, &dataset, target)?);
            outputs.push(history_path);
            outputs.push(model_path);
        }
        let results_path = cnn_dir.join("results.json");
        serialize_results(&cnn_results, &results_path)?;
        outputs.push(results_path);
        outputs.extend(render_charts(&cnn_results, &cnn_dir.join("charts"))?);
        let mut detail = format!("{} targets trained", cnn_results.len());
        if !skipped.is_empty() {
            detail.push_str(&format!("; skipped {}", skipped.join(", ")));
        }
        Ok(((), outputs, detail))
    })?;

    let run_path = results.join("pipeline_run.json");
    let json = serde_json::to_string_pretty(&log.run)?;
    fs::write(&run_path, json).map_err(|e| Error::io(&run_path, e))?;
    Ok(log.run)
}
