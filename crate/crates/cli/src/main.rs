//! Command-line entry point for the opcode classification pipeline.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 when a stage fails.
//! Every flag can also be supplied through an `OPCLASS_*` environment
//! variable; explicit flags win over the environment.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use opclass::classic::{run_suite, serialize_results, SuiteOptions, Target};
use opclass::cnn::{
    build_model, build_sequence_dataset, dedup_one_to_one, evaluate_cnn, save_model, train,
    write_history_csv, CnnConfig,
};
use opclass::corpus::load_corpus;
use opclass::extract::{run_extraction, write_report, ManagerConfig};
use opclass::ngram::read_dataset;
use opclass::pipeline::{preprocess_one, run_all, PipelineConfig};
use opclass::report::{load_results_file, render_charts};

#[derive(Parser)]
#[command(name = "opclass", version, about = "Opcode extraction, n-gram featurization, and malware attribution")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Extract opcode listings from executables with an external extractor command
    Extract(ExtractArgs),
    /// Build n-gram feature datasets from a tree of .opcode files
    Preprocess(PreprocessArgs),
    /// Train and evaluate the SVM/KNN/decision-tree suite on a dataset
    Classify(ClassifyArgs),
    /// Copy an opcode corpus, keeping each software under exactly one group
    CnnPreprocess(CnnPreprocessArgs),
    /// Train the convolutional sequence classifier
    CnnTrain(CnnTrainArgs),
    /// Render bar-chart and heatmap data (CSV + SVG) from a results file
    Report(ReportArgs),
    /// Run extract, preprocess, classify, cnn-preprocess, and cnn-train in order
    RunAll(RunAllArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Extractor command template with {input} and {output} placeholders
    #[arg(long, env = "OPCLASS_EXTRACTOR")]
    extractor: String,
    /// Directory containing the malware samples
    #[arg(long, env = "OPCLASS_DIRECTORY")]
    directory: PathBuf,
    /// Directory that receives the mirrored .opcode tree
    #[arg(long, env = "OPCLASS_OUTPUT")]
    output: PathBuf,
    /// How many samples to analyze at once
    #[arg(long, default_value_t = 4, env = "OPCLASS_THREADS")]
    threads: usize,
    /// Skip samples whose opcodes were already extracted
    #[arg(long, default_value_t = false, action = ArgAction::Set, env = "OPCLASS_SKIP")]
    skip: bool,
    /// Maximum seconds allowed per sample
    #[arg(long, default_value_t = 1200, env = "OPCLASS_TIMEOUT")]
    timeout: u64,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Directory containing the .opcode files
    #[arg(long, env = "OPCLASS_OPCODES")]
    opcodes: PathBuf,
    /// Maximum n-gram size; one dataset is built per n in 1..=n
    #[arg(short, default_value_t = 2, env = "OPCLASS_NGRAM_MAX")]
    n: usize,
    /// Comma-separated variance percentiles; one pruned dataset each
    #[arg(long, value_delimiter = ',', required = true, env = "OPCLASS_PERCENTILES")]
    percentiles: Vec<f64>,
    /// Output directory for the dataset files
    #[arg(long, default_value = ".", env = "OPCLASS_OUTPUT")]
    output: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Dataset to train and evaluate on (.csv or binary cache)
    #[arg(long, env = "OPCLASS_DATASET")]
    dataset: PathBuf,
    /// Optional held-out evaluation fraction in (0, 1)
    #[arg(long, env = "OPCLASS_HOLDOUT")]
    holdout: Option<f64>,
    /// Seed for weight initialization and the holdout shuffle
    #[arg(long, default_value_t = 42, env = "OPCLASS_SEED")]
    seed: u64,
    /// Output directory for results.json and chart data
    #[arg(long, default_value = ".", env = "OPCLASS_OUTPUT")]
    output: PathBuf,
}

#[derive(Args)]
struct CnnPreprocessArgs {
    /// The opcode corpus to deduplicate
    #[arg(long, env = "OPCLASS_DATASET")]
    dataset: PathBuf,
    /// Destination tree; defaults to <dataset>_one_to_one
    #[arg(long, env = "OPCLASS_OUTPUT")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CnnTrainArgs {
    /// Directory containing the opcode files
    #[arg(long, env = "OPCLASS_DIRECTORY")]
    directory: PathBuf,
    /// Percentile of document lengths that sets the sequence length
    #[arg(long, default_value_t = 50.0, env = "OPCLASS_PERCENTILE")]
    percentile: f64,
    /// Output dimension of the embedding layer
    #[arg(long, default_value_t = 8, env = "OPCLASS_K")]
    k: usize,
    /// Number of training epochs
    #[arg(long, default_value_t = 16, env = "OPCLASS_EPOCHS")]
    epochs: usize,
    /// Training batch size
    #[arg(long = "batch_size", default_value_t = 32, env = "OPCLASS_BATCH_SIZE")]
    batch_size: usize,
    /// Fraction of samples held out for validation
    #[arg(long = "validation_split", default_value_t = 0.1, env = "OPCLASS_VALIDATION_SPLIT")]
    validation_split: f64,
    /// Convolution filter count
    #[arg(long, default_value_t = 64, env = "OPCLASS_FILTERS")]
    filters: usize,
    /// Convolution kernel width
    #[arg(long, default_value_t = 8, env = "OPCLASS_KERNEL")]
    kernel: usize,
    /// Width of the fully connected layer
    #[arg(long = "dense_units", default_value_t = 128, env = "OPCLASS_DENSE_UNITS")]
    dense_units: usize,
    /// Dropout rate applied after the dense layer during training
    #[arg(long, default_value_t = 0.5, env = "OPCLASS_DROPOUT")]
    dropout: f64,
    /// Adam learning rate
    #[arg(long = "learning_rate", default_value_t = 1e-3, env = "OPCLASS_LEARNING_RATE")]
    learning_rate: f64,
    /// Seed controlling initialization, splits, shuffles, and dropout
    #[arg(long, default_value_t = 42, env = "OPCLASS_SEED")]
    seed: u64,
    /// Train a single target (group | name | type); default is all three
    #[arg(long, env = "OPCLASS_TARGET")]
    target: Option<String>,
    /// Output directory for history, model, and result files
    #[arg(long, default_value = ".", env = "OPCLASS_OUTPUT")]
    output: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// results.json file produced by classify or cnn-train
    #[arg(long, env = "OPCLASS_RESULTS")]
    results: PathBuf,
    /// Directory that receives the chart CSV and SVG files
    #[arg(long, default_value = "charts", env = "OPCLASS_OUTPUT")]
    output: PathBuf,
}

#[derive(Args)]
struct RunAllArgs {
    /// Directory containing the malware samples
    #[arg(long, env = "OPCLASS_DIRECTORY")]
    directory: PathBuf,
    /// Extractor command template with {input} and {output} placeholders
    #[arg(long, env = "OPCLASS_EXTRACTOR")]
    extractor: String,
    /// Root directory for all stage outputs
    #[arg(long, default_value = "results", env = "OPCLASS_RESULTS")]
    results: PathBuf,
    #[arg(long, default_value_t = 4, env = "OPCLASS_THREADS")]
    threads: usize,
    #[arg(long, default_value_t = false, action = ArgAction::Set, env = "OPCLASS_SKIP")]
    skip: bool,
    #[arg(long, default_value_t = 1200, env = "OPCLASS_TIMEOUT")]
    timeout: u64,
    /// Maximum n-gram size for the feature datasets
    #[arg(short, default_value_t = 2, env = "OPCLASS_NGRAM_MAX")]
    n: usize,
    /// Variance percentile used to prune every n-gram dataset
    #[arg(long = "variance_percentile", default_value_t = 80.0, env = "OPCLASS_VARIANCE_PERCENTILE")]
    variance_percentile: f64,
    /// Sequence-length percentile for the CNN stage
    #[arg(long = "sequence_percentile", default_value_t = 50.0, env = "OPCLASS_SEQUENCE_PERCENTILE")]
    sequence_percentile: f64,
    /// Optional held-out fraction for the classifier suite
    #[arg(long, env = "OPCLASS_HOLDOUT")]
    holdout: Option<f64>,
    #[arg(long, default_value_t = 8, env = "OPCLASS_K")]
    k: usize,
    #[arg(long, default_value_t = 16, env = "OPCLASS_EPOCHS")]
    epochs: usize,
    #[arg(long = "batch_size", default_value_t = 32, env = "OPCLASS_BATCH_SIZE")]
    batch_size: usize,
    #[arg(long = "validation_split", default_value_t = 0.1, env = "OPCLASS_VALIDATION_SPLIT")]
    validation_split: f64,
    #[arg(long, default_value_t = 42, env = "OPCLASS_SEED")]
    seed: u64,
}

fn parse_target(name: &str) -> Result<Target, opclass::Error> {
    match name {
        "group" => Ok(Target::Group),
        "name" => Ok(Target::Name),
        "type" => Ok(Target::Type),
        other => Err(opclass::Error::InvalidInput(format!(
            "unknown target '{other}'; expected group, name, or type"
        ))),
    }
}

fn cmd_extract(args: ExtractArgs) -> Result<ExitCode, opclass::Error> {
    let config = ManagerConfig {
        extractor_command_template: args.extractor,
        threads: args.threads,
        skip_existing: args.skip,
        timeout_seconds: args.timeout,
        corpus_root: args.directory,
        output_root: args.output.clone(),
    };
    let report = run_extraction(&config)?;
    std::fs::create_dir_all(&args.output).map_err(|e| opclass::Error::io(&args.output, e))?;
    let report_path = args.output.join("extraction_report.json");
    write_report(&report, &report_path)?;
    eprintln!(
        "extracted {} of {} samples ({} skipped, {} failed, {} timed out) in {:.1}s",
        report.done,
        report.total(),
        report.skipped,
        report.failed,
        report.timed_out,
        report.wall_clock_seconds
    );
    eprintln!("report: {}", report_path.display());
    Ok(if report.all_clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<ExitCode, opclass::Error> {
    let (documents, warnings) = load_corpus(&args.opcodes, "opcode")?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    if documents.is_empty() {
        return Err(opclass::Error::InvalidInput(format!(
            "no .opcode files under {}",
            args.opcodes.display()
        )));
    }
    std::fs::create_dir_all(&args.output).map_err(|e| opclass::Error::io(&args.output, e))?;
    eprintln!("{} documents loaded", documents.len());
    for n in 1..=args.n.max(1) {
        for &percentile in &args.percentiles {
            let (dataset, paths) = preprocess_one(&documents, n, percentile, &args.output)?;
            eprintln!(
                "{}: {} rows x {} features",
                paths[0].display(),
                dataset.n_rows(),
                dataset.n_features()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_classify(args: ClassifyArgs) -> Result<ExitCode, opclass::Error> {
    let dataset = read_dataset(&args.dataset)?;
    eprintln!(
        "dataset: {} rows x {} features",
        dataset.n_rows(),
        dataset.n_features()
    );
    let options = SuiteOptions {
        holdout: args.holdout,
        seed: args.seed,
        ..SuiteOptions::default()
    };
    let results = run_suite(&dataset, &options);
    std::fs::create_dir_all(&args.output).map_err(|e| opclass::Error::io(&args.output, e))?;
    let results_path = args.output.join("results.json");
    serialize_results(&results, &results_path)?;
    render_charts(&results, &args.output.join("charts"))?;
    for result in &results {
        match &result.diagnostic {
            None => eprintln!(
                "{:32} accuracy {:.4}  f-measure {:.4}",
                result.combination(),
                result.accuracy,
                result.f_measure
            ),
            Some(diagnostic) => eprintln!("{:32} failed: {diagnostic}", result.combination()),
        }
    }
    eprintln!("results: {}", results_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_cnn_preprocess(args: CnnPreprocessArgs) -> Result<ExitCode, opclass::Error> {
    let output = args.output.unwrap_or_else(|| {
        let name = args
            .dataset
            .file_name()
            .map(|n| format!("{}_one_to_one", n.to_string_lossy()))
            .unwrap_or_else(|| "corpus_one_to_one".into());
        args.dataset.with_file_name(name)
    });
    let report = dedup_one_to_one(&args.dataset, &output)?;
    let report_path = output.join("dedup_report.json");
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(&report_path, json).map_err(|e| opclass::Error::io(&report_path, e))?;
    eprintln!(
        "removed {} duplicate software directories ({:.2}% of {} files); copy at {}",
        report.removed_directories.len(),
        report.reduction_percent,
        report.files_total,
        output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_cnn_train(args: CnnTrainArgs) -> Result<ExitCode, opclass::Error> {
    let (documents, _) = load_corpus(&args.directory, "opcode")?;
    if documents.is_empty() {
        return Err(opclass::Error::InvalidInput(format!(
            "no .opcode files under {}",
            args.directory.display()
        )));
    }
    let config = CnnConfig {
        embedding_dim: args.k,
        length_percentile: args.percentile,
        epochs: args.epochs,
        batch_size: args.batch_size,
        validation_split: args.validation_split,
        conv_filters: args.filters,
        conv_kernel: args.kernel,
        dense_units: args.dense_units,
        dropout_rate: args.dropout,
        learning_rate: args.learning_rate,
        seed: args.seed,
    };
    let targets = match &args.target {
        Some(name) => vec![parse_target(name)?],
        None => vec![Target::Group, Target::Name, Target::Type],
    };

    std::fs::create_dir_all(&args.output).map_err(|e| opclass::Error::io(&args.output, e))?;
    let mut results = Vec::new();
    for target in targets {
        let dataset = build_sequence_dataset(&documents, target, config.length_percentile)?;
        eprintln!(
            "target {target}: {} sequences, vocab {}, max_len {}, {} classes",
            dataset.len(),
            dataset.vocab_size(),
            dataset.max_len,
            dataset.class_names.len()
        );
        let mut model = build_model(
            &config,
            dataset.vocab_size(),
            dataset.class_names.len(),
            dataset.max_len,
        )?;
        let history = train(&mut model, &dataset, &config)?;
        for warning in &history.warnings {
            eprintln!("warning: {warning}");
        }
        if let Some(last) = history.epochs.last() {
            eprintln!(
                "target {target}: final train_acc {:.4}, val_acc {:.4}",
                last.train_accuracy, last.val_accuracy
            );
        }
        write_history_csv(&history, &args.output.join(format!("history_{target}.csv")))?;
        save_model(&model, &args.output.join(format!("model_{target}.bin")))?;
        results.push(evaluate_cnn(&model, &dataset, target)?);
    }
    let results_path = args.output.join("results.json");
    serialize_results(&results, &results_path)?;
    eprintln!("results: {}", results_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode, opclass::Error> {
    let results = load_results_file(&args.results)?;
    let written = render_charts(&results, &args.output)?;
    eprintln!(
        "{} chart files for {} results under {}",
        written.len(),
        results.len(),
        args.output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_run_all(args: RunAllArgs) -> Result<ExitCode, opclass::Error> {
    let config = PipelineConfig {
        corpus_root: args.directory,
        results_root: args.results,
        extractor_command_template: args.extractor,
        threads: args.threads,
        skip_existing: args.skip,
        timeout_seconds: args.timeout,
        ngram_max: args.n,
        percentile: args.variance_percentile,
        holdout: args.holdout,
        cnn: CnnConfig {
            embedding_dim: args.k,
            length_percentile: args.sequence_percentile,
            epochs: args.epochs,
            batch_size: args.batch_size,
            validation_split: args.validation_split,
            seed: args.seed,
            ..CnnConfig::default()
        },
        seed: args.seed,
    };
    let run = run_all(&config)?;
    for stage in &run.stages {
        eprintln!("stage {:14} {:8.2}s  {}", stage.name, stage.seconds, stage.detail);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let usage_error = !matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if usage_error {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Commands::Extract(args) => cmd_extract(args),
        Commands::Preprocess(args) => cmd_preprocess(args),
        Commands::Classify(args) => cmd_classify(args),
        Commands::CnnPreprocess(args) => cmd_cnn_preprocess(args),
        Commands::CnnTrain(args) => cmd_cnn_train(args),
        Commands::Report(args) => cmd_report(args),
        Commands::RunAll(args) => cmd_run_all(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
