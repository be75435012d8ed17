//! Parallel opcode extraction manager.
//!
//! Every input executable is handed to an external extractor command (a
//! template with `{input}` and `{output}` placeholders) inside its own
//! scratch directory. A fixed-size worker pool bounds concurrency, jobs
//! that outlive the timeout have their whole process group killed, and
//! the run ends with an exact per-state report.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extraction settings. `extractor_command_template` must mention both
/// `{input}` and `{output}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManagerConfig {
    pub extractor_command_template: String,
    pub threads: usize,
    pub skip_existing: bool,
    pub timeout_seconds: u64,
    pub corpus_root: PathBuf,
    pub output_root: PathBuf,
}

impl ManagerConfig {
    pub fn new(template: impl Into<String>, corpus_root: impl Into<PathBuf>, output_root: impl Into<PathBuf>) -> Self {
        ManagerConfig {
            extractor_command_template: template.into(),
            threads: 4,
            skip_existing: false,
            timeout_seconds: 1200,
            corpus_root: corpus_root.into(),
            output_root: output_root.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads < 1 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.timeout_seconds < 1 {
            return Err(Error::Config("timeout must be at least 1 second".into()));
        }
        for placeholder in ["{input}", "{output}"] {
            if !self.extractor_command_template.contains(placeholder) {
                return Err(Error::Config(format!(
                    "extractor template must contain {placeholder}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Running,
    Done,
    Skipped,
    TimedOut,
    Failed,
}

/// One input file's extraction lifecycle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionJob {
    pub input_path: PathBuf,
    pub output_path: PathBuf,
    pub state: JobState,
    pub duration_seconds: f64,
    pub diagnostic: String,
}

/// Aggregated outcome of a run. State counts always sum to the job count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub jobs: Vec<ExtractionJob>,
    pub done: usize,
    pub skipped: usize,
    pub timed_out: usize,
    pub failed: usize,
    pub wall_clock_seconds: f64,
}

impl ExtractionReport {
    pub fn total(&self) -> usize {
        self.jobs.len()
    }

    pub fn all_clean(&self) -> bool {
        self.timed_out == 0 && self.failed == 0
    }

    fn tally(jobs: Vec<ExtractionJob>, wall_clock_seconds: f64) -> ExtractionReport {
        let count = |state: JobState| jobs.iter().filter(|j| j.state == state).count();
        ExtractionReport {
            done: count(JobState::Done),
            skipped: count(JobState::Skipped),
            timed_out: count(JobState::TimedOut),
            failed: count(JobState::Failed),
            jobs,
            wall_clock_seconds,
        }
    }
}

/// Mirror an input path under the output root, appending `.opcode`.
/// The input must live strictly below the corpus root.
pub fn mirror_output_path(input: &Path, corpus_root: &Path, output_root: &Path) -> Result<PathBuf> {
    let relative = input
        .strip_prefix(corpus_root)
        .map_err(|_| Error::InvalidInput(format!(
            "{} is not under corpus root {}",
            input.display(),
            corpus_root.display()
        )))?;
    if relative.as_os_str().is_empty() {
        return Err(Error::InvalidInput(
            "input path equals the corpus root".into(),
        ));
    }
    let mut output = output_root.join(relative);
    let file_name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Error::InvalidInput(format!("{} has no file name", input.display())))?;
    output.set_file_name(format!("{file_name}.opcode"));
    Ok(output)
}

/// Discover every input file and plan one job each. Regular files whose
/// names already end in `.opcode` are not extraction inputs. With
/// `skip_existing`, jobs whose output file already exists are pre-marked
/// skipped.
pub fn plan_jobs(config: &ManagerConfig) -> Result<Vec<ExtractionJob>> {
    config.validate()?;
    fs::metadata(&config.corpus_root).map_err(|e| Error::io(&config.corpus_root, e))?;

    let mut inputs = Vec::new();
    for entry in walkdir::WalkDir::new(&config.corpus_root) {
        let entry = entry.map_err(|e| {
            Error::io(
                &config.corpus_root,
                e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")),
            )
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        if entry.file_name().to_string_lossy().ends_with(".opcode") {
            continue;
        }
        inputs.push(entry.path().to_path_buf());
    }
    inputs.sort();

    inputs
        .into_iter()
        .map(|input| {
            let output = mirror_output_path(&input, &config.corpus_root, &config.output_root)?;
            let state = if config.skip_existing && output.exists() {
                JobState::Skipped
            } else {
                JobState::Pending
            };
            Ok(ExtractionJob {
                input_path: input,
                output_path: output,
                state,
                duration_seconds: 0.0,
                diagnostic: String::new(),
            })
        })
        .collect()
}

/// Split a command template into tokens, honoring single and double
/// quotes so extractor paths may contain spaces.
pub fn split_template(template: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut saw_any = false;
    for ch in template.chars() {
        match quote {
            Some(q) if ch == q => quote = None,
            Some(_) => current.push(ch),
            None if ch == '\'' || ch == '"' => {
                quote = Some(ch);
                saw_any = true;
            }
            None if ch.is_whitespace() => {
                if saw_any {
                    tokens.push(std::mem::take(&mut current));
                    saw_any = false;
                }
            }
            None => {
                current.push(ch);
                saw_any = true;
            }
        }
    }
    if saw_any {
        tokens.push(current);
    }
    tokens
}

fn resolve_program(template: &str) -> Result<Vec<String>> {
    let mut tokens = split_template(template);
    let program = tokens
        .first()
        .ok_or_else(|| Error::Extractor("extractor command is empty".into()))?;
    if program.contains(std::path::MAIN_SEPARATOR) {
        // Jobs run inside per-job scratch directories, so a path given
        // relative to the invoking directory must be pinned down now.
        let absolute = std::path::absolute(Path::new(program))
            .map_err(|e| Error::Extractor(format!("cannot resolve '{program}': {e}")))?;
        if !absolute.is_file() {
            return Err(Error::Extractor(format!(
                "extractor command '{program}' not found"
            )));
        }
        tokens[0] = absolute.to_string_lossy().into_owned();
    } else {
        let found = std::env::var_os("PATH")
            .map(|paths| std::env::split_paths(&paths).any(|dir| dir.join(program).is_file()))
            .unwrap_or(false);
        if !found {
            return Err(Error::Extractor(format!(
                "extractor command '{program}' not found"
            )));
        }
    }
    Ok(tokens)
}

#[cfg(unix)]
fn kill_process_group(child: &mut std::process::Child) {
    // The child was spawned as its own process group leader, so a signal
    // to the group takes stuck grandchildren down with it.
    unsafe {
        libc::killpg(child.id() as i32, libc::SIGKILL);
    }
    let _ = child.wait();
}

#[cfg(not(unix))]
fn kill_process_group(child: &mut std::process::Child) {
    let _ = child.kill();
    let _ = child.wait();
}

fn spawn_extractor(argv: &[String], work_dir: &Path) -> std::io::Result<std::process::Child> {
    let mut command = Command::new(&argv[0]);
    command
        .args(&argv[1..])
        .current_dir(work_dir)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        command.process_group(0);
    }
    command.spawn()
}

fn read_stderr(child: &mut std::process::Child) -> String {
    use std::io::Read;
    let mut text = String::new();
    if let Some(mut stderr) = child.stderr.take() {
        let _ = stderr.read_to_string(&mut text);
    }
    if text.len() > 4096 {
        let cut = text
            .char_indices()
            .map(|(i, _)| i)
            .take_while(|&i| i <= 4096)
            .last()
            .unwrap_or(0);
        text.truncate(cut);
    }
    text.trim().to_string()
}

fn run_one(job: &mut ExtractionJob, argv: &[String], timeout: Duration) {
    let started = Instant::now();
    job.state = JobState::Running;

    let finish = |job: &mut ExtractionJob, started: Instant, state: JobState, diagnostic: String| {
        job.state = state;
        job.duration_seconds = started.elapsed().as_secs_f64();
        job.diagnostic = diagnostic;
    };

    if let Some(parent) = job.output_path.parent() {
        if let Err(e) = fs::create_dir_all(parent) {
            finish(job, started, JobState::Failed, format!("cannot create output directory: {e}"));
            return;
        }
    }
    // Isolated scratch directory per job; dropped (deleted) on every exit
    // path from this function.
    let work_dir = match tempfile::TempDir::with_prefix("extract-job-") {
        Ok(dir) => dir,
        Err(e) => {
            finish(job, started, JobState::Failed, format!("cannot create work directory: {e}"));
            return;
        }
    };

    // The child runs inside the scratch directory, so placeholder paths
    // must be absolute.
    let absolute = |path: &Path| {
        std::path::absolute(path)
            .unwrap_or_else(|_| path.to_path_buf())
            .to_string_lossy()
            .into_owned()
    };
    let argv: Vec<String> = argv
        .iter()
        .map(|token| {
            token
                .replace("{input}", &absolute(&job.input_path))
                .replace("{output}", &absolute(&job.output_path))
        })
        .collect();

    let mut child = match spawn_extractor(&argv, work_dir.path()) {
        Ok(child) => child,
        Err(e) => {
            finish(job, started, JobState::Failed, format!("spawn failed: {e}"));
            return;
        }
    };

    let deadline = started + timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) => {
                if Instant::now() >= deadline {
                    break None;
                }
                std::thread::sleep(Duration::from_millis(20));
            }
            Err(e) => {
                kill_process_group(&mut child);
                finish(job, started, JobState::Failed, format!("wait failed: {e}"));
                return;
            }
        }
    };

    match status {
        None => {
            kill_process_group(&mut child);
            finish(
                job,
                started,
                JobState::TimedOut,
                format!("exceeded timeout of {}s", timeout.as_secs()),
            );
        }
        Some(status) if status.success() => {
            let produced = fs::metadata(&job.output_path)
                .map(|m| m.len() > 0)
                .unwrap_or(false);
            if produced {
                finish(job, started, JobState::Done, String::new());
            } else {
                finish(job, started, JobState::Failed, "empty output".into());
            }
        }
        Some(status) => {
            let stderr = read_stderr(&mut child);
            let code = status
                .code()
                .map(|c| c.to_string())
                .unwrap_or_else(|| "signal".into());
            finish(job, started, JobState::Failed, format!("exit {code}: {stderr}"));
        }
    }
}

/// Run all pending jobs on a pool of `config.threads` workers. Skipped
/// jobs never spawn a process. Fails up front when the extractor command
/// cannot be resolved.
pub fn run_jobs(mut jobs: Vec<ExtractionJob>, config: &ManagerConfig) -> Result<ExtractionReport> {
    config.validate()?;
    let argv = resolve_program(&config.extractor_command_template)?;
    let timeout = Duration::from_secs(config.timeout_seconds);
    let started = Instant::now();

    let pending: VecDeque<usize> = jobs
        .iter()
        .enumerate()
        .filter(|(_, job)| job.state == JobState::Pending)
        .map(|(i, _)| i)
        .collect();
    let queue = Arc::new(Mutex::new(pending));
    let slots: Vec<Mutex<Option<ExtractionJob>>> = jobs
        .iter()
        .map(|job| Mutex::new(Some(job.clone())))
        .collect();
    let slots = Arc::new(slots);

    std::thread::scope(|scope| {
        for _ in 0..config.threads {
            let queue = Arc::clone(&queue);
            let slots = Arc::clone(&slots);
            let argv = argv.clone();
            scope.spawn(move || loop {
                let index = match queue.lock().expect("queue lock").pop_front() {
                    Some(index) => index,
                    None => break,
                };
                let mut guard = slots[index].lock().expect("job slot lock");
                let job = guard.as_mut().expect("job present");
                run_one(job, &argv, timeout);
            });
        }
    });

    for (index, slot) in slots.iter().enumerate() {
        jobs[index] = slot.lock().expect("job slot lock").take().expect("job present");
    }

    Ok(ExtractionReport::tally(jobs, started.elapsed().as_secs_f64()))
}

/// Plan and run in one call.
pub fn run_extraction(config: &ManagerConfig) -> Result<ExtractionReport> {
    let jobs = plan_jobs(config)?;
    run_jobs(jobs, config)
}

/// Write the report as pretty JSON.
pub fn write_report(report: &ExtractionReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}
