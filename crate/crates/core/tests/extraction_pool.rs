//! Extraction manager behavior with sleep- and fail-mode mock extractors:
//! pool width, timeout kills, skip idempotence, and report bookkeeping.

#![cfg(unix)]

use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use opclass::corpus::parse_opcode_text;
use opclass::extract::{plan_jobs, run_jobs, ExtractionReport, ManagerConfig};

/// Write an executable shell script and return its path.
fn write_script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    let mut perms = fs::metadata(&path).unwrap().permissions();
    perms.set_mode(0o755);
    fs::set_permissions(&path, perms).unwrap();
    path
}

fn corpus_with_inputs(root: &Path, count: usize) {
    fs::create_dir_all(root).unwrap();
    for i in 0..count {
        fs::write(root.join(format!("sample_{i:02}.exe")), "binary").unwrap();
    }
}

fn run(config: &ManagerConfig) -> ExtractionReport {
    let jobs = plan_jobs(config).unwrap();
    run_jobs(jobs, config).unwrap()
}

#[test]
fn pool_of_five_runs_twenty_one_second_jobs_in_about_four_seconds() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(
        dir.path(),
        "extract.sh",
        "sleep 1\nprintf 'mov\\npush\\nret\\n' > \"$2\"",
    );
    let corpus = dir.path().join("corpus");
    corpus_with_inputs(&corpus, 20);

    let mut config = ManagerConfig::new(
        format!("{} {{input}} {{output}}", script.display()),
        &corpus,
        dir.path().join("out"),
    );
    config.threads = 5;
    config.timeout_seconds = 30;

    let report = run(&config);
    assert_eq!(report.done, 20);
    assert!(report.all_clean());
    assert!(
        (3.0..=5.5).contains(&report.wall_clock_seconds),
        "wall clock {}s",
        report.wall_clock_seconds
    );
}

#[test]
fn concurrency_never_exceeds_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let marks = dir.path().join("marks");
    fs::create_dir_all(&marks).unwrap();
    // Each invocation logs entry and exit timestamps to its own file.
    let script = write_script(
        dir.path(),
        "extract.sh",
        &format!(
            "log=\"{}/$(basename \"$1\")\"\ndate +%s%N > \"$log.start\"\nsleep 0.3\ndate +%s%N > \"$log.end\"\nprintf 'nop\\n' > \"$2\"",
            marks.display()
        ),
    );
    let corpus = dir.path().join("corpus");
    corpus_with_inputs(&corpus, 12);

    let mut config = ManagerConfig::new(
        format!("{} {{input}} {{output}}", script.display()),
        &corpus,
        dir.path().join("out"),
    );
    config.threads = 3;
    config.timeout_seconds = 30;
    let report = run(&config);
    assert_eq!(report.done, 12);

    let mut events: Vec<(u128, i32)> = Vec::new();
    for entry in fs::read_dir(&marks).unwrap() {
        let path = entry.unwrap().path();
        let stamp: u128 = fs::read_to_string(&path).unwrap().trim().parse().unwrap();
        let delta = if path.extension().unwrap() == "start" { 1 } else { -1 };
        events.push((stamp, delta));
    }
    assert_eq!(events.len(), 24);
    // Sweep over start/end events; ends sort before starts on ties.
    events.sort();
    let mut live = 0;
    let mut peak = 0;
    for (_, delta) in events {
        live += delta;
        peak = peak.max(live);
    }
    assert!(peak <= 3, "observed {peak} concurrent extractors");
    assert!(peak >= 2, "pool never ran jobs concurrently");
}

#[test]
fn timeout_kills_the_process_and_its_children() {
    let dir = tempfile::tempdir().unwrap();
    let pid_file = dir.path().join("child.pid");
    // The extractor spawns a long-lived grandchild and then hangs.
    let script = write_script(
        dir.path(),
        "extract.sh",
        &format!("sleep 30 &\necho $! > \"{}\"\nsleep 30", pid_file.display()),
    );
    let corpus = dir.path().join("corpus");
    corpus_with_inputs(&corpus, 1);

    let mut config = ManagerConfig::new(
        format!("{} {{input}} {{output}}", script.display()),
        &corpus,
        dir.path().join("out"),
    );
    config.threads = 1;
    config.timeout_seconds = 1;

    let started = std::time::Instant::now();
    let report = run(&config);
    assert!(started.elapsed().as_secs_f64() < 10.0);
    assert_eq!(report.timed_out, 1);
    assert!(report.jobs[0].diagnostic.contains("timeout"));

    // The grandchild must have been killed along with the group. A dead
    // process either has no /proc entry or lingers as a zombie until the
    // reaper collects it; neither is a running process.
    let pid: i32 = fs::read_to_string(&pid_file).unwrap().trim().parse().unwrap();
    std::thread::sleep(std::time::Duration::from_millis(100));
    let state = process_state(pid);
    assert!(
        state.is_none() || state == Some('Z'),
        "grandchild {pid} survived the group kill (state {state:?})"
    );
}

/// Third field of /proc/<pid>/stat, or None when the process is gone.
fn process_state(pid: i32) -> Option<char> {
    let stat = fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
    // The comm field is parenthesized and may contain spaces; the state
    // letter follows the closing parenthesis.
    let after_comm = stat.rsplit(") ").next()?;
    after_comm.trim_start().chars().next()
}

#[test]
fn worker_slot_is_reused_after_a_timeout() {
    let dir = tempfile::tempdir().unwrap();
    // First input hangs, the rest are fast; one worker must finish all.
    let script = write_script(
        dir.path(),
        "extract.sh",
        "case \"$1\" in *hang*) sleep 30 ;; *) printf 'mov\\n' > \"$2\" ;; esac",
    );
    let corpus = dir.path().join("corpus");
    fs::create_dir_all(&corpus).unwrap();
    fs::write(corpus.join("a_hang.exe"), "x").unwrap();
    fs::write(corpus.join("b.exe"), "x").unwrap();
    fs::write(corpus.join("c.exe"), "x").unwrap();

    let mut config = ManagerConfig::new(
        format!("{} {{input}} {{output}}", script.display()),
        &corpus,
        dir.path().join("out"),
    );
    config.threads = 1;
    config.timeout_seconds = 1;

    let report = run(&config);
    assert_eq!(report.timed_out, 1);
    assert_eq!(report.done, 2);
}

#[test]
fn empty_output_counts_as_failure() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(dir.path(), "extract.sh", ": > \"$2\"\nexit 0");
    let corpus = dir.path().join("corpus");
    corpus_with_inputs(&corpus, 2);

    let config = ManagerConfig::new(
        format!("{} {{input}} {{output}}", script.display()),
        &corpus,
        dir.path().join("out"),
    );
    let report = run(&config);
    assert_eq!(report.failed, 2);
    assert!(report.jobs.iter().all(|j| j.diagnostic == "empty output"));
}

#[test]
fn nonzero_exit_captures_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(
        dir.path(),
        "extract.sh",
        "echo 'not a PE file' >&2\nexit 3",
    );
    let corpus = dir.path().join("corpus");
    corpus_with_inputs(&corpus, 1);

    let config = ManagerConfig::new(
        format!("{} {{input}} {{output}}", script.display()),
        &corpus,
        dir.path().join("out"),
    );
    let report = run(&config);
    assert_eq!(report.failed, 1);
    let diagnostic = &report.jobs[0].diagnostic;
    assert!(diagnostic.contains("exit 3"), "{diagnostic}");
    assert!(diagnostic.contains("not a PE file"), "{diagnostic}");
}

#[test]
fn second_run_with_skip_spawns_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let invocations = dir.path().join("invocations");
    fs::create_dir_all(&invocations).unwrap();
    let script = write_script(
        dir.path(),
        "extract.sh",
        &format!(
            "touch \"{}/$(basename \"$1\").$$\"\nprintf 'mov\\nret\\n' > \"$2\"",
            invocations.display()
        ),
    );
    let corpus = dir.path().join("corpus");
    corpus_with_inputs(&corpus, 6);

    let mut config = ManagerConfig::new(
        format!("{} {{input}} {{output}}", script.display()),
        &corpus,
        dir.path().join("out"),
    );
    config.skip_existing = true;
    config.threads = 2;

    let first = run(&config);
    assert_eq!(first.done, 6);
    let spawned_after_first = fs::read_dir(&invocations).unwrap().count();
    assert_eq!(spawned_after_first, 6);

    let second = run(&config);
    assert_eq!(second.skipped, 6);
    assert_eq!(second.done, 0);
    let spawned_after_second = fs::read_dir(&invocations).unwrap().count();
    assert_eq!(spawned_after_second, 6, "skip run must not spawn extractors");
}

#[test]
fn done_outputs_parse_as_opcode_files() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(
        dir.path(),
        "extract.sh",
        "printf 'mov\\npush\\n\\n ret \\n' > \"$2\"",
    );
    let corpus = dir.path().join("corpus");
    fs::create_dir_all(corpus.join("G1/Software A")).unwrap();
    fs::write(corpus.join("G1/Software A/a.exe"), "x").unwrap();

    let config = ManagerConfig::new(
        format!("{} {{input}} {{output}}", script.display()),
        &corpus,
        dir.path().join("out"),
    );
    let report = run(&config);
    assert_eq!(report.done, 1);
    let job = &report.jobs[0];
    assert!(job.output_path.ends_with("G1/Software A/a.exe.opcode"));
    let text = fs::read_to_string(&job.output_path).unwrap();
    assert_eq!(parse_opcode_text(&text), ["MOV", "PUSH", "RET"]);
    assert!(job.duration_seconds >= 0.0);
}

#[test]
fn report_counts_sum_to_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(
        dir.path(),
        "extract.sh",
        "case \"$1\" in *fail*) exit 1 ;; *hang*) sleep 30 ;; *) printf 'mov\\n' > \"$2\" ;; esac",
    );
    let corpus = dir.path().join("corpus");
    fs::create_dir_all(&corpus).unwrap();
    for name in ["ok1.exe", "ok2.exe", "fail1.exe", "hang1.exe"] {
        fs::write(corpus.join(name), "x").unwrap();
    }
    // One pre-existing output to exercise the skipped state too.
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("ok1.exe.opcode"), "mov\n").unwrap();

    let mut config = ManagerConfig::new(
        format!("{} {{input}} {{output}}", script.display()),
        &corpus,
        &out,
    );
    config.skip_existing = true;
    config.threads = 4;
    config.timeout_seconds = 1;

    let report = run(&config);
    assert_eq!(report.total(), 4);
    assert_eq!(
        report.done + report.skipped + report.timed_out + report.failed,
        report.total()
    );
    assert_eq!(report.done, 1);
    assert_eq!(report.skipped, 1);
    assert_eq!(report.failed, 1);
    assert_eq!(report.timed_out, 1);
}
