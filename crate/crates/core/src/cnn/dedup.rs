//! One-to-one corpus deduplication.
//!
//! When the same software directory appears under several groups, every
//! copy except the one under the lexicographically smallest group is
//! dropped while copying the corpus to a new tree. The source tree is
//! never modified.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a dedup pass removed, relative to the source root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DedupReport {
    /// Software directories that were not copied.
    pub removed_directories: Vec<PathBuf>,
    pub files_total: usize,
    pub files_removed: usize,
    pub reduction_percent: f64,
}

fn list_dirs(path: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn count_files(path: &Path) -> usize {
    walkdir::WalkDir::new(path)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .count()
}

fn copy_tree(source: &Path, dest: &Path, skip: &[PathBuf]) -> Result<()> {
    for entry in walkdir::WalkDir::new(source) {
        let entry = entry.map_err(|e| {
            Error::io(source, e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")))
        })?;
        let path = entry.path();
        if skip.iter().any(|s| path.starts_with(s)) {
            continue;
        }
        let relative = path.strip_prefix(source).expect("under source");
        let target = dest.join(relative);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&target).map_err(|e| Error::io(&target, e))?;
        } else if entry.file_type().is_file() {
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::copy(path, &target).map_err(|e| Error::io(&target, e))?;
        }
    }
    Ok(())
}

/// Copy `source_root` to `dest_root`, keeping each software name under
/// exactly one group. `dest_root` must not already contain files.
pub fn dedup_one_to_one(source_root: &Path, dest_root: &Path) -> Result<DedupReport> {
    let meta = fs::metadata(source_root).map_err(|e| Error::io(source_root, e))?;
    if !meta.is_dir() {
        return Err(Error::InvalidInput(format!(
            "{} is not a directory",
            source_root.display()
        )));
    }
    if dest_root.exists() && count_files(dest_root) > 0 {
        return Err(Error::InvalidInput(format!(
            "destination {} already contains files",
            dest_root.display()
        )));
    }
    fs::create_dir_all(dest_root).map_err(|e| Error::io(dest_root, e))?;

    // software name -> sorted groups it appears under.
    let mut owners: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for group_dir in list_dirs(source_root)? {
        let group = group_dir.file_name().unwrap().to_string_lossy().into_owned();
        for software_dir in list_dirs(&group_dir)? {
            let software = software_dir.file_name().unwrap().to_string_lossy().into_owned();
            owners.entry(software).or_default().push(group.clone());
        }
    }

    let mut removed_directories = Vec::new();
    for (software, groups) in &owners {
        // list_dirs sorts, so the first group is the lexicographic keeper.
        for group in &groups[1..] {
            removed_directories.push(PathBuf::from(group).join(software));
        }
    }
    removed_directories.sort();

    let skip: Vec<PathBuf> = removed_directories
        .iter()
        .map(|r| source_root.join(r))
        .collect();
    copy_tree(source_root, dest_root, &skip)?;

    let files_total = count_files(source_root);
    let files_removed: usize = skip.iter().map(|p| count_files(p)).sum();
    let reduction_percent = if files_total == 0 {
        0.0
    } else {
        files_removed as f64 / files_total as f64 * 100.0
    };

    Ok(DedupReport {
        removed_directories,
        files_total,
        files_removed,
        reduction_percent,
    })
}
