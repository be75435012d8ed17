//! Corpus discovery and opcode file parsing.
//!
//! A corpus is a directory tree laid out as `root/<group>/<software>/<file>`,
//! where the software level is optional. Metadata (group, software name,
//! malware type) is derived entirely from the relative path of each file.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Label used whenever a metadata component is absent from the path.
pub const UNKNOWN_LABEL: &str = "unknown";

/// One discovered sample file plus its path-derived metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub absolute_path: PathBuf,
    pub relative_path: PathBuf,
    pub group: String,
    pub software_name: String,
    pub malware_type: String,
    pub file_name: String,
}

/// A parsed opcode file: the owning record plus its token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpcodeDocument {
    pub record: SampleRecord,
    pub tokens: Vec<String>,
}

/// Result of a corpus scan. Unreadable subdirectories do not abort the
/// scan; they are reported here as warnings.
#[derive(Debug, Clone, Default)]
pub struct CorpusScan {
    pub records: Vec<SampleRecord>,
    pub warnings: Vec<String>,
}

/// Recursively discover all files under `root` whose name ends with
/// `.<extension>`, in sorted relative-path order.
///
/// The extension is given without the leading dot (e.g. `"opcode"`).
pub fn scan_corpus(root: &Path, extension: &str) -> Result<CorpusScan> {
    let meta = fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::InvalidInput(format!(
            "{} is not a directory",
            root.display()
        )));
    }

    let suffix = format!(".{}", extension.trim_start_matches('.'));
    let mut scan = CorpusScan::default();
    for entry in walkdir::WalkDir::new(root) {
        let entry = match entry {
            Ok(entry) => entry,
            Err(err) => {
                scan.warnings.push(format!("skipping unreadable entry: {err}"));
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy();
        if !name.ends_with(&suffix) {
            continue;
        }
        let relative = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields paths under root")
            .to_path_buf();
        scan.records.push(make_record(entry.path(), &relative));
    }
    scan.records.sort_by(|a, b| a.relative_path.cmp(&b.relative_path));
    Ok(scan)
}

fn make_record(absolute: &Path, relative: &Path) -> SampleRecord {
    let (group, software_name, malware_type) = extract_metadata(relative);
    let file_name = relative
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| UNKNOWN_LABEL.to_string());
    SampleRecord {
        absolute_path: absolute.to_path_buf(),
        relative_path: relative.to_path_buf(),
        group,
        software_name,
        malware_type,
        file_name,
    }
}

/// Derive `(group, software_name, malware_type)` from a relative path.
///
/// The first directory component is the group, the second (when present)
/// is the software name. The malware type is the lowercased extension of
/// the original executable name, i.e. the name with any trailing
/// `.opcode` suffix removed (`x.exe.opcode` → `exe`). Missing components
/// become [`UNKNOWN_LABEL`]. Total function: never fails, never returns
/// an empty string.
pub fn extract_metadata(relative_path: &Path) -> (String, String, String) {
    let components: Vec<String> = relative_path
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();

    let dir_count = components.len().saturating_sub(1);
    let group = if dir_count >= 1 {
        components[0].clone()
    } else {
        UNKNOWN_LABEL.to_string()
    };
    let software_name = if dir_count >= 2 {
        components[1].clone()
    } else {
        UNKNOWN_LABEL.to_string()
    };

    let file_name = components.last().cloned().unwrap_or_default();
    let original = file_name.strip_suffix(".opcode").unwrap_or(&file_name);
    let malware_type = match original.rsplit_once('.') {
        Some((stem, ext)) if !stem.is_empty() && !ext.is_empty() => ext.to_lowercase(),
        _ => UNKNOWN_LABEL.to_string(),
    };

    (group, software_name, malware_type)
}

/// Tokenize opcode file text: one token per nonempty trimmed line,
/// uppercased. Runs of internal whitespace are replaced with `_` so
/// tokens never contain spaces.
pub fn parse_opcode_text(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .map(normalize_token)
        .collect()
}

fn normalize_token(line: &str) -> String {
    let mut token = String::with_capacity(line.len());
    let mut in_gap = false;
    for ch in line.chars() {
        if ch.is_whitespace() {
            in_gap = true;
        } else {
            if in_gap {
                token.push('_');
                in_gap = false;
            }
            for upper in ch.to_uppercase() {
                token.push(upper);
            }
        }
    }
    token
}

/// Render a token list back to file text, one token per line.
pub fn render_opcode_text(tokens: &[String]) -> String {
    let mut out = String::new();
    for token in tokens {
        out.push_str(token);
        out.push('\n');
    }
    out
}

/// Read and parse one sample's opcode file.
///
/// Fails with [`Error::InvalidUtf8`] naming the file when the content is
/// not valid UTF-8.
pub fn load_document(record: &SampleRecord) -> Result<OpcodeDocument> {
    let bytes = fs::read(&record.absolute_path).map_err(|e| Error::io(&record.absolute_path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::InvalidUtf8 {
        path: record.absolute_path.clone(),
    })?;
    Ok(OpcodeDocument {
        record: record.clone(),
        tokens: parse_opcode_text(text),
    })
}

/// Scan a corpus and parse every discovered opcode file.
pub fn load_corpus(root: &Path, extension: &str) -> Result<(Vec<OpcodeDocument>, Vec<String>)> {
    let scan = scan_corpus(root, extension)?;
    let docs = scan
        .records
        .iter()
        .map(load_document)
        .collect::<Result<Vec<_>>>()?;
    Ok((docs, scan.warnings))
}
