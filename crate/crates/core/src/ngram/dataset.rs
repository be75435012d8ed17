//! Feature dataset container and its CSV / binary cache serializations.
//!
//! CSV layout: `group,name,type,file_name` label columns followed by one
//! column per gram; frequencies printed with 12 fractional digits so the
//! text form is deterministic and round trips within 1e-10. The binary
//! cache stores the same content bit-exactly (f64, little-endian) behind
//! a magic/version header and loads much faster than the CSV.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Names of the four leading label columns, in on-disk order.
pub const LABEL_COLUMNS: [&str; 4] = ["group", "name", "type", "file_name"];

const BINARY_MAGIC: &[u8; 4] = b"OPDS";
const BINARY_VERSION: u32 = 1;

/// Metadata labels attached to one dataset row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleLabels {
    pub group: String,
    pub name: String,
    pub malware_type: String,
    pub file_name: String,
}

impl SampleLabels {
    pub fn get(&self, column: &str) -> Option<&str> {
        match column {
            "group" => Some(&self.group),
            "name" => Some(&self.name),
            "type" => Some(&self.malware_type),
            "file_name" => Some(&self.file_name),
            _ => None,
        }
    }
}

/// One sample: label values plus its normalized frequency vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub labels: SampleLabels,
    pub features: Vec<f64>,
}

/// Row-per-sample matrix of normalized n-gram frequencies with metadata
/// label columns and an ordered feature header.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<DatasetRow>,
}

impl FeatureDataset {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// On-disk representation of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Binary,
}

impl DatasetFormat {
    /// Infer the format from a file extension: `.csv` is CSV, anything
    /// else is treated as the binary cache.
    pub fn from_path(path: &Path) -> DatasetFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Binary,
        }
    }
}

/// Write a dataset in the requested format.
pub fn write_dataset(dataset: &FeatureDataset, path: &Path, format: DatasetFormat) -> Result<()> {
    match format {
        DatasetFormat::Csv => write_csv(dataset, path),
        DatasetFormat::Binary => write_binary(dataset, path),
    }
}

/// Read a dataset, inferring the format from the extension.
pub fn read_dataset(path: &Path) -> Result<FeatureDataset> {
    match DatasetFormat::from_path(path) {
        DatasetFormat::Csv => read_csv(path),
        DatasetFormat::Binary => read_binary(path),
    }
}

fn write_csv(dataset: &FeatureDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let io_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));

    let mut header: Vec<&str> = LABEL_COLUMNS.to_vec();
    header.extend(dataset.feature_names.iter().map(String::as_str));
    writer.write_record(&header).map_err(io_err)?;

    let mut record = Vec::with_capacity(header.len());
    for row in &dataset.rows {
        record.clear();
        record.push(row.labels.group.clone());
        record.push(row.labels.name.clone());
        record.push(row.labels.malware_type.clone());
        record.push(row.labels.file_name.clone());
        for value in &row.features {
            record.push(format!("{value:.12}"));
        }
        writer.write_record(&record).map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_csv(path: &Path) -> Result<FeatureDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(BufReader::new(file));

    let format_err = |row: usize, column: usize, message: String| Error::DatasetFormat {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };

    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(record)) => record,
        Some(Err(e)) => return Err(format_err(1, 1, e.to_string())),
        None => return Err(format_err(1, 1, "empty dataset file".into())),
    };
    if header.len() < LABEL_COLUMNS.len() {
        return Err(format_err(1, header.len(), "missing label columns".into()));
    }
    for (i, expected) in LABEL_COLUMNS.iter().enumerate() {
        if &header[i] != *expected {
            return Err(format_err(
                1,
                i + 1,
                format!("expected label column '{expected}', found '{}'", &header[i]),
            ));
        }
    }
    let feature_names: Vec<String> = header
        .iter()
        .skip(LABEL_COLUMNS.len())
        .map(str::to_string)
        .collect();

    let mut rows = Vec::new();
    for (idx, record) in records.enumerate() {
        let row_no = idx + 2;
        let record = record.map_err(|e| format_err(row_no, 1, e.to_string()))?;
        if record.len() != LABEL_COLUMNS.len() + feature_names.len() {
            return Err(format_err(
                row_no,
                record.len(),
                format!(
                    "expected {} fields, found {}",
                    LABEL_COLUMNS.len() + feature_names.len(),
                    record.len()
                ),
            ));
        }
        let mut features = Vec::with_capacity(feature_names.len());
        for (i, field) in record.iter().skip(LABEL_COLUMNS.len()).enumerate() {
            let value: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    format_err(
                        row_no,
                        LABEL_COLUMNS.len() + i + 1,
                        format!("not a finite number: '{field}'"),
                    )
                })?;
            features.push(value);
        }
        rows.push(DatasetRow {
            labels: SampleLabels {
                group: record[0].to_string(),
                name: record[1].to_string(),
                malware_type: record[2].to_string(),
                file_name: record[3].to_string(),
            },
            features,
        });
    }

    Ok(FeatureDataset {
        feature_names,
        rows,
    })
}

fn write_string(out: &mut impl Write, s: &str) -> std::io::Result<()> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())
}

fn write_binary(dataset: &FeatureDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut run = || -> std::io::Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&BINARY_VERSION.to_le_bytes())?;
        out.write_all(&(dataset.rows.len() as u64).to_le_bytes())?;
        out.write_all(&(dataset.feature_names.len() as u64).to_le_bytes())?;
        for name in &dataset.feature_names {
            write_string(&mut out, name)?;
        }
        for row in &dataset.rows {
            write_string(&mut out, &row.labels.group)?;
            write_string(&mut out, &row.labels.name)?;
            write_string(&mut out, &row.labels.malware_type)?;
            write_string(&mut out, &row.labels.file_name)?;
            let mut bytes = Vec::with_capacity(row.features.len() * 8);
            for value in &row.features {
                bytes.extend_from_slice(&value.to_le_bytes());
            }
            out.write_all(&bytes)?;
        }
        out.flush()
    };
    run().map_err(|e| Error::io(path, e))
}

struct BinaryReader<'a> {
    bytes: &'a [u8],
    path: &'a Path,
    offset: usize,
}

impl<'a> BinaryReader<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::DatasetFormat {
            path: self.path.to_path_buf(),
            row: 0,
            column: self.offset,
            message: message.into(),
        }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .offset
            .checked_add(len)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| self.fail("truncated binary dataset"))?;
        let slice = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        std::str::from_utf8(bytes)
            .map(str::to_string)
            .map_err(|_| self.fail("string is not valid UTF-8"))
    }
}

fn read_binary(path: &Path) -> Result<FeatureDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BinaryReader {
        bytes: &bytes,
        path,
        offset: 0,
    };

    if reader.take(4)? != BINARY_MAGIC {
        return Err(reader.fail("bad magic bytes; not a binary dataset cache"));
    }
    let version = reader.u32()?;
    if version != BINARY_VERSION {
        return Err(reader.fail(format!("unsupported version {version}")));
    }
    let n_rows = reader.u64()? as usize;
    let n_features = reader.u64()? as usize;

    let mut feature_names = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        feature_names.push(reader.string()?);
    }

    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let labels = SampleLabels {
            group: reader.string()?,
            name: reader.string()?,
            malware_type: reader.string()?,
            file_name: reader.string()?,
        };
        let float_bytes = reader.take(n_features * 8)?;
        let features = float_bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        rows.push(DatasetRow { labels, features });
    }

    Ok(FeatureDataset {
        feature_names,
        rows,
    })
}
