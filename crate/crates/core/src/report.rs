//! Chart data and minimal vector-image rendering for results.
//!
//! Every metric bar chart and confusion heatmap is emitted twice: as a
//! small CSV holding exactly the numbers, and as a plain rectangles-and-
//! text SVG whose labels carry the same numeric content.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classic::ClassifierResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Bar,
    Heatmap,
}

/// Numeric content of one chart. Bar charts have one row of cells; a
/// heatmap's cells form a full `row_labels x column_labels` rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartData {
    pub kind: ChartKind,
    pub title: String,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    pub cells: Vec<Vec<f64>>,
}

impl ChartData {
    fn validate(&self) -> Result<()> {
        let expected_rows = match self.kind {
            ChartKind::Bar => 1,
            ChartKind::Heatmap => self.row_labels.len(),
        };
        if self.cells.len() != expected_rows {
            return Err(Error::InvalidInput(format!(
                "chart '{}' has {} cell rows, expected {expected_rows}",
                self.title,
                self.cells.len()
            )));
        }
        for row in &self.cells {
            if row.len() != self.column_labels.len() {
                return Err(Error::InvalidInput(format!(
                    "chart '{}' has a ragged cell row",
                    self.title
                )));
            }
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "chart '{}' contains non-finite value {bad}",
                    self.title
                )));
            }
        }
        Ok(())
    }
}

fn slug(result: &ClassifierResult) -> String {
    format!("{}_{}_{}", result.classifier, result.mode, result.target)
}

fn format_value(value: f64) -> String {
    if value.fract() == 0.0 && value.abs() < 1e15 {
        format!("{value}")
    } else {
        format!("{value:.6}")
    }
}

/// Four metric bars taken verbatim from a result record.
pub fn bar_chart(result: &ClassifierResult) -> ChartData {
    ChartData {
        kind: ChartKind::Bar,
        title: result.combination(),
        row_labels: vec!["value".to_string()],
        column_labels: vec![
            "accuracy".into(),
            "recall".into(),
            "precision".into(),
            "f_measure".into(),
        ],
        cells: vec![vec![
            result.accuracy,
            result.macro_recall,
            result.macro_precision,
            result.f_measure,
        ]],
    }
}

/// The confusion matrix as heatmap cells, true classes on rows.
pub fn heatmap_chart(result: &ClassifierResult) -> ChartData {
    let labels = result.confusion_matrix.labels.clone();
    ChartData {
        kind: ChartKind::Heatmap,
        title: result.combination(),
        row_labels: labels.clone(),
        column_labels: labels,
        cells: result
            .confusion_matrix
            .counts
            .iter()
            .map(|row| row.iter().map(|&c| c as f64).collect())
            .collect(),
    }
}

/// CSV form: `metric,value` rows for bars, a labeled matrix for heatmaps.
pub fn chart_csv(chart: &ChartData) -> Result<String> {
    chart.validate()?;
    let mut out = String::new();
    match chart.kind {
        ChartKind::Bar => {
            out.push_str("metric,value\n");
            for (label, value) in chart.column_labels.iter().zip(&chart.cells[0]) {
                let _ = writeln!(out, "{label},{}", format_value(*value));
            }
        }
        ChartKind::Heatmap => {
            let _ = writeln!(out, "true\\predicted,{}", chart.column_labels.join(","));
            for (label, row) in chart.row_labels.iter().zip(&chart.cells) {
                let cells: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
                let _ = writeln!(out, "{label},{}", cells.join(","));
            }
        }
    }
    Ok(out)
}

fn svg_header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="10" y="18" font-family="monospace" font-size="14">{title}</text>"#
    );
}

/// Bars as plain rectangles with the exact value printed above each bar.
fn bar_svg(chart: &ChartData) -> String {
    let bar_width = 90.0;
    let gap = 30.0;
    let plot_height = 200.0;
    let width = 20.0 + chart.column_labels.len() as f64 * (bar_width + gap);
    let height = plot_height + 80.0;
    let max = chart.cells[0].iter().cloned().fold(1e-12_f64, f64::max);

    let mut out = String::new();
    svg_header(&mut out, width, height, &chart.title);
    for (i, (label, &value)) in chart.column_labels.iter().zip(&chart.cells[0]).enumerate() {
        let x = 20.0 + i as f64 * (bar_width + gap);
        let h = (value / max).max(0.0) * plot_height;
        let y = 30.0 + (plot_height - h);
        let _ = writeln!(
            out,
            r##"<rect x="{x:.1}" y="{y:.1}" width="{bar_width}" height="{h:.1}" fill="#4878a8"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" font-family="monospace" font-size="12">{}</text>"#,
            y - 4.0,
            format_value(value)
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" font-family="monospace" font-size="12">{label}</text>"#,
            30.0 + plot_height + 16.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heatmap as shaded cells with each count printed in place.
fn heatmap_svg(chart: &ChartData) -> String {
    let cell = 56.0;
    let left = 120.0;
    let top = 40.0;
    let width = left + chart.column_labels.len() as f64 * cell + 20.0;
    let height = top + chart.row_labels.len() as f64 * cell + 40.0;
    let max = chart
        .cells
        .iter()
        .flatten()
        .cloned()
        .fold(1e-12_f64, f64::max);

    let mut out = String::new();
    svg_header(&mut out, width, height, &chart.title);
    for (j, label) in chart.column_labels.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11">{label}</text>"#,
            left + j as f64 * cell + 4.0,
            top - 6.0
        );
    }
    for (i, (label, row)) in chart.row_labels.iter().zip(&chart.cells).enumerate() {
        let y = top + i as f64 * cell;
        let _ = writeln!(
            out,
            r#"<text x="8" y="{:.1}" font-family="monospace" font-size="11">{label}</text>"#,
            y + cell / 2.0
        );
        for (j, &value) in row.iter().enumerate() {
            let x = left + j as f64 * cell;
            let intensity = (value / max).clamp(0.0, 1.0);
            let shade = (255.0 - intensity * 160.0) as u8;
            let _ = writeln!(
                out,
                r##"<rect x="{x:.1}" y="{y:.1}" width="{cell}" height="{cell}" fill="#{shade:02x}{shade:02x}ff" stroke="#888"/>"##
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11">{}</text>"#,
                x + 4.0,
                y + cell / 2.0 + 4.0,
                format_value(value)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// The SVG body for any chart; its printed numbers equal the CSV's.
pub fn chart_svg(chart: &ChartData) -> Result<String> {
    chart.validate()?;
    Ok(match chart.kind {
        ChartKind::Bar => bar_svg(chart),
        ChartKind::Heatmap => heatmap_svg(chart),
    })
}

/// Emit one bar chart and one heatmap (CSV plus SVG) per result.
/// Returns the written file paths.
pub fn render_charts(results: &[ClassifierResult], output_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let mut written = Vec::new();
    let mut write = |path: PathBuf, text: String| -> Result<()> {
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    for result in results {
        let slug = slug(result);
        let bar = bar_chart(result);
        write(output_dir.join(format!("{slug}_metrics.csv")), chart_csv(&bar)?)?;
        write(output_dir.join(format!("{slug}_metrics.svg")), chart_svg(&bar)?)?;
        let heat = heatmap_chart(result);
        write(output_dir.join(format!("{slug}_confusion.csv")), chart_csv(&heat)?)?;
        write(output_dir.join(format!("{slug}_confusion.svg")), chart_svg(&heat)?)?;
    }
    Ok(written)
}

/// Load a results file, mapping malformed JSON to an error that names
/// the offending location.
pub fn load_results_file(path: &Path) -> Result<Vec<ClassifierResult>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::DatasetFormat {
        path: path.to_path_buf(),
        row: e.line(),
        column: e.column(),
        message: format!("malformed results file: {e}"),
    })
}
