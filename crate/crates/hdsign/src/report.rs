//! On-disk forms of simulation runs: JSON as the archival format, CSV as
//! the per-cell analysis export, and whitespace tables as plot data.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::std_normal_density;
use crate::error::{Error, Result};
use crate::harness::{CellSummary, SimulationReport};

/// Serialization formats a report can be written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// Full report document; reads back as an equal report.
    Json,
    /// One summary row per cell; header first, no document structure.
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::config(format!("unknown format {other:?}; expected json or csv"))),
        }
    }
}

/// Receipt for a written file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    /// Format the file was written in.
    pub format: ReportFormat,
    /// Where it was written.
    pub path: String,
    /// Schema version of the content.
    pub schema_version: u32,
}

/// Shortest decimal form that parses back to exactly the same value within
/// 17 significant digits.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

const CSV_HEADER: &str =
    "family,n,p,q,H,M,mean,variance,skewness,ks,reject_rate_universal,reject_rate_fixed";

fn csv_row(cell: &CellSummary) -> String {
    let q = cell.q.map(|v| v.to_string()).unwrap_or_default();
    let h = cell.h_max.map(|v| v.to_string()).unwrap_or_default();
    let ks = cell.ks_normal.map(|k| real(k.d)).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        cell.family,
        cell.n,
        cell.p,
        q,
        h,
        cell.replicates,
        real(cell.mean),
        real(cell.variance),
        real(cell.skewness),
        ks,
        real(cell.rejection_rate_universal),
        real(cell.rejection_rate_fixed),
    )
}

/// The CSV rendering of a report: a fixed header plus one row per cell.
pub fn to_csv(report: &SimulationReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for cell in &report.cells {
        out.push_str(&csv_row(cell));
        out.push('\n');
    }
    out
}

/// The JSON rendering of a report, exactly as written to disk.
pub fn to_json(report: &SimulationReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// The JSON rendering with the wall time zeroed.
///
/// Two runs of the same configuration agree on every byte of this form;
/// the measured wall time is the only field that varies.
pub fn canonical_json(report: &SimulationReport) -> Result<String> {
    let mut canon = report.clone();
    canon.provenance.wall_time_seconds = 0.0;
    to_json(&canon)
}

/// Writes a report to `path` in the requested format.
///
/// # Errors
///
/// I/O failures carry the path; serialization cannot fail for values the
/// harness produces.
pub fn write_report(
    report: &SimulationReport,
    format: ReportFormat,
    path: &Path,
) -> Result<ReportFile> {
    let content = match format {
        ReportFormat::Json => to_json(report)?,
        ReportFormat::Csv => to_csv(report),
    };
    std::fs::write(path, content).map_err(|e| Error::io(path, e))?;
    Ok(ReportFile {
        format,
        path: path.display().to_string(),
        schema_version: report.schema_version,
    })
}

/// Reads a JSON report back.
///
/// Fields this version does not know are ignored, so reports written by
/// later versions stay readable as long as the schema version is familiar.
///
/// # Errors
///
/// I/O failures carry the path; malformed documents report the parse
/// error; a schema version from the future is refused.
pub fn read_report(path: &Path) -> Result<SimulationReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: SimulationReport = serde_json::from_str(&text)?;
    if report.schema_version > crate::harness::SCHEMA_VERSION {
        return Err(Error::config(format!(
            "report has schema version {}, newer than the supported {}",
            report.schema_version,
            crate::harness::SCHEMA_VERSION
        )));
    }
    Ok(report)
}

/// The plot table for a cell's histogram: one line per bin holding the bin
/// center, the empirical density, and the standard normal density at that
/// center. Densities integrate to one over the bins.
pub fn histogram_table(cell: &CellSummary) -> Result<String> {
    let hist = &cell.histogram;
    let total = hist.total();
    if total == 0 {
        return Err(Error::config(format!(
            "cell n={}, p={} has an empty histogram; nothing to plot",
            cell.n, cell.p
        )));
    }
    let width = hist.bin_width();
    let mut out = String::from("# bin_center density normal_density\n");
    for (center, &count) in hist.centers().iter().zip(&hist.counts) {
        let density = count as f64 / (total as f64 * width);
        writeln!(out, "{} {} {}", real(*center), real(density), real(std_normal_density(*center)))
            .expect("writing to a string cannot fail");
    }
    Ok(out)
}

/// Writes a cell's histogram plot table to `path`.
///
/// # Errors
///
/// Empty histograms are refused; I/O failures carry the path.
pub fn emit_histogram_data(cell: &CellSummary, path: &Path) -> Result<ReportFile> {
    let table = histogram_table(cell)?;
    std::fs::write(path, table).map_err(|e| Error::io(path, e))?;
    Ok(ReportFile {
        format: ReportFormat::Csv,
        path: path.display().to_string(),
        schema_version: crate::harness::SCHEMA_VERSION,
    })
}
