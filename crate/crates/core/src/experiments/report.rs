use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiments::config::Method;
use crate::experiments::runner::TrialReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportMode {
    /// One row per trial. Timing is left out so reruns are byte-identical.
    Raw,
    /// Detection accuracy (%) by window length and epsilon.
    AccuracyTable,
    /// Mean cosine distance by method and epsilon.
    DistanceTable,
    /// Wall-clock time per trial.
    Timing,
}

impl FromStr for ReportMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(ReportMode::Raw),
            "accuracy_table" => Ok(ReportMode::AccuracyTable),
            "distance_table" => Ok(ReportMode::DistanceTable),
            "timing" => Ok(ReportMode::Timing),
            other => Err(Error::Config(format!("unknown report mode '{other}'"))),
        }
    }
}

pub const RAW_HEADER: &str = "method,epsilon,w,trial,t_hat,detected_correctly,cosine_distance";

/// Sorted distinct epsilons, keyed by bit pattern.
fn epsilon_columns(reports: &[TrialReport]) -> Vec<f64> {
    let mut eps: Vec<f64> = reports.iter().map(|r| r.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup_by(|a, b| a.to_bits() == b.to_bits());
    eps
}

/// Percent of correct detections per (w, epsilon) over CPR rows.
pub fn accuracy_cells(reports: &[TrialReport]) -> BTreeMap<(usize, u64), (usize, usize)> {
    let mut cells: BTreeMap<(usize, u64), (usize, usize)> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.method == Method::Cpr) {
        let cell = cells.entry((r.w, r.epsilon.to_bits())).or_default();
        cell.0 += r.detected_correctly as usize;
        cell.1 += 1;
    }
    cells
}

pub fn accuracy_percent(reports: &[TrialReport], epsilon: f64, w: usize) -> Option<f64> {
    accuracy_cells(reports)
        .get(&(w, epsilon.to_bits()))
        .map(|&(ok, total)| 100.0 * ok as f64 / total as f64)
}

/// Mean cosine distance over the trials that produced a reconstruction.
pub fn mean_distance(
    reports: &[TrialReport],
    method: Method,
    epsilon: f64,
    w: usize,
) -> Option<f64> {
    let d: Vec<f64> = reports
        .iter()
        .filter(|r| r.method == method && r.w == w && r.epsilon.to_bits() == epsilon.to_bits())
        .filter_map(|r| r.cosine_distance)
        .collect();
    (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
}

pub fn render_report(reports: &[TrialReport], mode: ReportMode, label: &str) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::domain("cannot emit an empty report"));
    }
    let mut out = String::new();
    let eps_cols = epsilon_columns(reports);
    let eps_header: Vec<String> = eps_cols.iter().map(|e| e.to_string()).collect();
    match mode {
        ReportMode::Raw => {
            out.push_str(RAW_HEADER);
            out.push('\n');
            for r in reports {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.method,
                    r.epsilon,
                    r.w,
                    r.trial,
                    r.t_hat.map(|t| t.to_string()).unwrap_or_default(),
                    r.detected_correctly,
                    r.cosine_distance.map(|d| d.to_string()).unwrap_or_default(),
                ));
            }
        }
        ReportMode::Timing => {
            out.push_str("method,epsilon,w,trial,wall_time_ms\n");
            for r in reports {
                out.push_str(&format!(
                    "{},{},{},{},{:.3}\n",
                    r.method, r.epsilon, r.w, r.trial, r.wall_time_ms
                ));
            }
        }
        ReportMode::AccuracyTable => {
            out.push_str(&format!("stream,w,{}\n", eps_header.join(",")));
            let cells = accuracy_cells(reports);
            let mut windows: Vec<usize> = cells.keys().map(|k| k.0).collect();
            windows.dedup();
            for w in windows {
                let row: Vec<String> = eps_cols
                    .iter()
                    .map(|e| match cells.get(&(w, e.to_bits())) {
                        Some(&(ok, total)) => format!("{:.0}", 100.0 * ok as f64 / total as f64),
                        None => String::new(),
                    })
                    .collect();
                out.push_str(&format!("{label},{w},{}\n", row.join(",")));
            }
        }
        ReportMode::DistanceTable => {
            out.push_str(&format!("method,w,{}\n", eps_header.join(",")));
            let mut rows: Vec<(Method, usize)> = reports.iter().map(|r| (r.method, r.w)).collect();
            rows.sort();
            rows.dedup();
            for (method, w) in rows {
                let row: Vec<String> = eps_cols
                    .iter()
                    .map(|&e| {
                        mean_distance(reports, method, e, w)
                            .map(|d| format!("{d:.4}"))
                            .unwrap_or_default()
                    })
                    .collect();
                out.push_str(&format!("{method},{w},{}\n", row.join(",")));
            }
        }
    }
    Ok(out)
}

/// Writes a report as comma-separated text with LF line endings.
pub fn emit_report(
    reports: &[TrialReport],
    out_path: &Path,
    mode: ReportMode,
    label: &str,
) -> Result<()> {
    let text = render_report(reports, mode, label)?;
    let mut f = BufWriter::new(File::create(out_path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize, correct: bool) -> TrialReport {
        TrialReport {
            method: Method::Cpr,
            epsilon: 5.0,
            w: 5,
            trial,
            t_hat: Some(if correct { 50 } else { 49 }),
            detected_correctly: correct,
            cosine_distance: Some(0.125),
            wall_time_ms: 1.5,
        }
    }

    #[test]
    fn accuracy_cells_format() {
        let all: Vec<_> = (0..100).map(|t| row(t, true)).collect();
        let text = render_report(&all, ReportMode::AccuracyTable, "square").unwrap();
        assert_eq!(text, "stream,w,5\nsquare,5,100\n");
        let most: Vec<_> = (0..100).map(|t| row(t, t >= 2)).collect();
        let text = render_report(&most, ReportMode::AccuracyTable, "square").unwrap();
        assert_eq!(text, "stream,w,5\nsquare,5,98\n");
    }

    #[test]
    fn distance_table_format() {
        let rows: Vec<_> = (0..3).map(|t| row(t, true)).collect();
        let text = render_report(&rows, ReportMode::DistanceTable, "x").unwrap();
        assert_eq!(text, "method,w,5\ncpr,5,0.1250\n");
    }

    #[test]
    fn raw_rows() {
        let mut r = row(0, false);
        r.t_hat = None;
        r.cosine_distance = None;
        let text = render_report(&[r], ReportMode::Raw, "x").unwrap();
        assert_eq!(text, format!("{RAW_HEADER}\ncpr,5,5,0,,false,\n"));
    }

    #[test]
    fn empty_report_is_an_error() {
        assert!(render_report(&[], ReportMode::Raw, "x").is_err());
    }

    #[test]
    fn unwritable_path() {
        let rows = vec![row(0, true)];
        let err = emit_report(
            &rows,
            Path::new("/nonexistent/dir/out.csv"),
            ReportMode::Raw,
            "x",
        );
        assert!(matches!(err, Err(Error::Io(_))));
    }
}
