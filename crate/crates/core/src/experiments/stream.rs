use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::RawSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    Sine,
    Square,
    Sawtooth,
    /// The first `period` values of a CSV column.
    Segment,
}

/// Where the evaluation stream comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum StreamSpec {
    CsvColumn {
        path: PathBuf,
        column: String,
        /// Known period, if any; enables correctness scoring.
        #[serde(default)]
        period: Option<usize>,
    },
    Synthetic {
        waveform: Waveform,
        period: usize,
        length: usize,
        #[serde(default)]
        repeats: Option<usize>,
        #[serde(default)]
        jitter: f64,
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default)]
        column: Option<String>,
    },
}

impl StreamSpec {
    pub fn synthetic(waveform: Waveform, period: usize, length: usize, jitter: f64) -> Self {
        StreamSpec::Synthetic {
            waveform,
            period,
            length,
            repeats: None,
            jitter,
            path: None,
            column: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let StreamSpec::Synthetic {
            waveform,
            period,
            length,
            repeats,
            jitter,
            path,
            column,
        } = self
        {
            if *period < 2 {
                return Err(Error::Config(format!("period {period} must be at least 2")));
            }
            if *length < 3 * period {
                return Err(Error::Config(format!(
                    "length {length} must cover at least three periods of {period}"
                )));
            }
            if !(0.0..0.5).contains(jitter) {
                return Err(Error::Config(format!(
                    "jitter {jitter} must lie in [0, 0.5)"
                )));
            }
            if let Some(k) = repeats {
                if k * period < *length {
                    return Err(Error::Config(format!(
                        "{k} repeats of {period} cannot fill length {length}"
                    )));
                }
            }
            if *waveform == Waveform::Segment && (path.is_none() || column.is_none()) {
                return Err(Error::Config(
                    "segment waveform needs both path and column".into(),
                ));
            }
        }
        Ok(())
    }

    /// A short identifier used as the row label in summary tables.
    pub fn label(&self) -> String {
        match self {
            StreamSpec::CsvColumn { column, .. } => column.clone(),
            StreamSpec::Synthetic {
                waveform, period, ..
            } => format!("{waveform:?}-T{period}").to_lowercase(),
        }
    }
}

/// Reads one named numeric column, keeping row order.
pub fn load_csv_column(path: &Path, column: &str) -> Result<RawSeries> {
    let ingest = |message: String| Error::Ingestion {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| ingest(e.to_string()))?;
    let headers = reader.headers().map_err(|e| ingest(e.to_string()))?.clone();
    let idx = headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| ingest(format!("column '{column}' not found")))?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Row numbers count the header as row 1.
        let row = i + 2;
        let record = record.map_err(|e| ingest(format!("row {row}: {e}")))?;
        let cell = record
            .get(idx)
            .ok_or_else(|| ingest(format!("row {row}: missing cell")))?
            .trim();
        let v: f64 = cell
            .parse()
            .map_err(|_| ingest(format!("row {row}: cannot parse '{cell}' as a number")))?;
        if !v.is_finite() {
            return Err(ingest(format!("row {row}: non-finite value '{cell}'")));
        }
        values.push(v);
    }
    RawSeries::new(values).map_err(|_| ingest("column has no rows".into()))
}

fn base_cycle(waveform: Waveform, period: usize) -> Vec<f64> {
    let p = period as f64;
    (0..period)
        .map(|t| {
            let t = t as f64;
            match waveform {
                Waveform::Sine => (2.0 * std::f64::consts::PI * t / p).sin(),
                Waveform::Square => {
                    if t < p / 2.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Waveform::Sawtooth => t / p,
                Waveform::Segment => unreachable!("segments come from a file"),
            }
        })
        .collect()
}

/// Tiles one base cycle, crops to the stream length, and adds uniform jitter
/// of `jitter` times the cycle's value range, clamped back into that range.
/// Returns the stream and its true period.
pub fn build_periodic_stream<R: Rng + ?Sized>(
    spec: &StreamSpec,
    rng: &mut R,
) -> Result<(RawSeries, Option<usize>)> {
    spec.validate()?;
    match spec {
        StreamSpec::CsvColumn {
            path,
            column,
            period,
        } => Ok((load_csv_column(path, column)?, *period)),
        StreamSpec::Synthetic {
            waveform,
            period,
            length,
            repeats,
            jitter,
            path,
            column,
        } => {
            let cycle = if *waveform == Waveform::Segment {
                let path = path.as_ref().expect("validated");
                let column = column.as_ref().expect("validated");
                let source = load_csv_column(path, column)?;
                if source.len() < *period {
                    return Err(Error::Ingestion {
                        path: path.clone(),
                        message: format!(
                            "column '{column}' has {} rows, fewer than period {period}",
                            source.len()
                        ),
                    });
                }
                source.values()[..*period].to_vec()
            } else {
                base_cycle(*waveform, *period)
            };
            let lo = cycle.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = cycle.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let amp = jitter * (hi - lo);
            let k = repeats.unwrap_or(length.div_ceil(*period));
            let values = cycle
                .iter()
                .cycle()
                .take(k * period)
                .take(*length)
                .map(|&v| {
                    if amp > 0.0 {
                        (v + rng.random_range(-amp..=amp)).clamp(lo, hi)
                    } else {
                        v
                    }
                })
                .collect();
            Ok((RawSeries::new(values)?, Some(*period)))
        }
    }
}
