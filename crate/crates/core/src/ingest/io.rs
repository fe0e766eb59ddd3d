use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::series::TimeSeries;
use crate::{Error, Result};

pub const HEADER: [&str; 2] = ["t_s", "value"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesFormat {
    #[default]
    Csv,
    Tsv,
}

impl SeriesFormat {
    /// Guess from the file extension (`.tsv` / `.tab`), defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "tsv" || ext == "tab" => SeriesFormat::Tsv,
            _ => SeriesFormat::Csv,
        }
    }

    fn delimiter(self) -> u8 {
        match self {
            SeriesFormat::Csv => b',',
            SeriesFormat::Tsv => b'\t',
        }
    }
}

pub fn load_series(path: impl AsRef<Path>, format: SeriesFormat) -> Result<TimeSeries> {
    let path = path.as_ref();
    let label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("series")
        .to_string();
    let series = read_series(File::open(path)?, format, label)?;
    log::debug!("loaded {} samples from {}", series.len(), path.display());
    Ok(series)
}

/// Parses a two-column `t_s,value` table. The header row is optional; lines
/// starting with '#' are skipped and rows may come in any order.
pub fn read_series<R: Read>(reader: R, format: SeriesFormat, label: impl Into<String>) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .delimiter(format.delimiter())
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let mut rows: Vec<(f64, f64, u64)> = Vec::new();
    let mut first = true;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if first {
            first = false;
            let is_header = record.len() == 2
                && record[0].parse::<f64>().is_err()
                && record[1].parse::<f64>().is_err();
            if is_header {
                if !record[0].eq_ignore_ascii_case(HEADER[0]) || !record[1].eq_ignore_ascii_case(HEADER[1]) {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "expected header '{},{}', found '{},{}'",
                            HEADER[0], HEADER[1], &record[0], &record[1]
                        ),
                    });
                }
                continue;
            }
        }
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let field = |i: usize| {
            record[i].parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("field {} ('{}'): {e}", i + 1, &record[i]),
            })
        };
        let (t, v) = (field(0)?, field(1)?);
        if !t.is_finite() || !v.is_finite() {
            return Err(Error::Parse {
                line,
                message: "non-finite number".into(),
            });
        }
        rows.push((t, v, line));
    }
    if rows.is_empty() {
        return Err(Error::Data("file contains no samples".into()));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Data(format!(
            "duplicate time stamp {} on lines {} and {}",
            w[0].0,
            w[0].2.min(w[1].2),
            w[0].2.max(w[1].2)
        )));
    }
    let (t, v): (Vec<f64>, Vec<f64>) = rows.into_iter().map(|(t, v, _)| (t, v)).unzip();
    TimeSeries::new(t, v, label)
}

/// Writes `t_s,value` rows with 17 significant digits.
pub fn write_series(path: impl AsRef<Path>, series: &TimeSeries) -> Result<()> {
    let mut file = std::io::BufWriter::new(File::create(path.as_ref())?);
    write_series_to(&mut file, series)?;
    file.flush()?;
    Ok(())
}

pub fn write_series_to<W: Write>(mut out: W, series: &TimeSeries) -> Result<()> {
    writeln!(out, "{},{}", HEADER[0], HEADER[1])?;
    for (t, v) in series.iter() {
        writeln!(out, "{t:.16e},{v:.16e}")?;
    }
    Ok(())
}
