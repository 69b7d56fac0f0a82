//! CSV files exchanged with the command line: sweep datasets, loss spectra and
//! observed dips.
//!
//! Every file may start with `# key: value` metadata lines; the header row is
//! mandatory and must match the expected column names.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::inference::{DipObservation, SweepPoint};

pub const SWEEP_HEADER: [&str; 3] = ["rate_G_per_s", "n_rel", "sigma"];
pub const SPECTRUM_HEADER: [&str; 2] = ["B_G", "n_atoms"];
pub const DIPS_HEADER: [&str; 3] = ["B_G", "sigma_G", "channel"];

pub type Metadata = Vec<(String, String)>;

/// A parsed CSV body: metadata from the comment preamble plus data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Metadata,
    pub rows: Vec<Vec<String>>,
    /// 1-based source line of each row.
    pub lines: Vec<usize>,
}

impl Table {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn write_table<W: Write>(
    mut out: W,
    metadata: &[(String, String)],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let io = |e: std::io::Error| Error::Parse {
        line: 0,
        reason: e.to_string(),
    };
    for (k, v) in metadata {
        writeln!(out, "# {k}: {v}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse {
        line: 0,
        reason: e.to_string(),
    };
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn read_table<R: Read>(mut input: R, header: &[&str]) -> Result<Table> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(|e| Error::Parse {
        line: 0,
        reason: e.to_string(),
    })?;
    let mut metadata = Vec::new();
    let mut body_start = 0;
    let mut skipped = 0;
    for line in text.lines() {
        let trimmed = line.trim();
        if let Some(c) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = c.split_once(':') {
                metadata.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else if !trimmed.is_empty() {
            break;
        }
        body_start += line.len() + 1;
        skipped += 1;
    }
    let body = text.get(body_start.min(text.len())..).unwrap_or("");
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .comment(Some(b'#'))
        .from_reader(body.as_bytes());
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: skipped + 1,
            reason: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if found.iter().map(String::as_str).ne(header.iter().copied()) {
        return Err(Error::Parse {
            line: skipped + 1,
            reason: format!(
                "expected header {}, found {}",
                header.join(","),
                found.join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e
                .position()
                .map_or(skipped + i + 2, |p| skipped + p.line() as usize),
            reason: e.to_string(),
        })?;
        lines.push(
            rec.position()
                .map_or(skipped + i + 2, |p| skipped + p.line() as usize),
        );
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table {
        metadata,
        rows,
        lines,
    })
}

fn number(s: &str, line: usize, column: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse {
        line,
        reason: format!("{column}: cannot parse {s:?} as a number"),
    })
}

pub fn write_sweep<W: Write>(
    out: W,
    metadata: &[(String, String)],
    points: &[SweepPoint],
) -> Result<()> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![p.rate.to_string(), p.n_rel.to_string(), p.sigma.to_string()])
        .collect();
    write_table(out, metadata, &SWEEP_HEADER, &rows)
}

pub fn read_sweep<R: Read>(input: R) -> Result<(Metadata, Vec<SweepPoint>)> {
    let table = read_table(input, &SWEEP_HEADER)?;
    let points = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(SweepPoint {
                rate: number(&r[0], table.lines[i], SWEEP_HEADER[0])?,
                n_rel: number(&r[1], table.lines[i], SWEEP_HEADER[1])?,
                sigma: number(&r[2], table.lines[i], SWEEP_HEADER[2])?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((table.metadata, points))
}

pub fn write_spectrum<W: Write>(
    out: W,
    metadata: &[(String, String)],
    points: &[(f64, f64)],
) -> Result<()> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![p.0.to_string(), p.1.to_string()])
        .collect();
    write_table(out, metadata, &SPECTRUM_HEADER, &rows)
}

pub fn read_spectrum<R: Read>(input: R) -> Result<(Metadata, Vec<(f64, f64)>)> {
    let table = read_table(input, &SPECTRUM_HEADER)?;
    let points = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok((
                number(&r[0], table.lines[i], SPECTRUM_HEADER[0])?,
                number(&r[1], table.lines[i], SPECTRUM_HEADER[1])?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok((table.metadata, points))
}

/// Dip files: `B_G,sigma_G,channel`; the last two columns may be empty.
pub fn read_dips<R: Read>(input: R) -> Result<Vec<DipObservation>> {
    let table = read_table(input, &DIPS_HEADER)?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let line = table.lines[i];
            Ok(DipObservation {
                field: number(&r[0], line, DIPS_HEADER[0])?,
                sigma: (!r[1].is_empty())
                    .then(|| number(&r[1], line, DIPS_HEADER[1]))
                    .transpose()?,
                channel: (!r[2].is_empty())
                    .then(|| r[2].parse())
                    .transpose()
                    .map_err(|e: Error| Error::Parse {
                        line,
                        reason: e.to_string(),
                    })?,
            })
        })
        .collect()
}

pub fn write_dips<W: Write>(
    out: W,
    metadata: &[(String, String)],
    dips: &[DipObservation],
) -> Result<()> {
    let rows: Vec<Vec<String>> = dips
        .iter()
        .map(|d| {
            vec![
                d.field.to_string(),
                d.sigma.map(|s| s.to_string()).unwrap_or_default(),
                d.channel
                    .map(|c| c.as_str().to_string())
                    .unwrap_or_default(),
            ]
        })
        .collect();
    write_table(out, metadata, &DIPS_HEADER, &rows)
}
