use std::fmt::Write as _;
use std::io::Write;

use clap::ValueEnum;
use narrowfesh_core::dataset::write_table;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    JsonLines,
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => x.to_string(),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(n) => Value::from(*n),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Tabular command output with its metadata echo. `summary` goes to stderr.
#[derive(Debug, Default)]
pub struct Report {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Vec<String>,
}

impl Report {
    pub fn new(columns: &[&'static str]) -> Self {
        Report {
            columns: columns.to_vec(),
            ..Default::default()
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, String> {
        let mut out = Vec::new();
        match format {
            Format::Csv => {
                let rows: Vec<Vec<String>> = self
                    .rows
                    .iter()
                    .map(|r| r.iter().map(Cell::render).collect())
                    .collect();
                write_table(&mut out, &self.metadata, &self.columns, &rows)
                    .map_err(|e| e.to_string())?;
            }
            Format::JsonLines => {
                let meta: Map<String, Value> = self
                    .metadata
                    .iter()
                    .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                    .collect();
                let line = |v: Value| serde_json::to_string(&v).map_err(|e| e.to_string());
                let mut text = line(Value::Object(
                    [("metadata".to_string(), Value::Object(meta))]
                        .into_iter()
                        .collect(),
                ))?;
                text.push('\n');
                for r in &self.rows {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(r)
                        .map(|(c, v)| (c.to_string(), v.json()))
                        .collect();
                    text.push_str(&line(Value::Object(obj))?);
                    text.push('\n');
                }
                out.extend_from_slice(text.as_bytes());
            }
            Format::Table => {
                let mut text = String::new();
                for (k, v) in &self.metadata {
                    let _ = writeln!(text, "# {k}: {v}");
                }
                let cells: Vec<Vec<String>> = self
                    .rows
                    .iter()
                    .map(|r| r.iter().map(Cell::render).collect())
                    .collect();
                let widths: Vec<usize> = self
                    .columns
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        cells
                            .iter()
                            .map(|r| r[i].chars().count())
                            .chain([c.len()])
                            .max()
                            .unwrap_or(0)
                    })
                    .collect();
                let mut line = |items: Vec<&str>| {
                    let padded: Vec<String> = items
                        .iter()
                        .zip(&widths)
                        .map(|(s, w)| format!("{s:>w$}"))
                        .collect();
                    let _ = writeln!(text, "{}", padded.join("  ").trim_end());
                };
                line(self.columns.clone());
                for r in &cells {
                    line(r.iter().map(String::as_str).collect());
                }
                out.extend_from_slice(text.as_bytes());
            }
        }
        Ok(out)
    }

    pub fn print_summary(&self) {
        let stderr = std::io::stderr();
        let mut err = stderr.lock();
        for line in &self.summary {
            let _ = writeln!(err, "{line}");
        }
    }
}

/// `value` in G rendered with a readable unit.
pub fn gauss(value: f64) -> String {
    let a = value.abs();
    if a >= 0.1 || a == 0.0 {
        format!("{value:.4} G")
    } else if a >= 1e-4 {
        format!("{:.2} mG", value * 1e3)
    } else {
        format!("{:.2} μG", value * 1e6)
    }
}

/// `value ± sigma` in a common readable unit.
pub fn gauss_pm(value: f64, sigma: f64) -> String {
    let a = value.abs().max(sigma.abs());
    let (scale, unit) = if a >= 0.1 {
        (1.0, "G")
    } else if a >= 1e-4 {
        (1e3, "mG")
    } else {
        (1e6, "μG")
    };
    format!("{:.2} ± {:.2} {unit}", value * scale, sigma * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new(&["a", "b"]);
        r.meta("seed", 7);
        r.row(vec![Cell::Num(0.1), Cell::Text("x".into())]);
        r.row(vec![Cell::Empty, Cell::Bool(true)]);
        r
    }

    #[test]
    fn csv_has_metadata_and_header() {
        let text = String::from_utf8(sample().render(Format::Csv).unwrap()).unwrap();
        assert_eq!(text, "# seed: 7\na,b\n0.1,x\n,true\n");
    }

    #[test]
    fn json_lines_are_objects() {
        let text = String::from_utf8(sample().render(Format::JsonLines).unwrap()).unwrap();
        let lines: Vec<Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines[0]["metadata"]["seed"], "7");
        assert_eq!(lines[1]["a"], 0.1);
        assert_eq!(lines[2]["a"], Value::Null);
    }

    #[test]
    fn units() {
        assert_eq!(gauss(19.874), "19.8740 G");
        assert_eq!(gauss(0.0111), "11.10 mG");
        assert_eq!(gauss(8e-6), "8.00 μG");
        assert_eq!(gauss_pm(8e-6, 1.6e-6), "8.00 ± 1.60 μG");
    }
}
