//! Comma-separated numeric tables and embedding files.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use htsne_core::{DataMatrix, Embedding};

use crate::error::DataError;

pub const LABEL_COLUMN: &str = "label";

/// Parsed numeric table. Unlike [`DataMatrix`] it may have a single row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row-major feature values.
    pub values: Vec<f64>,
    pub labels: Option<Vec<i64>>,
    /// Column names when the file had a header, label column excluded.
    pub header: Option<Vec<String>>,
}

impl Table {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn into_matrix(self) -> Result<(DataMatrix, Option<Vec<i64>>), DataError> {
        let data = DataMatrix::new(self.n_rows, self.n_cols, self.values).map_err(|e| {
            DataError::Format {
                path: None,
                message: e.to_string(),
            }
        })?;
        Ok((data, self.labels))
    }
}

pub fn load_csv(path: &Path) -> Result<Table, DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    parse_csv(file).map_err(|e| e.with_path(path))
}

/// Parses a rectangular numeric table. The first row is a header when any
/// of its cells is not a number; a header whose last column is `label`
/// marks that column as integer class labels.
pub fn parse_csv<R: Read>(reader: R) -> Result<Table, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header: Option<Vec<String>> = None;
    let mut label_col = false;
    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n_rows = 0;

    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| DataError::Parse {
            path: None,
            row: e.position().map_or(idx + 1, |p| p.line() as usize),
            column: None,
            message: e.to_string(),
        })?;
        // file line, which differs from the record index after blank lines
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if idx == 0 && record.iter().any(|c| c.parse::<f64>().is_err()) {
            let names: Vec<String> = record.iter().map(str::to_owned).collect();
            label_col = names.last().map(String::as_str) == Some(LABEL_COLUMN);
            width = Some(names.len());
            header = Some(if label_col {
                names[..names.len() - 1].to_vec()
            } else {
                names
            });
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(DataError::Ragged {
                path: None,
                row: line,
                expected,
                found: record.len(),
            });
        }
        let n_features = if label_col { expected - 1 } else { expected };
        for (c, cell) in record.iter().enumerate().take(n_features) {
            values.push(parse_number(cell, line, c + 1)?);
        }
        if label_col {
            labels.push(parse_label(&record[expected - 1], line, expected)?);
        }
        n_rows += 1;
    }

    let width = width.unwrap_or(0);
    let n_cols = if label_col { width - 1 } else { width };
    if n_rows == 0 || n_cols == 0 {
        return Err(DataError::Format {
            path: None,
            message: "no numeric data rows".into(),
        });
    }
    Ok(Table {
        n_rows,
        n_cols,
        values,
        labels: label_col.then_some(labels),
        header,
    })
}

fn parse_number(cell: &str, row: usize, column: usize) -> Result<f64, DataError> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::Parse {
            path: None,
            row,
            column: Some(column),
            message: format!("expected a finite number, found {cell:?}"),
        }),
    }
}

fn parse_label(cell: &str, row: usize, column: usize) -> Result<i64, DataError> {
    if let Ok(v) = cell.parse::<i64>() {
        return Ok(v);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(DataError::Parse {
            path: None,
            row,
            column: Some(column),
            message: format!("expected an integer label, found {cell:?}"),
        }),
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_embedding_csv(
    path: &Path,
    emb: &Embedding,
    labels: Option<&[i64]>,
) -> Result<(), DataError> {
    let file = File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_embedding(&mut w, emb, labels)
        .and_then(|_| w.flush())
        .map_err(|e| DataError::io(path, e))
}

pub fn write_embedding<W: Write>(
    w: &mut W,
    emb: &Embedding,
    labels: Option<&[i64]>,
) -> std::io::Result<()> {
    if let Some(l) = labels {
        assert_eq!(l.len(), emb.len(), "one label per point");
    }
    writeln!(w, "x,y,{LABEL_COLUMN}")?;
    for (i, p) in emb.coords.iter().enumerate() {
        let label = labels.map_or(0, |l| l[i]);
        writeln!(w, "{},{},{}", format_f64(p[0]), format_f64(p[1]), label)?;
    }
    Ok(())
}

/// Reads a file written by [`write_embedding_csv`].
pub fn load_embedding_csv(path: &Path) -> Result<(Embedding, Vec<i64>), DataError> {
    let table = load_csv(path)?;
    let format_err = |message: String| DataError::Format {
        path: Some(path.to_owned()),
        message,
    };
    if table.n_cols != 2 {
        return Err(format_err(format!(
            "expected 2 coordinate columns, found {}",
            table.n_cols
        )));
    }
    let coords = (0..table.n_rows)
        .map(|i| [table.row(i)[0], table.row(i)[1]])
        .collect();
    let labels = table
        .labels
        .ok_or_else(|| format_err("missing label column".into()))?;
    let emb = Embedding::new(coords).map_err(|e| format_err(e.to_string()))?;
    Ok((emb, labels))
}
