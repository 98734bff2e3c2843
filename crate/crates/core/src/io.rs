//! Matrix files: CSV (one row per line) or JSON `{"n": .., "rows": [[..]]}`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guesses from the extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    n: usize,
    rows: Vec<Vec<f64>>,
}

fn check_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::Ragged { row: i, found: r.len(), expected: n });
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: j });
        }
    }
    Ok(linalg::from_rows(rows))
}

pub fn parse_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {} column {}: '{f}' is not a number", i + 1, j + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    check_rows(&rows)
}

pub fn parse_json(text: &str) -> Result<DMatrix<f64>> {
    let file: MatrixFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.n != file.rows.len() {
        return Err(Error::DimensionMismatch { expected: file.n, found: file.rows.len() });
    }
    check_rows(&file.rows)
}

pub fn parse(text: &str, format: Format) -> Result<DMatrix<f64>> {
    match format {
        Format::Csv => parse_csv(text),
        Format::Json => parse_json(text),
    }
}

/// Shortest round-tripping decimal for each entry.
pub fn to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in m.row_iter() {
        let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json(m: &DMatrix<f64>) -> String {
    let file = MatrixFile { n: m.nrows(), rows: linalg::to_rows(m) };
    let mut s = serde_json::to_string_pretty(&file).expect("finite matrix serializes");
    s.push('\n');
    s
}

pub fn render(m: &DMatrix<f64>, format: Format) -> String {
    match format {
        Format::Csv => to_csv(m),
        Format::Json => to_json(m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(parse_csv(&to_csv(&m)).unwrap(), m);
        let spaced = parse_csv(" 0.5 , 0.5\n\n0.25,0.75\n").unwrap();
        assert_eq!(spaced[(1, 1)], 0.75);
    }

    #[test]
    fn json_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 0.7, 0.3]);
        assert_eq!(parse_json(&to_json(&m)).unwrap(), m);
        assert!(matches!(
            parse_json(r#"{"n": 3, "rows": [[1.0]]}"#),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_finite_and_ragged() {
        assert_eq!(parse_csv("0.5,NaN\n0.5,0.5\n"), Err(Error::NonFinite { row: 0, col: 1 }));
        assert_eq!(parse_csv("0.5,0.5\n0.5,inf\n"), Err(Error::NonFinite { row: 1, col: 1 }));
        assert!(matches!(parse_csv("0.5,0.5\n1.0\n"), Err(Error::Ragged { row: 1, .. })));
        assert!(matches!(parse_csv("a,b\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_json("{\"n\":1,\"rows\":[[NaN]]}"), Err(Error::Parse(_))));
        assert_eq!(parse_csv(""), Err(Error::Empty));
    }

    #[test]
    fn format_detection() {
        assert_eq!(Format::from_path(Path::new("a/b.JSON")), Format::Json);
        assert_eq!(Format::from_path(Path::new("x.csv")), Format::Csv);
        assert_eq!("json".parse::<Format>().unwrap(), Format::Json);
    }
}
