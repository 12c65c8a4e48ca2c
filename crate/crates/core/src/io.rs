//! CSV input and output for numeric matrices.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::OutcomeMatrix;

/// A numeric table with optional column names.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericTable {
    pub header: Option<Vec<String>>,
    pub matrix: OutcomeMatrix,
}

impl NumericTable {
    /// Index of a named column. Purely numeric tables accept the column
    /// index written as a number.
    pub fn column_index(&self, name: &str) -> Result<usize> {
        if let Some(h) = &self.header {
            if let Some(i) = h.iter().position(|c| c == name) {
                return Ok(i);
            }
        }
        match name.parse::<usize>() {
            Ok(i) if i < self.matrix.n_cols() => Ok(i),
            _ => Err(Error::invalid(format!("no column named {name:?}"))),
        }
    }
}

/// Reads a CSV file of numbers. A first record that does not parse as
/// numbers is taken as the header. Every other unparsable cell is reported
/// with its line and column.
pub fn read_numeric_csv(path: impl AsRef<Path>) -> Result<NumericTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    let mut header = None;
    let mut values = Vec::new();
    let mut cols = None;
    let mut problems = Vec::new();
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, String>> = record
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| c.to_string()))
            .collect();
        if line == 0 && parsed.iter().any(|p| p.is_err()) {
            header = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            cols = Some(record.len());
            continue;
        }
        let expected = *cols.get_or_insert(record.len());
        if record.len() != expected {
            problems.push(format!("line {}: {} fields, expected {expected}", line + 1, record.len()));
            continue;
        }
        let mut ok = true;
        for (j, p) in parsed.iter().enumerate() {
            match p {
                Ok(v) if v.is_finite() => values.push(*v),
                Ok(v) => {
                    ok = false;
                    problems.push(format!("line {} column {}: non-finite value {v}", line + 1, j + 1));
                }
                Err(c) => {
                    ok = false;
                    problems.push(format!("line {} column {}: not a number: {c:?}", line + 1, j + 1));
                }
            }
        }
        if ok {
            rows += 1;
        } else {
            values.truncate(rows * expected);
        }
    }
    if !problems.is_empty() {
        let shown: Vec<_> = problems.iter().take(20).cloned().collect();
        return Err(Error::invalid(format!(
            "{}: {} ingestion error(s):\n  {}",
            path.display(),
            problems.len(),
            shown.join("\n  ")
        )));
    }
    let matrix = OutcomeMatrix::new(rows, cols.unwrap_or(0), values)?;
    Ok(NumericTable { header, matrix })
}

/// Writes a matrix as CSV, with a header when `header` is given.
/// Values use the shortest representation that parses back exactly.
pub fn write_numeric_csv(path: impl AsRef<Path>, header: Option<&[String]>, matrix: &OutcomeMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::from(e).context(format!("writing {}", path.display())))?;
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for row in matrix.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = OutcomeMatrix::from_rows(&[vec![0.1, 1e-300], vec![-3.0, 1.0 / 3.0]]).unwrap();
        let h = vec!["a".to_string(), "b".to_string()];
        write_numeric_csv(&p, Some(&h), &m).unwrap();
        let t = read_numeric_csv(&p).unwrap();
        assert_eq!(t.header, Some(h));
        assert_eq!(t.matrix, m);
        assert_eq!(t.column_index("b").unwrap(), 1);
    }

    #[test]
    fn itemized_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "x,y\n1,2\n3,oops\n4\n").unwrap();
        let e = read_numeric_csv(&p).unwrap_err().to_string();
        assert!(e.contains("line 3 column 2"), "{e}");
        assert!(e.contains("line 4"), "{e}");
    }
}
