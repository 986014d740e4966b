//! CSV in and out. Floats are written in shortest round-trip form, so
//! reading a written file gives back the same doubles.

use std::path::Path;

use indexmap::IndexMap;

use crate::error::{CliError, CliResult};

/// Numeric columns in file order.
pub type Columns = IndexMap<String, Vec<f64>>;

pub fn read_csv(path: &Path) -> CliResult<Columns> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .clone();
    if headers.is_empty() {
        return Err(CliError::Data(format!("{}: missing header row", path.display())));
    }
    let mut cols: Columns = IndexMap::new();
    for h in headers.iter() {
        if h.is_empty() {
            return Err(CliError::Data(format!("{}: empty column name in header", path.display())));
        }
        if cols.insert(h.to_string(), Vec::new()).is_some() {
            return Err(CliError::Data(format!("{}: duplicate column `{h}`", path.display())));
        }
    }
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        for ((name, col), field) in cols.iter_mut().zip(record.iter()) {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Data(format!("column `{name}` row {}: `{field}` is not a number", r + 1))
            })?;
            col.push(v);
        }
    }
    Ok(cols)
}

/// Writes `header` and then `rows`, one record per row.
pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<Cell>>) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::render)).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// One output field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // `Display` for f64 is the shortest string that parses back exactly.
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let vals = [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 123456789.123456789, f64::MIN_POSITIVE, 0.0, -0.0];
        write_csv(&p, &["v".to_string()], vals.iter().map(|&v| vec![Cell::Num(v)])).unwrap();
        let back = read_csv(&p).unwrap();
        for (a, b) in vals.iter().zip(&back["v"]) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn non_numeric_names_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "x,y\n1,2\n3,abc\n").unwrap();
        let err = read_csv(&p).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("column `y` row 2"), "{err}");
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "x,y\n1,2\n3\n").unwrap();
        assert_eq!(read_csv(&p).unwrap_err().exit_code(), 3);
    }
}
