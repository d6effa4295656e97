//! Measurement matrices from CSV: `2F` rows of `N` numbers, x and y rows of
//! each frame adjacent. A non-numeric first row is taken as a header.

use std::io::Read;
use std::path::Path;

use adaptive_admm::data::MeasurementMatrix;

use crate::CliError;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("line {line}, column {column}: '{value}' is not a number")]
    NotANumber { line: u64, column: usize, value: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error(transparent)]
    Data(#[from] adaptive_admm::data::DataError),
}

pub fn read_measurements<R: Read>(reader: R) -> Result<MeasurementMatrix, LoadError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (index, record) in csv.records().enumerate() {
        let line = index as u64 + 1;
        let record = record.map_err(|source| LoadError::Csv { line, source })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, usize> = record
            .iter()
            .enumerate()
            .map(|(col, field)| field.parse::<f64>().map_err(|_| col))
            .collect();
        match parsed {
            Ok(values) => {
                if let Some(first) = rows.first() {
                    if first.len() != values.len() {
                        return Err(LoadError::Ragged {
                            line,
                            expected: first.len(),
                            found: values.len(),
                        });
                    }
                }
                rows.push(values);
            }
            // header: only allowed before any data
            Err(_) if index == 0 => {}
            Err(col) => {
                return Err(LoadError::NotANumber {
                    line,
                    column: col + 1,
                    value: record[col].to_owned(),
                })
            }
        }
    }
    Ok(MeasurementMatrix::from_rows(&rows)?)
}

pub fn load_measurements(path: &Path) -> Result<MeasurementMatrix, CliError> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_measurements(file).map_err(|source| CliError::Measurements {
        path: path.to_owned(),
        source,
    })
}

/// Writes `2F` rows of comma-separated values with 17 significant digits.
pub fn measurements_csv(m: &MeasurementMatrix) -> String {
    let values = m.values();
    let mut out = String::new();
    for row in values.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use adaptive_admm::data::{generate_affine, AffineSpec};

    #[test]
    fn parses_with_and_without_header() {
        let plain = read_measurements("1,2,3\n4,5,6\n".as_bytes()).unwrap();
        let headed = read_measurements("p0,p1,p2\n1, 2, 3\n4,5,6\n\n".as_bytes()).unwrap();
        assert_eq!(plain, headed);
        assert_eq!((plain.frames(), plain.points()), (1, 3));
    }

    #[test]
    fn reports_positions_of_bad_cells() {
        let err = read_measurements("1,2\n3,x\n".as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "line 2, column 2: 'x' is not a number");
        let err = read_measurements("1,2\n3,4,5\n".as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "line 2: expected 2 columns, found 3");
        assert!(matches!(
            read_measurements("1,2\n".as_bytes()),
            Err(LoadError::Data(adaptive_admm::data::DataError::OddRows(1)))
        ));
        assert!(read_measurements("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn written_matrices_read_back_exactly() {
        let m = generate_affine(&AffineSpec {
            frames: 3,
            points: 7,
            ..Default::default()
        })
        .unwrap();
        let back = read_measurements(measurements_csv(&m).as_bytes()).unwrap();
        assert_eq!(back, m);
    }
}
