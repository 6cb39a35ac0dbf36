//! Plain-text interchange: headerless numeric CSV matrices and JSON echo times.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::edm::PointSet;
use crate::error::{EdmError, Result};

/// Parses a headerless CSV of numbers into a matrix. Blank lines are skipped;
/// every row must have the same length.
pub fn parse_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>()
                    .map_err(|_| EdmError::Parse(format!("row {r}, column {c}: '{f}' is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(EdmError::Parse(format!(
                    "row {r} has {} fields, expected {}",
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(EdmError::Parse("empty matrix".into()));
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    parse_matrix_csv(File::open(path)?)
}

/// Writes one matrix row per line using the shortest round-trip float format.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| format!("{}", m[(i, j)])))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_matrix_csv(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    write_matrix_csv(m, File::create(path)?)
}

/// Point files hold one point per row (`n x d`).
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<PointSet> {
    PointSet::new(read_matrix_csv(path)?.transpose())
}

pub fn save_points_csv(points: &PointSet, path: impl AsRef<Path>) -> Result<()> {
    save_matrix_csv(&points.coords().transpose(), path)
}

/// Reads `[[t, ...], ...]`, one ascending array of arrival times per microphone.
pub fn parse_times_json(text: &str) -> Result<Vec<Vec<f64>>> {
    let times: Vec<Vec<f64>> = serde_json::from_str(text)?;
    Ok(times)
}

pub fn read_times_json(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    parse_times_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -2.0, 1e-17, 3.0, 0.0, 1.0 / 3.0]);
        let mut buf = Vec::new();
        write_matrix_csv(&m, &mut buf).unwrap();
        let back = parse_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn csv_rejects_ragged_and_garbage() {
        assert!(parse_matrix_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(parse_matrix_csv("1,x\n".as_bytes()).is_err());
        assert!(parse_matrix_csv("".as_bytes()).is_err());
        let m = parse_matrix_csv(" 1, 2 \n\n3,4\n".as_bytes()).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn times_json() {
        let t = parse_times_json("[[0.01, 0.02], [0.015]]").unwrap();
        assert_eq!(t, vec![vec![0.01, 0.02], vec![0.015]]);
        assert!(parse_times_json("{\"a\": 1}").is_err());
    }
}
