use std::fs::File;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::SignalRecord;
use crate::error::{Error, Result};

/// Which columns of a CSV hold the sensor channels, in model order.
///
/// With a header row, entries are matched against column names. Without one,
/// entries must be zero-based column indices written as integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub channels: Vec<String>,
    pub sample_rate_hz: f64,
}

fn is_numeric_row(rec: &csv::StringRecord) -> bool {
    rec.iter().all(|c| c.trim().parse::<f64>().is_ok())
}

/// Reads a one-row-per-timestep CSV into a record. Labels come from the caller.
pub fn ingest_csv(
    path: &Path,
    schema: &CsvSchema,
    condition_id: usize,
    fault_label: usize,
) -> Result<SignalRecord> {
    if schema.channels.is_empty() {
        return Err(Error::Schema("schema lists no channel columns".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(File::open(path)?);
    let mut records = reader.records();

    let first = match records.next() {
        Some(r) => r?,
        None => return Err(Error::EmptyInput(format!("{} is empty", path.display()))),
    };

    let (columns, first_data) = if is_numeric_row(&first) {
        let cols = schema
            .channels
            .iter()
            .map(|name| {
                name.trim().parse::<usize>().map_err(|_| {
                    Error::Schema(format!(
                        "{} has no header; channel '{}' is not a column index",
                        path.display(),
                        name
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        (cols, Some(first))
    } else {
        let cols = schema
            .channels
            .iter()
            .map(|name| {
                first.iter().position(|h| h.trim() == name).ok_or_else(|| {
                    Error::Schema(format!("missing column '{}' in {}", name, path.display()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        (cols, None)
    };

    let header_rows = usize::from(first_data.is_none());
    let mut rows: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    let all = first_data.into_iter().map(Ok).chain(records);
    for (i, rec) in all.enumerate() {
        let rec = rec?;
        // 1-based line number in the file
        let row = i + 1 + header_rows;
        for (&col, name) in columns.iter().zip(&schema.channels) {
            let cell = rec.get(col).ok_or_else(|| Error::Parse {
                row,
                column: name.clone(),
                message: "missing cell".into(),
            })?;
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: name.clone(),
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.clone(),
                    message: "non-finite value".into(),
                });
            }
            rows.push(v);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::EmptyInput(format!(
            "{} has a header but no data",
            path.display()
        )));
    }
    let k = columns.len();
    let by_time = Array2::from_shape_vec((n_rows, k), rows).expect("row lengths checked");
    SignalRecord::new(
        by_time.t().to_owned(),
        condition_id,
        fault_label,
        schema.sample_rate_hz,
    )
}

/// Writes a record with a header row of `names` (one per channel).
pub fn write_csv(rec: &SignalRecord, names: &[String], path: &Path) -> Result<()> {
    if names.len() != rec.n_channels() {
        return Err(Error::shape(
            "csv column names",
            rec.n_channels(),
            names.len(),
        ));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    for t in 0..rec.len() {
        w.write_record(rec.channels.column(t).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_record, SyntheticSpec};
    use std::io::Write;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("ch{i}")).collect()
    }

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            n_conditions: 1,
            n_faults: 2,
            load_levels: vec![1.0],
            base_freqs_hz: vec![100.0, 150.0],
            noise_sigma: 0.3,
            seed: 5,
            n_channels: 6,
            sample_rate_hz: 12_800.0,
            load_ref: 1.0,
            amp_slope: 0.3,
            freq_slope: 0.05,
        }
    }

    #[test]
    fn roundtrip_within_text_tolerance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.csv");
        let rec = generate_record(&spec(), 0, 1, 2048).unwrap();
        write_csv(&rec, &names(6), &path).unwrap();
        let schema = CsvSchema {
            channels: names(6),
            sample_rate_hz: 12_800.0,
        };
        let back = ingest_csv(&path, &schema, 0, 1).unwrap();
        assert_eq!((back.n_channels(), back.len()), (6, 2048));
        let max_err = rec
            .channels
            .iter()
            .zip(back.channels.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 1e-6);
    }

    #[test]
    fn header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        std::fs::write(&path, "a,b\n").unwrap();
        let schema = CsvSchema {
            channels: vec!["a".into()],
            sample_rate_hz: 1.0,
        };
        assert!(matches!(
            ingest_csv(&path, &schema, 0, 0),
            Err(Error::EmptyInput(_))
        ));
        std::fs::write(&path, "").unwrap();
        assert!(matches!(
            ingest_csv(&path, &schema, 0, 0),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn missing_column_and_bad_cell() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "a,b\n1.0,2.0\n3.0,oops").unwrap();
        drop(f);
        let missing = CsvSchema {
            channels: vec!["c".into()],
            sample_rate_hz: 1.0,
        };
        assert!(matches!(
            ingest_csv(&path, &missing, 0, 0),
            Err(Error::Schema(_))
        ));
        let schema = CsvSchema {
            channels: vec!["b".into(), "a".into()],
            sample_rate_hz: 1.0,
        };
        match ingest_csv(&path, &schema, 0, 0) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn headerless_uses_indices_in_schema_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.csv");
        std::fs::write(&path, "1,2,3\n4,5,6\n").unwrap();
        let schema = CsvSchema {
            channels: vec!["2".into(), "0".into()],
            sample_rate_hz: 10.0,
        };
        let rec = ingest_csv(&path, &schema, 0, 0).unwrap();
        assert_eq!(rec.channels, ndarray::array![[3.0, 6.0], [1.0, 4.0]]);
    }
}
