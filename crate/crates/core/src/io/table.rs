//! Run logs as CSV.
//!
//! Numbers are written as `{:.8e}` (nine significant digits, decimal
//! point, no locale), angles in degrees and rates in deg/s. Health flags
//! and iteration counts are integers, the mode a word.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::sim::{LogRecord, SimLog};
use crate::{Error, Result};

/// A header and rows of formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn num(x: f64) -> String {
    // `+ 0.0` folds negative zero
    format!("{:.8e}", x + 0.0)
}

fn row(record: &LogRecord) -> Vec<String> {
    let deg = |x: f64| x.to_degrees();
    let mut out = vec![num(record.t)];
    out.extend(record.position.iter().map(|&x| num(x)));
    out.extend(record.velocity.iter().map(|&x| num(x)));
    out.extend(record.attitude.iter().map(|&x| num(deg(x))));
    out.extend(record.rates.iter().map(|&x| num(deg(x))));
    out.extend(record.reference_position.iter().map(|&x| num(x)));
    out.push(num(deg(record.reference_heading)));
    out.extend(record.demand.to_vector().iter().map(|&x| num(x)));
    out.extend(record.achieved.to_vector().iter().map(|&x| num(x)));
    for v in [&record.thrusts, &record.speed_commands, &record.speeds, &record.residuals] {
        out.extend(v.iter().map(|&x| num(x)));
    }
    out.extend(record.health.iter().map(|&h| format!("{}", h as u8)));
    out.push(record.mode.to_string());
    out.push(num(record.allocation_residual));
    out.push(record.iterations.to_string());
    out
}

impl CsvTable {
    pub fn from_log(log: &SimLog) -> Self {
        CsvTable {
            header: log.header(),
            rows: log.records.iter().map(row).collect(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric column by name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .column_index(name)
            .ok_or_else(|| Error::invalid("column", format!("no column named '{name}'")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[i].parse::<f64>().map_err(|_| {
                    Error::invalid(format!("row {} column {name}", r + 1), format!("'{}' is not a number", row[i]))
                })
            })
            .collect()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| Error::invalid("csv", e.to_string());
        w.write_record(&self.header).map_err(to_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(to_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid("csv", e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid("csv", e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_csv_string()?;
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv {
            path: path.to_owned(),
            source,
        };
        let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
        let header = reader.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()
            .map_err(csv_err)?;
        Ok(CsvTable { header, rows })
    }
}

/// Writes `log` to `path` as CSV.
pub fn write_csv(log: &SimLog, path: impl AsRef<Path>) -> Result<()> {
    CsvTable::from_log(log).write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_log_is_header_only() {
        let table = CsvTable::from_log(&SimLog::new(4));
        let text = table.to_csv_string().unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("t,x,y,z,"));
        assert!(text.trim_end().ends_with("mode,alloc_residual,iterations"));
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(num(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(num(-1234.5), "-1.23450000e3");
        assert_eq!(num(0.0), "0.00000000e0");
        assert_eq!("3.33333333e-1".parse::<f64>().unwrap(), 0.333333333);
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let table = CsvTable {
            header: vec!["t".into(), "mode".into()],
            rows: vec![vec![num(0.0), "full".into()], vec![num(0.002), "reduced-psi".into()]],
        };
        let path = dir.path().join("log.csv");
        table.write(&path).unwrap();
        let back = CsvTable::read(&path).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.column("t").unwrap(), vec![0.0, 0.002]);
        assert!(back.column("mode").is_err());
        assert!(back.column("nope").is_err());
    }

    #[test]
    fn io_errors_carry_the_path() {
        let err = CsvTable::from_log(&SimLog::new(1)).write("/nonexistent/dir/log.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/log.csv"));
        let err = CsvTable::read("/nonexistent/log.csv").unwrap_err();
        assert!(matches!(err, Error::Csv { .. }));
    }
}
