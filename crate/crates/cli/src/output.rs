//! CSV files and number formatting shared by all subcommands.

use std::path::{Path, PathBuf};

use crate::error::CliResult;

/// 17 significant digits, round-trippable.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn flag(b: bool) -> String {
    if b { "true" } else { "false" }.into()
}

/// A CSV file held in memory until written.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner()
            .map_err(|e| crate::error::CliError::validation(format!("csv: {e}")))
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, self.to_bytes()?)?;
        Ok(path)
    }
}

/// `(source, h)` rows for a strategy, sources numbered from 1.
pub fn hedge_table(name: impl Into<String>, h: &[f64]) -> Table {
    let mut t = Table::new(name, &["source", "h"]);
    for (i, v) in h.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), num(*v)]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, -1.5, 1.0 / 3.0, 1e-300, 6.02e23, f64::MAX] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(0.25), "2.5000000000000000e-1");
    }

    #[test]
    fn header_and_crlf() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec!["1".into(), "two, three".into()]);
        let s = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(s, "a,b\r\n1,\"two, three\"\r\n");
    }
}
