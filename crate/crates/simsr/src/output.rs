//! CSV and JSON writers.
//!
//! Reals are written in the shortest form that parses back to the same bits, `NaN` for
//! values that do not apply, and an empty field for values that were not
//! computed. Output is a pure function of config and seed.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

pub fn real(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

/// A CSV file with a fixed header.
#[derive(Debug)]
pub struct CsvFile {
    path: PathBuf,
    writer: csv::Writer<File>,
    columns: usize,
}

impl CsvFile {
    pub fn create(path: impl Into<PathBuf>, header: &[&str]) -> Result<Self> {
        let path = path.into();
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = Self { writer: csv::Writer::from_writer(file), path, columns: header.len() };
        out.row(header.iter().map(|s| s.to_string()))?;
        Ok(out)
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<()> {
        let fields: Vec<String> = fields.into_iter().collect();
        debug_assert_eq!(fields.len(), self.columns, "{}", self.path.display());
        self.writer.write_record(&fields).map_err(|e| self.error(e))
    }

    pub fn finish(mut self) -> Result<()> {
        let path = self.path.clone();
        self.writer.flush().map_err(|e| CliError::io(path, e))
    }

    fn error(&self, e: csv::Error) -> CliError {
        let source = match e.into_kind() {
            csv::ErrorKind::Io(io) => io,
            other => std::io::Error::other(format!("{other:?}")),
        };
        CliError::io(&self.path, source)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::validation)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// `<dir>/<stem>_seed<seed>.<ext>`
pub fn seeded_path(dir: &Path, stem: &str, seed: u64, ext: &str) -> PathBuf {
    dir.join(format!("{stem}_seed{seed}.{ext}"))
}
