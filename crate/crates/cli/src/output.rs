use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::Failure;

pub const SCHEMA_VERSION: u32 = 1;

/// CSV file whose first line is `# transport-spectra <kind> v<version>`.
pub struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(dir: &Path, name: &str, kind: &str, header: &[&str]) -> Result<Self, Failure> {
        let path = dir.join(name);
        let mut file = BufWriter::new(File::create(&path).map_err(|e| Failure::io(&path, e))?);
        writeln!(file, "# transport-spectra {kind} v{SCHEMA_VERSION}")
            .map_err(|e| Failure::io(&path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer
            .write_record(header)
            .map_err(|e| Failure::Io(e.to_string()))?;
        Ok(CsvOut { writer })
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<(), Failure>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| Failure::Io(e.to_string()))
    }

    pub fn finish(mut self) -> Result<(), Failure> {
        self.writer.flush().map_err(|e| Failure::Io(e.to_string()))
    }
}

/// Shortest round-trip representation, so output bytes depend only on the values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let path: PathBuf = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Failure::io(&path, e))
}
