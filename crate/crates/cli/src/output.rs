use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("csv encoding failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Collects named tables and writes them either as one CSV file per table or
/// as a single JSON document, into a directory or to stdout.
pub struct Output {
    dir: Option<PathBuf>,
    format: Format,
    report_name: &'static str,
    csv_tables: Vec<(String, Vec<u8>)>,
    json: Map<String, Value>,
}

impl Output {
    pub fn new(dir: Option<PathBuf>, format: Format, report_name: &'static str) -> Self {
        Output { dir, format, report_name, csv_tables: Vec::new(), json: Map::new() }
    }

    pub fn table<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), OutputError> {
        match self.format {
            Format::Csv => {
                let mut writer = csv::Writer::from_writer(Vec::new());
                for row in rows {
                    writer.serialize(row)?;
                }
                let bytes = writer
                    .into_inner()
                    .map_err(|e| e.into_error())
                    .map_err(|e| OutputError::Io { path: name.to_owned(), source: e })?;
                self.csv_tables.push((name.to_owned(), bytes));
            }
            Format::Json => {
                self.json.insert(name.to_owned(), serde_json::to_value(rows)?);
            }
        }
        Ok(())
    }

    /// A scalar entry; JSON output only, CSV tables carry everything else.
    pub fn value<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), OutputError> {
        if self.format == Format::Json {
            self.json.insert(name.to_owned(), serde_json::to_value(value)?);
        }
        Ok(())
    }

    pub fn finish(self) -> Result<Vec<PathBuf>, OutputError> {
        let mut written = Vec::new();
        match (self.format, &self.dir) {
            (Format::Csv, Some(dir)) => {
                create_dir(dir)?;
                for (name, bytes) in &self.csv_tables {
                    let path = dir.join(format!("{name}.csv"));
                    write_file(&path, bytes)?;
                    written.push(path);
                }
            }
            (Format::Csv, None) => {
                let mut out = Vec::new();
                for (k, (name, bytes)) in self.csv_tables.iter().enumerate() {
                    if k > 0 {
                        out.push(b'\n');
                    }
                    out.extend_from_slice(format!("# {name}\n").as_bytes());
                    out.extend_from_slice(bytes);
                }
                write_stdout(&out)?;
            }
            (Format::Json, dir) => {
                let mut text = serde_json::to_vec_pretty(&Value::Object(self.json))?;
                text.push(b'\n');
                match dir {
                    Some(dir) => {
                        create_dir(dir)?;
                        let path = dir.join(format!("{}.json", self.report_name));
                        write_file(&path, &text)?;
                        written.push(path);
                    }
                    None => write_stdout(&text)?,
                }
            }
        }
        Ok(written)
    }
}

fn create_dir(dir: &PathBuf) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.display().to_string(), source })
}

pub fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), OutputError> {
    fs::write(path, bytes).map_err(|source| OutputError::Io { path: path.display().to_string(), source })
}

pub fn write_stdout(bytes: &[u8]) -> Result<(), OutputError> {
    let mut stdout = io::stdout().lock();
    stdout
        .write_all(bytes)
        .and_then(|_| stdout.flush())
        .map_err(|source| OutputError::Io { path: "<stdout>".into(), source })
}
