use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::{OutputConfig, OutputFormat};
use crate::error::{CliError, CliResult};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed six-decimal rendering used in every CSV column.
pub fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

pub fn fmt6_opt(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

/// Data rendered as either a JSON document or CSV rows.
pub trait Tabular: Serialize {
    fn csv_header() -> &'static [&'static str];
    fn csv_rows(&self) -> Vec<Vec<String>>;
}

pub fn render<T: Tabular>(data: &T, format: OutputFormat) -> CliResult<Vec<u8>> {
    match format {
        OutputFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(data).map_err(|e| CliError::Other(e.to_string()))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| CliError::Other(e.to_string());
            w.write_record(T::csv_header()).map_err(csv_err)?;
            for row in data.csv_rows() {
                w.write_record(&row).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| CliError::Other(e.to_string()))
        }
    }
}

/// Writes the data to the configured path, or to stdout when there is none.
pub fn emit<T: Tabular>(data: &T, out: &OutputConfig) -> CliResult<()> {
    let bytes = render(data, out.format)?;
    match &out.path {
        Some(path) => write_file(path, &bytes),
        None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io = |e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}
