//! Row serialization. CSV is the canonical figure-data format; JSON
//! mirrors the same records for programmatic consumers. Floats are
//! written in shortest round-trip form, so re-parsing an output file
//! recovers the exact values.

use crate::config::{ConfigError, OutputFormat};
use crate::runner::Row;
use std::fs;
use std::path::{Path, PathBuf};

fn io_err(path: &Path, source: std::io::Error) -> ConfigError {
    ConfigError::Io { path: path.to_path_buf(), source }
}

/// Writes `<base>.csv` / `<base>.json` per the requested format and
/// returns the paths written.
pub fn write_outputs(
    base: &Path,
    format: OutputFormat,
    rows: &[Row],
) -> Result<Vec<PathBuf>, ConfigError> {
    if let Some(parent) = base.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
    }
    let mut written = Vec::new();

    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        let path = base.with_extension("csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| {
            ConfigError::Invalid(format!("cannot open {}: {e}", path.display()))
        })?;
        for row in rows {
            w.serialize(row)
                .map_err(|e| ConfigError::Invalid(format!("csv write failed: {e}")))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        written.push(path);
    }

    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        let path = base.with_extension("json");
        let mut text = serde_json::to_string_pretty(rows)
            .map_err(|e| ConfigError::Invalid(format!("json encode failed: {e}")))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }

    Ok(written)
}
