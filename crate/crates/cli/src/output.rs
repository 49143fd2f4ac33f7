use std::env;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;

/// Relative output paths are resolved under this directory when it is set.
pub const OUTPUT_DIR_ENV: &str = "SIMDR_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn resolve_output(path: &Path) -> PathBuf {
    match env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

pub fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn render<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row)?;
            }
            Ok(w.into_inner().map_err(|e| e.into_error())?)
        }
        Format::Json => {
            let mut buf = serde_json::to_vec_pretty(rows)?;
            buf.push(b'\n');
            Ok(buf)
        }
    }
}

/// Writes `rows` as CSV (with header) or as a JSON array of flat objects, to
/// `out` or to stdout.
pub fn emit<T: Serialize>(rows: &[T], format: Format, out: Option<&Path>) -> Result<()> {
    let bytes = render(rows, format)?;
    match out {
        Some(path) => {
            let path = resolve_output(path);
            create_parent(&path)?;
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(&bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        #[serde(rename = "b@1")]
        b: f64,
    }

    #[test]
    fn csv_and_json_share_columns() {
        let rows = [Row { a: 1, b: 0.25 }, Row { a: 2, b: 2.0 }];
        let csv = String::from_utf8(render(&rows, Format::Csv).unwrap()).unwrap();
        assert_eq!(csv, "a,b@1\n1,0.25\n2,2.0\n");
        let json: serde_json::Value = serde_json::from_slice(&render(&rows, Format::Json).unwrap()).unwrap();
        assert_eq!(json[1]["b@1"], 2.0);
    }
}
