//! File plumbing: return-series ingestion, atomic writes and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::stats::{ReturnSeries, SeriesSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IngestFormat {
    /// `plain` if the first data line has no comma, `dated` otherwise.
    Auto,
    /// One return per line.
    Plain,
    /// `date,return`; the date is ignored.
    Dated,
}

impl FromStr for IngestFormat {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(IngestFormat::Auto),
            "plain" => Ok(IngestFormat::Plain),
            "dated" => Ok(IngestFormat::Dated),
            _ => Err(LabError::Parse {
                what: "ingest format",
                input: s.to_string(),
            }),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LabError + '_ {
    move |source| LabError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a return series. The first non-blank line may be a header; blank
/// lines and `#` comments are skipped; any other unparsable value fails with
/// its line number.
pub fn ingest_returns(path: &Path, format: IngestFormat) -> Result<ReturnSeries> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_returns(&text, path, format)
}

pub fn parse_returns(text: &str, path: &Path, format: IngestFormat) -> Result<ReturnSeries> {
    let mut returns = Vec::new();
    let mut resolved = match format {
        IngestFormat::Auto => None,
        f => Some(f),
    };
    let mut seen_first = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let first = !seen_first;
        seen_first = true;
        let fmt = *resolved.get_or_insert(if line.contains(',') {
            IngestFormat::Dated
        } else {
            IngestFormat::Plain
        });
        let field = match fmt {
            IngestFormat::Dated => match line.split(',').map(str::trim).collect::<Vec<_>>()[..] {
                [_, value] => Some(value),
                _ => None,
            },
            _ => Some(line),
        };
        match field.and_then(|f| f.parse::<f64>().ok()).filter(|v| v.is_finite()) {
            Some(v) => returns.push(v),
            None if first => {} // header
            None => {
                return Err(LabError::NonNumeric {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    text: raw.to_string(),
                })
            }
        }
    }
    if returns.is_empty() {
        return Err(LabError::NoValidRows {
            path: path.to_path_buf(),
        });
    }
    ReturnSeries::new(returns, SeriesSource::Ingested)
}

/// Writes via a temporary sibling and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| LabError::precondition(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to re-run a subcommand and reproduce its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Arguments after the program name, without `--out`.
    pub argv: Vec<String>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|_| LabError::Parse {
            what: "run manifest",
            input: path.display().to_string(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        write_atomic(&path, json.as_bytes())?;
        Ok(path)
    }
}
