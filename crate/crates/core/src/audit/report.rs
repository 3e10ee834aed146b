//! Report file naming and serialization.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::error::{Error, Result};

/// `<experiment>_<stamp>_<seed>`
pub fn report_stem(experiment: &str, stamp: &str, seed: u64) -> String {
    format!("{experiment}_{stamp}_{seed}")
}

/// Compact UTC timestamp used in report file names.
pub fn format_stamp(t: DateTime<Utc>) -> String {
    t.format("%Y%m%dT%H%M%SZ").to_string()
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Paths of the files an experiment writes into `dir`.
#[derive(Clone, Debug)]
pub struct ReportPaths {
    pub json: PathBuf,
    pub csv: PathBuf,
}

impl ReportPaths {
    pub fn new(dir: &Path, stem: &str) -> Self {
        ReportPaths {
            json: dir.join(format!("{stem}.json")),
            csv: dir.join(format!("{stem}.csv")),
        }
    }

    /// Extra companion table, `<stem>_<part>.csv`.
    pub fn companion(&self, part: &str) -> PathBuf {
        let stem = self
            .csv
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        self.csv.with_file_name(format!("{stem}_{part}.csv"))
    }
}
