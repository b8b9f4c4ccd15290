use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};

/// Bumped whenever a column is added, removed or reinterpreted.
pub const SCHEMA_VERSION: u32 = 1;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "NaN".into()
    }
}

/// CSV text with a leading `#schema=` line.
pub(crate) struct Table {
    name: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: Vec<String>) -> Self {
        Self {
            name,
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> Result<String> {
        let mut buf = format!("#schema={}/{}\n", self.name, SCHEMA_VERSION).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
            w.write_record(&self.header).map_err(io)?;
            for r in &self.rows {
                w.write_record(r).map_err(io)?;
            }
            w.flush().map_err(|e| Error::io(self.name, e))?;
        }
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Everything a study produces.
#[derive(Clone, Debug)]
pub struct StudyOutput {
    /// Per-dipole (or per-sample) rows. Deterministic for a fixed config.
    pub csv: String,
    /// Per-group order statistics.
    pub summary_csv: String,
    pub summary: Value,
    /// Wall-clock measurements, kept apart so `csv` stays reproducible.
    pub timings_csv: Option<String>,
    pub warnings: Vec<String>,
}

impl StudyOutput {
    /// Sidecar paths next to `out`: `<stem>.summary.csv`, `<stem>.summary.json`
    /// and `<stem>.timings.csv`.
    pub fn sidecars(out: &Path) -> [PathBuf; 3] {
        let stem = out.with_extension("");
        let s = stem.to_string_lossy();
        [
            PathBuf::from(format!("{s}.summary.csv")),
            PathBuf::from(format!("{s}.summary.json")),
            PathBuf::from(format!("{s}.timings.csv")),
        ]
    }

    /// Write the CSV and its sidecars; returns the paths written.
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let [summary_csv, summary_json, timings] = Self::sidecars(out);
        let mut files = vec![
            (out.to_path_buf(), self.csv.clone()),
            (summary_csv, self.summary_csv.clone()),
            (summary_json, serde_json::to_string_pretty(&self.summary)? + "\n"),
        ];
        if let Some(t) = &self.timings_csv {
            files.push((timings, t.clone()));
        }
        for (p, text) in &files {
            std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}
