//! Run directories: `manifest.json`, `series.csv`, `snapshots/t_<time>.csv`
//! and experiment-specific tables, each listed in the manifest with its
//! SHA-256 checksum.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use chnls_core::soliton::AppliedBoost;
use chnls_core::{Complex64, Grid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::harness::{Derived, Summary};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SERIES_FILE: &str = "series.csv";
pub const SERIES_HEADER: &str = "t,peak_pos_1,peak_amp_1,peak_pos_2,peak_amp_2,q_functional,l2_vs_reference";
pub const SNAPSHOT_HEADER: &str = "x,re_psi,im_psi,density";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Path relative to the run directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

impl Default for Software {
    fn default() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Provenance record of one run. Lists every emitted file except itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: Software,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub config: RunConfig,
    pub derived: Derived,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub applied_boost: Option<AppliedBoost>,
    pub summary: Summary,
    pub started_unix: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn new(config: RunConfig, derived: Derived) -> Self {
        Self {
            software: Software::default(),
            status: RunStatus::Running,
            message: None,
            config,
            derived,
            applied_boost: None,
            summary: Summary::None,
            started_unix: unix_now(),
            finished_unix: None,
            wall_clock_seconds: None,
            files: Vec::new(),
        }
    }

    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// One row of `series.csv`; `None` is written as an empty cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub peaks: [Option<(f64, f64)>; 2],
    pub q_functional: Option<f64>,
    pub l2_vs_reference: Option<f64>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            cell(r.peaks[0].map(|p| p.0)),
            cell(r.peaks[0].map(|p| p.1)),
            cell(r.peaks[1].map(|p| p.0)),
            cell(r.peaks[1].map(|p| p.1)),
            cell(r.q_functional),
            cell(r.l2_vs_reference),
        );
    }
    out
}

/// Snapshot table over the nodes with `x` in `window` (all nodes if `None`).
pub fn snapshot_csv(grid: &Grid, values: &[Complex64], window: Option<[f64; 2]>) -> String {
    let mut out = String::with_capacity(64 * values.len());
    out.push_str(SNAPSHOT_HEADER);
    out.push('\n');
    for (j, v) in values.iter().enumerate() {
        let x = grid.node(j);
        if window.is_some_and(|w| x < w[0] || x > w[1]) {
            continue;
        }
        let _ = writeln!(out, "{},{},{},{}", x, v.re, v.im, v.norm_sqr());
    }
    out
}

/// `snapshots/t_<time>.csv` with four decimals in the time stamp.
pub fn snapshot_name(dir: &str, t: f64) -> String {
    format!("{dir}/t_{t:.4}.csv")
}

/// Writes files into a run directory, tracking them for the manifest.
///
/// The manifest is written with status `running` on creation and rewritten by
/// [`OutputWriter::finalize`]. [`OutputWriter::abort`] removes every file
/// this writer created.
#[derive(Debug)]
pub struct OutputWriter {
    dir: PathBuf,
    records: Vec<FileRecord>,
    created_dirs: Vec<PathBuf>,
}

impl OutputWriter {
    pub fn create(dir: &Path, manifest: &RunManifest) -> std::io::Result<Self> {
        let mut created_dirs = Vec::new();
        let mut missing = Vec::new();
        let mut probe = dir.to_path_buf();
        while !probe.as_os_str().is_empty() && !probe.exists() {
            missing.push(probe.clone());
            if !probe.pop() {
                break;
            }
        }
        fs::create_dir_all(dir)?;
        created_dirs.extend(missing);
        let writer = Self {
            dir: dir.to_path_buf(),
            records: Vec::new(),
            created_dirs,
        };
        writer.write_manifest(manifest)?;
        Ok(writer)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.records
    }

    pub fn write_file(&mut self, relative: &str, contents: &[u8]) -> std::io::Result<()> {
        let path = self.dir.join(relative);
        if let Some(parent) = path.parent() {
            if !parent.exists() {
                fs::create_dir_all(parent)?;
                self.created_dirs.push(parent.to_path_buf());
            }
        }
        fs::write(&path, contents)?;
        self.records.push(FileRecord {
            path: relative.to_string(),
            bytes: contents.len() as u64,
            sha256: hex(&Sha256::digest(contents)),
        });
        Ok(())
    }

    fn write_manifest(&self, manifest: &RunManifest) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST_FILE), text)
    }

    /// Stamps the file list and timing into `manifest` and writes it. A
    /// manifest still marked running is marked completed.
    pub fn finalize(self, manifest: &mut RunManifest) -> std::io::Result<PathBuf> {
        if manifest.status == RunStatus::Running {
            manifest.status = RunStatus::Completed;
        }
        let now = unix_now();
        manifest.finished_unix = Some(now);
        manifest.wall_clock_seconds = Some((now - manifest.started_unix).max(0.0));
        manifest.files = self.records.clone();
        self.write_manifest(manifest)?;
        Ok(self.dir.join(MANIFEST_FILE))
    }

    /// Removes everything this writer created, including the manifest.
    pub fn abort(self) {
        for r in &self.records {
            let _ = fs::remove_file(self.dir.join(&r.path));
        }
        let _ = fs::remove_file(self.dir.join(MANIFEST_FILE));
        for d in self.created_dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// One recorded field for [`write_outputs`].
#[derive(Debug, Clone)]
pub struct Snapshot<'a> {
    pub t: f64,
    pub grid: &'a Grid,
    pub values: &'a [Complex64],
}

/// Writes a complete run directory in one go: the series (skipped when
/// empty), one file per snapshot and the finalized manifest. On an I/O error
/// the files written so far are removed.
pub fn write_outputs(
    dir: &Path,
    manifest: &mut RunManifest,
    series: &[SeriesRow],
    snapshots: &[Snapshot<'_>],
    window: Option<[f64; 2]>,
) -> std::io::Result<PathBuf> {
    let mut writer = OutputWriter::create(dir, manifest)?;
    let result = (|| {
        if !series.is_empty() {
            writer.write_file(SERIES_FILE, series_csv(series).as_bytes())?;
        }
        for s in snapshots {
            let name = snapshot_name("snapshots", s.t);
            writer.write_file(&name, snapshot_csv(s.grid, s.values, window).as_bytes())?;
        }
        Ok(())
    })();
    match result {
        Ok(()) => writer.finalize(manifest),
        Err(e) => {
            writer.abort();
            Err(e)
        }
    }
}
