//! Output directory handling: CSV/JSON files, checksums and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use ei_core::ModelParams;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA: &str = "eisim-manifest/1";
pub const CSV_SCHEMA: &str = "eisim-csv/1";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    csv_schema: &'static str,
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    params_hash: String,
    seeds: &'a Value,
    settings: &'a Value,
    threads: usize,
    wall_time_s: f64,
    files: &'a [FileEntry],
}

/// Files written by one command. Dropping without [`Artifacts::finish`]
/// removes everything written so far.
pub struct Artifacts {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<FileEntry>,
    started: Instant,
    done: bool,
}

impl Artifacts {
    pub fn open(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), created_dir, files: Vec::new(), started: Instant::now(), done: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        // registered first so a failed write is still cleaned up
        self.files.push(FileEntry { name: name.to_string(), bytes: data.len(), sha256: hex::encode(Sha256::digest(data)) });
        fs::write(&path, data).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn csv<I>(&mut self, name: &str, header: &[String], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let data = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        self.write(name, &data)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut data = serde_json::to_vec_pretty(value)?;
        data.push(b'\n');
        self.write(name, &data)
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` and keeps the outputs.
    pub fn finish(
        mut self,
        command: &str,
        params: &ModelParams,
        seeds: &Value,
        settings: &Value,
        threads: usize,
    ) -> Result<Vec<FileEntry>> {
        let files = self.files.clone();
        let manifest = Manifest {
            schema: MANIFEST_SCHEMA,
            csv_schema: CSV_SCHEMA,
            tool: "eisim",
            version: env!("CARGO_PKG_VERSION"),
            command,
            params_hash: params.hash(),
            seeds,
            settings,
            threads,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            files: &files,
        };
        let mut data = serde_json::to_vec_pretty(&manifest)?;
        data.push(b'\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, data).with_context(|| format!("cannot write {}", path.display()))?;
        self.done = true;
        Ok(files)
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(self.dir.join(&f.name));
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
