use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Collects output files and timings; the manifest is written last.
pub struct Outputs {
    dir: PathBuf,
    prefix: String,
    files: Vec<String>,
    timings: Vec<Timing>,
    started: Instant,
}

#[derive(Debug, Serialize)]
struct Timing {
    operation: String,
    seconds: f64,
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    artifact_version: &'a str,
    experiment: &'a str,
    seed: Option<u64>,
    config_sha256: String,
    wall_clock_seconds: f64,
    timings: &'a [Timing],
    outputs: Vec<FileDigest>,
}

/// Shortest round-trip text for a float, with exponents for extremes.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Outputs {
    pub fn new(dir: &Path, prefix: &str) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            files: Vec::new(),
            timings: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{}{name}", self.prefix))
    }

    pub fn timed<T>(&mut self, operation: &str, f: impl FnOnce() -> Result<T, CliError>) -> Result<T, CliError> {
        let t = Instant::now();
        let out = f()?;
        self.timings.push(Timing {
            operation: operation.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io(e.to_string()))?;
        w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
        for r in rows {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes)?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        std::fs::write(&path, body)?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn finish(self, experiment: &str, seed: Option<u64>, config: &[u8]) -> Result<(), CliError> {
        let mut outputs = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let file = format!("{}{name}", self.prefix);
            let bytes = std::fs::read(self.dir.join(&file))?;
            outputs.push(FileDigest {
                path: file,
                sha256: sha256_hex(&bytes),
            });
        }
        let manifest = Manifest {
            artifact_version: env!("CARGO_PKG_VERSION"),
            experiment,
            seed,
            config_sha256: sha256_hex(config),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            timings: &self.timings,
            outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        bytes.push(b'\n');
        std::fs::write(self.dir.join(format!("{}manifest.json", self.prefix)), bytes)?;
        Ok(())
    }
}
