//! Atomic artifact writing and run manifests.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use indexmap::IndexMap;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Writes through a temp file in the destination directory and renames it
/// into place only after `fill` succeeds.
pub fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::output(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().map_err(|e| CliError::output(path, e))?;
    }
    tmp.persist(path)
        .map_err(|e| CliError::output(path, e.error))?;
    Ok(())
}

/// Sends `fill` to `out` atomically, or to stdout when no path is given.
pub fn emit(
    out: Option<&Path>,
    fill: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, fill),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            fill(&mut lock)?;
            lock.flush()
                .map_err(|e| CliError::output(Path::new("<stdout>"), e))
        }
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let file = File::open(path).map_err(|e| CliError::input(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = reader
            .read(&mut buf)
            .map_err(|e| CliError::input(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: IndexMap<String, String>,
    pub outputs: IndexMap<String, String>,
    pub tool_version: &'static str,
    pub wall_clock_seconds: f64,
}

/// Collects what a run read and wrote, for its manifest.
pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_owned(),
            config,
            inputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Writes the manifest to `dest`, digesting every input and `outputs`.
    pub fn write(self, dest: &Path, outputs: &[&Path]) -> Result<(), CliError> {
        let digest_all = |paths: &mut dyn Iterator<Item = &Path>| {
            paths
                .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
                .collect::<Result<IndexMap<_, _>, CliError>>()
        };
        let manifest = RunManifest {
            command: self.command,
            config: self.config,
            inputs: digest_all(&mut self.inputs.iter().map(PathBuf::as_path))?,
            outputs: digest_all(&mut outputs.iter().copied())?,
            tool_version: env!("CARGO_PKG_VERSION"),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        write_atomic(dest, |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest).map_err(CliError::internal)?;
            writeln!(w).map_err(|e| CliError::output(dest, e))
        })
    }
}

/// `results.jsonl` -> `results.jsonl.manifest.json`
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
