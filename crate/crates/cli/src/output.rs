//! JSON emission, run manifests and output routing.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Writes every float with 17 significant digits.
struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::io(format!("cannot serialize output: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| CliError::io(e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub tool_version: &'static str,
    pub config: Option<String>,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputDigest>,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
}

/// Collects manifest fields while a command runs.
pub struct Run {
    manifest: RunManifest,
    started: Instant,
    out: Option<PathBuf>,
    manifest_path: Option<PathBuf>,
}

impl Run {
    pub fn new(command: &str, out: Option<PathBuf>, manifest_path: Option<PathBuf>) -> Self {
        let started_unix_seconds = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Run {
            manifest: RunManifest {
                command: command.to_string(),
                arguments: std::env::args().skip(1).collect(),
                tool_version: env!("CARGO_PKG_VERSION"),
                config: None,
                seeds: Vec::new(),
                inputs: Vec::new(),
                started_unix_seconds,
                wall_clock_seconds: 0.0,
            },
            started: Instant::now(),
            out,
            manifest_path,
        }
    }

    /// Read an input file and record its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        self.manifest.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(bytes)
    }

    pub fn read_text(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = self.read_input(path)?;
        String::from_utf8(bytes).map_err(|_| CliError::data(format!("{} is not UTF-8 text", path.display())))
    }

    pub fn set_config(&mut self, text: String) {
        self.manifest.config = Some(text);
    }

    pub fn add_seed(&mut self, seed: u64) {
        self.manifest.seeds.push(seed);
    }

    /// Write the primary output to `--out` or stdout.
    pub fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(p) => write_file(p, text),
            None => {
                let mut stdout = io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .and_then(|_| stdout.flush())
                    .map_err(|e| CliError::io(format!("cannot write output: {e}")))
            }
        }
    }

    /// Manifest goes to `--manifest`, next to `--out`, or to stderr.
    pub fn finish(mut self) -> Result<(), CliError> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let text = to_json(&self.manifest)?;
        let path = self.manifest_path.clone().or_else(|| {
            self.out.as_ref().map(|p| {
                let mut s = p.clone().into_os_string();
                s.push(".manifest.json");
                PathBuf::from(s)
            })
        });
        match path {
            Some(p) => write_file(&p, &text),
            None => {
                eprint!("{text}");
                Ok(())
            }
        }
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

/// CSV cell for an optional float: shortest round-trip form or `NA`.
pub fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:?}"),
        _ => "NA".to_string(),
    }
}
