//! Benchmark harness: loads a model, runs reduction algorithms over a list
//! of degrees and writes summary, history, ROM and Bode files.

pub mod bode;
pub mod config;
pub mod harness;
pub mod model;
pub mod rom_io;

use serde::{Deserialize, Serialize};

pub use bode::{emit_bode, BodeRow};
pub use config::{Algorithm, ExperimentConfig, ModelDescriptor, Overrides};
pub use harness::{run_experiment, Report, ResultRow, SUMMARY_HEADER};
pub use model::load_model;
pub use rom_io::RomFile;

use h2mor::Complex64;

/// Complex number serialized as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex(pub f64, pub f64);

impl From<Complex> for Complex64 {
    fn from(c: Complex) -> Self {
        Complex64::new(c.0, c.1)
    }
}

impl From<Complex64> for Complex {
    fn from(c: Complex64) -> Self {
        Complex(c.re, c.im)
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Model(h2mor::Error),
    /// Every run of the experiment failed.
    AllRunsFailed(usize),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Model(e) => write!(f, "model error: {e}"),
            CliError::AllRunsFailed(n) => write!(f, "all {n} runs failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    /// 1 when the algorithms failed, 2 for configuration and i/o problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::AllRunsFailed(_) => 1,
            _ => 2,
        }
    }
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("{}: not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
