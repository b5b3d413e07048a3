//! Output-directory handling for run artifacts.
//!
//! Every subcommand writes its results as files under a single output
//! directory (`--out-dir`, default: current directory).  JSON artifacts go
//! through the toolkit's canonical renderer — sorted keys, fixed float
//! formatting, trailing newline — so re-running a command with the same
//! inputs reproduces every artifact byte for byte.

use std::path::{Path, PathBuf};

use mirrorchain_core::jsonfmt;

use crate::error::CliError;

/// Writer for a run's output directory.
pub struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    /// Creates the output directory (and parents) if needed.
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| {
            CliError::Module(format!("cannot create output directory {}: {e}", dir.display()))
        })?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Module(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// Writes a JSON artifact in canonical form.
    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf, CliError> {
        self.write(name, jsonfmt::render(value).as_bytes())
    }

    /// Writes a text artifact (CSV, pre-rendered JSON) as-is.
    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        self.write(name, text.as_bytes())
    }
}
