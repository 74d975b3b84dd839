//! Artifacts with provenance, written atomically.

use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::config::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum Body {
    Csv(String),
    Json(Value),
}

#[derive(Debug)]
pub struct Artifact {
    pub command: &'static str,
    pub seed: u64,
    pub params: Value,
    pub body: Body,
}

impl Artifact {
    /// CSV gets `#` comment lines ahead of the header (the library parsers
    /// skip them); JSON wraps the result in a provenance object.
    pub fn render(&self) -> String {
        match &self.body {
            Body::Csv(text) => {
                let params = serde_json::to_string(&self.params).expect("params serialize");
                format!(
                    "# gasfee {VERSION} command={} seed={}\n# params {params}\n{text}",
                    self.command, self.seed
                )
            }
            Body::Json(result) => {
                let doc = serde_json::json!({
                    "provenance": {
                        "tool": "gasfee",
                        "version": VERSION,
                        "command": self.command,
                        "seed": self.seed,
                        "params": self.params,
                    },
                    "result": result,
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("artifact serializes");
                s.push('\n');
                s
            }
        }
    }
}

pub fn emit(artifact: &Artifact, out: Option<&Path>) -> Result<(), CliError> {
    let text = artifact.render();
    match out {
        None => write_stdout(&text),
        Some(path) => write_atomic(path, text.as_bytes()),
    }
}

pub fn write_stdout(text: &str) -> Result<(), CliError> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

/// Temp file in the destination directory, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
