use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// Run record embedded as `# ` comment lines at the top of every output.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub inputs: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, seed: Option<u64>) -> Self {
        Self { command: command.to_string(), args, seed, version: env!("CARGO_PKG_VERSION"), inputs: Vec::new() }
    }

    /// Reads `path`, records its digest, and returns the contents.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs.push((path.display().to_string(), hex::encode(Sha256::digest(&bytes))));
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8 text", path.display()))
    }

    pub fn lines(&self) -> Vec<String> {
        let mut lines = vec![format!("command: {}", self.command), format!("args: {}", self.args.join(" "))];
        if let Some(seed) = self.seed {
            lines.push(format!("seed: {seed}"));
        }
        lines.push(format!("version: srcloc {}", self.version));
        for (path, digest) in &self.inputs {
            lines.push(format!("input: {path} sha256:{digest}"));
        }
        lines
    }

    pub fn header(&self) -> String {
        let mut out = String::new();
        for line in self.lines() {
            writeln!(out, "# {line}").unwrap();
        }
        out
    }
}

/// Process arguments after the program name, minus `--threads` (which
/// must not change outputs).
pub fn echoed_args() -> Vec<String> {
    let mut out = Vec::new();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        if a == "--threads" {
            args.next();
        } else if !a.starts_with("--threads=") {
            out.push(a);
        }
    }
    out
}
