use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use xxhash_rust::xxh3::xxh3_64;

#[derive(Debug, Serialize)]
struct InputRecord {
    path: String,
    bytes: u64,
    xxh3: String,
}

/// Machine-readable record of one run: what went in, how it was
/// configured, and what came out. Deterministic apart from `timing`.
#[derive(Debug, Serialize)]
pub struct Provenance {
    tool: &'static str,
    cli_version: &'static str,
    library_version: &'static str,
    subcommand: &'static str,
    pub config: Value,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<Value>,
}

impl Provenance {
    pub fn new(subcommand: &'static str, config: &impl Serialize) -> Result<Self> {
        Ok(Provenance {
            tool: "qprune",
            cli_version: env!("CARGO_PKG_VERSION"),
            library_version: qprune::VERSION,
            subcommand,
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timing: None,
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let data = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            bytes: data.len() as u64,
            xxh3: format!("{:016x}", xxh3_64(&data)),
        });
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn timing(&mut self, timing: Value) -> &mut Self {
        self.timing = Some(timing);
        self
    }

    /// Write beside `primary`: `<primary>.provenance.json`, or
    /// `<primary>/provenance.json` when `primary` is a directory.
    pub fn write_beside(&self, primary: &Path) -> Result<PathBuf> {
        let path = if primary.is_dir() {
            primary.join("provenance.json")
        } else {
            let mut name = primary.as_os_str().to_owned();
            name.push(".provenance.json");
            PathBuf::from(name)
        };
        let json = serde_json::to_string_pretty(self)?;
        fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Fail early, before any work, if an input is missing.
pub fn require_inputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            anyhow::bail!("input file not found: {}", p.display());
        }
    }
    Ok(())
}
