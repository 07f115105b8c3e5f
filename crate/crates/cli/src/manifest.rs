//! Run manifests: one JSON document per invocation echoing the effective
//! configuration, the files written and a short summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

pub const SCHEMA: &str = "amite-run-manifest";
pub const SCHEMA_VERSION: u32 = 1;

pub struct Manifest {
    command: &'static str,
    config: Map<String, Value>,
    outputs: Vec<String>,
    summary: Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &'static str) -> Self {
        Manifest {
            command,
            config: Map::new(),
            outputs: Vec::new(),
            summary: Map::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.config.insert(key.to_string(), value.into());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn summary(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.summary.insert(key.to_string(), value.into());
        self
    }

    pub fn to_json(&self, threads: Option<usize>, runtime_s: Option<f64>) -> Value {
        json!({
            "schema": SCHEMA,
            "schema_version": SCHEMA_VERSION,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "threads": threads,
            "config": self.config,
            "outputs": self.outputs,
            "summary": self.summary,
            "runtime_s": runtime_s,
        })
    }

    /// Writes to `path`, or to stderr when there is none.
    pub fn write(&self, path: Option<&Path>, threads: Option<usize>, runtime_s: Option<f64>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.to_json(threads, runtime_s))?;
        text.push('\n');
        match path {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing manifest {}", p.display())),
            None => {
                std::io::stderr().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }
}

/// Explicit manifest path, else `<out>.manifest.json` next to the output.
pub fn default_path(explicit: Option<&Path>, out: Option<&Path>) -> Option<PathBuf> {
    explicit.map(Path::to_path_buf).or_else(|| {
        out.map(|o| {
            let mut name = o.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            o.with_file_name(name)
        })
    })
}
