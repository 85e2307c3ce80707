//! CSV tables, content digests and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Number with 9 significant digits, `nan`/`inf` for non-finite values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.8e}")
    }
}

/// Like [`num`], empty for `None`.
pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// In-memory CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn header(&self) -> &[&'static str] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes output files below one directory and remembers their digests.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Writes `contents` to the relative path `name` and records its digest.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.written.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(path)
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<PathBuf> {
        self.write(name, &table.render())
    }

    /// `(relative name, sha256)` of every file written so far.
    pub fn digests(&self) -> &[(String, String)] {
        &self.written
    }
}

/// Record of one run: enough to repeat it and check the outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub seeds: Vec<u64>,
    /// Resolved configuration, `(key, TOML value)`.
    pub config: Vec<(String, String)>,
    /// `(relative file name, sha256)`.
    pub outputs: Vec<(String, String)>,
}

pub const MANIFEST_FILE: &str = "manifest.toml";

impl RunManifest {
    /// Flat `key = value` text (valid TOML).
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tool.version = {:?}", self.tool_version);
        let _ = writeln!(out, "run.command = {:?}", self.command);
        let _ = writeln!(out, "run.timestamp = {}", self.timestamp);
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "run.seeds = [{}]", seeds.join(", "));
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{k} = {v}");
        }
        for (name, digest) in &self.outputs {
            let _ = writeln!(out, "outputs.{name:?} = {digest:?}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        let section = |name: &str| -> Result<&toml::Table> {
            table
                .get(name)
                .and_then(|v| v.as_table())
                .ok_or_else(|| Error::Config(format!("manifest: missing `{name}` section")))
        };
        let string = |t: &toml::Table, k: &str| -> Result<String> {
            t.get(k)
                .and_then(|v| v.as_str())
                .map(str::to_string)
                .ok_or_else(|| Error::Config(format!("manifest: missing string `{k}`")))
        };
        let tool = section("tool")?;
        let run = section("run")?;
        let seeds = run
            .get("seeds")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Config("manifest: missing `run.seeds`".into()))?
            .iter()
            .map(|v| {
                v.as_integer()
                    .and_then(|i| u64::try_from(i).ok())
                    .ok_or_else(|| Error::Config("manifest: seeds must be non-negative integers".into()))
            })
            .collect::<Result<Vec<u64>>>()?;
        let mut config = Vec::new();
        flatten("", section("config")?, &mut config);
        let outputs = section("outputs")?
            .iter()
            .map(|(k, v)| {
                v.as_str()
                    .map(|d| (k.clone(), d.to_string()))
                    .ok_or_else(|| Error::Config(format!("manifest: digest of `{k}` is not a string")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tool_version: string(tool, "version")?,
            command: string(run, "command")?,
            timestamp: run
                .get("timestamp")
                .and_then(|v| v.as_integer())
                .and_then(|i| u64::try_from(i).ok())
                .unwrap_or(0),
            seeds,
            config,
            outputs,
        })
    }

    /// The configuration section as a configuration document.
    pub fn config_document(&self) -> String {
        self.config.iter().fold(String::new(), |mut out, (k, v)| {
            let _ = writeln!(out, "{k} = {v}");
            out
        })
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.to_string())),
        }
    }
}

pub fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
