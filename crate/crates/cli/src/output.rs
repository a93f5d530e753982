//! Output files. Every JSON document carries the resolved config, its hash
//! and the seed-reuse flag; CSV files carry data only.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{CliError, Experiment};

/// Version of every CSV and JSON schema written by this tool.
pub const SCHEMA_VERSION: u32 = 1;

const SEED_REGISTRY: &str = ".dmera-seeds.json";

/// Metadata block embedded in every JSON output.
#[derive(Serialize)]
pub struct Meta<'a, T: Serialize> {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub config_hash: String,
    /// The same seed was used before in this directory with another config.
    pub seed_reused: bool,
    pub workers: usize,
    pub experiment: &'a Experiment<T>,
}

pub struct OutDir {
    pub path: PathBuf,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(path)?;
        Ok(OutDir { path: path.to_path_buf() })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let p = self.path.join(name);
        std::fs::write(&p, contents)?;
        Ok(p)
    }

    pub fn write_json<S: Serialize>(&self, name: &str, value: &S) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    /// Records `(seed, hash)` and reports whether the seed was already
    /// used with a different config hash.
    pub fn register_seed(&self, seed: u64, hash: &str) -> Result<bool, CliError> {
        let p = self.path.join(SEED_REGISTRY);
        let mut reg: BTreeMap<String, Vec<String>> = match std::fs::read_to_string(&p) {
            Ok(s) => serde_json::from_str(&s).unwrap_or_default(),
            Err(_) => BTreeMap::new(),
        };
        let entry = reg.entry(seed.to_string()).or_default();
        let reused = entry.iter().any(|h| h != hash);
        if !entry.iter().any(|h| h == hash) {
            entry.push(hash.to_string());
        }
        std::fs::write(&p, serde_json::to_string_pretty(&reg)?)?;
        Ok(reused)
    }
}

/// Builds the metadata block and registers the seed.
pub fn meta<'a, T: Serialize>(out: &OutDir, exp: &'a Experiment<T>, workers: usize) -> Result<Meta<'a, T>, CliError> {
    let config_hash = exp.hash();
    let seed_reused = out.register_seed(exp.seed, &config_hash)?;
    if seed_reused {
        eprintln!("warning: seed {} was used in this directory with a different config", exp.seed);
    }
    Ok(Meta {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        config_hash,
        seed_reused,
        workers,
        experiment: exp,
    })
}

/// Minimal CSV writer for numeric tables (no quoting needed).
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Shortest round-trip representation; empty for missing values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
