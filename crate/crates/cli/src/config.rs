//! Config loading, hashing, seed sub-streams and exit codes.

use std::path::Path;

use dmera::Error;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Common;

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_GUARD: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: msg.into(),
        }
    }

    pub fn verify(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VERIFY,
            message: msg.into(),
        }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            message: msg.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::WindowTooLarge { .. }
            | Error::TooLarge(_)
            | Error::TargetTooLarge(_)
            | Error::AssignmentCollision { .. }
            | Error::WindowNotClosed(_) => EXIT_GUARD,
            Error::InvalidSpec(_)
            | Error::ParamCount { .. }
            | Error::NonFiniteParam { .. }
            | Error::EmptyTarget
            | Error::SiteOutOfRange { .. }
            | Error::InvalidProbability(_)
            | Error::CoordinateRange { .. }
            | Error::Parse { .. }
            | Error::NonHermitian(_) => EXIT_CONFIG,
            _ => EXIT_INTERNAL,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::internal(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::internal(format!("json: {e}"))
    }
}

/// The resolved experiment: everything that determines the outputs.
#[derive(Clone, Debug, Serialize)]
pub struct Experiment<T> {
    pub command: &'static str,
    pub seed: u64,
    pub config: T,
}

impl<T: Serialize> Experiment<T> {
    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads the config file named by `--config` (defaults when absent) and
/// applies the seed override.
pub fn load<T: DeserializeOwned + Default>(command: &'static str, common: &Common) -> Result<Experiment<T>, CliError> {
    let (seed, config) = match &common.config {
        None => (None, T::default()),
        Some(path) => read_file::<T>(path)?,
    };
    Ok(Experiment {
        command,
        seed: common.seed.or(seed).unwrap_or(0),
        config,
    })
}

fn read_file<T: DeserializeOwned>(path: &Path) -> Result<(Option<u64>, T), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    // `seed` is the only top-level key outside the command's own schema,
    // which rejects unknown keys.
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let seed = match table.remove("seed") {
        None => None,
        Some(toml::Value::Integer(s)) if s >= 0 => Some(s as u64),
        Some(v) => return Err(CliError::config(format!("seed must be a non-negative integer, got {v}"))),
    };
    let body: T = table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(format!("{}: {e}", path.display())))?;
    Ok((seed, body))
}

/// Seed of the named sub-stream `name[index]` of `root`.
///
/// Every random choice of a command draws from its own sub-stream, so
/// changing one part of a run (say the number of trajectories) leaves the
/// others (the sampled circuits) unchanged.
pub fn substream(root: u64, name: &str, index: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(name.as_bytes());
    h.update([0u8]);
    for i in index {
        h.update(i.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("32-byte digest"))
}

/// Noise model section shared by the commands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Two-qubit depolarizing probability after each gate.
    pub p_gate: f64,
    /// Single-qubit depolarizing probability after each preparation.
    pub p_prep: f64,
    /// Readout flip probability on the target.
    pub p_meas: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            p_gate: 1e-3,
            p_prep: 0.0,
            p_meas: 0.0,
        }
    }
}

impl NoiseSection {
    pub fn model(&self) -> Result<dmera::engine::NoiseModel, CliError> {
        let m = dmera::engine::NoiseModel {
            p_gate: self.p_gate,
            p_prep: self.p_prep,
            p_meas: self.p_meas,
        };
        m.validate()?;
        Ok(m)
    }
}

/// How a circuit's gates are initialized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Haar,
    Gaussian,
    Identity,
}

impl InitKind {
    pub fn init(self, seed: u64, sigma: f64) -> dmera::circuit::Init {
        match self {
            InitKind::Haar => dmera::circuit::Init::Haar(seed),
            InitKind::Gaussian => dmera::circuit::Init::Gaussian { seed, sigma },
            InitKind::Identity => dmera::circuit::Init::Identity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_differ_by_name_index_and_root() {
        let a = substream(1, "circuit", &[2, 3]);
        assert_eq!(a, substream(1, "circuit", &[2, 3]));
        assert_ne!(a, substream(2, "circuit", &[2, 3]));
        assert_ne!(a, substream(1, "trajectory", &[2, 3]));
        assert_ne!(a, substream(1, "circuit", &[3, 2]));
    }

    #[test]
    fn hash_tracks_every_field() {
        let e = Experiment {
            command: "x",
            seed: 1,
            config: NoiseSection::default(),
        };
        let mut f = e.clone();
        assert_eq!(e.hash(), f.hash());
        assert_eq!(e.hash().len(), 64);
        f.config.p_prep = 1e-4;
        assert_ne!(e.hash(), f.hash());
        f = e.clone();
        f.seed = 2;
        assert_ne!(e.hash(), f.hash());
    }

    #[test]
    fn guard_errors_map_to_exit_three() {
        let e: CliError = Error::WindowTooLarge {
            engine: "exact",
            needed: 20,
            limit: 14,
        }
        .into();
        assert_eq!(e.code, EXIT_GUARD);
        assert!(e.message.contains("14"));
        let e: CliError = Error::InvalidSpec("x".into()).into();
        assert_eq!(e.code, EXIT_CONFIG);
    }
}
