//! Constants file: TOML with a `branching_table` array.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use kaon_core::constants::{ConstantsInput, TimeUnit};
use kaon_core::{Channel, PhysicalConstants};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The constants file shipped with the tool.
pub const SHIPPED: &str = include_str!("../data/constants.toml");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error")]
    Schema(#[from] toml::de::Error),
    #[error("invalid constants")]
    Invalid(#[from] kaon_core::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsFile {
    pub time_unit: TimeUnit,
    pub tau_s: f64,
    pub tau_l: f64,
    pub delta_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_s_seconds: Option<f64>,
    pub ks_kl_overlap: f64,
    #[serde(default = "default_tolerance")]
    pub branching_tolerance: f64,
    pub two_pion_channels: Vec<String>,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
    pub branching_table: Vec<Channel>,
}

fn default_tolerance() -> f64 {
    kaon_core::constants::DEFAULT_BRANCHING_TOLERANCE
}

impl From<ConstantsFile> for ConstantsInput {
    fn from(f: ConstantsFile) -> Self {
        ConstantsInput {
            time_unit: f.time_unit,
            tau_s: f.tau_s,
            tau_l: f.tau_l,
            delta_m: f.delta_m,
            tau_s_seconds: f.tau_s_seconds,
            ks_kl_overlap: f.ks_kl_overlap,
            branching_tolerance: f.branching_tolerance,
            two_pion_channels: f.two_pion_channels,
            branching_table: f.branching_table,
            provenance: f.provenance,
        }
    }
}

impl From<ConstantsInput> for ConstantsFile {
    fn from(i: ConstantsInput) -> Self {
        ConstantsFile {
            time_unit: i.time_unit,
            tau_s: i.tau_s,
            tau_l: i.tau_l,
            delta_m: i.delta_m,
            tau_s_seconds: i.tau_s_seconds,
            ks_kl_overlap: i.ks_kl_overlap,
            branching_tolerance: i.branching_tolerance,
            two_pion_channels: i.two_pion_channels,
            provenance: i.provenance,
            branching_table: i.branching_table,
        }
    }
}

pub fn parse(text: &str) -> Result<ConstantsFile, ConfigError> {
    Ok(toml::from_str(text)?)
}

pub fn to_toml(f: &ConstantsFile) -> String {
    toml::to_string_pretty(f).expect("constants serialize")
}

/// Parses and validates a constants document.
pub fn load_str(text: &str) -> Result<PhysicalConstants, ConfigError> {
    Ok(PhysicalConstants::new(parse(text)?.into())?)
}

pub fn load_path(path: &Path) -> Result<PhysicalConstants, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_str(&text)
}

/// `path` if given, else the shipped file.
pub fn load(path: Option<&Path>) -> Result<PhysicalConstants, ConfigError> {
    match path {
        Some(p) => load_path(p),
        None => load_str(SHIPPED),
    }
}

/// SHA-256 of the normalised constants (τ_S units, JSON), hex encoded.
pub fn fingerprint(c: &PhysicalConstants) -> String {
    let json = serde_json::to_vec(c).expect("constants serialize");
    hex::encode(Sha256::digest(json))
}
