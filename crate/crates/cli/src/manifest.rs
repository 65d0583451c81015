use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Side file written next to `--out`. Everything except `wall_clock_ms` is a
/// function of the resolved config and the crate version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub result_sha256: String,
    pub records: serde_json::Value,
    pub wall_clock_ms: u128,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: serde_json::Value,
        seed: u64,
        primary: &[u8],
        records: serde_json::Value,
        wall_clock_ms: u128,
    ) -> Self {
        let canonical = serde_json::to_vec(&config).expect("json values serialize");
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(&canonical),
            config,
            seed,
            result_sha256: sha256_hex(primary),
            records,
            wall_clock_ms,
        }
    }
}
