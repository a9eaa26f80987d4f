//! `manifest.json`: what ran, with which seeds, and every file it produced.

use serde::{Deserialize, Serialize};

use crate::io::OutputDir;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub p: f64,
    pub l_a: usize,
    /// Entry of the sweep's seed list.
    pub seed: u64,
    /// ChaCha8 seed and stream used to derive `chain_seed`.
    pub rng_seed: u64,
    pub rng_stream: u64,
    pub chain_seed: u64,
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub what: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub experiment: String,
    /// Resolved configuration, as written to `config.toml`.
    pub config: String,
    pub threads: usize,
    pub wall_time_s: f64,
    pub chains: Vec<ChainRecord>,
    pub failures: Vec<Failure>,
    /// Relative paths of every other file in the output directory.
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(experiment: &str, config: String, threads: usize) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: experiment.to_string(),
            config,
            threads,
            wall_time_s: 0.0,
            chains: Vec::new(),
            failures: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Lists `out`'s files and writes the manifest beside them.
    pub fn finish(mut self, out: &mut OutputDir, wall_time_s: f64) -> Result<(), CliError> {
        self.wall_time_s = wall_time_s;
        self.files = out.files().filter(|f| *f != MANIFEST_FILE).map(String::from).collect();
        out.write_json(MANIFEST_FILE, &self)
    }
}
