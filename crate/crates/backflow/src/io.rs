//! CSV and JSON formats, and an output directory that remembers what it wrote.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use backflow_core::linalg::CMatrix;
use backflow_core::rate::RateSchedule;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Output directory; every file goes through here so the manifest can list it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: BTreeSet<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Runtime(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), files: BTreeSet::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Relative paths written so far, sorted.
    pub fn files(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(String::as_str)
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.files.insert(rel.to_string());
        Ok(())
    }

    pub fn write_csv<T: Serialize>(&mut self, rel: &str, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Runtime(format!("csv: {e}")))?;
        self.write_bytes(rel, &bytes)
    }

    pub fn write_matrix(&mut self, rel: &str, rows: &[Vec<f64>]) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for row in rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Runtime(format!("csv: {e}")))?;
        self.write_bytes(rel, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(rel, &bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub layer_index: usize,
    pub t: f64,
    pub p_i: f64,
    pub markovian: bool,
}

pub fn schedule_rows(s: &RateSchedule) -> Vec<ScheduleRow> {
    (0..s.len())
        .map(|i| ScheduleRow { layer_index: i, t: s.time(i), p_i: s.weight(i), markovian: s.is_markovian(i) })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class_id: usize,
    /// `step:channel` pairs separated by `;`, empty for the no-jump class.
    pub jump_record: String,
    pub weight: f64,
    pub final_state_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub step: usize,
    pub total_energy: f64,
    pub boundary_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRow {
    pub layer: usize,
    pub p_i: f64,
    pub misaligned_mean: f64,
    pub misaligned_max: f64,
}

/// One (p, l_A) cell pooled over seeds. `delta_f` is F_A − F_0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub p: f64,
    pub l_a: usize,
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub delta_f: Option<f64>,
    pub delta_f_err: Option<f64>,
}

/// Empty fields mark fits that are undefined at this p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub p: f64,
    pub slope: Option<f64>,
    pub slope_err: Option<f64>,
    pub normalized_slope: Option<f64>,
    pub normalized_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub trace_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondEnergyRow {
    pub layer: usize,
    pub p_i: f64,
    /// Cycle lengths joined by `+`, e.g. `2+1`.
    pub cycle_type: String,
    pub class_size: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub method: String,
    pub threshold: Option<f64>,
    pub p_c: Option<f64>,
    pub half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Row-major complex matrix as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityJson {
    pub dim: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&CMatrix> for DensityJson {
    fn from(m: &CMatrix) -> Self {
        Self { dim: m.dim(), data: m.as_slice().iter().map(|z| [z.re, z.im]).collect() }
    }
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    r.deserialize().map(|row| row.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))).collect()
}

/// Headerless numeric matrix; rows must have equal length.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Runtime(format!("{} row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Identifies a chain within a sweep; all per-chain file names derive from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainKey {
    pub p: f64,
    pub l_a: usize,
    pub seed: u64,
}

impl ChainKey {
    pub fn stem(&self) -> String {
        format!("p{}_la{:02}_s{}", self.p, self.l_a, self.seed)
    }

    pub fn chain_file(&self) -> String {
        format!("chains/chain_{}.csv", self.stem())
    }

    pub fn layers_file(&self) -> String {
        format!("layers/layers_{}.csv", self.stem())
    }

    pub fn local_map_file(&self) -> String {
        format!("maps/local_{}.csv", self.stem())
    }

    pub fn heatmap_file(&self) -> String {
        format!("heatmaps/local_{}.svg", self.stem())
    }

    /// Inverse of [`ChainKey::chain_file`]'s file name.
    pub fn parse_chain_name(name: &str) -> Option<Self> {
        let stem = name.strip_prefix("chain_")?.strip_suffix(".csv")?;
        let rest = stem.strip_prefix('p')?;
        let (p, rest) = rest.split_once("_la")?;
        let (l_a, seed) = rest.split_once("_s")?;
        Some(Self { p: p.parse().ok()?, l_a: l_a.parse().ok()?, seed: seed.parse().ok()? })
    }
}
