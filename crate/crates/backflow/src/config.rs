//! Run configuration: a TOML file with one table per concern.
//!
//! Every field has a default matching the paper's setup, so an empty file
//! plus a subcommand is a valid run. Unknown keys are rejected.

use std::path::PathBuf;

use backflow_core::potts::{Algorithm, LatticeSpec, McConfig};
use backflow_core::rate::{RateProfile, RateSchedule};
use backflow_core::trajectories::BackAction;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    RateReport,
    TrajectoryValidate,
    McSweep,
    Analyze,
    Heatmap,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::RateReport => "rate-report",
            Experiment::TrajectoryValidate => "trajectory-validate",
            Experiment::McSweep => "mc-sweep",
            Experiment::Analyze => "analyze",
            Experiment::Heatmap => "heatmap",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; must agree with the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; absent means all available cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub rate: RateConfig,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub mc: MonteCarloConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
    #[serde(default)]
    pub heatmap: HeatmapConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    Constant,
    Lorentzian,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateConfig {
    pub kind: RateKind,
    /// Γ/ω of the Lorentzian bath.
    pub ratio: f64,
    /// Time step in units of 1/ω.
    pub dt: f64,
    /// (t, Δ) pairs for the tabulated kind.
    pub points: Vec<(f64, f64)>,
    /// Late-time jump probability used by `rate-report`.
    pub target_p: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self { kind: RateKind::Lorentzian, ratio: 0.2, dt: 0.5, points: Vec::new(), target_p: 0.15 }
    }
}

impl RateConfig {
    /// Profile with unit asymptote; only p = Δ∞δt matters for the lattice.
    pub fn profile(&self) -> backflow_core::Result<RateProfile> {
        match self.kind {
            RateKind::Constant => Ok(RateProfile::constant(1.0)),
            RateKind::Lorentzian => RateProfile::lorentzian_ratio(1.0 / self.ratio, self.ratio),
            RateKind::Tabulated => RateProfile::tabulated(self.points.clone()),
        }
    }

    /// Physical rate for trajectory runs. `amplitude` is Δ0 of the
    /// Lorentzian or the constant rate; tabulated points are used as given.
    pub fn trajectory_profile(&self, amplitude: f64) -> backflow_core::Result<RateProfile> {
        match self.kind {
            RateKind::Constant => Ok(RateProfile::constant(amplitude)),
            RateKind::Lorentzian => RateProfile::lorentzian_ratio(amplitude, self.ratio),
            RateKind::Tabulated => RateProfile::tabulated(self.points.clone()),
        }
    }

    pub fn schedule(&self, layers: usize, p: f64) -> backflow_core::Result<RateSchedule> {
        self.profile()?.discretize(self.dt, layers, p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub lx: usize,
    pub ly: usize,
    pub q: usize,
    /// Local dimension; absent means the d → ∞ limit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    pub clamp: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { lx: 40, ly: 50, q: 3, d: None, clamp: backflow_core::replica::DEFAULT_CLAMP }
    }
}

impl LatticeConfig {
    pub fn spec(&self, l_a: usize) -> LatticeSpec {
        LatticeSpec { lx: self.lx, ly: self.ly, q: self.q, l_a, d: self.d, clamp: self.clamp }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmName {
    Wolff,
    Metropolis,
    Hybrid,
}

impl From<AlgorithmName> for Algorithm {
    fn from(a: AlgorithmName) -> Self {
        match a {
            AlgorithmName::Wolff => Algorithm::Wolff,
            AlgorithmName::Metropolis => Algorithm::Metropolis,
            AlgorithmName::Hybrid => Algorithm::Hybrid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub n_therm: usize,
    pub stride: usize,
    pub n_measurements: usize,
    pub algorithm: AlgorithmName,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self { n_therm: 25_000, stride: 50, n_measurements: 200, algorithm: AlgorithmName::Hybrid }
    }
}

impl MonteCarloConfig {
    pub fn chain(&self, seed: u64) -> McConfig {
        McConfig {
            n_therm: self.n_therm,
            stride: self.stride,
            n_measurements: self.n_measurements,
            seed,
            algorithm: self.algorithm.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub p: Vec<f64>,
    /// Defaults to 0, 2, …, lx/2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_a: Option<Vec<usize>>,
    pub seeds: Vec<u64>,
    pub threshold: f64,
    /// p values whose largest-l_A chain also gets heatmaps.
    pub heatmaps: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            p: (0..15).map(|k| round_grid(0.05 + 0.025 * k as f64)).collect(),
            l_a: None,
            seeds: vec![0],
            threshold: 0.2,
            heatmaps: Vec::new(),
        }
    }
}

impl SweepConfig {
    pub fn l_a_values(&self, lx: usize) -> Vec<usize> {
        self.l_a.clone().unwrap_or_else(|| (0..=lx / 2).step_by(2).collect())
    }
}

fn round_grid(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackActionName {
    NoJump,
    Unitary,
}

impl From<BackActionName> for BackAction {
    fn from(b: BackActionName) -> Self {
        match b {
            BackActionName::NoJump => BackAction::NoJump,
            BackActionName::Unitary => BackAction::Unitary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    /// Number of qubits, each with its own σ⁻ channel.
    pub sites: usize,
    /// J in H = J Σ σˣσˣ (nearest neighbours), or H = J σˣ for one qubit.
    pub coupling: f64,
    /// Rate amplitude in units of ω; see [`RateConfig::trajectory_profile`].
    pub amplitude: f64,
    /// Time step in units of 1/ω. Independent of `rate.dt`: the jump
    /// ensemble carries an O(p²) step bias that the lattice does not.
    pub dt: f64,
    pub steps: usize,
    pub samples: usize,
    pub substeps: usize,
    pub back_action: BackActionName,
    pub tolerance: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            sites: 1,
            coupling: 0.0,
            amplitude: 0.5,
            dt: 0.05,
            steps: 200,
            samples: 100_000,
            substeps: 8,
            back_action: BackActionName::NoJump,
            tolerance: 2e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeConfig {
    /// Directory holding `cells.csv`; defaults to the output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub threshold: f64,
    /// Upper p bound for the largest-drop search on the normalized slope.
    pub drop_below: f64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self { input: None, threshold: 0.2, drop_below: 0.2 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatmapConfig {
    /// Row-major CSV matrix, first row = bottom layer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl RunConfig {
    /// Parses and validates `src` for `experiment`. Errors carry line numbers.
    pub fn parse(src: &str, experiment: Experiment) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        if let Some(named) = cfg.experiment {
            if named != experiment {
                return Err(invalid(
                    src,
                    None,
                    "experiment",
                    &format!("config is for `{}` but `{}` was requested", named.name(), experiment.name()),
                ));
            }
        }
        cfg.validate(src, experiment)?;
        Ok(cfg)
    }

    pub fn validate(&self, src: &str, experiment: Experiment) -> Result<(), CliError> {
        if self.threads == Some(0) {
            return Err(invalid(src, None, "threads", "must be at least 1"));
        }
        let r = &self.rate;
        if !(r.dt > 0.0) {
            return Err(invalid(src, Some("rate"), "dt", "must be positive"));
        }
        if r.kind == RateKind::Lorentzian && !(r.ratio > 0.0) {
            return Err(invalid(src, Some("rate"), "ratio", "must be positive"));
        }
        if r.kind == RateKind::Tabulated {
            if r.points.is_empty() {
                return Err(invalid(src, Some("rate"), "points", "a tabulated rate needs at least one point"));
            }
            if r.points.last().is_some_and(|&(_, v)| v == 0.0) {
                return Err(invalid(src, Some("rate"), "points", "the last tabulated rate sets the scale and must be nonzero"));
            }
        }
        let l = &self.lattice;
        match experiment {
            Experiment::RateReport => {
                if !(0.0..=1.0).contains(&r.target_p) {
                    return Err(invalid(src, Some("rate"), "target_p", "must lie in [0, 1]"));
                }
                if l.ly == 0 {
                    return Err(invalid(src, Some("lattice"), "ly", "must be positive"));
                }
                if !(1..=backflow_core::replica::MAX_REPLICAS).contains(&l.q) {
                    return Err(invalid(src, Some("lattice"), "q", "must lie in 1..=5"));
                }
            }
            Experiment::McSweep => self.validate_sweep(src)?,
            Experiment::TrajectoryValidate => self.validate_trajectory(src)?,
            Experiment::Analyze => {
                if !(self.analyze.threshold > 0.0 && self.analyze.threshold < 1.0) {
                    return Err(invalid(src, Some("analyze"), "threshold", "must lie in (0, 1)"));
                }
            }
            Experiment::Heatmap => {
                if self.heatmap.input.is_none() {
                    return Err(invalid(src, Some("heatmap"), "input", "a matrix CSV is required"));
                }
            }
        }
        Ok(())
    }

    fn validate_sweep(&self, src: &str) -> Result<(), CliError> {
        let l = &self.lattice;
        if l.lx == 0 || l.lx % 2 != 0 {
            return Err(invalid(src, Some("lattice"), "lx", "must be even and positive"));
        }
        if l.ly == 0 {
            return Err(invalid(src, Some("lattice"), "ly", "must be positive"));
        }
        if !(1..=backflow_core::replica::MAX_REPLICAS).contains(&l.q) {
            return Err(invalid(src, Some("lattice"), "q", "must lie in 1..=5"));
        }
        if l.d.is_some_and(|d| !(d >= 1.0)) {
            return Err(invalid(src, Some("lattice"), "d", "must be at least 1"));
        }
        if !(l.clamp > 0.0) {
            return Err(invalid(src, Some("lattice"), "clamp", "must be positive"));
        }
        let m = &self.mc;
        for (key, v) in [("n_therm", m.n_therm), ("stride", m.stride), ("n_measurements", m.n_measurements)] {
            if v == 0 {
                return Err(invalid(src, Some("mc"), key, "must be positive"));
            }
        }
        let s = &self.sweep;
        if s.p.is_empty() {
            return Err(invalid(src, Some("sweep"), "p", "the p grid is empty"));
        }
        if s.p.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid(src, Some("sweep"), "p", "every p must lie in [0, 1]"));
        }
        let l_a = s.l_a_values(l.lx);
        if l_a.is_empty() {
            return Err(invalid(src, Some("sweep"), "l_a", "the l_A grid is empty"));
        }
        if let Some(&bad) = l_a.iter().find(|&&a| a > l.lx) {
            return Err(invalid(src, Some("sweep"), "l_a", &format!("l_A = {bad} exceeds lx = {}", l.lx)));
        }
        if s.seeds.is_empty() {
            return Err(invalid(src, Some("sweep"), "seeds", "at least one seed is required"));
        }
        if !(s.threshold > 0.0 && s.threshold < 1.0) {
            return Err(invalid(src, Some("sweep"), "threshold", "must lie in (0, 1)"));
        }
        if let Some(h) = s.heatmaps.iter().find(|h| !s.p.contains(h)) {
            return Err(invalid(src, Some("sweep"), "heatmaps", &format!("p = {h} is not on the p grid")));
        }
        Ok(())
    }

    fn validate_trajectory(&self, src: &str) -> Result<(), CliError> {
        let t = &self.trajectory;
        if !(1..=8).contains(&t.sites) {
            return Err(invalid(src, Some("trajectory"), "sites", "must lie in 1..=8"));
        }
        if t.steps == 0 || t.samples == 0 || t.substeps == 0 {
            let key = if t.steps == 0 {
                "steps"
            } else if t.samples == 0 {
                "samples"
            } else {
                "substeps"
            };
            return Err(invalid(src, Some("trajectory"), key, "must be positive"));
        }
        if !(t.dt > 0.0) {
            return Err(invalid(src, Some("trajectory"), "dt", "must be positive"));
        }
        if !(t.tolerance > 0.0) {
            return Err(invalid(src, Some("trajectory"), "tolerance", "must be positive"));
        }
        Ok(())
    }
}

/// Validation error pointing at the line that sets `key` in `table`, or at
/// the table header when the key is absent.
fn invalid(src: &str, table: Option<&str>, key: &str, msg: &str) -> CliError {
    let path = match table {
        Some(t) => format!("{t}.{key}"),
        None => key.to_string(),
    };
    match key_line(src, table, key) {
        Some(line) => CliError::Validation(format!("config line {line}: `{path}` {msg}")),
        None => CliError::Validation(format!("config: `{path}` {msg} (default value)")),
    }
}

fn key_line(src: &str, table: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    let mut header = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            if table == Some(name.trim()) {
                header = Some(i + 1);
            }
            continue;
        }
        if current.as_deref() != table {
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            if k.trim() == key {
                return Some(i + 1);
            }
        }
    }
    header
}
