//! One driver per subcommand. Each validates and computes before creating
//! the output directory, then writes its data files, `config.toml` and the
//! manifest.

use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use backflow_core::analysis::{detect_transition, largest_relative_drop, SweepCell, SweepResult};
use backflow_core::linalg::{norm_sqr, trace_distance, CMatrix};
use backflow_core::potts::{integrated_autocorrelation, run_chain, ReplicaLattice};
use backflow_core::rate::{MinimumSign, RateSchedule};
use backflow_core::replica::{SymmetricGroup, WeightTable};
use backflow_core::trajectories::{
    evolve_ensemble, master_equation_trajectory, EnsembleConfig, JumpChannel, OpenSystem, StateVector,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, LatticeConfig, RateKind, RunConfig};
use crate::heatmap::render_svg;
use crate::io::*;
use crate::manifest::{ChainRecord, Failure, Manifest};
use crate::CliError;

pub const ENV_OUT: &str = "BACKFLOW_OUT";
pub const ENV_THREADS: &str = "BACKFLOW_THREADS";
pub const DEFAULT_OUT: &str = "backflow-out";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub experiment: Experiment,
    pub config: RunConfig,
    pub out: PathBuf,
    pub threads: usize,
}

/// Reads and validates the config, then applies flags and the environment.
/// Output directory: `--out`, then `BACKFLOW_OUT`, then `output`, then
/// `backflow-out`. Threads: `--threads`, then `threads`, then all cores,
/// capped by `BACKFLOW_THREADS`.
pub fn resolve(experiment: Experiment, ov: &Overrides) -> Result<Invocation, CliError> {
    let src = match &ov.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut config = RunConfig::parse(&src, experiment)?;
    if let Some(seed) = ov.seed {
        config.seed = seed;
    }
    let out = ov
        .out
        .clone()
        .or_else(|| env::var_os(ENV_OUT).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut threads = ov
        .threads
        .or(config.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Ok(cap) = env::var(ENV_THREADS) {
        let cap: usize = cap
            .trim()
            .parse()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| CliError::Validation(format!("{ENV_THREADS} must be a positive integer, got `{cap}`")))?;
        threads = threads.min(cap);
    }
    if threads == 0 {
        return Err(CliError::Validation("--threads must be at least 1".into()));
    }
    Ok(Invocation { experiment, config, out, threads })
}

pub fn run(inv: &Invocation) -> Result<(), CliError> {
    let start = Instant::now();
    match inv.experiment {
        Experiment::RateReport => rate_report(inv, start),
        Experiment::TrajectoryValidate => trajectory_validate(inv, start),
        Experiment::McSweep => mc_sweep(inv, start),
        Experiment::Analyze => analyze(inv, start),
        Experiment::Heatmap => heatmap(inv, start),
    }
}

/// The config as it should be rerun: experiment pinned, seed resolved, and
/// the output directory and thread count left to the caller.
pub fn config_echo(inv: &Invocation) -> Result<String, CliError> {
    let mut echo = inv.config.clone();
    echo.experiment = Some(inv.experiment);
    echo.output = None;
    echo.threads = None;
    toml::to_string(&echo).map_err(|e| CliError::Runtime(format!("config echo: {e}")))
}

fn begin(inv: &Invocation) -> Result<(OutputDir, Manifest), CliError> {
    let echo = config_echo(inv)?;
    let mut out = OutputDir::create(&inv.out)?;
    out.write_bytes("config.toml", echo.as_bytes())?;
    Ok((out, Manifest::new(inv.experiment.name(), echo, inv.threads)))
}

// rate-report

#[derive(Serialize)]
struct RateReport {
    kind: RateKind,
    dt: f64,
    layers: usize,
    target_p: f64,
    asymptote: f64,
    first_minimum: Option<FirstMinimumJson>,
    negative_intervals: Vec<[f64; 2]>,
    /// Half-open layer ranges with p_i < 0.
    negative_layers: Vec<[usize; 2]>,
}

#[derive(Serialize)]
struct FirstMinimumJson {
    time: f64,
    rate: f64,
    negative: bool,
}

fn rate_report(inv: &Invocation, start: Instant) -> Result<(), CliError> {
    let cfg = &inv.config;
    let (r, l) = (&cfg.rate, &cfg.lattice);
    let profile = r.profile()?;
    let schedule = r.schedule(l.ly, r.target_p)?;
    let first_minimum = match r.kind {
        RateKind::Lorentzian => {
            let m = profile.first_minimum()?;
            Some(FirstMinimumJson { time: m.time, rate: m.rate, negative: m.sign == MinimumSign::Negative })
        }
        _ => None,
    };
    let t_max = (l.ly - 1) as f64 * r.dt;
    let intervals = profile.negative_intervals(t_max, r.dt / 64.0)?;
    let report = RateReport {
        kind: r.kind,
        dt: r.dt,
        layers: l.ly,
        target_p: r.target_p,
        asymptote: profile.asymptote(),
        first_minimum,
        negative_intervals: intervals.into_iter().map(|(a, b)| [a, b]).collect(),
        negative_layers: schedule.negative_layers().into_iter().map(|g| [g.start, g.end]).collect(),
    };
    let group = SymmetricGroup::new(l.q)?;
    let mut bonds = Vec::new();
    for (layer, &p) in schedule.weights().iter().enumerate() {
        for (ct, size, energy) in WeightTable::bond_energy(&group, p, l.d, l.clamp).by_cycle_type() {
            let cycle_type = ct.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("+");
            // + 0.0 turns the -0.0 of -ln 1 into 0.0.
            bonds.push(BondEnergyRow { layer, p_i: p, cycle_type, class_size: size, energy: energy + 0.0 });
        }
    }

    let (mut out, manifest) = begin(inv)?;
    out.write_csv("schedule.csv", schedule_rows(&schedule))?;
    out.write_json("rate_report.json", &report)?;
    out.write_csv("bond_energies.csv", bonds)?;
    manifest.finish(&mut out, start.elapsed().as_secs_f64())
}

// trajectory-validate

fn sigma_minus() -> CMatrix {
    // Basis |0> = ground, |1> = excited.
    CMatrix::from_real(2, &[0.0, 1.0, 0.0, 0.0])
}

fn sigma_x() -> CMatrix {
    CMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0])
}

/// `sites` qubits with a σ⁻ channel each, H = J σˣ for one qubit and
/// H = J Σ σˣ_i σˣ_{i+1} (open chain) otherwise.
pub fn qubit_chain(sites: usize, coupling: f64) -> Result<OpenSystem, CliError> {
    let dim = 1usize << sites;
    let h = if sites == 1 {
        sigma_x().scale_re(coupling)
    } else {
        let mut h = CMatrix::zeros(dim);
        for i in 0..sites - 1 {
            let term = &CMatrix::embed(&sigma_x(), i, sites) * &CMatrix::embed(&sigma_x(), i + 1, sites);
            h = &h + &term.scale_re(coupling);
        }
        h
    };
    let channels = (0..sites)
        .map(|s| JumpChannel::local(&format!("sigma_minus_{s}"), &sigma_minus(), s, sites, 0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OpenSystem::new(h, channels)?)
}

#[derive(Serialize)]
struct ValidationReport {
    sites: usize,
    coupling: f64,
    dt: f64,
    steps: usize,
    samples: usize,
    max_trace_distance: f64,
    worst_step: usize,
    tolerance: f64,
    within_tolerance: bool,
    classes: usize,
    capped_steps: usize,
}

fn trajectory_validate(inv: &Invocation, start: Instant) -> Result<(), CliError> {
    let cfg = &inv.config;
    let t = &cfg.trajectory;
    let dt = t.dt;
    let schedule = cfg.rate.trajectory_profile(t.amplitude)?.sample(dt, t.steps)?;
    let system = qubit_chain(t.sites, t.coupling)?;
    let psi = StateVector::basis(2, &vec![1; t.sites])?;
    let schedules = [schedule];
    let oracle = master_equation_trajectory(&psi.density_matrix(), &system, &schedules, t.steps, t.substeps)?;
    let mut ens = EnsembleConfig::new(t.samples, cfg.seed);
    ens.back_action = t.back_action.into();
    let run = evolve_ensemble(&psi, &system, &schedules, t.steps, &ens)?;

    let distances: Vec<TraceRow> = run
        .rho_history()
        .iter()
        .zip(&oracle)
        .enumerate()
        .map(|(step, (a, b))| TraceRow { step, t: step as f64 * dt, trace_distance: trace_distance(a, b) })
        .collect();
    let worst = distances.iter().max_by(|a, b| a.trace_distance.total_cmp(&b.trace_distance)).expect("initial time");
    let report = ValidationReport {
        sites: t.sites,
        coupling: t.coupling,
        dt,
        steps: t.steps,
        samples: t.samples,
        max_trace_distance: worst.trace_distance,
        worst_step: worst.step,
        tolerance: t.tolerance,
        within_tolerance: worst.trace_distance < t.tolerance,
        classes: run.class_count(),
        capped_steps: run.capped_steps(),
    };
    let classes: Vec<ClassRow> = run
        .classes()
        .into_iter()
        .map(|c| ClassRow {
            class_id: c.id,
            jump_record: c.jumps.iter().map(|j| format!("{}:{}", j.step, j.channel)).collect::<Vec<_>>().join(";"),
            weight: c.weight,
            final_state_norm: run.state(c.id).map_or(0.0, |s| norm_sqr(s).sqrt()),
        })
        .collect();

    let (mut out, manifest) = begin(inv)?;
    out.write_csv("schedule.csv", schedule_rows(&schedules[0]))?;
    out.write_csv("trace_distance.csv", &distances)?;
    out.write_csv("classes.csv", classes)?;
    out.write_json("rho_ensemble.json", &DensityJson::from(run.rho_final()))?;
    out.write_json("rho_master.json", &DensityJson::from(oracle.last().expect("initial state")))?;
    out.write_json("validation.json", &report)?;
    manifest.finish(&mut out, start.elapsed().as_secs_f64())
}

// mc-sweep

struct ChainJob {
    key: ChainKey,
    p_index: usize,
    record: ChainRecord,
}

struct ChainOutput {
    series: Vec<ChainRow>,
    layers: Vec<LayerRow>,
    local: Vec<Vec<f64>>,
}

/// Seed of a chain: the `seed` entry offsets the run seed, and the grid
/// position selects an independent ChaCha stream.
pub fn chain_seed(run_seed: u64, seed: u64, p_index: usize, l_a: usize) -> (u64, u64, u64) {
    let rng_seed = run_seed.wrapping_add(seed);
    let stream = p_index as u64 * 1000 + l_a as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(stream);
    (rng_seed, stream, rng.next_u64())
}

fn run_job(cfg: &RunConfig, schedule: &RateSchedule, job: &ChainJob) -> Result<ChainOutput, String> {
    let attempt = || -> Result<ChainOutput, String> {
        let mut lattice = ReplicaLattice::build(&cfg.lattice.spec(job.key.l_a), schedule).map_err(|e| e.to_string())?;
        let mc = cfg.mc.chain(job.record.chain_seed);
        let samples = run_chain(&mut lattice, &mc).map_err(|e| e.to_string())?;
        let series = samples
            .energy
            .iter()
            .zip(&samples.boundary_energy)
            .enumerate()
            .map(|(k, (&e, &b))| ChainRow { step: mc.n_therm + (k + 1) * mc.stride, total_energy: e, boundary_energy: b })
            .collect();
        let layers = (0..lattice.ly())
            .map(|y| LayerRow {
                layer: y,
                p_i: schedule.weight(y),
                misaligned_mean: samples.misaligned[y],
                misaligned_max: samples.misaligned_max[y],
            })
            .collect();
        let local = samples.local_energy.chunks(lattice.lx()).map(<[f64]>::to_vec).collect();
        Ok(ChainOutput { series, layers, local })
    };
    catch_unwind(AssertUnwindSafe(attempt)).unwrap_or_else(|_| Err("chain panicked".into()))
}

fn mc_sweep(inv: &Invocation, start: Instant) -> Result<(), CliError> {
    let cfg = &inv.config;
    let (l, s) = (&cfg.lattice, &cfg.sweep);
    let schedules =
        s.p.iter().map(|&p| cfg.rate.schedule(l.ly, p)).collect::<Result<Vec<_>, _>>()?;
    let mut jobs = Vec::new();
    for (p_index, &p) in s.p.iter().enumerate() {
        for l_a in s.l_a_values(l.lx) {
            for &seed in &s.seeds {
                let (rng_seed, rng_stream, chain_seed) = chain_seed(cfg.seed, seed, p_index, l_a);
                let key = ChainKey { p, l_a, seed };
                let record = ChainRecord { p, l_a, seed, rng_seed, rng_stream, chain_seed, file: None };
                jobs.push(ChainJob { key, p_index, record });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(inv.threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let results: Vec<Result<ChainOutput, String>> =
        pool.install(|| jobs.par_iter().map(|job| run_job(cfg, &schedules[job.p_index], job)).collect());

    let (mut out, mut manifest) = begin(inv)?;
    for (&p, schedule) in s.p.iter().zip(&schedules) {
        out.write_csv(&format!("schedules/schedule_p{p}.csv"), schedule_rows(schedule))?;
    }
    let mut energies = Vec::new();
    let mut outputs = BTreeMap::new();
    for (job, result) in jobs.iter().zip(results) {
        let mut record = job.record.clone();
        match result {
            Ok(o) => {
                out.write_csv(&job.key.chain_file(), &o.series)?;
                out.write_csv(&job.key.layers_file(), &o.layers)?;
                out.write_matrix(&job.key.local_map_file(), &o.local)?;
                record.file = Some(job.key.chain_file());
                energies.push((job.key, o.series.iter().map(|r| r.total_energy).collect::<Vec<_>>()));
                outputs.insert(job.key.stem(), o);
            }
            Err(error) => manifest.failures.push(Failure { what: format!("chain {}", job.key.stem()), error }),
        }
        manifest.chains.push(record);
    }
    for &hp in &s.heatmaps {
        // Largest partition, first seed.
        let l_a = s.l_a_values(l.lx).into_iter().max().expect("validated non-empty");
        let key = ChainKey { p: hp, l_a, seed: s.seeds[0] };
        if let Some(o) = outputs.get(&key.stem()) {
            let svg = render_svg(&o.local, Some(&format!("local energy, p = {hp}, l_A = {l_a}, seed {}", key.seed)))?;
            out.write_bytes(&key.heatmap_file(), svg.as_bytes())?;
        }
    }
    if !energies.is_empty() {
        write_analysis(&mut out, l, &energies, s.threshold, cfg.analyze.drop_below)?;
    }
    let failed = manifest.failures.len();
    manifest.finish(&mut out, start.elapsed().as_secs_f64())?;
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} of {} chains failed; see manifest.json", jobs.len())));
    }
    Ok(())
}

// analysis

/// Mean and autocorrelation-corrected standard error of a chain's energies.
pub fn chain_stats(series: &[f64]) -> (f64, f64) {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let tau = integrated_autocorrelation(series);
    (mean, (var * (2.0 * tau).max(1.0) / n as f64).sqrt())
}

/// Pools chains into (p, l_A) cells, p ascending then l_A ascending.
/// Seeds of a cell are averaged with their errors added in quadrature.
pub fn pool_cells(chains: &[(ChainKey, Vec<f64>)]) -> Vec<CellRow> {
    let mut groups: BTreeMap<(u64, usize), Vec<(f64, f64, usize)>> = BTreeMap::new();
    for (key, series) in chains {
        if series.is_empty() {
            continue;
        }
        let (m, se) = chain_stats(series);
        // Nonnegative p sort correctly by bit pattern.
        groups.entry((key.p.to_bits(), key.l_a)).or_default().push((m, se, series.len()));
    }
    let mut cells: Vec<CellRow> = groups
        .into_iter()
        .map(|((p, l_a), runs)| {
            let k = runs.len() as f64;
            let mean = runs.iter().map(|r| r.0).sum::<f64>() / k;
            let stderr = runs.iter().map(|r| r.1 * r.1).sum::<f64>().sqrt() / k;
            let n_samples = runs.iter().map(|r| r.2).sum();
            CellRow { p: f64::from_bits(p), l_a, mean, stderr, n_samples, delta_f: None, delta_f_err: None }
        })
        .collect();
    let base: BTreeMap<u64, (f64, f64)> =
        cells.iter().filter(|c| c.l_a == 0).map(|c| (c.p.to_bits(), (c.mean, c.stderr))).collect();
    for c in &mut cells {
        if let Some(&(m0, e0)) = base.get(&c.p.to_bits()) {
            c.delta_f = Some(c.mean - m0);
            c.delta_f_err = Some((c.stderr * c.stderr + e0 * e0).sqrt());
        }
    }
    cells
}

pub struct Analysis {
    pub cells: Vec<CellRow>,
    pub summary: Vec<SummaryRow>,
    pub transitions: Vec<TransitionEntry>,
}

pub fn analyze_chains(
    lattice: &LatticeConfig,
    chains: &[(ChainKey, Vec<f64>)],
    threshold: f64,
    drop_below: f64,
) -> Result<Analysis, CliError> {
    let cells = pool_cells(chains);
    let mut result = SweepResult { lx: lattice.lx, ly: lattice.ly, q: lattice.q, cells: Vec::new() };
    for c in &cells {
        result.push(SweepCell { p: c.p, l_a: c.l_a, mean: c.mean, stderr: c.stderr, n_samples: c.n_samples })?;
    }
    let summary: Vec<SummaryRow> = result
        .p_values()
        .into_iter()
        .map(|p| {
            let raw = result.slope_fit(p).ok();
            let norm = result.normalized_slope(p).ok();
            SummaryRow {
                p,
                slope: raw.map(|s| s.value),
                slope_err: raw.map(|s| s.stderr),
                normalized_slope: norm.map(|s| s.value),
                normalized_err: norm.map(|s| s.stderr),
            }
        })
        .collect();

    let series = |f: fn(&SummaryRow) -> Option<f64>| -> (Vec<f64>, Vec<f64>) {
        summary.iter().filter_map(|r| f(r).map(|v| (r.p, v))).unzip()
    };
    let mut transitions = Vec::new();
    for (method, f) in [
        ("raw_slope", (|r: &SummaryRow| r.slope) as fn(&SummaryRow) -> Option<f64>),
        ("normalized_slope", |r: &SummaryRow| r.normalized_slope),
    ] {
        let (p, v) = series(f);
        let entry = match detect_transition(&p, &v, threshold) {
            Ok(t) => TransitionEntry {
                method: method.into(),
                threshold: Some(threshold),
                p_c: Some(t.p_c),
                half_width: Some(t.half_width),
                note: None,
            },
            Err(e) => TransitionEntry {
                method: method.into(),
                threshold: Some(threshold),
                p_c: None,
                half_width: None,
                note: Some(e.to_string()),
            },
        };
        transitions.push(entry);
    }
    let (p, v) = series(|r| r.normalized_slope);
    let drop = largest_relative_drop(&p, &v, drop_below);
    transitions.push(TransitionEntry {
        method: format!("normalized_largest_drop_below_{drop_below}"),
        threshold: None,
        p_c: drop.map(|t| t.p_c),
        half_width: drop.map(|t| t.half_width),
        note: drop.is_none().then(|| "no drop in range".to_string()),
    });
    Ok(Analysis { cells, summary, transitions })
}

#[derive(Serialize)]
struct TransitionJson<'a> {
    entries: &'a [TransitionEntry],
}

fn write_analysis(
    out: &mut OutputDir,
    lattice: &LatticeConfig,
    chains: &[(ChainKey, Vec<f64>)],
    threshold: f64,
    drop_below: f64,
) -> Result<(), CliError> {
    let a = analyze_chains(lattice, chains, threshold, drop_below)?;
    out.write_csv("cells.csv", &a.cells)?;
    out.write_csv("summary.csv", &a.summary)?;
    out.write_json("transition.json", &TransitionJson { entries: &a.transitions })
}

/// Chain series from `dir/chains`, sorted by file name.
pub fn read_chains(dir: &Path) -> Result<Vec<(ChainKey, Vec<f64>)>, CliError> {
    let chains_dir = dir.join("chains");
    let entries = fs::read_dir(&chains_dir)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", chains_dir.display())))?;
    let mut names = Vec::new();
    for entry in entries {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(key) = ChainKey::parse_chain_name(&name) {
            names.push((name, key));
        }
    }
    names.sort_by(|a, b| a.0.cmp(&b.0));
    names
        .into_iter()
        .map(|(name, key)| {
            let rows: Vec<ChainRow> = read_csv(&chains_dir.join(name))?;
            Ok((key, rows.into_iter().map(|r| r.total_energy).collect()))
        })
        .collect()
}

fn analyze(inv: &Invocation, start: Instant) -> Result<(), CliError> {
    let cfg = &inv.config;
    let input = cfg.analyze.input.clone().unwrap_or_else(|| inv.out.clone());
    let chains = read_chains(&input)?;
    if chains.is_empty() {
        return Err(CliError::Runtime(format!("no chain files under {}", input.join("chains").display())));
    }
    let analysis = analyze_chains(&cfg.lattice, &chains, cfg.analyze.threshold, cfg.analyze.drop_below)?;
    let (mut out, manifest) = begin(inv)?;
    out.write_csv("cells.csv", &analysis.cells)?;
    out.write_csv("summary.csv", &analysis.summary)?;
    out.write_json("transition.json", &TransitionJson { entries: &analysis.transitions })?;
    manifest.finish(&mut out, start.elapsed().as_secs_f64())
}

// heatmap

fn heatmap(inv: &Invocation, start: Instant) -> Result<(), CliError> {
    let h = &inv.config.heatmap;
    let input = h.input.as_ref().expect("validated");
    let matrix = read_matrix(input)?;
    let svg = render_svg(&matrix, h.title.as_deref())?;
    let stem = input.file_stem().map_or_else(|| "heatmap".into(), |s| s.to_string_lossy().into_owned());
    let (mut out, manifest) = begin(inv)?;
    out.write_bytes(&format!("{stem}.svg"), svg.as_bytes())?;
    manifest.finish(&mut out, start.elapsed().as_secs_f64())
}
