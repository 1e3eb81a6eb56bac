use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hierda::chain::read_chain;
use hierda::diagnostics::{
    bands_csv, export_chain_diagnostics, retained_snapshots, solve_count_report, trajectory_bands, SolveCountReport,
};
use hierda::mwg::{forecast, initial_state_at, mwg_run, DiskRun, MwgSampler, NsForwardModel};
use hierda::ns::{cosine_forcing, read_trajectory, write_trajectory, NsConfig, NsSolver};
use hierda::observation::{full_grid, generate_observations, read_observations, uniform_subgrid, write_observations};
use hierda::par::{self, Execution};
use hierda::priors::{ns_prior_sample, NsPriorParams};
use hierda::rng::{stream, Purpose};
use hierda::spde::{path_fields, simulate_observations, spde_mwg_run, SpdeData, SpdeSampler};
use hierda::spectral::io::FieldBlock;
use hierda::spectral::{to_grid, vorticity, GridField, GridPoint, SpectralVelocityField, Wavenumber, WavenumberSet};
use log::{info, warn};
use serde::Serialize;

use crate::config::{Case, ExperimentConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(hierda::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<hierda::Error> for CliError {
    fn from(e: hierda::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    /// 3 for numerical failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

const MAX_LAG: usize = 200;
const BAND_LEVEL: f64 = 0.9;

fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.join("data")
}

fn truth_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.join("truth")
}

fn chain_dir(cfg: &ExperimentConfig, i: usize) -> PathBuf {
    cfg.out.join("chains").join(format!("chain-{i}"))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn grid_csv(g: &GridField) -> String {
    let n = g.n();
    let v = g.component(0);
    let mut out = String::from("i,j,value\n");
    for i in 0..n {
        for j in 0..n {
            let _ = writeln!(out, "{i},{j},{}", v[i * n + j]);
        }
    }
    out
}

fn ns_config(cfg: &ExperimentConfig, lattice: &Arc<WavenumberSet>) -> CliResult<NsConfig> {
    let b = cfg.ns_block();
    let forcing = cosine_forcing(Arc::clone(lattice), Wavenumber::new(b.forcing[0], b.forcing[1]));
    let mut ns = NsConfig::new(b.eta, forcing, b.dt)?;
    ns.nonlinear = b.nonlinear;
    Ok(ns)
}

/// Times at which forecasts are recorded: whole solver steps from 0 past the
/// last observation, about four per observation interval.
fn forecast_times(cfg: &ExperimentConfig) -> Vec<f64> {
    let b = cfg.ns_block();
    let last_obs = b.times as f64 * b.delta;
    let horizon = if b.forecast_horizon > 0.0 {
        b.forecast_horizon.max(last_obs)
    } else {
        2.0 * last_obs
    };
    let stride = ((b.delta / (4.0 * b.dt)).round() as usize).max(1);
    let steps = (horizon / b.dt).round() as usize;
    (0..=steps).step_by(stride).map(|s| s as f64 * b.dt).collect()
}

/// Observation sites followed by the sites half a spacing away from them,
/// which are never observed.
fn forecast_points(n: usize, observed: &[GridPoint]) -> Vec<(GridPoint, bool)> {
    let mut pts: Vec<(GridPoint, bool)> = observed.iter().map(|&p| (p, true)).collect();
    let per_side = (observed.len() as f64).sqrt().round().max(1.0) as usize;
    let shift = (n / (2 * per_side)).max(1);
    for &p in observed {
        let q = GridPoint::new((p.i + shift) % n, (p.j + shift) % n);
        if !pts.iter().any(|(r, _)| *r == q) {
            pts.push((q, false));
        }
    }
    pts
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    version: &'static str,
    stage: &'a str,
    files: Vec<String>,
    config: serde_json::Value,
}

fn write_manifest(dir: &Path, stage: &str, files: &[&str], cfg: &ExperimentConfig) -> CliResult<()> {
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            format: "hierda-output",
            version: env!("CARGO_PKG_VERSION"),
            stage,
            files: files.iter().map(|s| s.to_string()).collect(),
            config: cfg.echo(),
        },
    )
}

pub fn generate(cfg: &ExperimentConfig) -> CliResult<()> {
    let lattice = WavenumberSet::shared(cfg.n)?;
    let mut truth_rng = stream(cfg.seed, Purpose::Truth);
    let mut noise_rng = stream(cfg.seed, Purpose::Noise);
    let data = data_dir(cfg);
    let truth = truth_dir(cfg);
    fs::create_dir_all(&truth)?;
    match cfg.case {
        Case::Ns => {
            let b = cfg.ns_block();
            let v0 = ns_prior_sample(
                &NsPriorParams::new(b.truth_alpha, b.truth_beta2)?,
                Arc::clone(&lattice),
                &mut truth_rng,
            );
            let mut solver = NsSolver::new(ns_config(cfg, &lattice)?);
            let record: Vec<f64> = (1..=b.times).map(|t| t as f64 * b.delta).collect();
            let traj = solver.solve_to(&v0, b.times as f64 * b.delta, &record)?;
            let points = uniform_subgrid(cfg.n, b.sites_per_side)?;
            let obs = generate_observations(&traj, b.delta, b.times, points, b.tau2.sqrt(), &mut noise_rng)?;
            write_observations(&data, &obs, cfg.n, Some(cfg.seed))?;
            write_trajectory(&truth, &traj, cfg.echo())?;
            fs::write(truth.join("vorticity.csv"), grid_csv(&to_grid(&vorticity(&v0))?))?;
            write_json(
                &truth.join("params.json"),
                &serde_json::json!({ "alpha": b.truth_alpha, "beta2": b.truth_beta2 }),
            )?;
            info!("generated {} observations at {} sites", obs.len(), obs.points.len());
        }
        Case::Spde => {
            let b = cfg.spde_block();
            let points = if b.full_grid {
                full_grid(cfg.n)
            } else {
                uniform_subgrid(cfg.n, b.sites_per_side)?
            };
            let (path, obs) = simulate_observations(
                &b.truth,
                Arc::clone(&lattice),
                b.delta,
                b.times,
                points,
                &mut truth_rng,
                &mut noise_rng,
            )?;
            write_observations(&data, &obs, cfg.n, Some(cfg.seed))?;
            let mut csv = String::from("time_index,i,j,value\n");
            for (t, f) in path_fields(&lattice, &path)?.iter().enumerate() {
                let g = to_grid(f)?;
                let v = g.component(0);
                for i in 0..cfg.n {
                    for j in 0..cfg.n {
                        let _ = writeln!(csv, "{},{i},{j},{}", t + 1, v[i * cfg.n + j]);
                    }
                }
            }
            fs::write(truth.join("field.csv"), csv)?;
            write_json(&truth.join("params.json"), &b.truth)?;
            info!("generated {} observations over {} times", obs.len(), obs.num_times());
        }
    }
    write_manifest(&cfg.out, "generate", &["data/observations.csv", "data/observations.json", "truth"], cfg)
}

#[derive(Serialize)]
struct ChainOutcome {
    chain: usize,
    iterations: u64,
    summary: serde_json::Value,
}

pub fn run(cfg: &ExperimentConfig, resume: bool) -> CliResult<()> {
    let (obs, n) = read_observations(&data_dir(cfg))?;
    if n != cfg.n {
        return Err(CliError::Config(format!("data were generated with n = {n}, config has n = {}", cfg.n)));
    }
    let lattice = WavenumberSet::shared(n)?;
    let chains = cfg.sampler.chains;
    let echo = cfg.echo();
    let idx: Vec<usize> = (0..chains).collect();
    let outcomes: Vec<CliResult<ChainOutcome>> = match cfg.case {
        Case::Ns => {
            let mwg = cfg.ns_sampler()?;
            let ns = ns_config(cfg, &lattice)?;
            // Starting states are drawn in order so they do not depend on scheduling.
            let mut init_rng = stream(cfg.seed, Purpose::Init);
            let mut probe = NsForwardModel::new(ns.clone(), obs.clone())?;
            let starts = idx
                .iter()
                .map(|_| initial_state_at(&mwg, cfg.sampler.fixed_alpha, &lattice, &mut probe, &mut init_rng))
                .collect::<hierda::Result<Vec<_>>>()?;
            par::map(Execution::Parallel, &idx, |&i| {
                let model = NsForwardModel::new(ns.clone(), obs.clone())?;
                let mut s = MwgSampler::new(mwg.clone(), model, starts[i].clone(), stream(cfg.seed, Purpose::Chain(i as u32)))?;
                let dir = chain_dir(cfg, i);
                let summary = mwg_run(&mut s, &disk_run(cfg, &dir, i, &echo), resume)?;
                info!(
                    "chain {i}: {} iterations, pCN acceptance {:.3}, {} solver calls",
                    summary.iterations,
                    summary.stats.pcn_acceptance_after_burn_in(),
                    summary.solver_calls
                );
                Ok(ChainOutcome {
                    chain: i,
                    iterations: summary.iterations,
                    summary: serde_json::to_value(&summary)?,
                })
            })
        }
        Case::Spde => {
            let scfg = cfg.spde_sampler()?;
            let data = SpdeData::new(obs, lattice)?;
            par::map(Execution::Parallel, &idx, |&i| {
                let mut s = SpdeSampler::new(scfg.clone(), data.clone(), stream(cfg.seed, Purpose::Chain(i as u32)))?;
                let dir = chain_dir(cfg, i);
                let summary = spde_mwg_run(&mut s, &disk_run(cfg, &dir, i, &echo), resume)?;
                info!(
                    "chain {i}: {} sweeps, block acceptance {:.3}",
                    summary.iterations, summary.block_acceptance_after_burn_in
                );
                Ok(ChainOutcome {
                    chain: i,
                    iterations: summary.iterations,
                    summary: serde_json::to_value(&summary)?,
                })
            })
        }
    };
    let outcomes = outcomes.into_iter().collect::<CliResult<Vec<_>>>()?;
    write_json(&cfg.out.join("chains").join("runs.json"), &outcomes)?;
    write_manifest(&cfg.out.join("chains"), "run", &["chain-*/chain.bin", "runs.json"], cfg)
}

fn disk_run<'a>(cfg: &ExperimentConfig, dir: &'a Path, i: usize, echo: &serde_json::Value) -> DiskRun<'a> {
    DiskRun {
        dir,
        seed: cfg.seed,
        chain_index: i as u32,
        checkpoint_every: cfg.sampler.checkpoint_every,
        config_echo: echo.clone(),
    }
}

/// Chain directories present under `out/chains`, in index order.
fn existing_chains(cfg: &ExperimentConfig) -> CliResult<Vec<(usize, PathBuf)>> {
    let root = cfg.out.join("chains");
    let mut found = Vec::new();
    if root.is_dir() {
        for e in fs::read_dir(&root)? {
            let e = e?;
            let name = e.file_name().to_string_lossy().into_owned();
            if let Some(i) = name.strip_prefix("chain-").and_then(|s| s.parse::<usize>().ok()) {
                if e.path().is_dir() {
                    found.push((i, e.path()));
                }
            }
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(hierda::Error::Format(format!("no chains found in {}", root.display())).into());
    }
    Ok(found)
}

pub fn diagnose(cfg: &ExperimentConfig) -> CliResult<()> {
    let out = cfg.out.join("diagnostics");
    for (i, dir) in existing_chains(cfg)? {
        let chain = read_chain(&dir)?;
        export_chain_diagnostics(&chain, &dir, &out.join(format!("chain-{i}")), MAX_LAG)?;
        info!("chain {i}: {} records, {} snapshots", chain.records.len(), chain.snapshots.len());
    }
    write_manifest(&out, "diagnose", &["chain-*/trace.csv", "chain-*/acf.csv", "chain-*/summary.json"], cfg)
}

#[derive(Serialize)]
struct ForecastPoint {
    index: usize,
    i: usize,
    j: usize,
    x: f64,
    y: f64,
    observed: bool,
}

#[derive(Serialize)]
struct ForecastMeta {
    times: Vec<f64>,
    last_observation_time: f64,
    level: f64,
    members: usize,
    excluded: usize,
    points: Vec<ForecastPoint>,
}

/// Evenly spaced picks of `want` items from `0..len`.
fn spread(len: usize, want: usize) -> Vec<usize> {
    if want == 0 || len <= want {
        return (0..len).collect();
    }
    (0..want).map(|k| k * len / want).collect()
}

pub fn forecast_cmd(cfg: &ExperimentConfig) -> CliResult<()> {
    if cfg.case != Case::Ns {
        return Err(CliError::Config("forecast applies to the Navier-Stokes case".into()));
    }
    let b = cfg.ns_block();
    let (obs, n) = read_observations(&data_dir(cfg))?;
    let lattice = WavenumberSet::shared(n)?;
    let mut pool: Vec<SpectralVelocityField> = Vec::new();
    for (_, dir) in existing_chains(cfg)? {
        let chain = read_chain(&dir)?;
        for s in retained_snapshots(&chain) {
            if let FieldBlock::Velocity(v) = &s.field {
                pool.push(v.clone());
            }
        }
    }
    if pool.is_empty() {
        return Err(hierda::Error::Format("chains hold no retained velocity snapshots".into()).into());
    }
    let samples: Vec<SpectralVelocityField> = spread(pool.len(), b.forecast_samples)
        .into_iter()
        .map(|k| pool[k].clone())
        .collect();
    let ns = ns_config(cfg, &lattice)?;
    let times = forecast_times(cfg);
    let pts = forecast_points(n, &obs.points);
    let points: Vec<GridPoint> = pts.iter().map(|(p, _)| *p).collect();
    let ens = forecast(&samples, &ns, &times, &points, Execution::Parallel)?;
    if ens.excluded > 0 {
        warn!("{} ensemble members blew up and were dropped", ens.excluded);
    }
    let rows = trajectory_bands(&ens, BAND_LEVEL)?;
    let out = cfg.out.join("forecast");
    fs::create_dir_all(&out)?;
    fs::write(out.join("bands.csv"), bands_csv(&rows))?;

    let (truth, _) = read_trajectory(&truth_dir(cfg))?;
    let truth_ens = forecast(&truth.states()[..1], &ns, &times, &points, Execution::Sequential)?;
    let mut csv = String::from("time,point,component,value\n");
    if let Some(m) = truth_ens.members.first() {
        for (t, &time) in times.iter().enumerate() {
            for p in 0..points.len() {
                for c in 0..2 {
                    let _ = writeln!(csv, "{time},{p},{c},{}", m[(t * points.len() + p) * 2 + c]);
                }
            }
        }
    } else {
        warn!("the true trajectory blew up before the forecast horizon");
    }
    fs::write(out.join("truth.csv"), csv)?;

    let mut obs_csv = String::from("time,point,component,value\n");
    for t in 0..obs.num_times() {
        for (p, chunk) in obs.at_time(t).chunks(2).enumerate() {
            for (c, v) in chunk.iter().enumerate() {
                let _ = writeln!(obs_csv, "{},{p},{c},{v}", obs.times[t]);
            }
        }
    }
    fs::write(out.join("observed.csv"), obs_csv)?;

    let meta = ForecastMeta {
        times: times.clone(),
        last_observation_time: b.times as f64 * b.delta,
        level: BAND_LEVEL,
        members: ens.members.len(),
        excluded: ens.excluded,
        points: pts
            .iter()
            .enumerate()
            .map(|(index, (p, observed))| {
                let [x, y] = p.position(n);
                ForecastPoint {
                    index,
                    i: p.i,
                    j: p.j,
                    x,
                    y,
                    observed: *observed,
                }
            })
            .collect(),
    };
    write_json(&out.join("forecast.json"), &meta)?;
    info!("forecast: {} members over {} times at {} sites", ens.members.len(), times.len(), points.len());
    write_manifest(&out, "forecast", &["bands.csv", "truth.csv", "observed.csv", "forecast.json"], cfg)
}

#[derive(Serialize)]
struct Report {
    chains: Vec<SolveCountReport>,
    total_iterations: u64,
    total_pde_solves: u64,
    total_wall_seconds: Option<f64>,
}

pub fn report(cfg: &ExperimentConfig) -> CliResult<()> {
    let mut rows = Vec::new();
    for (_, dir) in existing_chains(cfg)? {
        let chain = read_chain(&dir)?;
        let wall = fs::read(dir.join("timing.json"))
            .ok()
            .and_then(|b| serde_json::from_slice::<serde_json::Value>(&b).ok())
            .and_then(|v| v.get("wall_seconds").and_then(|w| w.as_f64()));
        rows.push(solve_count_report(&chain, wall));
    }
    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>12}", "chain", "iters", "v-moves", "b2-moves", "a-moves", "solves", "sec/iter");
    for (i, r) in rows.iter().enumerate() {
        let spi = r.seconds_per_iteration.map(|s| format!("{s:.3e}")).unwrap_or_else(|| "-".into());
        println!(
            "{i:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {spi:>12}",
            r.iterations, r.velocity_moves, r.beta2_moves, r.alpha_moves, r.pde_solves
        );
    }
    let walls: Vec<f64> = rows.iter().filter_map(|r| r.wall_seconds).collect();
    let report = Report {
        total_iterations: rows.iter().map(|r| r.iterations).sum(),
        total_pde_solves: rows.iter().map(|r| r.pde_solves).sum(),
        total_wall_seconds: (walls.len() == rows.len()).then(|| walls.iter().sum()),
        chains: rows,
    };
    write_json(&cfg.out.join("report.json"), &report)
}
