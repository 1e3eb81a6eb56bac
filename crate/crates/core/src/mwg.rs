//! Metropolis-within-Gibbs over `(v₀, β², α)` for the Navier–Stokes inverse
//! problem. `v₀` moves with preconditioned Crank–Nicolson, `β²` with its
//! conjugate inverse-gamma full conditional and `α` with a Metropolis step.
//! Only `v₀` moves evaluate the likelihood; the others reuse the cached value.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainHeader, ChainOffsets, ChainRecord, ChainWriter, MoveKind};
use crate::error::{Error, Result};
use crate::ns::{NsConfig, NsSolver};
use crate::observation::{gaussian_loglik, ObservationSet};
use crate::par::{self, Execution};
use crate::priors::{
    conjugate_beta2_update, ns_prior_logdensity, ns_prior_sample, InvGamma, NsPriorParams, UniformInterval,
};
use crate::rng::RngState;
use crate::spectral::{Arity, GridPoint, SpectralTransform, SpectralVelocityField, WavenumberSet};

/// Log-likelihood of the data as a function of the initial condition.
pub trait ForwardModel {
    fn log_likelihood(&mut self, v0: &SpectralVelocityField) -> Result<f64>;
    /// Forward solves performed so far.
    fn solve_count(&self) -> u64;
}

/// Solves Navier–Stokes from `v₀` and compares with observations.
pub struct NsForwardModel {
    solver: NsSolver,
    transform: SpectralTransform,
    obs: ObservationSet,
    marks: Vec<usize>,
    work: SpectralVelocityField,
    pred: Vec<f64>,
    solves: u64,
}

impl NsForwardModel {
    pub fn new(ns: NsConfig, obs: ObservationSet) -> Result<Self> {
        if obs.arity != Arity::Vector {
            return Err(Error::Config("velocity observations must have two components".into()));
        }
        let n = ns.n();
        if let Some(p) = obs.points.iter().find(|p| p.i >= n || p.j >= n) {
            return Err(Error::OutOfRange { i: p.i, j: p.j, n });
        }
        let lattice = Arc::clone(ns.lattice());
        let solver = NsSolver::new(ns);
        let marks = obs.times.iter().map(|&t| solver.steps_for(t)).collect::<Result<Vec<_>>>()?;
        Ok(NsForwardModel {
            transform: SpectralTransform::new(Arc::clone(&lattice)),
            work: SpectralVelocityField::zeros(lattice),
            pred: Vec::with_capacity(obs.len()),
            marks,
            solver,
            obs,
            solves: 0,
        })
    }

    pub fn observations(&self) -> &ObservationSet {
        &self.obs
    }

    pub fn solver(&self) -> &NsSolver {
        &self.solver
    }

    /// Field values at the observation sites and times.
    pub fn predict(&mut self, v0: &SpectralVelocityField) -> Result<&[f64]> {
        self.solves += 1;
        self.work.coeffs_mut().copy_from_slice(v0.coeffs());
        self.pred.clear();
        let mut done = 0;
        for &m in &self.marks {
            self.solver.advance(self.work.coeffs_mut(), m - done, done)?;
            done = m;
            let grid = self.transform.velocity_to_grid(&self.work)?;
            self.pred.extend(grid.sample(&self.obs.points)?);
        }
        Ok(&self.pred)
    }
}

impl ForwardModel for NsForwardModel {
    fn log_likelihood(&mut self, v0: &SpectralVelocityField) -> Result<f64> {
        self.predict(v0)?;
        let ss: f64 = self.obs.values.iter().zip(&self.pred).map(|(y, p)| (y - p) * (y - p)).sum();
        Ok(gaussian_loglik(self.obs.len(), self.obs.tau2(), ss))
    }

    fn solve_count(&self) -> u64 {
        self.solves
    }
}

/// Likelihood that ignores the data: the chain then targets the prior.
#[derive(Default)]
pub struct FlatLikelihood {
    calls: u64,
}

impl ForwardModel for FlatLikelihood {
    fn log_likelihood(&mut self, _v0: &SpectralVelocityField) -> Result<f64> {
        self.calls += 1;
        Ok(0.0)
    }

    fn solve_count(&self) -> u64 {
        self.calls
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcnConfig {
    pub rho: f64,
    /// Acceptance rate targeted by burn-in adaptation.
    pub target_accept: f64,
    /// Robbins–Monro adaptation of `ρ` during burn-in.
    pub adapt: bool,
}

impl PcnConfig {
    pub fn new(rho: f64) -> Result<Self> {
        let c = PcnConfig {
            rho,
            target_accept: 0.25,
            adapt: false,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Config(format!("pCN step must lie in (0, 1], got {}", self.rho)));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!("target acceptance must lie in (0, 1), got {}", self.target_accept)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MwgConfig {
    pub p_v: f64,
    pub p_beta2: f64,
    pub p_alpha: f64,
    pub rho_alpha: f64,
    pub alpha_prior: UniformInterval,
    pub beta2_prior: InvGamma,
    pub iterations: usize,
    pub burn_in: usize,
    /// Field snapshot interval.
    pub thin: usize,
    pub pcn: PcnConfig,
}

impl MwgConfig {
    pub fn validate(&self) -> Result<()> {
        let ps = [self.p_v, self.p_beta2, self.p_alpha];
        if ps.iter().any(|p| !(*p >= 0.0)) || (ps.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("scan probabilities {ps:?} must be >= 0 and sum to 1")));
        }
        if !(self.rho_alpha > 0.0 && self.rho_alpha < 1.0) {
            return Err(Error::Config(format!("alpha step must lie in (0, 1), got {}", self.rho_alpha)));
        }
        if self.alpha_prior.lo <= 0.5 {
            return Err(Error::Config("alpha prior must lie above 1/2".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning interval must be >= 1".into()));
        }
        if self.burn_in > self.iterations {
            return Err(Error::Config("burn-in exceeds iteration count".into()));
        }
        self.pcn.validate()
    }
}

#[derive(Clone, Debug)]
pub struct PcnOutcome {
    pub field: SpectralVelocityField,
    pub loglik: f64,
    pub accepted: bool,
}

/// One pCN move: propose `ρv + √(1−ρ²)ξ`, `ξ ~ N(0, β²A^{-α})`, and accept
/// with probability `min(1, exp(Δ loglik))`. A solver blow-up on the proposal
/// counts as a rejection.
pub fn pcn_step<M: ForwardModel + ?Sized, R: Rng + ?Sized>(
    v: &SpectralVelocityField,
    loglik: f64,
    prior: &NsPriorParams,
    rho: f64,
    model: &mut M,
    rng: &mut R,
) -> Result<PcnOutcome> {
    let xi = ns_prior_sample(prior, Arc::clone(v.lattice()), rng);
    let proposal = SpectralVelocityField::combine(rho, v, (1.0 - rho * rho).sqrt(), &xi)?;
    let u: f64 = rng.random();
    let new_ll = match model.log_likelihood(&proposal) {
        Ok(ll) => ll,
        Err(e) if e.is_numerical() => {
            log::warn!("pCN proposal rejected: {e}");
            return Ok(PcnOutcome {
                field: v.clone(),
                loglik,
                accepted: false,
            });
        }
        Err(e) => return Err(e),
    };
    if u.ln() < new_ll - loglik {
        Ok(PcnOutcome {
            field: proposal,
            loglik: new_ll,
            accepted: true,
        })
    } else {
        Ok(PcnOutcome {
            field: v.clone(),
            loglik,
            accepted: false,
        })
    }
}

/// Draw from the conjugate full conditional `IG(a + d/2, b + v·A^α v/2)`.
pub fn beta2_gibbs_move<R: Rng + ?Sized>(v: &SpectralVelocityField, alpha: f64, prior: &InvGamma, rng: &mut R) -> f64 {
    conjugate_beta2_update(prior, v, alpha).sample(rng)
}

/// Proposal `α̂ = ρ_α α + (1 − ρ_α) u`, `u ~ U[lo, hi]`. This is uniform on an
/// interval of width `(1 − ρ_α)(hi − lo)` inside the prior support.
pub fn propose_alpha<R: Rng + ?Sized>(alpha: f64, rho_alpha: f64, prior: &UniformInterval, rng: &mut R) -> f64 {
    rho_alpha * alpha + (1.0 - rho_alpha) * prior.sample(rng)
}

/// Log acceptance ratio for moving `α → α̂` with `v` and `β²` held fixed.
/// Forward and reverse proposal densities are equal whenever the reverse move
/// is possible, so the ratio is the prior-density ratio times the indicator
/// that `α` is reachable from `α̂`.
pub fn alpha_log_accept(
    v: &SpectralVelocityField,
    alpha: f64,
    alpha_hat: f64,
    beta2: f64,
    rho_alpha: f64,
    prior: &UniformInterval,
) -> Result<f64> {
    if !prior.contains(alpha_hat) {
        return Ok(f64::NEG_INFINITY);
    }
    let lo = rho_alpha * alpha_hat + (1.0 - rho_alpha) * prior.lo;
    let hi = rho_alpha * alpha_hat + (1.0 - rho_alpha) * prior.hi;
    if alpha < lo || alpha > hi {
        return Ok(f64::NEG_INFINITY);
    }
    let new = ns_prior_logdensity(v, &NsPriorParams::new(alpha_hat, beta2)?);
    let old = ns_prior_logdensity(v, &NsPriorParams::new(alpha, beta2)?);
    Ok(new - old)
}

/// One Metropolis move on `α`; returns the new value and whether it was accepted.
pub fn alpha_mh_move<R: Rng + ?Sized>(
    v: &SpectralVelocityField,
    alpha: f64,
    beta2: f64,
    rho_alpha: f64,
    prior: &UniformInterval,
    rng: &mut R,
) -> Result<(f64, bool)> {
    let alpha_hat = propose_alpha(alpha, rho_alpha, prior, rng);
    let log_a = alpha_log_accept(v, alpha, alpha_hat, beta2, rho_alpha, prior)?;
    let u: f64 = rng.random();
    if u.ln() < log_a {
        Ok((alpha_hat, true))
    } else {
        Ok((alpha, false))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MwgState {
    pub v0: SpectralVelocityField,
    pub alpha: f64,
    pub beta2: f64,
    pub loglik: f64,
    /// Current pCN step (changes only while adapting).
    pub rho: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub v_moves: u64,
    pub v_accepts: u64,
    pub v_moves_after_burn_in: u64,
    pub v_accepts_after_burn_in: u64,
    pub beta2_moves: u64,
    pub alpha_moves: u64,
    pub alpha_accepts: u64,
}

impl MoveStats {
    pub fn pcn_acceptance_after_burn_in(&self) -> f64 {
        self.v_accepts_after_burn_in as f64 / self.v_moves_after_burn_in.max(1) as f64
    }
}

/// Random-scan Metropolis-within-Gibbs chain.
pub struct MwgSampler<M> {
    cfg: MwgConfig,
    model: M,
    state: MwgState,
    rng: ChaCha20Rng,
    iteration: u64,
    stats: MoveStats,
}

/// Initial state drawn from the hyperpriors and prior. Redraws (up to 100
/// times) if the forward solve blows up.
pub fn initial_state<M: ForwardModel + ?Sized, R: Rng + ?Sized>(
    cfg: &MwgConfig,
    lattice: &Arc<WavenumberSet>,
    model: &mut M,
    rng: &mut R,
) -> Result<MwgState> {
    initial_state_at(cfg, None, lattice, model, rng)
}

/// As [`initial_state`], with `α` pinned when `alpha` is given (for runs
/// with the smoothness held fixed, `p_alpha = 0`).
pub fn initial_state_at<M: ForwardModel + ?Sized, R: Rng + ?Sized>(
    cfg: &MwgConfig,
    alpha: Option<f64>,
    lattice: &Arc<WavenumberSet>,
    model: &mut M,
    rng: &mut R,
) -> Result<MwgState> {
    let mut last = None;
    for _ in 0..100 {
        let alpha = alpha.unwrap_or_else(|| cfg.alpha_prior.sample(rng));
        let beta2 = cfg.beta2_prior.sample(rng);
        let v0 = ns_prior_sample(&NsPriorParams::new(alpha, beta2)?, Arc::clone(lattice), rng);
        match model.log_likelihood(&v0) {
            Ok(loglik) => {
                return Ok(MwgState {
                    v0,
                    alpha,
                    beta2,
                    loglik,
                    rho: cfg.pcn.rho,
                })
            }
            Err(e) if e.is_numerical() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("loop ran"))
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl<M: ForwardModel> MwgSampler<M> {
    pub fn new(cfg: MwgConfig, model: M, state: MwgState, rng: ChaCha20Rng) -> Result<Self> {
        cfg.validate()?;
        Ok(MwgSampler {
            cfg,
            model,
            state,
            rng,
            iteration: 0,
            stats: MoveStats::default(),
        })
    }

    /// Starts from [`initial_state`] using `init_rng`; moves use `chain_rng`.
    pub fn from_prior(
        cfg: MwgConfig,
        mut model: M,
        lattice: &Arc<WavenumberSet>,
        init_rng: &mut ChaCha20Rng,
        chain_rng: ChaCha20Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let state = initial_state(&cfg, lattice, &mut model, init_rng)?;
        Self::new(cfg, model, state, chain_rng)
    }

    /// As [`MwgSampler::from_prior`] with the starting `α` pinned.
    pub fn from_prior_at(
        cfg: MwgConfig,
        alpha: Option<f64>,
        mut model: M,
        lattice: &Arc<WavenumberSet>,
        init_rng: &mut ChaCha20Rng,
        chain_rng: ChaCha20Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let state = initial_state_at(&cfg, alpha, lattice, &mut model, init_rng)?;
        Self::new(cfg, model, state, chain_rng)
    }

    pub fn state(&self) -> &MwgState {
        &self.state
    }

    pub fn stats(&self) -> &MoveStats {
        &self.stats
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn config(&self) -> &MwgConfig {
        &self.cfg
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    fn adapting(&self) -> bool {
        self.cfg.pcn.adapt && (self.iteration as usize) < self.cfg.burn_in
    }

    /// Performs one randomly chosen move and returns its record.
    pub fn step(&mut self) -> Result<ChainRecord> {
        let after_burn_in = self.iteration as usize >= self.cfg.burn_in;
        let u: f64 = self.rng.random();
        let (move_kind, accepted) = if u < self.cfg.p_v {
            let prior = NsPriorParams::new(self.state.alpha, self.state.beta2)?;
            let out = pcn_step(
                &self.state.v0,
                self.state.loglik,
                &prior,
                self.state.rho,
                &mut self.model,
                &mut self.rng,
            )?;
            self.stats.v_moves += 1;
            self.stats.v_accepts += u64::from(out.accepted);
            if after_burn_in {
                self.stats.v_moves_after_burn_in += 1;
                self.stats.v_accepts_after_burn_in += u64::from(out.accepted);
            }
            if self.adapting() {
                // Robbins–Monro on logit ρ: too many acceptances → smaller ρ.
                let gain = (self.stats.v_moves as f64 + 1.0).powf(-0.6);
                let acc = if out.accepted { 1.0 } else { 0.0 };
                let z = logit(self.state.rho.min(1.0 - 1e-12)) - gain * (acc - self.cfg.pcn.target_accept);
                self.state.rho = expit(z).clamp(1e-6, 1.0 - 1e-9);
            }
            self.state.v0 = out.field;
            self.state.loglik = out.loglik;
            (MoveKind::Velocity, Some(out.accepted))
        } else if u < self.cfg.p_v + self.cfg.p_beta2 {
            self.state.beta2 = beta2_gibbs_move(&self.state.v0, self.state.alpha, &self.cfg.beta2_prior, &mut self.rng);
            self.stats.beta2_moves += 1;
            (MoveKind::Beta2, None)
        } else {
            let (alpha, acc) = alpha_mh_move(
                &self.state.v0,
                self.state.alpha,
                self.state.beta2,
                self.cfg.rho_alpha,
                &self.cfg.alpha_prior,
                &mut self.rng,
            )?;
            self.state.alpha = alpha;
            self.stats.alpha_moves += 1;
            self.stats.alpha_accepts += u64::from(acc);
            (MoveKind::Alpha, Some(acc))
        };
        self.iteration += 1;
        Ok(ChainRecord {
            iteration: self.iteration,
            move_kind,
            accepted,
            loglik: self.state.loglik,
            params: vec![self.state.alpha, self.state.beta2, self.state.rho],
        })
    }

    /// Runs `iterations` steps, passing each record and the new state to `sink`.
    pub fn run<F>(&mut self, iterations: usize, mut sink: F) -> Result<()>
    where
        F: FnMut(&ChainRecord, &MwgState) -> Result<()>,
    {
        for _ in 0..iterations {
            let r = self.step()?;
            sink(&r, &self.state)?;
        }
        Ok(())
    }
}

pub const NS_PARAM_NAMES: [&str; 3] = ["alpha", "beta2", "rho"];

#[derive(Debug, Serialize, Deserialize)]
struct NsCheckpoint {
    iteration: u64,
    alpha: f64,
    beta2: f64,
    loglik: f64,
    rho: f64,
    v0: Vec<f64>,
    stats: MoveStats,
    solves: u64,
    rng: RngState,
    offsets: ChainOffsets,
    config: serde_json::Value,
}

/// Counts and timings of a finished run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: u64,
    pub stats: MoveStats,
    pub solver_calls: u64,
    pub final_rho: f64,
}

pub struct DiskRun<'a> {
    pub dir: &'a Path,
    pub seed: u64,
    pub chain_index: u32,
    /// Checkpoint interval in iterations (`0` disables).
    pub checkpoint_every: usize,
    /// Echoed into the chain header; must match on resume.
    pub config_echo: serde_json::Value,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

/// Runs the sampler to `cfg.iterations`, writing the chain directory.
/// With `resume`, continues from `checkpoint.json` in that directory.
pub fn mwg_run<M: ForwardModel>(
    sampler: &mut MwgSampler<M>,
    run: &DiskRun<'_>,
    resume: bool,
) -> Result<RunSummary> {
    let ckpt_path = run.dir.join("checkpoint.json");
    let start = Instant::now();
    let mut solve_offset = 0i64;
    let mut writer = if resume {
        let ck: NsCheckpoint = serde_json::from_slice(&std::fs::read(&ckpt_path).map_err(|e| {
            Error::Checkpoint(format!("cannot read {}: {e}", ckpt_path.display()))
        })?)?;
        if ck.config != run.config_echo {
            return Err(Error::Checkpoint("configuration differs from the checkpointed run".into()));
        }
        let lattice = Arc::clone(sampler.state.v0.lattice());
        sampler.state = MwgState {
            v0: SpectralVelocityField::from_real_coords(lattice, &ck.v0)?,
            alpha: ck.alpha,
            beta2: ck.beta2,
            loglik: ck.loglik,
            rho: ck.rho,
        };
        sampler.iteration = ck.iteration;
        sampler.stats = ck.stats;
        sampler.rng = ck.rng.restore()?;
        solve_offset = ck.solves as i64 - sampler.model.solve_count() as i64;
        ChainWriter::resume(run.dir, ck.offsets)?
    } else {
        let header = ChainHeader {
            format: "hierda-chain".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            case: "ns".into(),
            n: sampler.state.v0.n(),
            ordering_tag: crate::spectral::ORDERING_TAG,
            seed: run.seed,
            chain_index: run.chain_index,
            thin: sampler.cfg.thin,
            burn_in: sampler.cfg.burn_in,
            param_names: NS_PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
            config: run.config_echo.clone(),
        };
        let mut w = ChainWriter::create(run.dir, header)?;
        w.snapshot_velocity(0, &sampler.state.v0)?;
        w
    };
    let total = sampler.cfg.iterations as u64;
    let thin = sampler.cfg.thin as u64;
    while sampler.iteration < total {
        let r = sampler.step()?;
        writer.append(&r)?;
        if r.iteration % thin == 0 {
            writer.snapshot_velocity(r.iteration, &sampler.state.v0)?;
        }
        if run.checkpoint_every > 0 && r.iteration % run.checkpoint_every as u64 == 0 && r.iteration < total {
            let offsets = writer.flush()?;
            let ck = NsCheckpoint {
                iteration: sampler.iteration,
                alpha: sampler.state.alpha,
                beta2: sampler.state.beta2,
                loglik: sampler.state.loglik,
                rho: sampler.state.rho,
                v0: sampler.state.v0.real_coords(),
                stats: sampler.stats,
                solves: (sampler.model.solve_count() as i64 + solve_offset) as u64,
                rng: RngState::capture(&sampler.rng),
                offsets,
                config: run.config_echo.clone(),
            };
            write_atomic(&ckpt_path, &serde_json::to_vec(&ck)?)?;
        }
    }
    writer.flush()?;
    let summary = RunSummary {
        iterations: sampler.iteration,
        stats: sampler.stats,
        solver_calls: (sampler.model.solve_count() as i64 + solve_offset) as u64,
        final_rho: sampler.state.rho,
    };
    std::fs::write(run.dir.join("run.json"), serde_json::to_string_pretty(&summary)?)?;
    let timing = serde_json::json!({
        "wall_seconds": start.elapsed().as_secs_f64(),
        "iterations_this_session": sampler.iteration,
    });
    std::fs::write(run.dir.join("timing.json"), serde_json::to_string_pretty(&timing)?)?;
    Ok(summary)
}

/// Velocity values of an ensemble propagated forward in time.
#[derive(Clone, Debug)]
pub struct ForecastEnsemble {
    pub times: Vec<f64>,
    pub points: Vec<GridPoint>,
    /// Per member: row-major `(time, point, component)`.
    pub members: Vec<Vec<f64>>,
    /// Members dropped because the solver blew up.
    pub excluded: usize,
}

impl ForecastEnsemble {
    /// Member values of one `(time, point, component)` entry.
    pub fn series(&self, t: usize, p: usize, c: usize) -> Vec<f64> {
        let idx = (t * self.points.len() + p) * 2 + c;
        self.members.iter().map(|m| m[idx]).collect()
    }
}

/// Propagates each sample of `v₀` with `ns` and records velocities at `points`
/// for every time in `times` (which may include 0).
pub fn forecast(
    samples: &[SpectralVelocityField],
    ns: &NsConfig,
    times: &[f64],
    points: &[GridPoint],
    exec: Execution,
) -> Result<ForecastEnsemble> {
    let probe = NsSolver::new(ns.clone());
    let marks = times.iter().map(|&t| probe.steps_for(t)).collect::<Result<Vec<_>>>()?;
    if marks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("forecast times must increase".into()));
    }
    let lattice = Arc::clone(ns.lattice());
    let results = par::map_range_with(
        exec,
        samples.len(),
        || (NsSolver::new(ns.clone()), SpectralTransform::new(Arc::clone(&lattice))),
        |(solver, transform), i| -> Result<Option<Vec<f64>>> {
            let mut work = samples[i].clone();
            let mut out = Vec::with_capacity(times.len() * points.len() * 2);
            let mut done = 0;
            for &m in &marks {
                match solver.advance(work.coeffs_mut(), m - done, done) {
                    Ok(()) => {}
                    Err(e) if e.is_numerical() => return Ok(None),
                    Err(e) => return Err(e),
                }
                done = m;
                out.extend(transform.velocity_to_grid(&work)?.sample(points)?);
            }
            Ok(Some(out))
        },
    );
    let mut members = Vec::new();
    let mut excluded = 0;
    for r in results {
        match r? {
            Some(m) => members.push(m),
            None => excluded += 1,
        }
    }
    Ok(ForecastEnsemble {
        times: times.to_vec(),
        points: points.to_vec(),
        members,
        excluded,
    })
}

/// Runs independent chains, each with its own sampler, possibly in parallel.
pub fn run_chains<M, F>(exec: Execution, count: usize, build: F, iterations: usize) -> Vec<Result<(MwgSampler<M>, Vec<ChainRecord>)>>
where
    M: ForwardModel + Send,
    F: Fn(usize) -> Result<MwgSampler<M>> + Sync + Send,
{
    let idx: Vec<usize> = (0..count).collect();
    par::map(exec, &idx, |&i| {
        let mut s = build(i)?;
        let mut records = Vec::with_capacity(iterations);
        s.run(iterations, |r, _| {
            records.push(r.clone());
            Ok(())
        })?;
        Ok((s, records))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ns::cosine_forcing;
    use crate::observation::{generate_observations, uniform_subgrid};
    use crate::priors::ns_quadratic_form;
    use crate::rng::{stream, Purpose};
    use crate::spectral::Wavenumber;
    use rand::SeedableRng;

    fn lattice(n: usize) -> Arc<WavenumberSet> {
        WavenumberSet::shared(n).unwrap()
    }

    fn cfg(p: [f64; 3]) -> MwgConfig {
        MwgConfig {
            p_v: p[0],
            p_beta2: p[1],
            p_alpha: p[2],
            rho_alpha: 0.5,
            alpha_prior: UniformInterval::new(0.6, 4.0).unwrap(),
            beta2_prior: InvGamma::new(4.0, 3.0).unwrap(),
            iterations: 100,
            burn_in: 0,
            thin: 10,
            pcn: PcnConfig::new(0.9).unwrap(),
        }
    }

    fn stationary_model(seed: u64, n: usize) -> NsForwardModel {
        let l = lattice(n);
        let f = cosine_forcing(Arc::clone(&l), Wavenumber::new(5, 5));
        let ns = NsConfig::new(0.1, f, 0.05).unwrap();
        let mut truth_rng = stream(seed, Purpose::Truth);
        let v0 = ns_prior_sample(&NsPriorParams::new(2.2, 1.2).unwrap(), Arc::clone(&l), &mut truth_rng);
        let times: Vec<f64> = (1..=5).map(f64::from).collect();
        let traj = NsSolver::new(ns.clone()).solve_to(&v0, 5.0, &times).unwrap();
        let obs = generate_observations(
            &traj,
            1.0,
            5,
            uniform_subgrid(n, 4).unwrap(),
            0.2f64.sqrt(),
            &mut stream(seed, Purpose::Noise),
        )
        .unwrap();
        NsForwardModel::new(ns, obs).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(cfg([0.5, 0.5, 0.1]).validate().is_err());
        let mut c = cfg([1.0, 0.0, 0.0]);
        c.rho_alpha = 1.0;
        assert!(c.validate().is_err());
        assert!(PcnConfig::new(0.0).is_err());
        assert!(PcnConfig::new(1.0).is_ok());
    }

    #[test]
    fn forward_model_matches_trajectory_likelihood() {
        let mut model = stationary_model(1, 16);
        let l = lattice(16);
        let v0 = ns_prior_sample(
            &NsPriorParams::new(2.0, 1.0).unwrap(),
            Arc::clone(&l),
            &mut ChaCha20Rng::seed_from_u64(2),
        );
        let ll = model.log_likelihood(&v0).unwrap();
        let times: Vec<f64> = (1..=5).map(f64::from).collect();
        let traj = NsSolver::new(model.solver().config().clone()).solve_to(&v0, 5.0, &times).unwrap();
        let direct = crate::observation::log_likelihood(&traj, model.observations()).unwrap();
        assert!((ll - direct).abs() < 1e-10 * direct.abs());
        assert_eq!(model.solve_count(), 1);
    }

    #[test]
    fn pcn_with_unit_rho_is_constant() {
        let l = lattice(8);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let prior = NsPriorParams::new(2.0, 1.0).unwrap();
        let v = ns_prior_sample(&prior, Arc::clone(&l), &mut rng);
        let mut model = FlatLikelihood::default();
        for _ in 0..20 {
            let out = pcn_step(&v, 0.0, &prior, 1.0, &mut model, &mut rng).unwrap();
            assert!(out.accepted);
            assert_eq!(out.field, v);
        }
    }

    #[test]
    fn pcn_blowup_is_a_rejection() {
        let mut model = stationary_model(4, 8);
        model.solver.set_blowup_threshold(1e-12);
        let l = lattice(8);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let prior = NsPriorParams::new(2.0, 1.0).unwrap();
        let v = ns_prior_sample(&prior, Arc::clone(&l), &mut rng);
        let out = pcn_step(&v, -3.0, &prior, 0.5, &mut model, &mut rng).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.loglik, -3.0);
        assert_eq!(out.field, v);
    }

    #[test]
    fn alpha_ratio_at_zero_field_is_determinant_term() {
        let l = lattice(16);
        let v = SpectralVelocityField::zeros(Arc::clone(&l));
        let prior = UniformInterval::new(0.6, 4.0).unwrap();
        let (a, b) = (2.0, 2.1);
        let got = alpha_log_accept(&v, a, b, 1.3, 0.5, &prior).unwrap();
        let direct: f64 = l.half().iter().map(|k| 2.0 * k.norm().ln()).sum::<f64>() * (b - a);
        assert!((got - direct).abs() < 1e-12 * direct.abs());
        assert_eq!(alpha_log_accept(&v, a, a, 1.3, 0.5, &prior).unwrap(), 0.0);
    }

    #[test]
    fn alpha_ratio_respects_reverse_reachability() {
        let l = lattice(8);
        let v = SpectralVelocityField::zeros(Arc::clone(&l));
        let prior = UniformInterval::new(1.0, 3.0).unwrap();
        // from α̂ = 1.1 with ρ = 0.5 the reachable set is [1.05, 2.05]
        assert!(alpha_log_accept(&v, 2.5, 1.1, 1.0, 0.5, &prior).unwrap().is_infinite());
        assert!(alpha_log_accept(&v, 2.0, 1.1, 1.0, 0.5, &prior).unwrap().is_finite());
        assert!(alpha_log_accept(&v, 2.0, 3.5, 1.0, 0.5, &prior).unwrap().is_infinite());
    }

    #[test]
    fn beta2_move_on_zero_field_uses_prior_scale() {
        let l = lattice(4);
        let v = SpectralVelocityField::zeros(Arc::clone(&l));
        let prior = InvGamma::new(1.5, 2.5).unwrap();
        let post = conjugate_beta2_update(&prior, &v, 2.0);
        assert_eq!(post, InvGamma { a: 5.5, b: 2.5 });
        let mut r1 = ChaCha20Rng::seed_from_u64(9);
        let mut r2 = ChaCha20Rng::seed_from_u64(9);
        assert_eq!(beta2_gibbs_move(&v, 2.0, &prior, &mut r1), post.sample(&mut r2));
    }

    #[test]
    fn hyperparameter_moves_skip_the_solver() {
        let l = lattice(8);
        let mut init = ChaCha20Rng::seed_from_u64(1);
        let mut s = MwgSampler::from_prior(
            cfg([0.0, 0.5, 0.5]),
            FlatLikelihood::default(),
            &l,
            &mut init,
            ChaCha20Rng::seed_from_u64(2),
        )
        .unwrap();
        s.run(500, |_, _| Ok(())).unwrap();
        assert_eq!(s.model().solve_count(), 1);
        assert_eq!(s.stats().v_moves, 0);
    }

    #[test]
    fn pure_pcn_scan_reduces_to_pcn_kernel() {
        // with p_v = 1 the chain consumes randomness as: scan draw, then the pCN step
        let l = lattice(8);
        let mut c = cfg([1.0, 0.0, 0.0]);
        c.pcn = PcnConfig::new(0.7).unwrap();
        let mut init = ChaCha20Rng::seed_from_u64(1);
        let mut model = FlatLikelihood::default();
        let st = initial_state(&c, &l, &mut model, &mut init).unwrap();
        let mut s = MwgSampler::new(c, FlatLikelihood::default(), st.clone(), ChaCha20Rng::seed_from_u64(2)).unwrap();
        s.run(50, |_, _| Ok(())).unwrap();

        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let prior = NsPriorParams::new(st.alpha, st.beta2).unwrap();
        let mut v = st.v0.clone();
        for _ in 0..50 {
            let _: f64 = rng.random();
            v = pcn_step(&v, 0.0, &prior, 0.7, &mut model, &mut rng).unwrap().field;
        }
        assert_eq!(s.state().v0, v);
    }

    #[test]
    fn same_seed_same_chain() {
        let l = lattice(8);
        let run = |seed| {
            let mut init = ChaCha20Rng::seed_from_u64(seed);
            let mut s = MwgSampler::from_prior(
                cfg([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
                FlatLikelihood::default(),
                &l,
                &mut init,
                ChaCha20Rng::seed_from_u64(seed + 1),
            )
            .unwrap();
            let mut out = Vec::new();
            s.run(200, |r, _| {
                out.push(r.clone());
                Ok(())
            })
            .unwrap();
            out
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn adaptation_moves_rho_only_during_burn_in() {
        let model = stationary_model(6, 8);
        let l = lattice(8);
        let mut c = cfg([1.0, 0.0, 0.0]);
        c.iterations = 300;
        c.burn_in = 200;
        c.pcn = PcnConfig {
            rho: 0.5,
            target_accept: 0.25,
            adapt: true,
        };
        let mut init = ChaCha20Rng::seed_from_u64(7);
        let mut s = MwgSampler::from_prior(c, model, &l, &mut init, ChaCha20Rng::seed_from_u64(8)).unwrap();
        s.run(200, |_, _| Ok(())).unwrap();
        let frozen = s.state().rho;
        assert_ne!(frozen, 0.5);
        s.run(100, |_, st| {
            assert_eq!(st.rho, frozen);
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn disk_run_resumes_bit_identically() {
        let l = lattice(8);
        let mut c = cfg([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        c.iterations = 120;
        let build = || {
            let mut init = ChaCha20Rng::seed_from_u64(11);
            MwgSampler::from_prior(c, stationary_model(3, 8), &l, &mut init, ChaCha20Rng::seed_from_u64(12)).unwrap()
        };
        let echo = serde_json::json!({"case": "test"});
        let full = tempfile::tempdir().unwrap();
        let run = DiskRun {
            dir: full.path(),
            seed: 11,
            chain_index: 0,
            checkpoint_every: 50,
            config_echo: echo.clone(),
        };
        let a = mwg_run(&mut build(), &run, false).unwrap();

        let part = tempfile::tempdir().unwrap();
        let mut short = c;
        short.iterations = 70;
        let mut init = ChaCha20Rng::seed_from_u64(11);
        let mut s = MwgSampler::from_prior(short, stationary_model(3, 8), &l, &mut init, ChaCha20Rng::seed_from_u64(12))
            .unwrap();
        let run_b = DiskRun {
            dir: part.path(),
            ..run
        };
        mwg_run(&mut s, &run_b, false).unwrap();
        let b = mwg_run(&mut build(), &run_b, true).unwrap();

        for f in ["chain.bin", "snapshots.bin", "scalars.csv", "run.json"] {
            assert_eq!(
                std::fs::read(full.path().join(f)).unwrap(),
                std::fs::read(part.path().join(f)).unwrap(),
                "{f}"
            );
        }
        assert_eq!(a.solver_calls, b.solver_calls);
        assert_eq!(a.solver_calls, a.stats.v_moves + 1);
    }

    #[test]
    fn forecast_basics() {
        let l = lattice(8);
        let f = cosine_forcing(Arc::clone(&l), Wavenumber::new(5, 5));
        let ns = NsConfig::new(0.1, f, 0.05).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let prior = NsPriorParams::new(2.0, 1.0).unwrap();
        let samples: Vec<_> = (0..4).map(|_| ns_prior_sample(&prior, Arc::clone(&l), &mut rng)).collect();
        let pts = uniform_subgrid(8, 2).unwrap();
        let fc = forecast(&samples, &ns, &[0.0, 0.5, 1.0], &pts, Execution::Sequential).unwrap();
        assert_eq!(fc.members.len(), 4);
        // t = 0 values are the samples themselves
        let g = SpectralTransform::new(Arc::clone(&l)).velocity_to_grid(&samples[2]).unwrap();
        assert_eq!(fc.series(0, 1, 1)[2], g.sample(&pts).unwrap()[3]);
        let par = forecast(&samples, &ns, &[0.0, 0.5, 1.0], &pts, Execution::Parallel).unwrap();
        assert_eq!(par.members, fc.members);
        let single = forecast(&samples[..1], &ns, &[1.0], &pts, Execution::Sequential).unwrap();
        assert_eq!(single.members.len(), 1);
    }

    #[test]
    fn quadratic_form_scales_with_alpha_move() {
        // sanity: the α ratio equals the difference of two prior densities
        let l = lattice(8);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let v = ns_prior_sample(&NsPriorParams::new(2.0, 1.0).unwrap(), Arc::clone(&l), &mut rng);
        let prior = UniformInterval::new(0.6, 4.0).unwrap();
        let r = alpha_log_accept(&v, 2.0, 2.2, 1.0, 0.5, &prior).unwrap();
        let q = |a: f64| ns_quadratic_form(&v, a);
        let manual = 0.2 * l.log_det_weight() - 0.5 * (q(2.2) - q(2.0));
        assert!((r - manual).abs() < 1e-12 * manual.abs().max(1.0));
    }
}
