//! Chain post-processing: traces, autocorrelation and effective sample size,
//! pointwise field statistics, forecast bands and solve-count accounting.
//!
//! Everything here is a deterministic function of the chain directory, so
//! re-running the exports produces identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::{Chain, MoveKind, Snapshot};
use crate::error::{Error, Result};
use crate::mwg::ForecastEnsemble;
use crate::spectral::io::FieldBlock;
use crate::spectral::{to_grid, vorticity, GridField};

/// Values of one scalar quantity across the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarChain {
    pub name: String,
    pub values: Vec<f64>,
    pub burn_in: usize,
}

impl ScalarChain {
    pub fn new(name: impl Into<String>, values: Vec<f64>, burn_in: usize) -> Result<Self> {
        if burn_in >= values.len() {
            return Err(Error::InvalidParameter(format!(
                "burn-in {burn_in} leaves no samples out of {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at index {i}")));
        }
        Ok(ScalarChain {
            name: name.into(),
            values,
            burn_in,
        })
    }

    /// Post-burn-in values.
    pub fn retained(&self) -> &[f64] {
        &self.values[self.burn_in..]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Acf {
    pub values: Vec<f64>,
    /// The chain was constant; values are 1 at lag 0 and 0 elsewhere.
    pub degenerate: bool,
}

fn centered(x: &[f64]) -> (Vec<f64>, f64) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0 = d.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    (d, c0)
}

fn lag_cov(d: &[f64], lag: usize) -> f64 {
    d.iter().zip(&d[lag..]).map(|(a, b)| a * b).sum::<f64>() / d.len() as f64
}

/// Biased autocorrelation estimate of the retained values for lags
/// `0..=max_lag`.
pub fn autocorrelation(c: &ScalarChain, max_lag: usize) -> Result<Acf> {
    let x = c.retained();
    if x.len() <= max_lag {
        return Err(Error::InvalidParameter(format!(
            "max lag {max_lag} needs more than {} retained samples",
            x.len()
        )));
    }
    let (d, c0) = centered(x);
    if c0 == 0.0 {
        let mut values = vec![0.0; max_lag + 1];
        values[0] = 1.0;
        return Ok(Acf { values, degenerate: true });
    }
    let values = (0..=max_lag).map(|l| lag_cov(&d, l) / c0).collect();
    Ok(Acf {
        values,
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ess {
    pub value: f64,
    pub degenerate: bool,
}

/// Effective sample size `N / (1 + 2 Σ ρ_l)` with the sum truncated at the
/// first non-positive pair `ρ_{2m} + ρ_{2m+1}` (initial positive sequence).
pub fn ess(c: &ScalarChain) -> Ess {
    let x = c.retained();
    let n = x.len();
    let (d, c0) = centered(x);
    if c0 == 0.0 {
        return Ess {
            value: 0.0,
            degenerate: true,
        };
    }
    let rho = |l: usize| if l < n { lag_cov(&d, l) / c0 } else { 0.0 };
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho(2 * m) + rho(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    Ess {
        value: n as f64 / tau.max(1.0 / n as f64),
        degenerate: false,
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Derived grid quantity summarized by [`field_summary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldSelector {
    Vorticity,
    /// One velocity component (0 or 1).
    Velocity(usize),
    /// The scalar field itself.
    Scalar,
}

/// Pointwise mean and variance over snapshots (row-major `i·n + j`).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSummary {
    pub n: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub count: usize,
}

fn derived_grid(block: &FieldBlock, sel: FieldSelector) -> Result<GridField> {
    match (block, sel) {
        (FieldBlock::Velocity(v), FieldSelector::Vorticity) => to_grid(&vorticity(v)),
        (FieldBlock::Velocity(v), FieldSelector::Velocity(c)) if c < 2 => {
            let g = to_grid(v)?;
            GridField::new(g.n(), crate::spectral::Arity::Scalar, g.component(c).to_vec())
        }
        (FieldBlock::Scalar(s), FieldSelector::Scalar) => to_grid(s),
        _ => Err(Error::InvalidParameter(format!("selector {sel:?} does not apply to this field"))),
    }
}

/// One-pass (Welford) pointwise mean and variance of the selected grid
/// quantity over `snapshots`. The variance divides by the snapshot count.
pub fn field_summary<'a, I>(snapshots: I, sel: FieldSelector) -> Result<FieldSummary>
where
    I: IntoIterator<Item = &'a Snapshot>,
{
    let mut count = 0usize;
    let mut mean: Vec<f64> = Vec::new();
    let mut m2: Vec<f64> = Vec::new();
    let mut n = 0;
    for s in snapshots {
        let g = derived_grid(&s.field, sel)?;
        if count == 0 {
            n = g.n();
            mean = vec![0.0; n * n];
            m2 = vec![0.0; n * n];
        } else if g.n() != n {
            return Err(Error::LatticeMismatch {
                expected: n,
                found: g.n(),
            });
        }
        count += 1;
        let k = count as f64;
        for ((m, q), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(g.values()) {
            let d = x - *m;
            *m += d / k;
            *q += d * (x - *m);
        }
    }
    if count == 0 {
        return Err(Error::InvalidParameter("no snapshots to summarize".into()));
    }
    let variance = m2.iter().map(|q| (q / count as f64).max(0.0)).collect();
    Ok(FieldSummary {
        n,
        mean,
        variance,
        count,
    })
}

/// Snapshots recorded after the chain's burn-in.
pub fn retained_snapshots(chain: &Chain) -> impl Iterator<Item = &Snapshot> {
    let burn = chain.header.burn_in as u64;
    chain.snapshots.iter().filter(move |s| s.iteration > burn)
}

/// Per-entry forecast statistics; quantiles at `(1 − level)/2`, `0.5`,
/// `(1 + level)/2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandRow {
    pub time: f64,
    pub point: usize,
    pub component: usize,
    pub mean: f64,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
    pub members: usize,
    /// Fewer than 20 members.
    pub unreliable: bool,
}

pub const MIN_BAND_MEMBERS: usize = 20;

pub fn trajectory_bands(ens: &ForecastEnsemble, level: f64) -> Result<Vec<BandRow>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("interval level must lie in (0, 1), got {level}")));
    }
    if ens.members.is_empty() {
        return Err(Error::InvalidParameter("empty forecast ensemble".into()));
    }
    let mut rows = Vec::with_capacity(ens.times.len() * ens.points.len() * 2);
    for (t, &time) in ens.times.iter().enumerate() {
        for p in 0..ens.points.len() {
            for c in 0..2 {
                let s = sorted(&ens.series(t, p, c));
                rows.push(BandRow {
                    time,
                    point: p,
                    component: c,
                    mean: s.iter().sum::<f64>() / s.len() as f64,
                    lower: quantile(&s, 0.5 * (1.0 - level)),
                    median: quantile(&s, 0.5),
                    upper: quantile(&s, 0.5 * (1.0 + level)),
                    members: s.len(),
                    unreliable: s.len() < MIN_BAND_MEMBERS,
                });
            }
        }
    }
    Ok(rows)
}

/// Move tallies and forward-solver count of one chain, in the layout of a
/// run-time table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveCountReport {
    pub case: String,
    pub iterations: u64,
    pub velocity_moves: u64,
    pub beta2_moves: u64,
    pub alpha_moves: u64,
    pub sweeps: u64,
    /// Forward PDE solves performed by the moves (one per velocity move).
    pub pde_solves: u64,
    pub wall_seconds: Option<f64>,
    pub seconds_per_iteration: Option<f64>,
}

pub fn solve_count_report(chain: &Chain, wall_seconds: Option<f64>) -> SolveCountReport {
    let count = |k: MoveKind| chain.records.iter().filter(|r| r.move_kind == k).count() as u64;
    let iterations = chain.records.len() as u64;
    let velocity_moves = count(MoveKind::Velocity);
    SolveCountReport {
        case: chain.header.case.clone(),
        iterations,
        velocity_moves,
        beta2_moves: count(MoveKind::Beta2),
        alpha_moves: count(MoveKind::Alpha),
        sweeps: count(MoveKind::Sweep),
        pde_solves: velocity_moves,
        wall_seconds,
        seconds_per_iteration: wall_seconds.filter(|_| iterations > 0).map(|w| w / iterations as f64),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub ess: f64,
    pub degenerate: bool,
}

pub fn param_summary(c: &ScalarChain) -> ParamSummary {
    let x = c.retained();
    let s = sorted(x);
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64;
    let e = ess(c);
    ParamSummary {
        mean,
        sd: var.sqrt(),
        q05: quantile(&s, 0.05),
        median: quantile(&s, 0.5),
        q95: quantile(&s, 0.95),
        ess: e.value,
        degenerate: e.degenerate,
    }
}

/// Scalar chain of parameter `name` with the header's burn-in.
pub fn scalar_chain(chain: &Chain, name: &str) -> Result<ScalarChain> {
    let v = chain
        .param(name)
        .ok_or_else(|| Error::InvalidParameter(format!("chain has no parameter {name}")))?;
    ScalarChain::new(name, v, chain.header.burn_in.min(chain.records.len().saturating_sub(1)))
}

/// Trace CSV: one row per record with the running acceptance rate of the
/// move kind that produced it.
pub fn trace_csv(chain: &Chain) -> String {
    let mut out = String::from("iteration,move,accepted,cumulative_acceptance,loglik");
    for p in &chain.header.param_names {
        out.push(',');
        out.push_str(p);
    }
    out.push('\n');
    let mut tally: BTreeMap<u8, (u64, u64)> = BTreeMap::new();
    for r in &chain.records {
        let (moves, acc) = tally.entry(r.move_kind as u8).or_default();
        let flag = match r.accepted {
            Some(a) => {
                *moves += 1;
                *acc += u64::from(a);
                if a { "1" } else { "0" }
            }
            None => "",
        };
        let rate = if *moves > 0 {
            (*acc as f64 / *moves as f64).to_string()
        } else {
            String::new()
        };
        let _ = write!(out, "{},{},{},{},{}", r.iteration, r.move_kind.name(), flag, rate, r.loglik);
        for v in &r.params {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn acf_csv(chain: &Chain, max_lag: usize) -> Result<String> {
    let names = &chain.header.param_names;
    let acfs = names
        .iter()
        .map(|n| autocorrelation(&scalar_chain(chain, n)?, max_lag))
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::from("lag");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for l in 0..=max_lag {
        let _ = write!(out, "{l}");
        for a in &acfs {
            let _ = write!(out, ",{}", a.values[l]);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn field_csv(s: &FieldSummary) -> String {
    let mut out = String::from("i,j,mean,variance\n");
    for i in 0..s.n {
        for j in 0..s.n {
            let k = i * s.n + j;
            let _ = writeln!(out, "{i},{j},{},{}", s.mean[k], s.variance[k]);
        }
    }
    out
}

pub fn bands_csv(rows: &[BandRow]) -> String {
    let mut out = String::from("time,point,component,mean,lower,median,upper,members,unreliable\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.time,
            r.point,
            r.component,
            r.mean,
            r.lower,
            r.median,
            r.upper,
            r.members,
            u8::from(r.unreliable)
        );
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub case: String,
    pub n: usize,
    pub burn_in: usize,
    pub records: usize,
    pub snapshots_retained: usize,
    pub params: BTreeMap<String, ParamSummary>,
    pub config: serde_json::Value,
}

/// Writes `trace.csv`, `acf.csv`, `summary.json`, `solve_counts.json` and
/// the field statistics (`vorticity.csv` for velocity chains, `field.csv` for
/// scalar paths) into `out`.
pub fn export_chain_diagnostics(chain: &Chain, chain_dir: &Path, out: &Path, max_lag: usize) -> Result<()> {
    if chain.is_empty() {
        return Err(Error::InvalidParameter(format!("chain in {} has no records", chain_dir.display())));
    }
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("trace.csv"), trace_csv(chain))?;
    let retained = chain.records.len() - chain.header.burn_in.min(chain.records.len() - 1);
    std::fs::write(out.join("acf.csv"), acf_csv(chain, max_lag.min(retained.saturating_sub(1)))?)?;
    let mut params = BTreeMap::new();
    for n in &chain.header.param_names {
        params.insert(n.clone(), param_summary(&scalar_chain(chain, n)?));
    }
    let kept: Vec<&Snapshot> = retained_snapshots(chain).collect();
    let summary = DiagnosticsSummary {
        case: chain.header.case.clone(),
        n: chain.header.n,
        burn_in: chain.header.burn_in,
        records: chain.records.len(),
        snapshots_retained: kept.len(),
        params,
        config: chain.header.config.clone(),
    };
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    // Wall-clock time stays out so that diagnostics are reproducible byte for byte.
    std::fs::write(
        out.join("solve_counts.json"),
        serde_json::to_string_pretty(&solve_count_report(chain, None))?,
    )?;
    if kept.len() >= 2 {
        match kept[0].field {
            FieldBlock::Velocity(_) => {
                let s = field_summary(kept.iter().copied(), FieldSelector::Vorticity)?;
                std::fs::write(out.join("vorticity.csv"), field_csv(&s))?;
            }
            FieldBlock::Scalar(_) => {
                let s = field_summary(kept.iter().copied(), FieldSelector::Scalar)?;
                std::fs::write(out.join("field.csv"), field_csv(&s))?;
            }
        }
    }
    Ok(())
}
