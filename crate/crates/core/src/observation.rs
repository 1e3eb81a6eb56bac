//! Eulerian observations at fixed grid nodes with Gaussian noise:
//! `y_{t,υ} = v(x_υ, tδ) + τ ζ_{t,υ}` for `t = 1..T`.
//!
//! Vector fields contribute each component as a separate scalar observation,
//! so `Υ` sites of a velocity field give `2Υ` scalars per time.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ns::Trajectory;
use crate::spectral::{Arity, GridPoint, SpectralField, SpectralTransform};

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    pub delta: f64,
    pub times: Vec<f64>,
    pub points: Vec<GridPoint>,
    pub arity: Arity,
    /// Row-major `(T, Υ, components)`.
    pub values: Vec<f64>,
    pub tau: f64,
}

impl ObservationSet {
    pub fn new(
        delta: f64,
        points: Vec<GridPoint>,
        arity: Arity,
        values: Vec<f64>,
        tau: f64,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("observation lag must be > 0, got {delta}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise level must be > 0, got {tau}")));
        }
        let mut sorted = points.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("observation points must be distinct".into()));
        }
        let per_time = points.len() * arity.components();
        if per_time == 0 || values.len() % per_time != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} scalars per time",
                values.len(),
                per_time
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("observations must be finite".into()));
        }
        let t = values.len() / per_time;
        let times = (1..=t).map(|i| i as f64 * delta).collect();
        Ok(ObservationSet {
            delta,
            times,
            points,
            arity,
            values,
            tau,
        })
    }

    pub fn num_times(&self) -> usize {
        self.times.len()
    }

    pub fn per_time(&self) -> usize {
        self.points.len() * self.arity.components()
    }

    /// Total scalar observation count `M`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at_time(&self, t: usize) -> &[f64] {
        let m = self.per_time();
        &self.values[t * m..(t + 1) * m]
    }

    pub fn tau2(&self) -> f64 {
        self.tau * self.tau
    }

    /// Gaussian log-likelihood of predicted values laid out like `values`.
    pub fn log_likelihood_of(&self, predicted: &[f64]) -> Result<f64> {
        if predicted.len() != self.values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictions for {} observations",
                predicted.len(),
                self.values.len()
            )));
        }
        let ss: f64 = self.values.iter().zip(predicted).map(|(y, p)| (y - p) * (y - p)).sum();
        Ok(gaussian_loglik(self.values.len(), self.tau2(), ss))
    }
}

/// `−(M/2) log(2πτ²) − SS/(2τ²)`.
pub fn gaussian_loglik(m: usize, tau2: f64, sum_sq: f64) -> f64 {
    -0.5 * m as f64 * (2.0 * PI * tau2).ln() - sum_sq / (2.0 * tau2)
}

/// `per_side²` nodes evenly spaced on the `n × n` grid: `(a·n/s, b·n/s)`.
pub fn uniform_subgrid(n: usize, per_side: usize) -> Result<Vec<GridPoint>> {
    if per_side == 0 || per_side > n || n % per_side != 0 {
        return Err(Error::InvalidParameter(format!(
            "{per_side} sites per side does not divide the {n}-point grid"
        )));
    }
    let step = n / per_side;
    Ok((0..per_side)
        .flat_map(|a| (0..per_side).map(move |b| GridPoint::new(a * step, b * step)))
        .collect())
}

/// Every node of the `n × n` grid, row-major.
pub fn full_grid(n: usize) -> Vec<GridPoint> {
    (0..n).flat_map(|i| (0..n).map(move |j| GridPoint::new(i, j))).collect()
}

/// Field values at `points` for every observation time after `t = 0`.
pub fn predict<F: SpectralField>(
    traj: &Trajectory<F>,
    delta: f64,
    num_times: usize,
    points: &[GridPoint],
) -> Result<Vec<f64>> {
    let first = traj.states().first().expect("trajectories are non-empty");
    let mut transform = SpectralTransform::new(first.lattice().clone());
    let mut out = Vec::new();
    for t in 1..=num_times {
        let time = t as f64 * delta;
        let state = traj.state_at(time).ok_or(Error::MissingTime(time))?;
        out.extend(state.to_grid_with(&mut transform)?.sample(points)?);
    }
    Ok(out)
}

/// Samples noisy observations of `traj` at `t = δ, 2δ, …, Tδ`.
pub fn generate_observations<F: SpectralField, R: Rng + ?Sized>(
    traj: &Trajectory<F>,
    delta: f64,
    num_times: usize,
    points: Vec<GridPoint>,
    tau: f64,
    rng: &mut R,
) -> Result<ObservationSet> {
    let arity = traj.last().arity();
    let mut values = predict(traj, delta, num_times, &points)?;
    for v in values.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += tau * z;
    }
    ObservationSet::new(delta, points, arity, values, tau)
}

pub fn log_likelihood<F: SpectralField>(traj: &Trajectory<F>, obs: &ObservationSet) -> Result<f64> {
    if traj.last().arity() != obs.arity {
        return Err(Error::DimensionMismatch("field arity differs from observations".into()));
    }
    let pred = predict(traj, obs.delta, obs.num_times(), &obs.points)?;
    obs.log_likelihood_of(&pred)
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    n: usize,
    delta: f64,
    tau: f64,
    components: usize,
    times: Vec<f64>,
    points: Vec<GridPoint>,
    seed: Option<u64>,
}

/// Writes `observations.csv` (`time_index,point_index,component,value`, with
/// 1-based time index) and the `observations.json` sidecar.
pub fn write_observations(dir: &Path, obs: &ObservationSet, n: usize, seed: Option<u64>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("observations.csv"))?);
    writeln!(w, "time_index,point_index,component,value")?;
    let comps = obs.arity.components();
    for t in 0..obs.num_times() {
        for (p, chunk) in obs.at_time(t).chunks(comps).enumerate() {
            for (c, v) in chunk.iter().enumerate() {
                writeln!(w, "{},{},{},{:e}", t + 1, p, c, v)?;
            }
        }
    }
    w.flush()?;
    let sidecar = Sidecar {
        n,
        delta: obs.delta,
        tau: obs.tau,
        components: comps,
        times: obs.times.clone(),
        points: obs.points.clone(),
        seed,
    };
    std::fs::write(dir.join("observations.json"), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Reads files written by [`write_observations`]; returns the set and mesh size.
pub fn read_observations(dir: &Path) -> Result<(ObservationSet, usize)> {
    let sidecar: Sidecar = serde_json::from_reader(BufReader::new(File::open(dir.join("observations.json"))?))?;
    let arity = match sidecar.components {
        1 => Arity::Scalar,
        2 => Arity::Vector,
        c => return Err(Error::Format(format!("unsupported component count {c}"))),
    };
    let per_time = sidecar.points.len() * sidecar.components;
    let mut values = vec![f64::NAN; sidecar.times.len() * per_time];
    let file = BufReader::new(File::open(dir.join("observations.csv"))?);
    for (line_no, line) in file.lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("observations.csv line {}: {line}", line_no + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad());
        }
        let t: usize = f[0].parse().map_err(|_| bad())?;
        let p: usize = f[1].parse().map_err(|_| bad())?;
        let c: usize = f[2].parse().map_err(|_| bad())?;
        let v: f64 = f[3].parse().map_err(|_| bad())?;
        if t == 0 || t > sidecar.times.len() || p >= sidecar.points.len() || c >= sidecar.components {
            return Err(bad());
        }
        values[(t - 1) * per_time + p * sidecar.components + c] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Format("observations.csv is missing entries".into()));
    }
    let obs = ObservationSet::new(sidecar.delta, sidecar.points, arity, values, sidecar.tau)?;
    Ok((obs, sidecar.n))
}
