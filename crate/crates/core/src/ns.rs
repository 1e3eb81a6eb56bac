//! Pseudo-spectral Galerkin solver for 2D incompressible Navier–Stokes on the
//! torus, written in the Stokes eigenbasis:
//!
//! ```text
//! du/dt + η A u + B(u, u) = P f,     A ψ_k = |k|² ψ_k
//! ```
//!
//! The nonlinear term is evaluated with products on a `2n` mesh (zero-padded
//! spectra), which makes the truncated convolution exact. Time stepping is
//! first-order exponential time differencing: the linear part is integrated
//! exactly and the remainder with explicit Euler.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{io, Fft2d, SpectralVelocityField, Wavenumber, WavenumberSet};

/// Abort threshold on `max_k |u_k|`.
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e8;

#[derive(Clone, Debug)]
pub struct NsConfig {
    pub eta: f64,
    /// Projected forcing `P f` in `ψ_k` coefficients.
    pub forcing: SpectralVelocityField,
    pub dt: f64,
    /// Switch for the advection term; only oracle tests turn it off.
    pub nonlinear: bool,
    pub blowup_threshold: f64,
}

impl NsConfig {
    pub fn new(eta: f64, forcing: SpectralVelocityField, dt: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("viscosity must be > 0, got {eta}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be > 0, got {dt}")));
        }
        Ok(NsConfig {
            eta,
            forcing,
            dt,
            nonlinear: true,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
        })
    }

    pub fn lattice(&self) -> &Arc<WavenumberSet> {
        self.forcing.lattice()
    }

    pub fn n(&self) -> usize {
        self.forcing.n()
    }
}

/// `f(x) = ∇⊥ cos(k_f · x)` projected onto the lattice. Its only coefficient is
/// `u_{k_f} = iπ|k_f|`. Returns zero forcing if `k_f` is outside the lattice.
pub fn cosine_forcing(lattice: Arc<WavenumberSet>, kf: Wavenumber) -> SpectralVelocityField {
    let mut f = SpectralVelocityField::zeros(lattice);
    if f.lattice().contains(kf) {
        // u_{-k} = −conj(u_k) makes the sign choice symmetric in ±k_f.
        f.set_mode(kf, Complex64::new(0.0, PI * kf.norm()))
            .expect("mode checked above");
    }
    f
}

/// `φ₁(z) = (e^z − 1)/z`, with `φ₁(0) = 1`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() > 1e-4 {
        z.exp_m1() / z
    } else {
        1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    }
}

/// States recorded at increasing times, starting at `t = 0`.
#[derive(Clone, Debug)]
pub struct Trajectory<F> {
    times: Vec<f64>,
    states: Vec<F>,
}

impl<F> Trajectory<F> {
    pub fn new(times: Vec<f64>, states: Vec<F>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("trajectory times must increase".into()));
        }
        Ok(Trajectory { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[F] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_at(&self, t: f64) -> Option<&F> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|i| &self.states[i])
    }

    pub fn last(&self) -> &F {
        self.states.last().expect("trajectories are non-empty")
    }
}

/// Solver instance: FFT plans, padded buffers and per-mode ETD factors.
/// Single-threaded; create one per chain.
pub struct NsSolver {
    cfg: NsConfig,
    m: usize,
    fft: Fft2d,
    grid_a: Vec<Complex64>,
    grid_b: Vec<Complex64>,
    /// Padded-mesh offsets of `k` and `−k` for each half-lattice mode.
    pos: Vec<usize>,
    neg: Vec<usize>,
    decay: Vec<f64>,
    gain: Vec<f64>,
    nonlin: Vec<Complex64>,
    steps: u64,
}

impl NsSolver {
    pub fn new(cfg: NsConfig) -> Self {
        let lattice = Arc::clone(cfg.lattice());
        let m = 2 * lattice.n();
        let pos = lattice.half().iter().map(|k| k.fft_index(m)).collect();
        let neg = lattice.half().iter().map(|k| (-*k).fft_index(m)).collect();
        let (decay, gain) = lattice
            .half()
            .iter()
            .map(|k| {
                let z = -cfg.eta * k.norm_sq() * cfg.dt;
                (z.exp(), phi1(z) * cfg.dt)
            })
            .unzip();
        NsSolver {
            m,
            fft: Fft2d::new(m),
            grid_a: vec![Complex64::default(); m * m],
            grid_b: vec![Complex64::default(); m * m],
            pos,
            neg,
            decay,
            gain,
            nonlin: vec![Complex64::default(); lattice.half().len()],
            steps: 0,
            cfg,
        }
    }

    pub fn config(&self) -> &NsConfig {
        &self.cfg
    }

    pub fn lattice(&self) -> &Arc<WavenumberSet> {
        self.cfg.lattice()
    }

    pub fn set_blowup_threshold(&mut self, threshold: f64) {
        self.cfg.blowup_threshold = threshold;
    }

    /// Total ETD steps taken by this instance.
    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn band(&self) -> usize {
        self.lattice().kmax() as usize + 1
    }

    fn check(&self, v: &SpectralVelocityField) -> Result<()> {
        if v.n() != self.cfg.n() {
            return Err(Error::LatticeMismatch {
                expected: self.cfg.n(),
                found: v.n(),
            });
        }
        Ok(())
    }

    /// Writes `v1 + i·v2` on the padded grid into `grid`.
    fn scatter_velocity(&mut self, coeffs: &[Complex64], into_b: bool) {
        let lattice = Arc::clone(self.cfg.lattice());
        let band = self.band();
        let grid = if into_b { &mut self.grid_b } else { &mut self.grid_a };
        grid.fill(Complex64::default());
        for (h, (k, &u)) in lattice.half().iter().zip(coeffs).enumerate() {
            let scale = 1.0 / (2.0 * PI * k.norm());
            let [p1, p2] = k.perp();
            let f1 = u * (p1 * scale);
            let f2 = u * (p2 * scale);
            grid[self.pos[h]] = f1 + Complex64::i() * f2;
            grid[self.neg[h]] = f1.conj() + Complex64::i() * f2.conj();
        }
        self.fft.inverse_band(grid, band);
    }

    /// Projects the symmetric stress held in `grid_a` as `(S22 − S11) + i·S12`
    /// onto the `ψ_k` basis: `b_k = 2πi [k1k2 D̂ + (k1² − k2²) Ŝ12] / |k|`.
    fn gather_stress(&mut self, out: &mut [Complex64]) {
        let band = self.band();
        self.fft.forward_band(&mut self.grid_a, band);
        let norm = 1.0 / (self.m * self.m) as f64;
        let lattice = Arc::clone(self.cfg.lattice());
        for (h, k) in lattice.half().iter().enumerate() {
            let p = self.grid_a[self.pos[h]] * norm;
            let q = self.grid_a[self.neg[h]].conj() * norm;
            let d = (p + q) * 0.5;
            let s12 = (p - q) * Complex64::new(0.0, -0.5);
            let (k1, k2) = (f64::from(k.k1), f64::from(k.k2));
            let t = d * (k1 * k2) + s12 * (k1 * k1 - k2 * k2);
            out[h] = t * Complex64::new(0.0, 2.0 * PI / k.norm());
        }
    }

    fn self_interaction(&mut self, coeffs: &[Complex64], out: &mut [Complex64]) {
        self.scatter_velocity(coeffs, false);
        for z in self.grid_a.iter_mut() {
            let (v1, v2) = (z.re, z.im);
            *z = Complex64::new(v2 * v2 - v1 * v1, v1 * v2);
        }
        self.gather_stress(out);
    }

    /// Symmetric bilinear form `B(v, w) = ½P((v·∇)w) + ½P((w·∇)v)`.
    pub fn bilinear(&mut self, v: &SpectralVelocityField, w: &SpectralVelocityField) -> Result<SpectralVelocityField> {
        self.check(v)?;
        self.check(w)?;
        let mut out = vec![Complex64::default(); v.coeffs().len()];
        if v == w {
            self.self_interaction(v.coeffs(), &mut out);
        } else {
            self.scatter_velocity(v.coeffs(), false);
            self.scatter_velocity(w.coeffs(), true);
            for (a, b) in self.grid_a.iter_mut().zip(&self.grid_b) {
                let (v1, v2, w1, w2) = (a.re, a.im, b.re, b.im);
                *a = Complex64::new(v2 * w2 - v1 * w1, 0.5 * (v1 * w2 + w1 * v2));
            }
            self.gather_stress(&mut out);
        }
        SpectralVelocityField::from_coeffs(Arc::clone(v.lattice()), out)
    }

    fn step_in_place(&mut self, coeffs: &mut [Complex64]) {
        let mut nonlin = std::mem::take(&mut self.nonlin);
        if self.cfg.nonlinear {
            self.self_interaction(coeffs, &mut nonlin);
        } else {
            nonlin.fill(Complex64::default());
        }
        let forcing = self.cfg.forcing.coeffs();
        for h in 0..coeffs.len() {
            coeffs[h] = coeffs[h] * self.decay[h] + (forcing[h] - nonlin[h]) * self.gain[h];
        }
        self.nonlin = nonlin;
        self.steps += 1;
    }

    /// One ETD-Euler step: `u_k ← e^{−ηλ_k dt} u_k + φ₁(−ηλ_k dt) dt (P f − B(u, u))_k`.
    pub fn etd_step(&mut self, v: &SpectralVelocityField) -> Result<SpectralVelocityField> {
        self.check(v)?;
        let mut out = v.clone();
        self.step_in_place(out.coeffs_mut());
        Ok(out)
    }

    /// Number of solver steps that land exactly on `t`.
    pub fn steps_for(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
        }
        let r = t / self.cfg.dt;
        let s = r.round();
        if (r - s).abs() > 1e-9 * r.max(1.0) {
            return Err(Error::OffStepTime { time: t, dt: self.cfg.dt });
        }
        Ok(s as usize)
    }

    /// Advances `coeffs` by `steps`, checking for blow-up after each step.
    /// `offset` is the step count already taken, for diagnostics.
    pub fn advance(&mut self, coeffs: &mut [Complex64], steps: usize, offset: usize) -> Result<()> {
        for s in 0..steps {
            self.step_in_place(coeffs);
            let max = coeffs
                .iter()
                .map(|c| c.re.abs().max(c.im.abs()))
                .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
            if !(max <= self.cfg.blowup_threshold) {
                let step = offset + s + 1;
                return Err(Error::BlowUp {
                    step,
                    time: step as f64 * self.cfg.dt,
                    max_coeff: max,
                });
            }
        }
        Ok(())
    }

    /// Integrates from `v0` to `t_end`, recording `t = 0` and every time in
    /// `record_at` (each a whole number of steps within `[0, t_end]`).
    pub fn solve_to(
        &mut self,
        v0: &SpectralVelocityField,
        t_end: f64,
        record_at: &[f64],
    ) -> Result<Trajectory<SpectralVelocityField>> {
        self.check(v0)?;
        let end_steps = self.steps_for(t_end)?;
        let mut marks = Vec::with_capacity(record_at.len());
        for &t in record_at {
            let s = self.steps_for(t)?;
            if s > end_steps {
                return Err(Error::InvalidParameter(format!("record time {t} beyond t_end {t_end}")));
            }
            if s > 0 {
                marks.push(s);
            }
        }
        marks.sort_unstable();
        marks.dedup();

        let mut times = vec![0.0];
        let mut states = vec![v0.clone()];
        let mut current = v0.clone();
        let mut done = 0;
        for s in marks {
            self.advance(current.coeffs_mut(), s - done, done)?;
            done = s;
            debug_assert!(current.is_finite());
            times.push(s as f64 * self.cfg.dt);
            states.push(current.clone());
        }
        if done < end_steps {
            self.advance(current.coeffs_mut(), end_steps - done, done)?;
        }
        Trajectory::new(times, states)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub format: String,
    pub version: String,
    pub n: usize,
    pub ordering_tag: u32,
    pub times: Vec<f64>,
    pub config: serde_json::Value,
}

/// Writes `trajectory.bin` (one field block per time) and `trajectory.json`.
pub fn write_trajectory(
    dir: &Path,
    traj: &Trajectory<SpectralVelocityField>,
    config: serde_json::Value,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("trajectory.bin"))?);
    for s in traj.states() {
        io::write_velocity(&mut w, s)?;
    }
    w.flush()?;
    let manifest = TrajectoryManifest {
        format: "hierda-trajectory".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        n: traj.last().n(),
        ordering_tag: crate::spectral::ORDERING_TAG,
        times: traj.times().to_vec(),
        config,
    };
    std::fs::write(dir.join("trajectory.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_trajectory(dir: &Path) -> Result<(Trajectory<SpectralVelocityField>, TrajectoryManifest)> {
    let manifest: TrajectoryManifest =
        serde_json::from_reader(BufReader::new(File::open(dir.join("trajectory.json"))?))?;
    let lattice = WavenumberSet::shared(manifest.n)?;
    let mut r = BufReader::new(File::open(dir.join("trajectory.bin"))?);
    let states = manifest
        .times
        .iter()
        .map(|_| io::read_velocity(&mut r, Some(&lattice)))
        .collect::<Result<Vec<_>>>()?;
    Ok((Trajectory::new(manifest.times.clone(), states)?, manifest))
}
