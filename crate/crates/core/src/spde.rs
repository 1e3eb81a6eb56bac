//! Stochastic advection–diffusion on the torus as a linear state-space model
//! in Fourier space:
//!
//! ```text
//! dv = (−μ·∇v + ∇·Σ∇v − ζ v) dt + dε,    ε a Whittle–Matérn innovation
//! ```
//!
//! The domain is the unit square with physical wavenumbers `κ = 2πk`; grid
//! site `(i, j)` sits at `(i/n, j/n)`. Each Fourier mode is an independent
//! complex Ornstein–Uhlenbeck process with rate `λ_k = −iμ·κ − κᵀΣκ − ζ`,
//! sampled exactly at the observation lag `δ`. The innovation spectrum is
//! [`MaternParams::range_spectrum`].
//! Observations on the full grid decouple mode by mode (the grid-evaluation
//! operator has orthogonal columns); other site sets use a dense filter.
//!
//! State vectors use the real coordinates of [`SpectralScalarField`]:
//! `(c_0, Re c_k, Im c_k, ...)` over the upper half lattice.

use std::f64::consts::{FRAC_PI_2, PI, TAU as TWO_PI};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::ObservationSet;
use crate::priors::{InvGamma, MaternParams, UniformInterval};
use crate::spectral::{Arity, GridField, GridPoint, SpectralScalarField, SpectralTransform, Wavenumber, WavenumberSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpdeParams {
    pub zeta: f64,
    pub rho1: f64,
    pub gamma: f64,
    pub psi: f64,
    pub mu: [f64; 2],
    pub tau2: f64,
    pub matern: MaternParams,
}

impl SpdeParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [("zeta", self.zeta), ("rho1", self.rho1), ("gamma", self.gamma), ("tau2", self.tau2)];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..=FRAC_PI_2).contains(&self.psi) {
            return Err(Error::InvalidParameter(format!("psi must lie in [0, π/2], got {}", self.psi)));
        }
        if !self.mu.iter().all(|m| m.is_finite()) {
            return Err(Error::InvalidParameter("drift must be finite".into()));
        }
        MaternParams::new(self.matern.alpha, self.matern.rho0, self.matern.sigma2).map(|_| ())
    }

    /// Diffusion matrix `Σ = ρ₁² (MᵀM)⁻¹` with
    /// `M = [[cos ψ, sin ψ], [−γ sin ψ, γ cos ψ]]`.
    pub fn diffusion(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.psi.sin_cos();
        let g2 = self.gamma * self.gamma;
        // MᵀM = [[c² + γ²s², cs(1 − γ²)], [cs(1 − γ²), s² + γ²c²]], det = γ²
        let scale = self.rho1 * self.rho1 / g2;
        let off = -c * s * (1.0 - g2);
        [[scale * (s * s + g2 * c * c), scale * off], [scale * off, scale * (c * c + g2 * s * s)]]
    }

    /// Continuous-time rate `λ_k = −iμ·κ − κᵀΣκ − ζ` at `κ = 2πk`.
    pub fn rate(&self, k: Wavenumber) -> Complex64 {
        let sig = self.diffusion();
        let (k1, k2) = (TWO_PI * f64::from(k.k1), TWO_PI * f64::from(k.k2));
        let quad = sig[0][0] * k1 * k1 + 2.0 * sig[0][1] * k1 * k2 + sig[1][1] * k2 * k2;
        Complex64::new(-quad - self.zeta, -(self.mu[0] * k1 + self.mu[1] * k2))
    }
}

/// Per-mode exact discretization at lag `δ`. Index 0 is the mean mode; index
/// `1 + h` is half-lattice mode `h`.
#[derive(Clone, Debug)]
pub struct StateSpaceModel {
    pub lattice: Arc<WavenumberSet>,
    pub delta: f64,
    pub tau2: f64,
    pub g: Vec<Complex64>,
    /// Innovation variance `E|ε_k|²` per step.
    pub q: Vec<f64>,
}

pub fn build_state_space(p: &SpdeParams, lattice: Arc<WavenumberSet>, delta: f64) -> Result<StateSpaceModel> {
    p.validate()?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("lag must be > 0, got {delta}")));
    }
    let spectrum = p.matern.range_spectrum(&lattice);
    let modes = std::iter::once(Wavenumber::ZERO).chain(lattice.half().iter().copied());
    let mut g = Vec::with_capacity(spectrum.len());
    let mut q = Vec::with_capacity(spectrum.len());
    for (k, s) in modes.zip(spectrum) {
        let lam = p.rate(k);
        if !(lam.re < 0.0) {
            return Err(Error::InvalidParameter(format!("non-dissipative mode {k:?}: rate {lam}")));
        }
        g.push((lam * delta).exp());
        // ∫₀^δ e^{2 Re λ s} ds · s_k
        q.push(s * (2.0 * delta * lam.re).exp_m1() / (2.0 * lam.re));
    }
    Ok(StateSpaceModel {
        lattice,
        delta,
        tau2: p.tau2,
        g,
        q,
    })
}

impl StateSpaceModel {
    /// Number of real state coordinates.
    pub fn dim(&self) -> usize {
        1 + self.lattice.real_dimension()
    }

    /// Per-step innovation variance of real coordinate `c`.
    pub fn coord_innovation(&self, c: usize) -> f64 {
        if c == 0 {
            self.q[0]
        } else {
            0.5 * self.q[(c + 1) / 2]
        }
    }

    /// Stationary variance of real coordinate `c`.
    pub fn coord_stationary(&self, c: usize) -> f64 {
        let j = if c == 0 { 0 } else { (c + 1) / 2 };
        self.coord_innovation(c) / (1.0 - self.g[j].norm_sqr())
    }

    /// Real `D × D` transition matrix (2×2 rotation-scaling blocks per mode).
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        m[(0, 0)] = self.g[0].re;
        for (h, g) in self.g[1..].iter().enumerate() {
            let (r, i) = (1 + 2 * h, 2 + 2 * h);
            m[(r, r)] = g.re;
            m[(r, i)] = -g.im;
            m[(i, r)] = g.im;
            m[(i, i)] = g.re;
        }
        m
    }

    /// Applies the transition to a coordinate vector.
    pub fn propagate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        out[0] = self.g[0].re * x[0];
        for (h, g) in self.g[1..].iter().enumerate() {
            let c = Complex64::new(x[1 + 2 * h], x[2 + 2 * h]) * g;
            out[1 + 2 * h] = c.re;
            out[2 + 2 * h] = c.im;
        }
        out
    }

    /// Exact draw of states at `t = 1..T`, starting from stationarity.
    pub fn simulate<R: Rng + ?Sized>(&self, steps: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut path = Vec::with_capacity(steps);
        let mut x: Vec<f64> = (0..d)
            .map(|c| self.coord_stationary(c).sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for t in 0..steps {
            if t > 0 {
                x = self.propagate(&x);
                for (c, v) in x.iter_mut().enumerate() {
                    *v += self.coord_innovation(c).sqrt() * rng.sample::<f64, _>(StandardNormal);
                }
            }
            path.push(x.clone());
        }
        path
    }

    /// `Σ_c [x_1,c²/V_c + Σ_t (x_{t+1} − G x_t)_c²/Q_c]`: the path's Gaussian
    /// quadratic form, i.e. a χ²-type sum of squared whitened innovations.
    pub fn whitened_sum_sq(&self, path: &[Vec<f64>]) -> f64 {
        let d = self.dim();
        let mut ss: f64 = (0..d).map(|c| path[0][c] * path[0][c] / self.coord_stationary(c)).sum();
        for w in path.windows(2) {
            let pred = self.propagate(&w[0]);
            ss += (0..d)
                .map(|c| (w[1][c] - pred[c]).powi(2) / self.coord_innovation(c))
                .sum::<f64>();
        }
        ss
    }
}

/// Observations preprocessed for filtering.
#[derive(Clone, Debug)]
pub struct SpdeData {
    lattice: Arc<WavenumberSet>,
    obs: ObservationSet,
    layout: Layout,
}

#[derive(Clone, Debug)]
enum Layout {
    /// Per-time spectral projections of the data and the total squared
    /// residual orthogonal to the lattice span.
    FullGrid { proj: Vec<Vec<f64>>, resid_ss: f64 },
    Sites { h: DMatrix<f64>, y: Vec<DVector<f64>> },
}

impl SpdeData {
    pub fn new(obs: ObservationSet, lattice: Arc<WavenumberSet>) -> Result<Self> {
        Self::build(obs, lattice, false)
    }

    /// Uses the dense filter even for full-grid data.
    pub fn new_dense(obs: ObservationSet, lattice: Arc<WavenumberSet>) -> Result<Self> {
        Self::build(obs, lattice, true)
    }

    fn build(obs: ObservationSet, lattice: Arc<WavenumberSet>, dense: bool) -> Result<Self> {
        if obs.arity != Arity::Scalar {
            return Err(Error::Config("advection-diffusion observations must be scalar".into()));
        }
        let n = lattice.n();
        if let Some(p) = obs.points.iter().find(|p| p.i >= n || p.j >= n) {
            return Err(Error::OutOfRange { i: p.i, j: p.j, n });
        }
        let full = obs.points.len() == n * n;
        let layout = if full && !dense {
            let mut transform = SpectralTransform::new(Arc::clone(&lattice));
            let mut proj = Vec::with_capacity(obs.num_times());
            let mut resid_ss = 0.0;
            for t in 0..obs.num_times() {
                let mut values = vec![0.0; n * n];
                for (p, &y) in obs.points.iter().zip(obs.at_time(t)) {
                    values[p.i * n + p.j] = y;
                }
                let grid = GridField::new(n, Arity::Scalar, values)?;
                let coeffs = transform.scalar_from_grid(&grid)?;
                let back = transform.scalar_to_grid(&coeffs)?;
                resid_ss += grid.values().iter().zip(back.values()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                proj.push(coeffs.real_coords());
            }
            Layout::FullGrid { proj, resid_ss }
        } else {
            let d = 1 + lattice.real_dimension();
            let mut h = DMatrix::zeros(obs.points.len(), d);
            for (r, p) in obs.points.iter().enumerate() {
                let x = p.position(n);
                h[(r, 0)] = 1.0;
                for (j, k) in lattice.half().iter().enumerate() {
                    let phase = f64::from(k.k1) * x[0] + f64::from(k.k2) * x[1];
                    h[(r, 1 + 2 * j)] = 2.0 * phase.cos();
                    h[(r, 2 + 2 * j)] = -2.0 * phase.sin();
                }
            }
            let y = (0..obs.num_times())
                .map(|t| DVector::from_column_slice(obs.at_time(t)))
                .collect();
            Layout::Sites { h, y }
        };
        Ok(SpdeData { lattice, obs, layout })
    }

    pub fn observations(&self) -> &ObservationSet {
        &self.obs
    }

    pub fn lattice(&self) -> &Arc<WavenumberSet> {
        &self.lattice
    }

    pub fn is_full_grid(&self) -> bool {
        matches!(self.layout, Layout::FullGrid { .. })
    }

    pub fn num_times(&self) -> usize {
        self.obs.num_times()
    }
}

#[derive(Clone, Debug)]
pub enum Covariances {
    /// Per-coordinate variances (full-grid data keeps modes independent).
    Diagonal(Vec<Vec<f64>>),
    Dense(Vec<DMatrix<f64>>),
}

impl Covariances {
    /// Variance of coordinate `c` at time index `t`.
    pub fn variance(&self, t: usize, c: usize) -> f64 {
        match self {
            Covariances::Diagonal(v) => v[t][c],
            Covariances::Dense(m) => m[t][(c, c)],
        }
    }
}

#[derive(Clone, Debug)]
pub struct FilterState {
    pub predicted_means: Vec<Vec<f64>>,
    pub predicted_cov: Covariances,
    pub filtered_means: Vec<Vec<f64>>,
    pub filtered_cov: Covariances,
    /// `log p(y | parameters)` with the state path integrated out.
    pub loglik: f64,
}

fn check_model(data: &SpdeData, m: &StateSpaceModel) -> Result<()> {
    if data.lattice.n() != m.lattice.n() {
        return Err(Error::LatticeMismatch {
            expected: m.lattice.n(),
            found: data.lattice.n(),
        });
    }
    Ok(())
}

/// Kalman filter from the stationary initial distribution.
pub fn kalman_filter(data: &SpdeData, m: &StateSpaceModel) -> Result<FilterState> {
    check_model(data, m)?;
    match &data.layout {
        Layout::FullGrid { proj, resid_ss } => Ok(filter_modes(proj, *resid_ss, m, data.lattice.n())),
        Layout::Sites { h, y } => filter_dense(h, y, m),
    }
}

/// Log marginal likelihood only (no stored moments on the full-grid path).
pub fn log_marginal_likelihood(data: &SpdeData, m: &StateSpaceModel) -> Result<f64> {
    check_model(data, m)?;
    match &data.layout {
        Layout::FullGrid { proj, resid_ss } => Ok(loglik_modes(proj, *resid_ss, m, data.lattice.n())),
        Layout::Sites { h, y } => Ok(filter_dense(h, y, m)?.loglik),
    }
}

fn coord_noise(m: &StateSpaceModel, n: usize, c: usize) -> f64 {
    let w = if c == 0 { (n * n) as f64 } else { 2.0 * (n * n) as f64 };
    m.tau2 / w
}

/// Terms of the full-grid likelihood that do not depend on the state.
fn grid_constant(m: &StateSpaceModel, n: usize, times: usize, resid_ss: f64) -> f64 {
    let nn = (n * n) as f64;
    let d = m.dim();
    let per_time = -0.5 * nn * (2.0 * PI * m.tau2).ln()
        + 0.5 * (2.0 * PI * coord_noise(m, n, 0)).ln()
        + 0.5 * (d - 1) as f64 * (2.0 * PI * coord_noise(m, n, 1)).ln();
    times as f64 * per_time - resid_ss / (2.0 * m.tau2)
}

fn gauss_logpdf(r2: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + r2 / var)
}

fn loglik_modes(proj: &[Vec<f64>], resid_ss: f64, m: &StateSpaceModel, n: usize) -> f64 {
    let mut ll = grid_constant(m, n, proj.len(), resid_ss);
    // mean mode
    let (g0, q0, r0) = (m.g[0].re, m.q[0], coord_noise(m, n, 0));
    let (mut mean, mut var) = (0.0, q0 / (1.0 - g0 * g0));
    for (t, y) in proj.iter().enumerate() {
        if t > 0 {
            mean *= g0;
            var = g0 * g0 * var + q0;
        }
        let s = var + r0;
        ll += gauss_logpdf((y[0] - mean).powi(2), s);
        let k = var / s;
        mean += k * (y[0] - mean);
        var *= r0 / s;
    }
    let r = coord_noise(m, n, 1);
    for j in 1..m.g.len() {
        let (g, qc) = (m.g[j], 0.5 * m.q[j]);
        let g2 = g.norm_sqr();
        let mut mean = Complex64::default();
        let mut var = qc / (1.0 - g2);
        for (t, y) in proj.iter().enumerate() {
            if t > 0 {
                mean *= g;
                var = g2 * var + qc;
            }
            let obs = Complex64::new(y[2 * j - 1], y[2 * j]);
            let s = var + r;
            ll += -((2.0 * PI * s).ln()) - (obs - mean).norm_sqr() / (2.0 * s);
            mean += (obs - mean) * (var / s);
            var *= r / s;
        }
    }
    ll
}

fn filter_modes(proj: &[Vec<f64>], resid_ss: f64, m: &StateSpaceModel, n: usize) -> FilterState {
    let t_len = proj.len();
    let d = m.dim();
    let mut pm = vec![vec![0.0; d]; t_len];
    let mut pv = vec![vec![0.0; d]; t_len];
    let mut fm = vec![vec![0.0; d]; t_len];
    let mut fv = vec![vec![0.0; d]; t_len];
    for c in 0..d {
        // Re and Im coordinates of one mode share the same complex recursion,
        // but running them as real scalars is identical and simpler to store.
        let j = if c == 0 { 0 } else { (c + 1) / 2 };
        let g = m.g[j];
        let qc = m.coord_innovation(c);
        let r = coord_noise(m, n, c);
        let mut var = m.coord_stationary(c);
        for t in 0..t_len {
            if t > 0 {
                var = g.norm_sqr() * fv[t - 1][c] + qc;
            }
            pv[t][c] = var;
            let s = var + r;
            fv[t][c] = var * r / s;
        }
        let _ = j;
    }
    // means propagate through the complex rotation, so do them per time
    for t in 0..t_len {
        if t > 0 {
            pm[t] = m.propagate(&fm[t - 1]);
        }
        for c in 0..d {
            let s = pv[t][c] + coord_noise(m, n, c);
            fm[t][c] = pm[t][c] + pv[t][c] / s * (proj[t][c] - pm[t][c]);
        }
    }
    FilterState {
        predicted_means: pm,
        predicted_cov: Covariances::Diagonal(pv),
        filtered_means: fm,
        filtered_cov: Covariances::Diagonal(fv),
        loglik: loglik_modes(proj, resid_ss, m, n),
    }
}

fn filter_dense(h: &DMatrix<f64>, ys: &[DVector<f64>], m: &StateSpaceModel) -> Result<FilterState> {
    let d = m.dim();
    let g = m.transition_matrix();
    let q = DVector::from_iterator(d, (0..d).map(|c| m.coord_innovation(c)));
    let mut mean = DVector::zeros(d);
    let mut cov = DMatrix::from_diagonal(&DVector::from_iterator(d, (0..d).map(|c| m.coord_stationary(c))));
    let mut out = FilterState {
        predicted_means: Vec::new(),
        predicted_cov: Covariances::Dense(Vec::new()),
        filtered_means: Vec::new(),
        filtered_cov: Covariances::Dense(Vec::new()),
        loglik: 0.0,
    };
    let (mut pcs, mut fcs) = (Vec::new(), Vec::new());
    let mm = h.nrows();
    for (t, y) in ys.iter().enumerate() {
        if t > 0 {
            mean = &g * &mean;
            cov = &g * &cov * g.transpose();
            for c in 0..d {
                cov[(c, c)] += q[c];
            }
        }
        out.predicted_means.push(mean.as_slice().to_vec());
        pcs.push(cov.clone());
        let ph = &cov * h.transpose();
        let mut s = h * &ph;
        for i in 0..mm {
            s[(i, i)] += m.tau2;
        }
        let chol = s.cholesky().ok_or(Error::NonPositiveVariance {
            time_index: t,
            value: f64::NAN,
        })?;
        let innov = y - h * &mean;
        let sol = chol.solve(&innov);
        let logdet = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        out.loglik += -0.5 * (mm as f64 * (2.0 * PI).ln() + logdet + innov.dot(&sol));
        mean += &ph * sol;
        let k_t = chol.solve(&ph.transpose());
        cov -= &ph * k_t;
        cov = (&cov + cov.transpose()) * 0.5;
        out.filtered_means.push(mean.as_slice().to_vec());
        fcs.push(cov.clone());
    }
    out.predicted_cov = Covariances::Dense(pcs);
    out.filtered_cov = Covariances::Dense(fcs);
    Ok(out)
}

fn sample_gaussian<R: Rng + ?Sized>(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let eig = SymmetricEigen::new(cov.clone());
    let z = DVector::from_iterator(
        mean.len(),
        eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt() * rng.sample::<f64, _>(StandardNormal)),
    );
    mean + eig.eigenvectors * z
}

/// Forward filtering, backward sampling: an exact draw of the states at
/// `t = 1..T` given the data. Returns the draw and the filter output.
pub fn ffbs_sample<R: Rng + ?Sized>(
    data: &SpdeData,
    m: &StateSpaceModel,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, FilterState)> {
    let f = kalman_filter(data, m)?;
    let t_len = f.filtered_means.len();
    let d = m.dim();
    let mut path = vec![Vec::new(); t_len];
    match (&f.filtered_cov, &f.predicted_cov) {
        (Covariances::Diagonal(fv), Covariances::Diagonal(pv)) => {
            let draw = |mean: f64, var: f64, rng: &mut R| mean + var.max(0.0).sqrt() * rng.sample::<f64, _>(StandardNormal);
            path[t_len - 1] = (0..d).map(|c| draw(f.filtered_means[t_len - 1][c], fv[t_len - 1][c], rng)).collect();
            for t in (0..t_len - 1).rev() {
                let next = &path[t + 1];
                let mut x = vec![0.0; d];
                // mean mode
                {
                    let g = m.g[0].re;
                    let j = fv[t][0] * g / pv[t + 1][0];
                    let mean = f.filtered_means[t][0] + j * (next[0] - pv_mean(&f, t + 1, 0));
                    let var = fv[t][0] - j * g * fv[t][0];
                    x[0] = draw(mean, var, rng);
                }
                for h in 1..m.g.len() {
                    let (r, i) = (2 * h - 1, 2 * h);
                    let g = m.g[h];
                    let p = fv[t][r];
                    let pp = pv[t + 1][r];
                    let fm = Complex64::new(f.filtered_means[t][r], f.filtered_means[t][i]);
                    let pm = Complex64::new(f.predicted_means[t + 1][r], f.predicted_means[t + 1][i]);
                    let xn = Complex64::new(next[r], next[i]);
                    let mean = fm + g.conj() * (p / pp) * (xn - pm);
                    let var = p - p * p * g.norm_sqr() / pp;
                    x[r] = draw(mean.re, var, rng);
                    x[i] = draw(mean.im, var, rng);
                }
                path[t] = x;
            }
        }
        (Covariances::Dense(fc), Covariances::Dense(pc)) => {
            let g = m.transition_matrix();
            let last = DVector::from_column_slice(&f.filtered_means[t_len - 1]);
            path[t_len - 1] = sample_gaussian(&last, &fc[t_len - 1], rng).as_slice().to_vec();
            for t in (0..t_len - 1).rev() {
                let chol = pc[t + 1].clone().cholesky().ok_or(Error::NonPositiveVariance {
                    time_index: t + 1,
                    value: f64::NAN,
                })?;
                // J = P_t Gᵀ P_pred⁻¹
                let pg = &fc[t] * g.transpose();
                let jt = chol.solve(&pg.transpose());
                let next = DVector::from_column_slice(&path[t + 1]);
                let pm = DVector::from_column_slice(&f.predicted_means[t + 1]);
                let mean = DVector::from_column_slice(&f.filtered_means[t]) + jt.transpose() * (next - pm);
                let mut cov = &fc[t] - jt.transpose() * pg.transpose();
                cov = (&cov + cov.transpose()) * 0.5;
                path[t] = sample_gaussian(&mean, &cov, rng).as_slice().to_vec();
            }
        }
        _ => unreachable!("filter stores one representation"),
    }
    Ok((path, f))
}

fn pv_mean(f: &FilterState, t: usize, c: usize) -> f64 {
    f.predicted_means[t][c]
}

/// Twin-experiment data: an exact path draw at `t = 1..T` and its noisy
/// evaluations at `points` with noise variance `p.tau2`.
pub fn simulate_observations<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    p: &SpdeParams,
    lattice: Arc<WavenumberSet>,
    delta: f64,
    steps: usize,
    points: Vec<GridPoint>,
    truth_rng: &mut R1,
    noise_rng: &mut R2,
) -> Result<(Vec<Vec<f64>>, ObservationSet)> {
    let m = build_state_space(p, Arc::clone(&lattice), delta)?;
    let path = m.simulate(steps, truth_rng);
    let mut tr = SpectralTransform::new(Arc::clone(&lattice));
    let tau = p.tau2.sqrt();
    let mut values = Vec::with_capacity(steps * points.len());
    for x in &path {
        let f = SpectralScalarField::from_real_coords(Arc::clone(&lattice), x)?;
        let g = tr.scalar_to_grid(&f)?;
        for v in g.sample(&points)? {
            values.push(v + tau * noise_rng.sample::<f64, _>(StandardNormal));
        }
    }
    let obs = ObservationSet::new(delta, points, Arity::Scalar, values, tau)?;
    Ok((path, obs))
}

/// Converts a coordinate path into scalar fields.
pub fn path_fields(lattice: &Arc<WavenumberSet>, path: &[Vec<f64>]) -> Result<Vec<SpectralScalarField>> {
    path.iter()
        .map(|x| SpectralScalarField::from_real_coords(Arc::clone(lattice), x))
        .collect()
}

/// Hyperpriors of the advection-diffusion model. `ρ₀`'s upper bound scales
/// with the smoothness: `ρ₀ ~ U[rho0_lo, rho0_scale·(α − 1)^{-2}]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpdeHyperpriors {
    pub sigma2: InvGamma,
    pub gamma: InvGamma,
    pub zeta: InvGamma,
    pub tau2_max: f64,
    pub mu_bound: f64,
    pub rho1_max: f64,
    pub alpha: UniformInterval,
    pub rho0_lo: f64,
    pub rho0_scale: f64,
}

impl Default for SpdeHyperpriors {
    fn default() -> Self {
        SpdeHyperpriors {
            sigma2: InvGamma { a: 1.0, b: 1.0 },
            gamma: InvGamma { a: 5.0, b: 5.0 },
            zeta: InvGamma { a: 1.0, b: 1.0 },
            tau2_max: 100.0,
            mu_bound: 0.5,
            rho1_max: 100.0,
            alpha: UniformInterval { lo: 1.0, hi: 4.0 },
            rho0_lo: 0.01,
            rho0_scale: 5.0,
        }
    }
}

impl SpdeHyperpriors {
    pub fn rho0_upper(&self, alpha: f64) -> f64 {
        self.rho0_scale / ((alpha - 1.0) * (alpha - 1.0))
    }

    /// Bounded-parameter intervals in block order (after ζ, γ which are log-scaled):
    /// returns `(lo, hi)` for ρ₁, ψ, μ₁, μ₂, τ², ρ₀.
    fn intervals(&self, alpha: f64) -> [(f64, f64); 6] {
        [
            (0.0, self.rho1_max),
            (0.0, FRAC_PI_2),
            (-self.mu_bound, self.mu_bound),
            (-self.mu_bound, self.mu_bound),
            (0.0, self.tau2_max),
            (self.rho0_lo, self.rho0_upper(alpha)),
        ]
    }

    /// Joint log prior density (up to nothing: every term normalized).
    pub fn log_prior(&self, p: &SpdeParams) -> f64 {
        let a = p.matern.alpha;
        if !(a > self.alpha.lo && a <= self.alpha.hi) {
            return f64::NEG_INFINITY;
        }
        let mut lp = self.alpha.logpdf(a)
            + self.sigma2.logpdf(p.matern.sigma2)
            + self.gamma.logpdf(p.gamma)
            + self.zeta.logpdf(p.zeta);
        let vals = [p.rho1, p.psi, p.mu[0], p.mu[1], p.tau2, p.matern.rho0];
        for ((lo, hi), x) in self.intervals(a).into_iter().zip(vals) {
            if !(x > lo && x < hi) {
                return f64::NEG_INFINITY;
            }
            lp -= (hi - lo).ln();
        }
        lp
    }
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn expit(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Number of parameters moved by the random-walk block.
pub const BLOCK_DIM: usize = 10;

/// Block coordinate of `α`; frozen when `α` is fixed.
const ALPHA_COORD: usize = 9;

/// Maps the block `(ζ, ρ₁, γ, ψ, μ₁, μ₂, τ², ρ₀, σ², α)` to unconstrained
/// coordinates. `ρ₀` is placed relative to its `α`-dependent range, so the
/// map is triangular.
fn to_unconstrained(p: &SpdeParams, h: &SpdeHyperpriors) -> [f64; BLOCK_DIM] {
    let iv = h.intervals(p.matern.alpha);
    let u = |x: f64, (lo, hi): (f64, f64)| logit((x - lo) / (hi - lo));
    [
        p.zeta.ln(),
        u(p.rho1, iv[0]),
        p.gamma.ln(),
        u(p.psi, iv[1]),
        u(p.mu[0], iv[2]),
        u(p.mu[1], iv[3]),
        u(p.tau2, iv[4]),
        u(p.matern.rho0, iv[5]),
        p.matern.sigma2.ln(),
        u(p.matern.alpha, (h.alpha.lo, h.alpha.hi)),
    ]
}

/// Inverse of [`to_unconstrained`]; also returns `log |∂x/∂z|`.
fn from_unconstrained(z: &[f64; BLOCK_DIM], h: &SpdeHyperpriors) -> (SpdeParams, f64) {
    let mut log_jac = z[0] + z[2] + z[8];
    let mut b = |zz: f64, (lo, hi): (f64, f64)| {
        let e = expit(zz);
        // d/dz [lo + (hi−lo)·expit(z)] = (hi−lo)·e·(1−e)
        log_jac += (hi - lo).ln() + e.ln() + (1.0 - e).ln();
        lo + (hi - lo) * e
    };
    let alpha = b(z[ALPHA_COORD], (h.alpha.lo, h.alpha.hi));
    let iv = h.intervals(alpha);
    let rho1 = b(z[1], iv[0]);
    let psi = b(z[3], iv[1]);
    let mu0 = b(z[4], iv[2]);
    let mu1 = b(z[5], iv[3]);
    let tau2 = b(z[6], iv[4]);
    let rho0 = b(z[7], iv[5]);
    let p = SpdeParams {
        zeta: z[0].exp(),
        rho1,
        gamma: z[2].exp(),
        psi,
        mu: [mu0, mu1],
        tau2,
        matern: MaternParams {
            alpha,
            rho0,
            sigma2: z[8].exp(),
        },
    };
    (p, log_jac)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpdeMwgConfig {
    pub iterations: usize,
    pub burn_in: usize,
    /// Iterations with a fixed diagonal proposal before the empirical
    /// covariance starts accumulating.
    pub warmup: usize,
    pub thin: usize,
    pub hyper: SpdeHyperpriors,
    pub estimate_alpha: bool,
    pub initial: SpdeParams,
    /// Initial random-walk scale in unconstrained coordinates.
    pub initial_step: f64,
    pub target_accept: f64,
    /// Adds an independence move that redraws the drift from its uniform
    /// prior; the drift likelihood is multimodal and periodic.
    pub drift_refresh: bool,
}

impl SpdeMwgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Config("thinning interval must be >= 1".into()));
        }
        if self.burn_in > self.iterations || self.warmup > self.burn_in {
            return Err(Error::Config("need warmup <= burn-in <= iterations".into()));
        }
        self.initial.validate()?;
        if !self.hyper.log_prior(&self.initial).is_finite() {
            return Err(Error::Config("initial parameters lie outside the hyperprior support".into()));
        }
        Ok(())
    }
}

/// Random-walk proposal state: running moments of post-warmup samples and a
/// Robbins–Monro log-scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockAdaptation {
    pub log_scale: f64,
    pub count: u64,
    pub mean: Vec<f64>,
    /// Running sum of outer products of deviations (Welford), row-major.
    pub m2: Vec<f64>,
    /// Frozen lower Cholesky factor of the proposal covariance, row-major.
    pub chol: Option<Vec<f64>>,
    pub alpha_log_step: f64,
}

impl BlockAdaptation {
    fn new(step: f64) -> Self {
        BlockAdaptation {
            log_scale: step.ln(),
            count: 0,
            mean: vec![0.0; BLOCK_DIM],
            m2: vec![0.0; BLOCK_DIM * BLOCK_DIM],
            chol: None,
            alpha_log_step: 0.1f64.ln(),
        }
    }

    fn observe(&mut self, z: &[f64; BLOCK_DIM]) {
        self.count += 1;
        let nf = self.count as f64;
        let delta: Vec<f64> = z.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / nf;
        }
        for i in 0..BLOCK_DIM {
            for j in 0..BLOCK_DIM {
                self.m2[i * BLOCK_DIM + j] += delta[i] * (z[j] - self.mean[j]);
            }
        }
    }

    /// Lower factor of the proposal covariance currently in use.
    fn factor(&self) -> DMatrix<f64> {
        if let Some(c) = &self.chol {
            return DMatrix::from_row_slice(BLOCK_DIM, BLOCK_DIM, c);
        }
        let s = self.log_scale.exp();
        if self.count < 2 * BLOCK_DIM as u64 {
            return DMatrix::identity(BLOCK_DIM, BLOCK_DIM) * s;
        }
        let mut cov = DMatrix::from_row_slice(BLOCK_DIM, BLOCK_DIM, &self.m2) / (self.count as f64 - 1.0);
        for i in 0..BLOCK_DIM {
            cov[(i, i)] += 1e-8;
        }
        match cov.cholesky() {
            Some(c) => c.l() * s,
            None => DMatrix::identity(BLOCK_DIM, BLOCK_DIM) * s,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpdeStats {
    pub sweeps: u64,
    pub block_accepts: u64,
    pub block_accepts_after_burn_in: u64,
    pub alpha_moves: u64,
    pub alpha_accepts: u64,
    pub drift_moves: u64,
    pub drift_accepts: u64,
}

pub const SPDE_PARAM_NAMES: [&str; 10] =
    ["zeta", "rho1", "gamma", "psi", "mu1", "mu2", "tau2", "alpha", "rho0", "sigma2"];

pub fn param_vector(p: &SpdeParams) -> Vec<f64> {
    vec![
        p.zeta,
        p.rho1,
        p.gamma,
        p.psi,
        p.mu[0],
        p.mu[1],
        p.tau2,
        p.matern.alpha,
        p.matern.rho0,
        p.matern.sigma2,
    ]
}

pub fn params_from_vector(v: &[f64]) -> Result<SpdeParams> {
    if v.len() != SPDE_PARAM_NAMES.len() {
        return Err(Error::DimensionMismatch(format!("{} parameters, expected 10", v.len())));
    }
    let p = SpdeParams {
        zeta: v[0],
        rho1: v[1],
        gamma: v[2],
        psi: v[3],
        mu: [v[4], v[5]],
        tau2: v[6],
        matern: MaternParams {
            alpha: v[7],
            rho0: v[8],
            sigma2: v[9],
        },
    };
    p.validate()?;
    Ok(p)
}

/// Gibbs sweep sampler for `(path, φ, θ)`:
///
/// 1. adaptive random-walk Metropolis on `(ζ, ρ₁, γ, ψ, μ, τ², ρ₀)` with the
///    path integrated out by the Kalman filter;
/// 2. random-walk Metropolis on `α` (same marginal likelihood; the `ρ₀`
///    prior bound moves with `α`);
/// 3. FFBS draw of the path;
/// 4. conjugate inverse-gamma draw of `σ²` given the path.
///
/// Steps 1–2 marginalize the path, which step 3 then refreshes before step 4
/// conditions on it, so the sweep leaves the joint posterior invariant.
pub struct SpdeSampler {
    cfg: SpdeMwgConfig,
    data: SpdeData,
    params: SpdeParams,
    path: Vec<Vec<f64>>,
    loglik: f64,
    rng: ChaCha20Rng,
    iteration: u64,
    adapt: BlockAdaptation,
    stats: SpdeStats,
}

impl SpdeSampler {
    pub fn new(cfg: SpdeMwgConfig, data: SpdeData, rng: ChaCha20Rng) -> Result<Self> {
        cfg.validate()?;
        let m = build_state_space(&cfg.initial, Arc::clone(data.lattice()), data.observations().delta)?;
        let loglik = log_marginal_likelihood(&data, &m)?;
        Ok(SpdeSampler {
            params: cfg.initial,
            path: Vec::new(),
            loglik,
            rng,
            iteration: 0,
            adapt: BlockAdaptation::new(cfg.initial_step),
            stats: SpdeStats::default(),
            cfg,
            data,
        })
    }

    pub fn params(&self) -> &SpdeParams {
        &self.params
    }

    pub fn path(&self) -> &[Vec<f64>] {
        &self.path
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn stats(&self) -> &SpdeStats {
        &self.stats
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn config(&self) -> &SpdeMwgConfig {
        &self.cfg
    }

    pub fn data(&self) -> &SpdeData {
        &self.data
    }

    fn loglik_of(&self, p: &SpdeParams) -> Result<f64> {
        let m = build_state_space(p, Arc::clone(self.data.lattice()), self.data.observations().delta)?;
        log_marginal_likelihood(&self.data, &m)
    }

    fn block_move(&mut self) -> Result<bool> {
        let h = self.cfg.hyper;
        let z = to_unconstrained(&self.params, &h);
        let (_, jac) = from_unconstrained(&z, &h);
        let current = self.loglik + h.log_prior(&self.params) + jac;
        let l = self.adapt.factor();
        let e = DVector::from_iterator(BLOCK_DIM, (0..BLOCK_DIM).map(|_| self.rng.sample::<f64, _>(StandardNormal)));
        let mut step = l * e;
        if !self.cfg.estimate_alpha {
            step[ALPHA_COORD] = 0.0;
        }
        let mut zp = z;
        for (a, s) in zp.iter_mut().zip(step.iter()) {
            *a += s;
        }
        let u: f64 = self.rng.random();
        let (mut prop, jac_p) = from_unconstrained(&zp, &h);
        if !self.cfg.estimate_alpha {
            // keep α bit-exact rather than round-tripped through the logit
            prop.matern.alpha = self.params.matern.alpha;
        }
        let lp = h.log_prior(&prop);
        let mut accepted = false;
        let mut log_a = f64::NEG_INFINITY;
        if lp.is_finite() && prop.validate().is_ok() {
            match self.loglik_of(&prop) {
                Ok(ll) => {
                    log_a = ll + lp + jac_p - current;
                    if u.ln() < log_a {
                        self.params = prop;
                        self.loglik = ll;
                        accepted = true;
                    }
                }
                Err(e) if e.is_numerical() || matches!(e, Error::InvalidParameter(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let it = self.iteration as usize;
        if it < self.cfg.burn_in {
            let a = log_a.min(0.0).exp();
            let gain = (self.iteration as f64 + 1.0).powf(-0.6);
            self.adapt.log_scale += gain * (a - self.cfg.target_accept);
            if it >= self.cfg.warmup {
                let z_now = to_unconstrained(&self.params, &h);
                if self.adapt.count == 0 {
                    // switch from the diagonal warmup proposal to the
                    // covariance-shaped one with the usual dimension scaling
                    let d = BLOCK_DIM - usize::from(!self.cfg.estimate_alpha);
                    self.adapt.log_scale = (2.38 / (d as f64).sqrt()).ln();
                }
                self.adapt.observe(&z_now);
            }
        } else if self.adapt.chol.is_none() {
            let f = self.adapt.factor();
            self.adapt.chol = Some(f.transpose().as_slice().to_vec());
        }
        Ok(accepted)
    }

    fn alpha_move(&mut self) -> Result<bool> {
        let h = self.cfg.hyper;
        let step = self.adapt.alpha_log_step.exp();
        let a = self.params.matern.alpha;
        let a_hat = a + step * self.rng.sample::<f64, _>(StandardNormal);
        let u: f64 = self.rng.random();
        let mut prop = self.params;
        prop.matern.alpha = a_hat;
        let mut log_a = f64::NEG_INFINITY;
        let mut accepted = false;
        let lp_new = h.log_prior(&prop);
        if lp_new.is_finite() {
            let ll = self.loglik_of(&prop)?;
            // includes π(ρ₀ | α̂)/π(ρ₀ | α) through the interval widths
            log_a = ll + lp_new - self.loglik - h.log_prior(&self.params);
            if u.ln() < log_a {
                self.params = prop;
                self.loglik = ll;
                accepted = true;
            }
        }
        if (self.iteration as usize) < self.cfg.burn_in {
            let gain = (self.iteration as f64 + 1.0).powf(-0.6);
            self.adapt.alpha_log_step += gain * (log_a.min(0.0).exp() - 0.44);
        }
        Ok(accepted)
    }

    /// Independence proposal of `μ` from its uniform prior.
    fn drift_move(&mut self) -> Result<bool> {
        let b = self.cfg.hyper.mu_bound;
        let mut prop = self.params;
        prop.mu = [self.rng.random_range(-b..b), self.rng.random_range(-b..b)];
        let u: f64 = self.rng.random();
        let ll = self.loglik_of(&prop)?;
        if u.ln() < ll - self.loglik {
            self.params = prop;
            self.loglik = ll;
            return Ok(true);
        }
        Ok(false)
    }

    /// One full sweep.
    pub fn step(&mut self) -> Result<crate::chain::ChainRecord> {
        if self.cfg.drift_refresh {
            let acc = self.drift_move()?;
            self.stats.drift_moves += 1;
            self.stats.drift_accepts += u64::from(acc);
        }
        let accepted = self.block_move()?;
        if self.cfg.estimate_alpha {
            let acc = self.alpha_move()?;
            self.stats.alpha_moves += 1;
            self.stats.alpha_accepts += u64::from(acc);
        }
        let lattice = Arc::clone(self.data.lattice());
        let m = build_state_space(&self.params, Arc::clone(&lattice), self.data.observations().delta)?;
        let (path, _) = ffbs_sample(&self.data, &m, &mut self.rng)?;
        // σ² only scales the innovation spectrum, so the whitened sum of
        // squares at σ² = 1 is its sufficient statistic
        let mut unit = self.params;
        unit.matern.sigma2 = 1.0;
        let m1 = build_state_space(&unit, lattice, self.data.observations().delta)?;
        let ss = m1.whitened_sum_sq(&path);
        let count = (path.len() * m1.dim()) as f64;
        let post = InvGamma {
            a: self.cfg.hyper.sigma2.a + 0.5 * count,
            b: self.cfg.hyper.sigma2.b + 0.5 * ss,
        };
        self.params.matern.sigma2 = post.sample(&mut self.rng);
        self.path = path;
        self.loglik = self.loglik_of(&self.params)?;

        self.stats.sweeps += 1;
        self.stats.block_accepts += u64::from(accepted);
        if self.iteration as usize >= self.cfg.burn_in {
            self.stats.block_accepts_after_burn_in += u64::from(accepted);
        }
        self.iteration += 1;
        Ok(crate::chain::ChainRecord {
            iteration: self.iteration,
            move_kind: crate::chain::MoveKind::Sweep,
            accepted: Some(accepted),
            loglik: self.loglik,
            params: param_vector(&self.params),
        })
    }

    pub fn run<F>(&mut self, sweeps: usize, mut sink: F) -> Result<()>
    where
        F: FnMut(&crate::chain::ChainRecord, &SpdeSampler) -> Result<()>,
    {
        for _ in 0..sweeps {
            let r = self.step()?;
            sink(&r, self)?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SpdeCheckpoint {
    iteration: u64,
    params: Vec<f64>,
    path: Vec<Vec<f64>>,
    adapt: BlockAdaptation,
    stats: SpdeStats,
    rng: crate::rng::RngState,
    offsets: crate::chain::ChainOffsets,
    config: serde_json::Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpdeRunSummary {
    pub iterations: u64,
    pub stats: SpdeStats,
    pub block_acceptance_after_burn_in: f64,
}

/// Runs the sampler to `cfg.iterations`, writing a chain directory whose
/// snapshots are the sampled paths (`T` scalar blocks per snapshot).
pub fn spde_mwg_run(sampler: &mut SpdeSampler, run: &crate::mwg::DiskRun<'_>, resume: bool) -> Result<SpdeRunSummary> {
    use crate::chain::{ChainHeader, ChainWriter};
    let start = std::time::Instant::now();
    let ckpt_path = run.dir.join("checkpoint.json");
    let lattice = Arc::clone(sampler.data.lattice());
    let mut writer = if resume {
        let bytes = std::fs::read(&ckpt_path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", ckpt_path.display())))?;
        let ck: SpdeCheckpoint = serde_json::from_slice(&bytes)?;
        if ck.config != run.config_echo {
            return Err(Error::Checkpoint("configuration differs from the checkpointed run".into()));
        }
        sampler.params = params_from_vector(&ck.params)?;
        sampler.loglik = sampler.loglik_of(&sampler.params)?;
        sampler.path = ck.path;
        sampler.adapt = ck.adapt;
        sampler.stats = ck.stats;
        sampler.iteration = ck.iteration;
        sampler.rng = ck.rng.restore()?;
        ChainWriter::resume(run.dir, ck.offsets)?
    } else {
        ChainWriter::create(
            run.dir,
            ChainHeader {
                format: "hierda-chain".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                case: "spde".into(),
                n: lattice.n(),
                ordering_tag: crate::spectral::ORDERING_TAG,
                seed: run.seed,
                chain_index: run.chain_index,
                thin: sampler.cfg.thin,
                burn_in: sampler.cfg.burn_in,
                param_names: SPDE_PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
                config: run.config_echo.clone(),
            },
        )?
    };
    let total = sampler.cfg.iterations as u64;
    let thin = sampler.cfg.thin as u64;
    while sampler.iteration < total {
        let r = sampler.step()?;
        writer.append(&r)?;
        if r.iteration % thin == 0 {
            for f in path_fields(&lattice, &sampler.path)? {
                writer.snapshot_scalar(r.iteration, &f)?;
            }
        }
        if run.checkpoint_every > 0 && r.iteration % run.checkpoint_every as u64 == 0 && r.iteration < total {
            let offsets = writer.flush()?;
            let ck = SpdeCheckpoint {
                iteration: sampler.iteration,
                params: param_vector(&sampler.params),
                path: sampler.path.clone(),
                adapt: sampler.adapt.clone(),
                stats: sampler.stats,
                rng: crate::rng::RngState::capture(&sampler.rng),
                offsets,
                config: run.config_echo.clone(),
            };
            let tmp = ckpt_path.with_extension("tmp");
            std::fs::write(&tmp, serde_json::to_vec(&ck)?)?;
            std::fs::rename(tmp, &ckpt_path)?;
        }
    }
    writer.flush()?;
    let kept = total.saturating_sub(sampler.cfg.burn_in as u64).max(1);
    let summary = SpdeRunSummary {
        iterations: sampler.iteration,
        stats: sampler.stats,
        block_acceptance_after_burn_in: sampler.stats.block_accepts_after_burn_in as f64 / kept as f64,
    };
    std::fs::write(run.dir.join("run.json"), serde_json::to_string_pretty(&summary)?)?;
    let timing = serde_json::json!({ "wall_seconds": start.elapsed().as_secs_f64() });
    std::fs::write(run.dir.join("timing.json"), serde_json::to_string_pretty(&timing)?)?;
    Ok(summary)
}

/// Generating values used for the advection–diffusion twin experiment.
pub fn reference_truth() -> SpdeParams {
    SpdeParams {
        zeta: 0.5,
        rho1: 0.1,
        gamma: 2.0,
        psi: std::f64::consts::FRAC_PI_4,
        mu: [0.2, -0.2],
        tau2: 0.01,
        matern: MaternParams {
            alpha: 2.0,
            rho0: 0.1,
            sigma2: 0.2,
        },
    }
}

/// Starting values for the twin experiment (α starts at its true value).
pub fn reference_start() -> SpdeParams {
    SpdeParams {
        zeta: 0.25,
        rho1: 0.2,
        gamma: 1.0,
        psi: 0.3,
        mu: [0.0, 0.0],
        tau2: 0.005,
        matern: MaternParams {
            alpha: 2.0,
            rho0: 0.2,
            sigma2: 0.1,
        },
    }
}
