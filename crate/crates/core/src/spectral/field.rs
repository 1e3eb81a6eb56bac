use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lattice::{Wavenumber, WavenumberSet};
use crate::error::{Error, Result};

/// Divergence-free, mean-free velocity field on the torus.
///
/// Stores one coefficient `u_k` on the basis function
/// `ψ_k(x) = k⊥/(2π|k|) e^{ik·x}` for every `k` of the upper half lattice;
/// the lower half is implied by `u_{-k} = −conj(u_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVelocityField {
    lattice: Arc<WavenumberSet>,
    coeffs: Vec<Complex64>,
}

/// Real scalar field on the torus: a real mean `c_0` plus `c_k` on the upper
/// half lattice, with `c_{-k} = conj(c_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralScalarField {
    lattice: Arc<WavenumberSet>,
    mean: f64,
    coeffs: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arity {
    Scalar,
    Vector,
}

impl Arity {
    pub fn components(self) -> usize {
        match self {
            Arity::Scalar => 1,
            Arity::Vector => 2,
        }
    }
}

/// Values on the uniform grid `x_ij = (2πi/n, 2πj/n)`, component-major, each
/// component stored row-major in `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    n: usize,
    arity: Arity,
    values: Vec<f64>,
}

/// Node `(i, j)` of the `n × n` grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub i: usize,
    pub j: usize,
}

impl GridPoint {
    pub const fn new(i: usize, j: usize) -> Self {
        GridPoint { i, j }
    }

    pub fn position(self, n: usize) -> [f64; 2] {
        let h = 2.0 * std::f64::consts::PI / n as f64;
        [h * self.i as f64, h * self.j as f64]
    }
}

fn check_lattice(a: &WavenumberSet, b: &WavenumberSet) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::LatticeMismatch {
            expected: a.n(),
            found: b.n(),
        });
    }
    Ok(())
}

impl SpectralVelocityField {
    pub fn zeros(lattice: Arc<WavenumberSet>) -> Self {
        let coeffs = vec![Complex64::default(); lattice.half().len()];
        SpectralVelocityField { lattice, coeffs }
    }

    pub fn from_coeffs(lattice: Arc<WavenumberSet>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != lattice.half().len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a half lattice of {}",
                coeffs.len(),
                lattice.half().len()
            )));
        }
        Ok(SpectralVelocityField { lattice, coeffs })
    }

    /// Builds a field from `2·|half|` real coordinates `(Re u_k, Im u_k)`.
    pub fn from_real_coords(lattice: Arc<WavenumberSet>, coords: &[f64]) -> Result<Self> {
        if coords.len() != lattice.real_dimension() {
            return Err(Error::DimensionMismatch(format!(
                "{} real coordinates for dimension {}",
                coords.len(),
                lattice.real_dimension()
            )));
        }
        let coeffs = coords
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        Ok(SpectralVelocityField { lattice, coeffs })
    }

    pub fn real_coords(&self) -> Vec<f64> {
        self.coeffs.iter().flat_map(|c| [c.re, c.im]).collect()
    }

    pub fn lattice(&self) -> &Arc<WavenumberSet> {
        &self.lattice
    }

    pub fn n(&self) -> usize {
        self.lattice.n()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at any `k` of the full lattice, applying the mirror rule.
    pub fn coeff(&self, k: Wavenumber) -> Option<Complex64> {
        if let Some(h) = self.lattice.half_index(k) {
            Some(self.coeffs[h])
        } else {
            self.lattice.half_index(-k).map(|h| -self.coeffs[h].conj())
        }
    }

    /// Sets `u_k` (and implicitly `u_{-k}`); `k` may be in either half.
    pub fn set_mode(&mut self, k: Wavenumber, value: Complex64) -> Result<()> {
        if let Some(h) = self.lattice.half_index(k) {
            self.coeffs[h] = value;
        } else if let Some(h) = self.lattice.half_index(-k) {
            self.coeffs[h] = -value.conj();
        } else {
            return Err(Error::InvalidParameter(format!("mode {k:?} not in lattice")));
        }
        Ok(())
    }

    /// L² inner product `⟨v, w⟩ = Σ_{k∈L_n} Re(conj(u_k) w_k)`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        check_lattice(&self.lattice, &other.lattice)?;
        Ok(2.0
            * self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.re * b.re + a.im * b.im)
                .sum::<f64>())
    }

    /// `‖v‖² = Σ_{k∈L_n} |u_k|²`.
    pub fn energy(&self) -> f64 {
        2.0 * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scale(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }

    /// `self ← self + a·x`.
    pub fn axpy(&mut self, a: f64, x: &Self) -> Result<()> {
        check_lattice(&self.lattice, &x.lattice)?;
        for (s, xv) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *s += xv * a;
        }
        Ok(())
    }

    /// `a·x + b·y`.
    pub fn combine(a: f64, x: &Self, b: f64, y: &Self) -> Result<Self> {
        check_lattice(&x.lattice, &y.lattice)?;
        let coeffs = x
            .coeffs
            .iter()
            .zip(&y.coeffs)
            .map(|(p, q)| p * a + q * b)
            .collect();
        Ok(SpectralVelocityField {
            lattice: Arc::clone(&x.lattice),
            coeffs,
        })
    }
}

impl SpectralScalarField {
    pub fn zeros(lattice: Arc<WavenumberSet>) -> Self {
        let coeffs = vec![Complex64::default(); lattice.half().len()];
        SpectralScalarField {
            lattice,
            mean: 0.0,
            coeffs,
        }
    }

    pub fn from_parts(lattice: Arc<WavenumberSet>, mean: f64, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != lattice.half().len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a half lattice of {}",
                coeffs.len(),
                lattice.half().len()
            )));
        }
        Ok(SpectralScalarField {
            lattice,
            mean,
            coeffs,
        })
    }

    /// Real coordinates `(c_0, Re c_k, Im c_k, ...)`, length `1 + 2·|half|`.
    pub fn real_coords(&self) -> Vec<f64> {
        std::iter::once(self.mean)
            .chain(self.coeffs.iter().flat_map(|c| [c.re, c.im]))
            .collect()
    }

    pub fn from_real_coords(lattice: Arc<WavenumberSet>, coords: &[f64]) -> Result<Self> {
        if coords.len() != 1 + lattice.real_dimension() {
            return Err(Error::DimensionMismatch(format!(
                "{} real coordinates for dimension {}",
                coords.len(),
                1 + lattice.real_dimension()
            )));
        }
        let coeffs = coords[1..]
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        Ok(SpectralScalarField {
            lattice,
            mean: coords[0],
            coeffs,
        })
    }

    pub fn lattice(&self) -> &Arc<WavenumberSet> {
        &self.lattice
    }

    pub fn n(&self) -> usize {
        self.lattice.n()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn set_mean(&mut self, mean: f64) {
        self.mean = mean;
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at any `k` (including `0`), applying Hermitian symmetry.
    pub fn coeff(&self, k: Wavenumber) -> Option<Complex64> {
        if k == Wavenumber::ZERO {
            return Some(Complex64::new(self.mean, 0.0));
        }
        if let Some(h) = self.lattice.half_index(k) {
            Some(self.coeffs[h])
        } else {
            self.lattice.half_index(-k).map(|h| self.coeffs[h].conj())
        }
    }

    pub fn set_mode(&mut self, k: Wavenumber, value: Complex64) -> Result<()> {
        if k == Wavenumber::ZERO {
            self.mean = value.re;
        } else if let Some(h) = self.lattice.half_index(k) {
            self.coeffs[h] = value;
        } else if let Some(h) = self.lattice.half_index(-k) {
            self.coeffs[h] = value.conj();
        } else {
            return Err(Error::InvalidParameter(format!("mode {k:?} not in lattice")));
        }
        Ok(())
    }

    /// `Σ_k |c_k|²` over the full lattice including `k = 0`; equals the grid
    /// mean of `f²`.
    pub fn energy(&self) -> f64 {
        self.mean * self.mean + 2.0 * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn scale(&mut self, a: f64) {
        self.mean *= a;
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }

    pub fn axpy(&mut self, a: f64, x: &Self) -> Result<()> {
        check_lattice(&self.lattice, &x.lattice)?;
        self.mean += a * x.mean;
        for (s, xv) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *s += xv * a;
        }
        Ok(())
    }
}

impl GridField {
    pub fn new(n: usize, arity: Arity, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n * arity.components() {
            return Err(Error::DimensionMismatch(format!(
                "{} grid values for a {n}x{n} {:?} field",
                values.len(),
                arity
            )));
        }
        Ok(GridField { n, arity, values })
    }

    pub fn zeros(n: usize, arity: Arity) -> Self {
        GridField {
            n,
            arity,
            values: vec![0.0; n * n * arity.components()],
        }
    }

    /// Samples `f(x)` on the grid.
    pub fn from_fn_scalar(n: usize, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(GridPoint::new(i, j).position(n)));
            }
        }
        GridField {
            n,
            arity: Arity::Scalar,
            values,
        }
    }

    pub fn from_fn_vector(n: usize, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut values = vec![0.0; 2 * n * n];
        for i in 0..n {
            for j in 0..n {
                let v = f(GridPoint::new(i, j).position(n));
                values[i * n + j] = v[0];
                values[n * n + i * n + j] = v[1];
            }
        }
        GridField {
            n,
            arity: Arity::Vector,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.values[c * nn..(c + 1) * nn]
    }

    pub fn at(&self, c: usize, p: GridPoint) -> f64 {
        self.values[c * self.n * self.n + p.i * self.n + p.j]
    }

    /// Grid mean of `Σ_c f_c²`.
    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / (self.n * self.n) as f64
    }

    /// Values at `points`, components interleaved per point.
    pub fn sample(&self, points: &[GridPoint]) -> Result<Vec<f64>> {
        let comps = self.arity.components();
        let mut out = Vec::with_capacity(points.len() * comps);
        for &p in points {
            if p.i >= self.n || p.j >= self.n {
                return Err(Error::OutOfRange {
                    i: p.i,
                    j: p.j,
                    n: self.n,
                });
            }
            for c in 0..comps {
                out.push(self.at(c, p));
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &GridField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
