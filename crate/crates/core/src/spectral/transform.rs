//! Grid ↔ spectral transforms.
//!
//! Normalization: a grid field `f` and its Fourier coefficients `F(k)` satisfy
//! `f(x) = Σ_k F(k) e^{ik·x}` and `F(k) = n⁻² Σ_x f(x) e^{-ik·x}`. For velocity
//! fields `F(k) = u_k k⊥/(2π|k|)`, so the discrete Parseval identity reads
//! `Σ_{k∈L_n} |u_k|² = (2π)² · mean_x |v(x)|²`; for scalar fields
//! `Σ_k |c_k|² = mean_x f(x)²`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use super::fft::Fft2d;
use super::field::{Arity, GridField, GridPoint, SpectralScalarField, SpectralVelocityField};
use super::lattice::WavenumberSet;
use crate::error::{Error, Result};

/// Cached FFT plan and buffer for one lattice. Not shared between threads.
pub struct SpectralTransform {
    lattice: Arc<WavenumberSet>,
    fft: Fft2d,
    buf: Vec<Complex64>,
}

impl SpectralTransform {
    pub fn new(lattice: Arc<WavenumberSet>) -> Self {
        let n = lattice.n();
        SpectralTransform {
            fft: Fft2d::new(n),
            buf: vec![Complex64::default(); n * n],
            lattice,
        }
    }

    pub fn lattice(&self) -> &Arc<WavenumberSet> {
        &self.lattice
    }

    fn band(&self) -> usize {
        self.lattice.kmax() as usize + 1
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.lattice.n() {
            return Err(Error::LatticeMismatch {
                expected: self.lattice.n(),
                found: n,
            });
        }
        Ok(())
    }

    pub fn velocity_to_grid(&mut self, v: &SpectralVelocityField) -> Result<GridField> {
        self.check(v.n())?;
        let n = self.lattice.n();
        self.buf.fill(Complex64::default());
        // Pack both Hermitian component spectra as F1 + i·F2 so one inverse
        // transform yields v1 + i·v2.
        for (k, &u) in self.lattice.half().iter().zip(v.coeffs()) {
            let scale = 1.0 / (2.0 * PI * k.norm());
            let [p1, p2] = k.perp();
            let f1 = u * (p1 * scale);
            let f2 = u * (p2 * scale);
            let pos = k.fft_index(n);
            let neg = (-*k).fft_index(n);
            debug_assert_ne!(pos, neg);
            self.buf[pos] = f1 + Complex64::i() * f2;
            self.buf[neg] = f1.conj() + Complex64::i() * f2.conj();
        }
        let band = self.band();
        self.fft.inverse_band(&mut self.buf, band);
        let nn = n * n;
        let mut values = vec![0.0; 2 * nn];
        for (idx, z) in self.buf.iter().enumerate() {
            values[idx] = z.re;
            values[nn + idx] = z.im;
        }
        GridField::new(n, Arity::Vector, values)
    }

    pub fn scalar_to_grid(&mut self, s: &SpectralScalarField) -> Result<GridField> {
        self.check(s.n())?;
        let n = self.lattice.n();
        self.buf.fill(Complex64::default());
        self.buf[0] = Complex64::new(s.mean(), 0.0);
        for (k, &c) in self.lattice.half().iter().zip(s.coeffs()) {
            self.buf[k.fft_index(n)] = c;
            self.buf[(-*k).fft_index(n)] = c.conj();
        }
        let band = self.band();
        self.fft.inverse_band(&mut self.buf, band);
        let values = self.buf.iter().map(|z| z.re).collect();
        GridField::new(n, Arity::Scalar, values)
    }

    /// Leray projection of a vector grid field onto the truncated
    /// divergence-free, mean-free span, returned as `ψ_k` coefficients.
    pub fn velocity_from_grid(&mut self, g: &GridField) -> Result<SpectralVelocityField> {
        self.check(g.n())?;
        if g.arity() != Arity::Vector {
            return Err(Error::DimensionMismatch("velocity needs a 2-vector grid field".into()));
        }
        let n = self.lattice.n();
        let nn = n * n;
        let (a, b) = (g.component(0), g.component(1));
        for idx in 0..nn {
            self.buf[idx] = Complex64::new(a[idx], b[idx]);
        }
        let band = self.band();
        self.fft.forward_band(&mut self.buf, band);
        let norm = 1.0 / nn as f64;
        let coeffs = self
            .lattice
            .half()
            .iter()
            .map(|k| {
                let z = self.buf[k.fft_index(n)] * norm;
                let zm = self.buf[(-*k).fft_index(n)].conj() * norm;
                let f1 = (z + zm) * 0.5;
                let f2 = (z - zm) * Complex64::new(0.0, -0.5);
                let [p1, p2] = k.perp();
                (f1 * p1 + f2 * p2) * (2.0 * PI / k.norm())
            })
            .collect();
        SpectralVelocityField::from_coeffs(Arc::clone(&self.lattice), coeffs)
    }

    pub fn scalar_from_grid(&mut self, g: &GridField) -> Result<SpectralScalarField> {
        self.check(g.n())?;
        if g.arity() != Arity::Scalar {
            return Err(Error::DimensionMismatch("scalar field needs a scalar grid field".into()));
        }
        let n = self.lattice.n();
        for (dst, &v) in self.buf.iter_mut().zip(g.values()) {
            *dst = Complex64::new(v, 0.0);
        }
        let band = self.band();
        self.fft.forward_band(&mut self.buf, band);
        let norm = 1.0 / (n * n) as f64;
        let coeffs = self
            .lattice
            .half()
            .iter()
            .map(|k| self.buf[k.fft_index(n)] * norm)
            .collect();
        SpectralScalarField::from_parts(Arc::clone(&self.lattice), self.buf[0].re * norm, coeffs)
    }
}

/// Fields that can be rendered on the grid and sampled at grid nodes.
pub trait SpectralField: Clone + Send + Sync {
    fn lattice(&self) -> &Arc<WavenumberSet>;

    fn arity(&self) -> Arity;

    fn to_grid_with(&self, t: &mut SpectralTransform) -> Result<GridField>;
}

impl SpectralField for SpectralVelocityField {
    fn lattice(&self) -> &Arc<WavenumberSet> {
        SpectralVelocityField::lattice(self)
    }

    fn arity(&self) -> Arity {
        Arity::Vector
    }

    fn to_grid_with(&self, t: &mut SpectralTransform) -> Result<GridField> {
        t.velocity_to_grid(self)
    }
}

impl SpectralField for SpectralScalarField {
    fn lattice(&self) -> &Arc<WavenumberSet> {
        SpectralScalarField::lattice(self)
    }

    fn arity(&self) -> Arity {
        Arity::Scalar
    }

    fn to_grid_with(&self, t: &mut SpectralTransform) -> Result<GridField> {
        t.scalar_to_grid(self)
    }
}

pub fn to_grid<F: SpectralField>(field: &F) -> Result<GridField> {
    let mut t = SpectralTransform::new(Arc::clone(field.lattice()));
    field.to_grid_with(&mut t)
}

pub fn velocity_from_grid(g: &GridField, n: usize) -> Result<SpectralVelocityField> {
    if g.n() != n {
        return Err(Error::LatticeMismatch { expected: n, found: g.n() });
    }
    SpectralTransform::new(WavenumberSet::shared(n)?).velocity_from_grid(g)
}

pub fn scalar_from_grid(g: &GridField, n: usize) -> Result<SpectralScalarField> {
    if g.n() != n {
        return Err(Error::LatticeMismatch { expected: n, found: g.n() });
    }
    SpectralTransform::new(WavenumberSet::shared(n)?).scalar_from_grid(g)
}

/// Leray–Helmholtz projection of a vector grid field.
pub fn leray_project(g: &GridField) -> Result<SpectralVelocityField> {
    velocity_from_grid(g, g.n())
}

/// Vorticity `ω = ∂₁v₂ − ∂₂v₁`; mode `k` picks up `i|k|/(2π)`.
pub fn vorticity(v: &SpectralVelocityField) -> SpectralScalarField {
    let coeffs = v
        .lattice()
        .half()
        .iter()
        .zip(v.coeffs())
        .map(|(k, &u)| u * Complex64::new(0.0, k.norm() / (2.0 * PI)))
        .collect();
    SpectralScalarField::from_parts(Arc::clone(v.lattice()), 0.0, coeffs)
        .expect("same lattice, same length")
}

/// Field values at grid nodes, components interleaved per point.
pub fn evaluate_at<F: SpectralField>(field: &F, points: &[GridPoint]) -> Result<Vec<f64>> {
    to_grid(field)?.sample(points)
}
