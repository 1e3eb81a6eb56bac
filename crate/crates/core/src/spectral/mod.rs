//! Fourier representation of periodic fields on the torus `[0, 2π]²`.

mod fft;
mod field;
pub mod io;
mod lattice;
mod transform;

pub use fft::Fft2d;
pub use field::{Arity, GridField, GridPoint, SpectralScalarField, SpectralVelocityField};
pub use lattice::{Wavenumber, WavenumberSet, ORDERING_TAG};
pub use transform::{
    evaluate_at, leray_project, scalar_from_grid, to_grid, velocity_from_grid, vorticity, SpectralField,
    SpectralTransform,
};

pub use rustfft::num_complex::Complex64;
