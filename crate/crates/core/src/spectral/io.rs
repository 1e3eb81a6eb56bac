//! Binary and CSV serialization of spectral fields.
//!
//! Block layout (all little-endian):
//!
//! ```text
//! u32  n
//! u32  ordering tag (ORDERING_TAG)
//! u8   kind: 0 = velocity, 1 = scalar
//! f64  mean                      (scalar blocks only)
//! [f64 re, f64 im] × |half|      (half-lattice order)
//! ```

use std::io::{Read, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use super::field::{SpectralScalarField, SpectralVelocityField};
use super::lattice::{WavenumberSet, ORDERING_TAG};
use crate::error::{Error, Result};

const KIND_VELOCITY: u8 = 0;
const KIND_SCALAR: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum FieldBlock {
    Velocity(SpectralVelocityField),
    Scalar(SpectralScalarField),
}

/// Serialized size in bytes of a block on `lattice`.
pub fn block_len(lattice: &WavenumberSet, scalar: bool) -> usize {
    9 + if scalar { 8 } else { 0 } + 16 * lattice.half().len()
}

fn write_header<W: Write>(w: &mut W, n: usize, kind: u8) -> Result<()> {
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&ORDERING_TAG.to_le_bytes())?;
    w.write_all(&[kind])?;
    Ok(())
}

fn write_coeffs<W: Write>(w: &mut W, coeffs: &[Complex64]) -> Result<()> {
    let mut buf = Vec::with_capacity(coeffs.len() * 16);
    for c in coeffs {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_velocity<W: Write>(w: &mut W, v: &SpectralVelocityField) -> Result<()> {
    write_header(w, v.n(), KIND_VELOCITY)?;
    write_coeffs(w, v.coeffs())
}

pub fn write_scalar<W: Write>(w: &mut W, s: &SpectralScalarField) -> Result<()> {
    write_header(w, s.n(), KIND_SCALAR)?;
    w.write_all(&s.mean().to_le_bytes())?;
    write_coeffs(w, s.coeffs())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Reads one block. When `lattice` is given, the block's mesh must match and
/// the returned field shares it.
pub fn read_block<R: Read>(r: &mut R, lattice: Option<&Arc<WavenumberSet>>) -> Result<FieldBlock> {
    let n = read_u32(r)? as usize;
    let tag = read_u32(r)?;
    if tag != ORDERING_TAG {
        return Err(Error::Format(format!(
            "ordering tag {tag} (this build writes {ORDERING_TAG})"
        )));
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let lattice = match lattice {
        Some(l) if l.n() == n => Arc::clone(l),
        Some(l) => {
            return Err(Error::LatticeMismatch {
                expected: l.n(),
                found: n,
            })
        }
        None => WavenumberSet::shared(n)?,
    };
    let mean = match kind[0] {
        KIND_VELOCITY => None,
        KIND_SCALAR => Some(read_f64(r)?),
        other => return Err(Error::Format(format!("unknown field kind {other}"))),
    };
    let len = lattice.half().len();
    let mut raw = vec![0u8; 16 * len];
    r.read_exact(&mut raw)?;
    let coeffs = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok(match mean {
        None => FieldBlock::Velocity(SpectralVelocityField::from_coeffs(lattice, coeffs)?),
        Some(m) => FieldBlock::Scalar(SpectralScalarField::from_parts(lattice, m, coeffs)?),
    })
}

pub fn read_velocity<R: Read>(r: &mut R, lattice: Option<&Arc<WavenumberSet>>) -> Result<SpectralVelocityField> {
    match read_block(r, lattice)? {
        FieldBlock::Velocity(v) => Ok(v),
        FieldBlock::Scalar(_) => Err(Error::Format("expected a velocity block".into())),
    }
}

pub fn read_scalar<R: Read>(r: &mut R, lattice: Option<&Arc<WavenumberSet>>) -> Result<SpectralScalarField> {
    match read_block(r, lattice)? {
        FieldBlock::Scalar(s) => Ok(s),
        FieldBlock::Velocity(_) => Err(Error::Format("expected a scalar block".into())),
    }
}

/// Debug export: `k1,k2,re,im` per half-lattice mode (scalar mean as `0,0`).
pub fn write_csv<W: Write>(w: &mut W, block: &FieldBlock) -> Result<()> {
    writeln!(w, "k1,k2,re,im")?;
    let (lattice, coeffs) = match block {
        FieldBlock::Velocity(v) => (v.lattice(), v.coeffs()),
        FieldBlock::Scalar(s) => {
            writeln!(w, "0,0,{:e},0", s.mean())?;
            (s.lattice(), s.coeffs())
        }
    };
    for (k, c) in lattice.half().iter().zip(coeffs) {
        writeln!(w, "{},{},{:e},{:e}", k.k1, k.k2, c.re, c.im)?;
    }
    Ok(())
}
