use std::ops::Neg;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag of the half-lattice ordering written into every serialized
/// field block. Bump if [`WavenumberSet`] ordering ever changes.
pub const ORDERING_TAG: u32 = 1;

/// Integer wavenumber `k = (k1, k2)` on the torus `[0, 2π]²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Wavenumber {
    pub k1: i32,
    pub k2: i32,
}

impl Wavenumber {
    pub const ZERO: Wavenumber = Wavenumber { k1: 0, k2: 0 };

    pub const fn new(k1: i32, k2: i32) -> Self {
        Wavenumber { k1, k2 }
    }

    pub fn norm_sq(self) -> f64 {
        f64::from(self.k1 * self.k1 + self.k2 * self.k2)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `k⊥ = (−k2, k1)`.
    pub fn perp(self) -> [f64; 2] {
        [-f64::from(self.k2), f64::from(self.k1)]
    }

    /// Membership in the upper half-lattice: `k1 + k2 > 0`, or `k1 + k2 = 0`
    /// with `k1 > 0`.
    pub fn is_upper(self) -> bool {
        let s = self.k1 + self.k2;
        s > 0 || (s == 0 && self.k1 > 0)
    }

    /// Sup-norm `max(|k1|, |k2|)`.
    pub fn sup_norm(self) -> i32 {
        self.k1.abs().max(self.k2.abs())
    }

    /// Row-major offset of this mode in an `m × m` FFT buffer (index `i` runs
    /// over `x1`, `j` over `x2`).
    #[inline]
    pub fn fft_index(self, m: usize) -> usize {
        let m_i = m as i32;
        let r = self.k1.rem_euclid(m_i) as usize;
        let c = self.k2.rem_euclid(m_i) as usize;
        r * m + c
    }
}

impl Neg for Wavenumber {
    type Output = Wavenumber;

    fn neg(self) -> Wavenumber {
        Wavenumber::new(-self.k1, -self.k2)
    }
}

/// Truncated wavenumber lattice `L_n = {k ≠ 0 : max(|k1|, |k2|) < n/2}` and its
/// upper half.
///
/// Both lists are sorted lexicographically by `(k1, k2)`; that order is the
/// canonical coefficient order of every spectral field (see
/// [`ORDERING_TAG`]).
#[derive(Debug, PartialEq, Eq)]
pub struct WavenumberSet {
    n: usize,
    full: Vec<Wavenumber>,
    half: Vec<Wavenumber>,
}

impl WavenumberSet {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 || n > 1 << 14 {
            return Err(Error::InvalidMesh(n));
        }
        let kmax = (n / 2) as i32 - 1;
        let mut full = Vec::with_capacity((2 * kmax as usize + 1).pow(2) - 1);
        for k1 in -kmax..=kmax {
            for k2 in -kmax..=kmax {
                if k1 != 0 || k2 != 0 {
                    full.push(Wavenumber::new(k1, k2));
                }
            }
        }
        let half = full.iter().copied().filter(|k| k.is_upper()).collect();
        Ok(WavenumberSet { n, full, half })
    }

    pub fn shared(n: usize) -> Result<Arc<Self>> {
        Self::new(n).map(Arc::new)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest admissible `|k_i|`.
    pub fn kmax(&self) -> i32 {
        (self.n / 2) as i32 - 1
    }

    pub fn full(&self) -> &[Wavenumber] {
        &self.full
    }

    pub fn half(&self) -> &[Wavenumber] {
        &self.half
    }

    /// Number of real coordinates of a mean-free field stored on the half
    /// lattice, `2·|half|`.
    pub fn real_dimension(&self) -> usize {
        2 * self.half.len()
    }

    pub fn contains(&self, k: Wavenumber) -> bool {
        k != Wavenumber::ZERO && k.sup_norm() <= self.kmax()
    }

    /// Position of `k` in the half-lattice order, if `k` is an upper mode.
    pub fn half_index(&self, k: Wavenumber) -> Option<usize> {
        self.half.binary_search(&k).ok()
    }

    /// Sum of `2·ln|k|` over the half lattice; the `α`-dependent part of
    /// `ln |A^{-α}|^{-1/2}`.
    pub fn log_det_weight(&self) -> f64 {
        self.half.iter().map(|k| k.norm_sq().ln()).sum()
    }
}
