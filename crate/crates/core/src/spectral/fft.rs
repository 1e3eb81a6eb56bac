use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unnormalized 2D FFT on a square `m × m` row-major buffer.
///
/// `forward` computes `X[k] = Σ_x f[x] e^{-2πi k·x/m}` and `inverse` the same
/// sum with `+`; neither scales. Callers divide by `m²` where needed.
///
/// The `*_band` variants skip the row transforms for rows `r` with
/// `band <= r <= m - band`, which hold only zeros (inverse) or are discarded
/// (forward) when fields are truncated to `|k1| < band`.
pub struct Fft2d {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Fft2d {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Fft2d {
            m,
            fwd,
            inv,
            scratch: vec![Complex64::default(); scratch_len],
            tmp: vec![Complex64::default(); m * m],
        }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward_band(data, self.m);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse_band(data, self.m);
    }

    pub fn inverse_band(&mut self, data: &mut [Complex64], band: usize) {
        assert_eq!(data.len(), self.m * self.m);
        let inv = Arc::clone(&self.inv);
        self.rows(data, &*inv, band);
        self.columns(data, &*inv);
    }

    pub fn forward_band(&mut self, data: &mut [Complex64], band: usize) {
        assert_eq!(data.len(), self.m * self.m);
        let fwd = Arc::clone(&self.fwd);
        self.columns(data, &*fwd);
        self.rows(data, &*fwd, band);
    }

    fn rows(&mut self, data: &mut [Complex64], plan: &dyn Fft<f64>, band: usize) {
        let m = self.m;
        if band >= m / 2 + 1 {
            plan.process_with_scratch(data, &mut self.scratch);
            return;
        }
        for r in (0..band).chain(m - band + 1..m) {
            plan.process_with_scratch(&mut data[r * m..(r + 1) * m], &mut self.scratch);
        }
    }

    fn columns(&mut self, data: &mut [Complex64], plan: &dyn Fft<f64>) {
        let m = self.m;
        transpose(data, &mut self.tmp, m);
        plan.process_with_scratch(&mut self.tmp, &mut self.scratch);
        transpose(&self.tmp, data, m);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    const BLOCK: usize = 16;
    for ib in (0..m).step_by(BLOCK) {
        for jb in (0..m).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(m) {
                for j in jb..(jb + BLOCK).min(m) {
                    dst[j * m + i] = src[i * m + j];
                }
            }
        }
    }
}
