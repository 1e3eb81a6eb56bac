//! Gaussian field priors and the scalar hyperpriors placed on them.
//!
//! The velocity prior is `N(0, β² A^{-α})`: in the `ψ_k` basis the real and
//! imaginary parts of each `u_k` (upper half lattice) are independent
//! `N(0, ½β²|k|^{-2α})`. The scalar-field prior is a truncated Whittle–Matérn
//! spectrum normalized so that `σ²` is the exact pointwise variance.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::spectral::{SpectralVelocityField, Wavenumber, WavenumberSet};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsPriorParams {
    pub alpha: f64,
    pub beta2: f64,
}

impl NsPriorParams {
    /// Requires `α > 1/2` (trace class in two dimensions) and `β² > 0`.
    pub fn new(alpha: f64, beta2: f64) -> Result<Self> {
        if !(alpha > 0.5 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("prior smoothness must exceed 1/2, got {alpha}")));
        }
        if !(beta2 > 0.0 && beta2.is_finite()) {
            return Err(Error::InvalidParameter(format!("prior scale must be > 0, got {beta2}")));
        }
        Ok(NsPriorParams { alpha, beta2 })
    }

    /// Variance of `Re u_k` (equivalently `Im u_k`).
    pub fn coordinate_variance(&self, k: Wavenumber) -> f64 {
        0.5 * self.beta2 * k.norm_sq().powf(-self.alpha)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub alpha: f64,
    pub rho0: f64,
    pub sigma2: f64,
}

impl MaternParams {
    pub fn new(alpha: f64, rho0: f64, sigma2: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("Matérn smoothness must exceed 1, got {alpha}")));
        }
        if !(rho0 > 0.0 && rho0.is_finite()) || !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Matérn scales must be > 0, got rho0={rho0}, sigma2={sigma2}"
            )));
        }
        Ok(MaternParams { alpha, rho0, sigma2 })
    }

    fn shape(&self, k: Wavenumber) -> f64 {
        (self.rho0 * self.rho0 + k.norm_sq()).powf(-self.alpha)
    }

    /// Normalization `c` with `c σ² Σ_{k ∈ L_n ∪ {0}} (ρ₀² + |k|²)^{-α} = σ²`.
    pub fn normalization(&self, lattice: &WavenumberSet) -> f64 {
        let total: f64 = self.shape(Wavenumber::ZERO) + lattice.full().iter().map(|&k| self.shape(k)).sum::<f64>();
        1.0 / total
    }

    /// `E|c_k|²` for mode `k` (`k = 0` is the mean).
    pub fn mode_variance(&self, lattice: &WavenumberSet, k: Wavenumber) -> f64 {
        self.normalization(lattice) * self.sigma2 * self.shape(k)
    }

    /// Unit-square variant with `ρ₀` read as a correlation range:
    /// `E|c_k|² ∝ (ρ₀^{-2} + |2πk|²)^{-α}`, normalized over `L_n ∪ {0}` to
    /// sum to σ². Mean first, then the upper half.
    pub fn range_spectrum(&self, lattice: &WavenumberSet) -> Vec<f64> {
        let kappa2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        let shape = |k: Wavenumber| (1.0 / (self.rho0 * self.rho0) + kappa2 * k.norm_sq()).powf(-self.alpha);
        let total = shape(Wavenumber::ZERO) + lattice.full().iter().map(|&k| shape(k)).sum::<f64>();
        std::iter::once(Wavenumber::ZERO)
            .chain(lattice.half().iter().copied())
            .map(|k| self.sigma2 * shape(k) / total)
            .collect()
    }

    /// Mode variances in scalar-field order: mean first, then the upper half.
    pub fn spectrum(&self, lattice: &WavenumberSet) -> Vec<f64> {
        let c = self.normalization(lattice) * self.sigma2;
        std::iter::once(Wavenumber::ZERO)
            .chain(lattice.half().iter().copied())
            .map(|k| c * self.shape(k))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvGamma {
    pub a: f64,
    pub b: f64,
}

impl InvGamma {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("inverse-gamma needs a, b > 0, got ({a}, {b})")));
        }
        Ok(InvGamma { a, b })
    }

    /// `log(b^a/Γ(a) x^{-a-1} e^{-b/x})`; `-∞` for `x ≤ 0`.
    pub fn logpdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.a * self.b.ln() - ln_gamma(self.a) - (self.a + 1.0) * x.ln() - self.b / x
    }

    /// Reciprocal of a `Gamma(a, 1/b)` draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(self.a, 1.0 / self.b).expect("validated shape and scale");
        1.0 / g.sample(rng)
    }

    pub fn mode(&self) -> f64 {
        self.b / (self.a + 1.0)
    }

    pub fn mean(&self) -> Option<f64> {
        (self.a > 1.0).then(|| self.b / (self.a - 1.0))
    }

    pub fn variance(&self) -> Option<f64> {
        (self.a > 2.0).then(|| self.b * self.b / ((self.a - 1.0).powi(2) * (self.a - 2.0)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformInterval {
    pub lo: f64,
    pub hi: f64,
}

impl UniformInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("uniform needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(UniformInterval { lo, hi })
    }

    /// Interval for a velocity-prior smoothness: must stay above 1/2.
    pub fn for_smoothness(lo: f64, hi: f64) -> Result<Self> {
        if lo <= 0.5 {
            return Err(Error::InvalidParameter(format!("smoothness prior must lie above 1/2, got lo={lo}")));
        }
        Self::new(lo, hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        if self.contains(x) {
            -self.width().ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random_range(self.lo..self.hi)
    }
}

/// Karhunen–Loève draw from `N(0, β² A^{-α})`.
pub fn ns_prior_sample<R: Rng + ?Sized>(
    p: &NsPriorParams,
    lattice: Arc<WavenumberSet>,
    rng: &mut R,
) -> SpectralVelocityField {
    let coeffs = lattice
        .half()
        .iter()
        .map(|&k| {
            let sd = p.coordinate_variance(k).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sd * re, sd * im)
        })
        .collect();
    SpectralVelocityField::from_coeffs(lattice, coeffs).expect("coefficient count matches lattice")
}

/// `q = v·A^α v = Σ_{k ∈ half} 2|k|^{2α}|u_k|²`.
pub fn ns_quadratic_form(v: &SpectralVelocityField, alpha: f64) -> f64 {
    v.lattice()
        .half()
        .iter()
        .zip(v.coeffs())
        .map(|(k, u)| 2.0 * k.norm_sq().powf(alpha) * u.norm_sqr())
        .sum()
}

/// Exact Gaussian log-density of the `d = 2|half|` real coordinates of `v`:
/// `−(d/2) log(πβ²) + α Σ_half 2 log|k| − q/(2β²)`.
pub fn ns_prior_logdensity(v: &SpectralVelocityField, p: &NsPriorParams) -> f64 {
    ns_prior_logdensity_from_q(v.lattice(), ns_quadratic_form(v, p.alpha), p)
}

/// Same density when `q` has already been computed for `p.alpha`.
pub fn ns_prior_logdensity_from_q(lattice: &WavenumberSet, q: f64, p: &NsPriorParams) -> f64 {
    let d = lattice.real_dimension() as f64;
    -0.5 * d * (PI * p.beta2).ln() + p.alpha * lattice.log_det_weight() - q / (2.0 * p.beta2)
}

/// Full conditional of `β²` under an inverse-gamma prior: `IG(a + d/2, b + q/2)`.
pub fn conjugate_beta2_update(prior: &InvGamma, v: &SpectralVelocityField, alpha: f64) -> InvGamma {
    let d = v.lattice().real_dimension() as f64;
    InvGamma {
        a: prior.a + 0.5 * d,
        b: prior.b + 0.5 * ns_quadratic_form(v, alpha),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn lat(n: usize) -> Arc<WavenumberSet> {
        WavenumberSet::shared(n).unwrap()
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(NsPriorParams::new(0.5, 1.0).is_err());
        assert!(NsPriorParams::new(2.0, 0.0).is_err());
        assert!(MaternParams::new(1.0, 0.1, 1.0).is_err());
        assert!(InvGamma::new(0.0, 1.0).is_err());
        assert!(UniformInterval::new(1.0, 1.0).is_err());
        assert!(UniformInterval::for_smoothness(0.5, 4.0).is_err());
    }

    #[test]
    fn coordinate_variance_values() {
        let p = NsPriorParams::new(1.0, 1.0).unwrap();
        assert!((p.coordinate_variance(Wavenumber::new(2, 0)) - 0.125).abs() < 1e-15);
        let p = NsPriorParams::new(2.2, 1.2).unwrap();
        assert!((p.coordinate_variance(Wavenumber::new(1, 0)) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn smoothness_orders_mode_variances() {
        let lo = NsPriorParams::new(1.5, 1.0).unwrap();
        let hi = NsPriorParams::new(2.5, 1.0).unwrap();
        for &k in lat(16).half() {
            if k.norm_sq() == 1.0 {
                assert_eq!(lo.coordinate_variance(k), hi.coordinate_variance(k));
            } else {
                assert!(hi.coordinate_variance(k) < lo.coordinate_variance(k));
            }
        }
    }

    #[test]
    fn quadratic_form_values() {
        let l = lat(4);
        let mut v = SpectralVelocityField::zeros(Arc::clone(&l));
        assert_eq!(ns_quadratic_form(&v, 2.0), 0.0);
        v.set_mode(Wavenumber::new(1, 0), Complex64::new(1.0, 0.0)).unwrap();
        assert!((ns_quadratic_form(&v, 2.0) - 2.0).abs() < 1e-15);
        v.set_mode(Wavenumber::new(1, 1), Complex64::new(0.0, 3.0)).unwrap();
        assert!((ns_quadratic_form(&v, 0.0) - v.energy()).abs() < 1e-12);
    }

    /// Product of independent univariate normal densities, coordinate by coordinate.
    fn coordinatewise_logdensity(v: &SpectralVelocityField, p: &NsPriorParams) -> f64 {
        let mut total = 0.0;
        for (&k, u) in v.lattice().half().iter().zip(v.coeffs()) {
            let var = p.coordinate_variance(k);
            for x in [u.re, u.im] {
                total += -0.5 * (2.0 * PI * var).ln() - x * x / (2.0 * var);
            }
        }
        total
    }

    #[test]
    fn logdensity_matches_coordinatewise_normals() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let l = lat(8);
        for (alpha, beta2) in [(0.7, 0.3), (2.2, 1.2), (3.5, 4.0)] {
            let p = NsPriorParams::new(alpha, beta2).unwrap();
            let v = ns_prior_sample(&p, Arc::clone(&l), &mut rng);
            let a = ns_prior_logdensity(&v, &p);
            let b = coordinatewise_logdensity(&v, &p);
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn doubling_scale_shifts_logdensity() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let l = lat(8);
        let p = NsPriorParams::new(2.0, 0.7).unwrap();
        let v = ns_prior_sample(&p, Arc::clone(&l), &mut rng);
        let q = ns_quadratic_form(&v, 2.0);
        let d = l.real_dimension() as f64;
        let p2 = NsPriorParams::new(2.0, 1.4).unwrap();
        let drop = ns_prior_logdensity(&v, &p) - ns_prior_logdensity(&v, &p2);
        let expected = 0.5 * d * 2f64.ln() - 0.5 * q * (1.0 / 0.7 - 1.0 / 1.4);
        assert!((drop - expected).abs() < 1e-10);
    }

    #[test]
    fn same_seed_same_draw() {
        let p = NsPriorParams::new(2.0, 1.0).unwrap();
        let l = lat(8);
        let a = ns_prior_sample(&p, Arc::clone(&l), &mut ChaCha20Rng::seed_from_u64(1));
        let b = ns_prior_sample(&p, Arc::clone(&l), &mut ChaCha20Rng::seed_from_u64(1));
        let c = ns_prior_sample(&p, Arc::clone(&l), &mut ChaCha20Rng::seed_from_u64(2));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn quadratic_form_has_mean_d() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let l = lat(8);
        let p = NsPriorParams::new(2.2, 1.2).unwrap();
        let d = l.real_dimension() as f64;
        let draws = 10_000;
        let vals: Vec<f64> = (0..draws)
            .map(|_| ns_quadratic_form(&ns_prior_sample(&p, Arc::clone(&l), &mut rng), p.alpha) / p.beta2)
            .collect();
        let mean = vals.iter().sum::<f64>() / draws as f64;
        // q/β² is χ²_d: variance 2d
        let se = (2.0 * d / draws as f64).sqrt();
        assert!((mean - d).abs() < 3.0 * se, "{mean} vs {d}");
    }

    #[test]
    fn inverse_gamma_values() {
        let g = InvGamma::new(1.5, 2.5).unwrap();
        assert!((g.mode() - 1.0).abs() < 1e-15);
        assert_eq!(g.mean(), Some(5.0));
        assert_eq!(g.logpdf(0.0), f64::NEG_INFINITY);
        assert_eq!(g.logpdf(-1.0), f64::NEG_INFINITY);
        // density is maximized at the mode
        assert!(g.logpdf(1.0) > g.logpdf(0.99) && g.logpdf(1.0) > g.logpdf(1.01));
    }

    #[test]
    fn inverse_gamma_density_integrates_to_one() {
        // substitute x = e^s to cover the heavy tail
        let g = InvGamma::new(1.5, 2.5).unwrap();
        let (lo, hi, m) = (-8.0f64, 40.0f64, 200_000);
        let h = (hi - lo) / m as f64;
        let f = |s: f64| (g.logpdf(s.exp()) + s).exp();
        let mut total = f(lo) + f(hi);
        for i in 1..m {
            total += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
        }
        total *= h / 3.0;
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn inverse_gamma_sample_moments() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let g = InvGamma::new(4.0, 3.0).unwrap();
        let draws = 200_000;
        let xs: Vec<f64> = (0..draws).map(|_| g.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let se = (g.variance().unwrap() / draws as f64).sqrt();
        assert!((mean - g.mean().unwrap()).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn conjugate_update_values() {
        let l = lat(4);
        let prior = InvGamma::new(1.5, 2.5).unwrap();
        let mut v = SpectralVelocityField::zeros(Arc::clone(&l));
        assert_eq!(conjugate_beta2_update(&prior, &v, 2.0), InvGamma { a: 5.5, b: 2.5 });
        v.set_mode(Wavenumber::new(1, 0), Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(conjugate_beta2_update(&prior, &v, 2.0), InvGamma { a: 5.5, b: 3.5 });
        // sufficient statistics add
        let once = conjugate_beta2_update(&prior, &v, 2.0);
        let twice = conjugate_beta2_update(&once, &v, 2.0);
        assert_eq!(twice, InvGamma { a: 9.5, b: 4.5 });
    }

    #[test]
    fn matern_spectrum_is_normalized_and_decreasing() {
        let l = lat(16);
        for (alpha, rho0) in [(2.0, 0.1), (1.2, 3.0), (3.7, 0.5)] {
            let p = MaternParams::new(alpha, rho0, 0.2).unwrap();
            let s = p.spectrum(&l);
            let total = s[0] + 2.0 * s[1..].iter().sum::<f64>();
            assert!((total - 0.2).abs() < 1e-10);
            assert!(s.iter().all(|&x| x > 0.0));
            let k0 = p.mode_variance(&l, Wavenumber::ZERO);
            assert!((k0 - p.normalization(&l) * 0.2 * rho0.powf(-2.0 * alpha)).abs() < 1e-15);
            let (a, b) = (Wavenumber::new(1, 2), Wavenumber::new(3, 4));
            let ratio = p.mode_variance(&l, a) / p.mode_variance(&l, b);
            let expected = ((rho0 * rho0 + 25.0) / (rho0 * rho0 + 5.0)).powf(alpha);
            assert!((ratio - expected).abs() < 1e-12 * expected);
            assert!(p.mode_variance(&l, b) < p.mode_variance(&l, a));
        }
    }
}
