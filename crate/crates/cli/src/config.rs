use std::path::PathBuf;

use hierda::mwg::{MwgConfig, PcnConfig};
use hierda::priors::{InvGamma, UniformInterval};
use hierda::spde::{reference_start, reference_truth, SpdeHyperpriors, SpdeMwgConfig, SpdeParams};
use serde::{Deserialize, Serialize};

const PRESETS: [(&str, &str); 5] = [
    ("stationary", include_str!("../presets/stationary.toml")),
    ("chaotic", include_str!("../presets/chaotic.toml")),
    ("desk-ns", include_str!("../presets/desk-ns.toml")),
    ("spde-full", include_str!("../presets/spde-full.toml")),
    ("desk-spde", include_str!("../presets/desk-spde.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Ns,
    Spde,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NsBlock {
    pub eta: f64,
    pub delta: f64,
    pub dt: f64,
    pub times: usize,
    pub sites_per_side: usize,
    pub tau2: f64,
    pub forcing: [i32; 2],
    #[serde(default = "yes")]
    pub nonlinear: bool,
    pub truth_alpha: f64,
    pub truth_beta2: f64,
    #[serde(default)]
    pub forecast_horizon: f64,
    #[serde(default = "default_forecast_samples")]
    pub forecast_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpdeBlock {
    pub delta: f64,
    pub times: usize,
    pub full_grid: bool,
    #[serde(default)]
    pub sites_per_side: usize,
    #[serde(default = "reference_truth")]
    pub truth: SpdeParams,
    #[serde(default = "reference_start")]
    pub start: SpdeParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerBlock {
    pub iterations: usize,
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default = "one")]
    pub chains: usize,
    // velocity-field sampler
    #[serde(default = "third")]
    pub p_v: f64,
    #[serde(default = "third")]
    pub p_beta2: f64,
    #[serde(default = "third")]
    pub p_alpha: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_rho_alpha")]
    pub rho_alpha: f64,
    #[serde(default = "yes")]
    pub adapt: bool,
    #[serde(default = "default_alpha_prior")]
    pub alpha_prior: [f64; 2],
    #[serde(default = "default_beta2_prior")]
    pub beta2_prior: [f64; 2],
    /// Holds `α` at this value (set `p_alpha = 0` for the velocity sampler).
    #[serde(default)]
    pub fixed_alpha: Option<f64>,
    // advection-diffusion sampler
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "yes")]
    pub estimate_alpha: bool,
    #[serde(default = "yes")]
    pub drift_refresh: bool,
    #[serde(default = "default_step")]
    pub initial_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: Case,
    pub seed: u64,
    pub out: PathBuf,
    pub n: usize,
    #[serde(default)]
    pub ns: Option<NsBlock>,
    #[serde(default)]
    pub spde: Option<SpdeBlock>,
    pub sampler: SamplerBlock,
}

fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn third() -> f64 {
    1.0 / 3.0
}
fn default_thin() -> usize {
    100
}
fn default_rho() -> f64 {
    0.999
}
fn default_rho_alpha() -> f64 {
    0.96
}
fn default_alpha_prior() -> [f64; 2] {
    [0.6, 4.0]
}
fn default_beta2_prior() -> [f64; 2] {
    [1.5, 2.5]
}
fn default_warmup() -> usize {
    5000
}
fn default_step() -> f64 {
    0.1
}
fn default_forecast_samples() -> usize {
    200
}

pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn preset(name: &str) -> Result<ExperimentConfig, String> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| format!("unknown preset {name:?}; known: {}", preset_names().collect::<Vec<_>>().join(", ")))?;
    parse(text)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n < 4 || self.n % 2 != 0 {
            return Err(format!("mesh size must be even and at least 4, got {}", self.n));
        }
        match self.case {
            Case::Ns => {
                let b = self.ns.as_ref().ok_or("case \"ns\" needs an [ns] table")?;
                if b.times == 0 || b.sites_per_side == 0 {
                    return Err("ns.times and ns.sites_per_side must be >= 1".into());
                }
                if !(b.tau2 > 0.0) {
                    return Err(format!("ns.tau2 must be > 0, got {}", b.tau2));
                }
                self.ns_sampler().map_err(|e| e.to_string())?;
            }
            Case::Spde => {
                let b = self.spde.as_ref().ok_or("case \"spde\" needs a [spde] table")?;
                if b.times == 0 {
                    return Err("spde.times must be >= 1".into());
                }
                if !b.full_grid && b.sites_per_side == 0 {
                    return Err("spde.sites_per_side must be >= 1 without full-grid observations".into());
                }
                b.truth.validate().map_err(|e| e.to_string())?;
                self.spde_sampler().map_err(|e| e.to_string())?;
            }
        }
        if self.sampler.chains == 0 {
            return Err("sampler.chains must be >= 1".into());
        }
        Ok(())
    }

    pub fn ns_block(&self) -> &NsBlock {
        self.ns.as_ref().expect("validated")
    }

    pub fn spde_block(&self) -> &SpdeBlock {
        self.spde.as_ref().expect("validated")
    }

    pub fn ns_sampler(&self) -> hierda::Result<MwgConfig> {
        let s = &self.sampler;
        let cfg = MwgConfig {
            p_v: s.p_v,
            p_beta2: s.p_beta2,
            p_alpha: s.p_alpha,
            rho_alpha: s.rho_alpha,
            alpha_prior: UniformInterval::for_smoothness(s.alpha_prior[0], s.alpha_prior[1])?,
            beta2_prior: InvGamma::new(s.beta2_prior[0], s.beta2_prior[1])?,
            iterations: s.iterations,
            burn_in: s.burn_in,
            thin: s.thin,
            pcn: PcnConfig {
                rho: s.rho,
                target_accept: 0.25,
                adapt: s.adapt,
            },
        };
        cfg.validate()?;
        if s.fixed_alpha.is_some() && s.p_alpha != 0.0 {
            return Err(hierda::Error::Config("fixed_alpha requires p_alpha = 0".into()));
        }
        Ok(cfg)
    }

    pub fn spde_sampler(&self) -> hierda::Result<SpdeMwgConfig> {
        let s = &self.sampler;
        let b = self.spde_block();
        let mut initial = b.start;
        if let Some(a) = s.fixed_alpha {
            initial.matern.alpha = a;
        }
        let cfg = SpdeMwgConfig {
            iterations: s.iterations,
            burn_in: s.burn_in,
            warmup: s.warmup,
            thin: s.thin,
            hyper: SpdeHyperpriors::default(),
            estimate_alpha: s.estimate_alpha && s.fixed_alpha.is_none(),
            initial,
            initial_step: s.initial_step,
            target_accept: 0.234,
            drift_refresh: s.drift_refresh,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The resolved configuration as embedded in every output manifest.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for name in preset_names() {
            let c = preset(name).unwrap();
            assert!(c.echo().is_object());
        }
        assert_eq!(preset("chaotic").unwrap().sampler.rho, 0.998);
        let s = preset("stationary").unwrap();
        let ns = s.ns_block();
        assert_eq!((ns.times, ns.sites_per_side * ns.sites_per_side, ns.tau2), (5, 16, 0.2));
        assert_eq!(s.sampler.iterations, 800_000);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(preset("nope").is_err());
        let mut c = preset("desk-ns").unwrap();
        c.n = 15;
        assert!(c.validate().is_err());
        let mut c = preset("desk-ns").unwrap();
        c.sampler.fixed_alpha = Some(2.0);
        assert!(c.validate().is_err());
        c.sampler.p_alpha = 0.0;
        c.sampler.p_v = 0.5;
        c.sampler.p_beta2 = 0.5;
        assert!(c.validate().is_ok());
        assert!(parse("case = \"ns\"\nseed = 1\nout = \"x\"\nn = 8\nbogus = 1\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = preset("desk-spde").unwrap();
        let back: ExperimentConfig = serde_json::from_value(c.echo()).unwrap();
        assert_eq!(back, c);
    }
}
