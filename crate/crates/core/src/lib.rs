pub mod chain;
pub mod diagnostics;
pub mod error;
pub mod mwg;
pub mod ns;
pub mod observation;
pub mod par;
pub mod priors;
pub mod rng;
pub mod spde;
pub mod spectral;

pub use error::{Error, Result};
