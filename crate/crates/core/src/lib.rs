pub mod analysis;
pub mod benchmark;
pub mod cli;
pub mod config;
pub mod error;
pub mod mc_variance;
pub mod model;
pub mod observable;
pub mod sde_sim;
pub mod spectral_oracle;

pub use error::{Error, Result};
