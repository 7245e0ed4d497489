pub mod config;
pub mod dsmc;
pub mod entropy;
pub mod error;
pub mod evolve;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod quadrature;
pub mod runner;
pub mod spectral;
pub mod stats;
pub mod steady;
pub mod validate;

pub use error::{Error, Result};
