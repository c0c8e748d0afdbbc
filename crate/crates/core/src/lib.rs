pub mod asymptotics;
pub mod beta_infinity;
pub mod cli;
pub mod error;
pub mod exact;
pub mod ho;
pub mod model;
pub mod params;
pub mod quadrature;
pub mod sampler;
pub mod special;
pub mod stats;
pub mod tridiag;

pub use error::{Error, Result};
pub use params::{EnsembleParams, HatParams, LevelHeight};
