pub mod angular;
pub mod backscatter;
pub mod cli_io;
pub mod cutoff;
pub mod engine;
pub mod error;
pub mod functionals;
pub mod jet;
pub mod profile;
pub mod quadrature;
pub mod radiation;
pub mod scenarios;

pub use error::{Error, Result};
