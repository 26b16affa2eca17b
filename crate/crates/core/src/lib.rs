pub mod equilibrium;
pub mod error;
pub mod gap;
pub mod kernel;
pub mod loggas;
pub mod orthopoly;
pub mod potential;
pub mod quadrature;
pub mod universality;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Float formatting used by every CSV writer: 17 significant digits.
pub(crate) fn io_fmt(x: f64) -> String {
    format!("{x:.16e}")
}
