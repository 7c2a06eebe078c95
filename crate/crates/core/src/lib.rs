//! q-deformed Drinfeld-Sokolov reduction for complex-size matrices.

pub mod a0;
pub mod cli;
pub mod error;
pub mod glq;
pub mod laurent;
pub mod loopfin;
pub mod poisson;
pub mod psido;
pub mod reduction;

pub use error::{Error, Result};
pub use laurent::{c64, qpow, LaurentSeries, C64};
