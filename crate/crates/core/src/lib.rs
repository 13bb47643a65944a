//! Distributed regression across data centers: ADMM variants, shared data pools,
//! preconditioned CG and the linear iteration maps behind their convergence rates.

pub mod error;
pub mod generate;
pub mod pcg;
pub mod problem;
pub mod reference;
pub mod sharing;
pub mod solver;
pub mod spectral;
pub mod theory;

pub use error::{CoreError, Result};
