//! Non-Hermitian soliton-plasmon dynamics on truncated Fock spaces, EPR
//! steering witnesses along the trajectories, and the kappa dependence of the
//! witnessing periods.

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod model;
pub mod witnesses;

pub use error::{Error, Result};
