//! Joint power, subcarrier and transmission-mode allocation for OFDM
//! two-way decode-and-forward relaying.
//!
//! Two users `A` and `B` exchange data directly, through one-way relaying
//! over `R`, or through two-way relaying (MAC phase into `R`, broadcast
//! phase out of it). [`solver::solve`] finds the allocation by minimizing
//! the Lagrange dual with the ellipsoid method; [`oracle`] holds brute-force
//! references for small instances; [`experiments`] runs seeded Monte Carlo
//! sweeps and writes CSV tables.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use solver::{solve, SolverOptions};
pub use types::*;
