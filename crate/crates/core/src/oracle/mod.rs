//! Brute-force references: optimal powers for a fixed assignment, full
//! enumeration of assignments for small N, and the set-basis versus
//! pairing comparison of two-way regions.
//!
//! Nothing here calls into the solver's water-filling or rate code, so
//! agreement between the two is independent evidence.

pub mod assignment;
pub mod barrier;
pub mod region;

pub use assignment::{
    assignment_rates, convex_power_for_assignment, exhaustive_solve, power_for_assignment_weighted,
    qos_power_for_assignment, AssignmentSolution, ExhaustiveResult, ASSIGNMENT_MAX_N,
    EXHAUSTIVE_MAX_N,
};
pub use barrier::{LogTerm, ProgramSolution, RateConstraint, RateProgram};
pub use region::{
    pairing_baseline, set_basis_best, set_basis_region_point, weighted_point, PairingResult,
    SetBasisResult, PAIRING_MAX_N, SET_BASIS_MAX_N,
};
