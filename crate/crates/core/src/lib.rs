//! Integrability and quasi-triviality of Hamiltonian perturbations of
//! hydrodynamic-type systems, decided by exact symbolic computation.

#![allow(clippy::needless_range_loop, clippy::suspicious_arithmetic_impl)]

pub mod casebook;
pub mod hydro;
pub mod jet;
pub mod kernel;
pub mod linalg;
pub mod manifest;
pub mod perturbation;
pub mod pipeline;
pub mod report;
pub mod verdict;
