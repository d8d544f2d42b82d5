//! Simulation engine for non-orthogonal subspace variational quantum
//! eigensolver experiments.
//!
//! The crate covers the full pipeline at exact-statevector scale: molecular
//! integral ingestion and Jordan-Wigner mapping ([`hamiltonian`]), gate-level
//! simulation of number-conserving circuits ([`simulator`]), k-UpCCGSD state
//! preparation ([`ansatz`]), the controlled-SWAP Hadamard-test measurement of
//! Hamiltonian and overlap matrix elements with an analytic shot-noise model
//! ([`protocol`]), the generalized eigenvalue solve with canonical
//! orthogonalization ([`eigensolver`]), and Monte Carlo energy-uncertainty
//! estimation with adaptive measurement scheduling ([`uncertainty`]).

pub mod ansatz;
pub mod eigensolver;
pub mod hamiltonian;
pub mod protocol;
pub mod simulator;
pub mod uncertainty;

pub use hamiltonian::{FermionIntegrals, PauliString, QubitOperator};
pub use simulator::{GateOp, RegisterLayout, StateVector};
