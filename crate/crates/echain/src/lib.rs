//! Dense, desk-scale simulation of entanglement distribution through noisy
//! quantum channels.
//!
//! The crate is organized around the transmission map
//! Λ_n\[ρ\] = (Λ⊗1)∘F_n∘⋯∘(Λ⊗1)∘F_1\[ρ\]: a channel Λ is applied to one half
//! of a bipartite state n times, with an LOCC or post-selected SLOCC filter
//! F_i inserted before each use. On top of that sit the entanglement
//! quantifiers (concurrence, entanglement of formation, G_k-concurrence,
//! k-Schmidt fidelity, negativity) and the decay/separability bounds they
//! obey, a Werner-scalar repeater engine for parallel-channel scaling sweeps,
//! and a heuristic detector for correctable subspaces.
//!
//! Everything is dense `f64` linear algebra capped at dimension
//! [`qmath::MAX_DIM`]; all randomness is seeded explicitly.

pub mod chain;
pub mod channels;
pub mod detect;
pub mod io;
pub mod measures;
mod opt;
pub mod qmath;
pub mod repeater;
pub mod rng;
pub mod states;
pub mod tol;

pub use chain::{ChainConfig, ChainResult, FilterKind, FilterSchedule, FilterSpec};
pub use channels::{ChoiState, QuantumChannel};
pub use measures::MeasureResult;
pub use qmath::{CMatrix, CVector, Subsystem, C64};
pub use repeater::{ScalingSweepConfig, Strategy, WernerLink};
pub use states::{DensityMatrix, PureState, SchmidtDecomposition};
pub use tol::Tolerances;

use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("dimension {0} exceeds the dense-kernel cap of {max}", max = qmath::MAX_DIM)]
    DimCap(usize),
    #[error("matrix is not Hermitian within tolerance (residual {0:.3e})")]
    NotHermitian(f64),
    #[error("operator has eigenvalue {0:.3e} below the negativity floor")]
    NotPositive(f64),
    #[error("not a valid quantum state: {0}")]
    NotAState(String),
    #[error("Kraus set violates its trace contract (residual {0:.3e})")]
    KrausContract(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("branch explosion: {0}")]
    BranchExplosion(String),
    #[error("ensemble does not reconstruct the state (trace distance {0:.3e})")]
    EnsembleMismatch(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
