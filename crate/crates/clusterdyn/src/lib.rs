//! Dissipative cluster-state dynamics and measurement-based quantum
//! computation (MBQC) on thermally prepared resource states.
//!
//! A cluster state on a lattice is pinned by the stabilizers
//! `K_i = X_i ⊗_{j∼i} Z_j` and is the ground state of the Hamiltonian
//! `H_c = −(Δ/2) Σ_i K_i`. This crate simulates what happens to an MBQC
//! computation when that resource state is prepared at finite temperature and
//! keeps interacting with bosonic baths while the measurement sequence runs:
//!
//! - [`pauli`] — sparse Pauli-string algebra and lattice/stabilizer bookkeeping;
//! - [`qcore`] — dense density matrices, cluster/thermal states, projective
//!   measurements, fidelity and Bloch utilities;
//! - [`dynamics`] — the Lindblad master equation in the lattice ("original")
//!   and entangler-conjugated ("dual") pictures, an RK4 integrator, and the
//!   exact single-qubit Kraus map;
//! - [`eom`] — symbolic Heisenberg-picture equations of motion for Pauli
//!   observables, built from per-site contribution rules and solved in closed
//!   form;
//! - [`mbqc`] — measurement patterns, the three-qubit X-rotation experiment,
//!   logical Pauli channels, process tomography, and cooling-rate scans;
//! - [`faulttol`] — error budgets (preparation + storage) and the threshold /
//!   "Goldilocks" solvers;
//! - [`cli`] — the subcommand implementations behind the `clusterdyn` binary.
//!
//! Conventions used throughout: `ħ = 1`, energies in units of the stabilizer
//! gap `Δ` (default `Δ = 1`), times in units of `1/Δ`; the clock period is
//! `τ = 2π/Δ`. Dense kets order qubits by ascending site id with site 0 as
//! the most significant bit.
//!
//! Each major capability has a runnable demo under `examples/`; start with
//! `cargo run --release --example stabilizers`.

pub mod cli;
pub mod dynamics;
pub mod eom;
pub mod faulttol;
pub mod linalg;
pub mod mbqc;
pub mod pauli;
pub mod qcore;

pub use pauli::{Lattice, LatticeKind, PauliOp, PauliString, Phase, MAX_QUBITS};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("site {site} is out of range for a {n_sites}-site lattice")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("edge ({0}, {0}) is a self-loop")]
    SelfLoop(usize),
    #[error("{0} qubits exceed the dense-matrix capacity of {max} qubits", max = MAX_QUBITS)]
    CapacityExceeded(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("forced outcome {outcome} has probability {probability:.3e} (below {floor:.1e})")]
    ImpossibleOutcome { outcome: u8, probability: f64, floor: f64 },
    #[error("equation-of-motion closure exceeded the cap of {0} variables")]
    ClosureCapExceeded(usize),
    #[error("initial expectation of {observable} is undetermined: {reason}")]
    UndeterminedInitial { observable: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
