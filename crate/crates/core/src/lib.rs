//! Exact simulation of nonlocality sharing in a three-qubit system where each
//! qubit is measured twice in sequence: first weakly, then projectively.
//!
//! The pipeline is
//!
//! 1. [`measurement`]: weak and strong state updates and the six-step
//!    sequence giving the probability of one full outcome record;
//! 2. [`correlations`]: the joint probability table over all 64 setting
//!    combinations, triple marginals, correlators and the eight MABK
//!    quantities `B1..B8`, plus their closed forms for the canonical
//!    X-Y plane settings;
//! 3. [`analysis`]: sweeps over the precision factor, violation windows and
//!    a derivative-free optimizer;
//! 4. [`sampling`]: Monte Carlo trajectories as a statistical cross-check;
//! 5. [`lhv`]: the local-deterministic bound of the MABK expression.

pub mod analysis;
pub mod correlations;
pub mod lhv;
pub mod measurement;
pub mod output;
pub mod qcore;
pub mod sampling;

pub use correlations::{
    canonical_plan, closed_form, joint_table, mabk, marginal_triple, JointProbabilityTable,
    MabkResult, ObserverTriple, TripleMarginal,
};
pub use measurement::{
    run_sequence, strong_update, weak_update, MeasurementPlan, ObserverSlot, OutcomeRecord,
    PointerQuality, SettingChoice, Stage,
};
pub use qcore::{ghz, CMatrix, DensityOperator, Direction, Outcome, Site};

/// Errors produced by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} entries, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("outcome must be +1 or -1, got {0}")]
    InvalidOutcome(i32),

    #[error("invalid direction: {0}")]
    InvalidDirection(String),

    #[error("inadmissible pointer: F={f}, G={g} (need F, G in [0,1] and F^2 + G^2 <= 1)")]
    InadmissiblePointer { f: f64, g: f64 },

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no violation window: max over the scan grid of min B = {best:.6} never exceeds 2")]
    NoViolationWindow { best: f64 },

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("numerical guard tripped: {0}")]
    NumericalGuard(String),

    #[error("insufficient rounds: correlator cell {cell} has {samples} samples (need >= {needed})")]
    InsufficientRounds {
        cell: String,
        samples: u64,
        needed: u64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
