//! Simulation and verification toolkit for the quantum-walk element
//! k-distinctness algorithm.
//!
//! The walk searches the Johnson-like graph of r-subsets S ⊆ `[N]` for a set
//! containing k indices with equal values. Under the unique-collision promise
//! the walk's state stays inside a (2k+1)-dimensional invariant subspace, so
//! the [`walk`] engine runs it exactly at arbitrary N. The [`full_sim`] engine
//! is the brute-force state-vector oracle over explicit (S, y) basis pairs at
//! small N, used to cross-check the collapsed engine. [`spectral`] carries the
//! eigenphase analysis (phase law, Hoffman-Wielandt bound, generalized Grover
//! iteration count), [`driver`] the multiple-collision driver with query
//! accounting, [`store`] the canonical bucketed hash table + skip list, and
//! [`hash`] the d-wise independent function and permutation families.

pub mod driver;
pub mod full_sim;
pub mod hash;
pub mod ledger;
pub mod linalg;
pub mod spectral;
pub mod store;
pub mod walk;

pub use full_sim::Instance;
pub use ledger::QueryLedger;
pub use walk::{SubspaceState, WalkParams};

use std::fmt;

/// Errors shared across the toolkit.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Parameter combination outside the supported regime.
    InvalidParams(String),
    /// Brute-force basis would exceed the configured pair cap.
    SizeCap { pairs: u128, cap: u128 },
    /// Matrix/vector dimensions disagree.
    DimensionMismatch { expected: usize, got: usize },
    /// Input matrix is not unitary within tolerance.
    NotUnitary { defect: f64 },
    /// Basis mode of a full-simulator state does not match the operation.
    ModeMismatch,
    /// Overlap alpha is outside the generalized-Grover lemma regime.
    OutOfRegime { alpha: f64 },
    /// Root bracket for the eigenphase equation has no sign change.
    NoSignChange { lo: f64, hi: f64 },
    /// Value at `index` not present / already present in the store.
    MissingIndex(u64),
    DuplicateIndex(u64),
    /// A store bucket exceeded its capacity; operation rolled back.
    BucketOverflow { bucket: u64 },
    /// A store operation exceeded its step budget; operation rolled back.
    BudgetExceeded { consumed: u64, budget: u64 },
    /// Malformed instance data.
    BadInstance(String),
    /// Malformed serialized data.
    BadEncoding(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Error::SizeCap { pairs, cap } => {
                write!(f, "basis has {pairs} pairs, exceeding the cap of {cap}")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NotUnitary { defect } => {
                write!(f, "matrix is not unitary (defect {defect:.3e})")
            }
            Error::ModeMismatch => write!(f, "basis mode mismatch"),
            Error::OutOfRegime { alpha } => {
                write!(f, "overlap alpha = {alpha:.6} is outside the regime (need alpha < 0.1)")
            }
            Error::NoSignChange { lo, hi } => {
                write!(f, "no sign change on bracket [{lo:.3e}, {hi:.3e}]")
            }
            Error::MissingIndex(i) => write!(f, "index {i} not present"),
            Error::DuplicateIndex(i) => write!(f, "index {i} already present"),
            Error::BucketOverflow { bucket } => write!(f, "bucket {bucket} overflow"),
            Error::BudgetExceeded { consumed, budget } => {
                write!(f, "step budget exceeded ({consumed} > {budget})")
            }
            Error::BadInstance(msg) => write!(f, "bad instance: {msg}"),
            Error::BadEncoding(msg) => write!(f, "bad encoding: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
