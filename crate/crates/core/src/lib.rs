//! Desk-scale numerical simulation of projector-pair rewinding.
//!
//! Everything here works on explicit dense states of modest dimension. The
//! crate is organized bottom-up: `qstate` holds registers, states and
//! measurements; `jordan` computes the two-projector subspace decomposition;
//! `pseudoinverse` and `svalg` build the state-repair and singular-value
//! algorithms on top of it; `protocol` defines toy interactive protocols;
//! `extractor` runs the guaranteed rewinding extractor; `eqptmodel`,
//! `statepreserve` and `gksim` cover coherent-run dilations, the
//! state-preserving wrapper and the zero-knowledge simulator comparison.

pub mod eqptmodel;
pub mod extractor;
pub mod gksim;
pub mod jordan;
pub mod protocol;
pub mod pseudoinverse;
pub mod qstate;
pub mod rng;
pub mod statepreserve;
pub mod svalg;

pub use qstate::{QError, QOperator, QState, RegisterSpace, DIM_CAP, TOL_STRUCT};
