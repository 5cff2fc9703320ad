//! Precoder design for weighted sum-rate maximization in downlink MU-MIMO
//! under a sum-power constraint.
//!
//! Three block-coordinate algorithms share one driver:
//!
//! * **WMMSE**: exact minimization over `U`, `W` and `V`, with the precoder
//!   update solved through bisection on the sum-power multiplier.
//! * **MMMSE**: the same updates with `W` pinned to identity (unweighted
//!   sum-MSE) until the relative WSR change drops below `eps1`, then WMMSE.
//! * **A-MMMSE**: MMMSE staging with the exact precoder update replaced by one
//!   projected gradient step at an extrapolated point.
//!
//! [`verify`] holds independent oracles and [`harness`] runs seeded
//! multi-realization experiments that write CSV traces and a JSON summary.

// per-user loops index several parallel arrays at once
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
pub use model::{ChannelSet, PrecoderSet, ReceiverSet, Stage, SystemConfig, WeightMatrixSet};
pub use objective::{BoundsReport, ObjectiveSnapshot};
pub use solvers::{Algorithm, IterationRecord, SolveResult, SolverOptions, StepSize};
