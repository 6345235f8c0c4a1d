//! Digital-twin numerology control for a multi-numerology NR radio network
//! under UDP flood.
//!
//! The crate is organised bottom-up:
//!
//! * [`netsim`]: the physical network, a deterministic slot-level simulator.
//! * [`telemetry`]: per-UE window features and their CSV persistence.
//! * [`predictor`]: boosted regression trees that predict next-window delay.
//! * [`optimizer`]: greedy, annealing and exhaustive numerology search.
//! * [`twin`]: the mirror of the physical network and the closed control loop.
//! * [`harness`]: scenario matrix runs with confidence intervals.
//! * [`cli`]: the `nrtwin` command line.

pub mod cli;
pub mod error;
pub mod harness;
pub mod netsim;
pub mod optimizer;
pub mod predictor;
pub mod telemetry;
pub mod twin;

pub use error::{Error, Result};
