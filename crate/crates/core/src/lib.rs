//! Fair and optimistic quantum contract signing.
//!
//! * [`quantum`]: single-qubit preparation and measurement statistics.
//! * [`protocol`]: Trent and client state machines, wire format, transports.
//! * [`analysis`]: exact fairness numerics (probability to reject, to cheat,
//!   its alpha-average and supremum, scaling fit, risk bound).
//! * [`simulation`]: seeded Monte Carlo harness over strategy profiles.

pub mod analysis;
pub mod protocol;
pub mod quantum;
pub mod rng;
pub mod simulation;

/// Version string embedded in every exported artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
