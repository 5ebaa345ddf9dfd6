//! Pilot random access in crowded massive MIMO cells.
//!
//! Two views of the same access procedure:
//!
//! - [`sim`]: a per-UE Monte Carlo over random access slots, with explicit
//!   pilot choices, strongest-user decisions, optional ACB-gated contention
//!   for idle pilots, and uniform backoff.
//! - [`analysis`]: an expected-value flow model driven by binomial pilot
//!   occupancy and a Monte Carlo table of same-pilot resolution
//!   probabilities ([`collision`]).
//!
//! [`report`] writes both as CSV with a reproducibility header.

pub mod analysis;
pub mod collision;
pub mod config;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod phy;
pub mod report;
pub mod rng;
pub mod sim;
pub mod traffic;

pub use analysis::{analytic_throughput, run_flow_model, AnalysisReport};
pub use collision::{acb_factor, build_resolution_table, ResolutionTable};
pub use config::{validate_config, PhyMode, Protocol, SystemConfig};
pub use error::{ConfigError, DomainError, PhyError, TableError};
pub use exec::Exec;
pub use sim::{run_simulation, SimulationReport, Simulator, SlotMetrics};
pub use traffic::{build_schedule, ArrivalSchedule};
