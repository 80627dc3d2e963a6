//! aircsim — a deterministic discrete-event simulator of a 3D
//! "air computing" environment: terrestrial edge servers augmented by a
//! HAP-coordinated UAV fleet serving offloaded user tasks.
//!
//! The crate models towns of users emitting tasks (Poisson arrivals per
//! user), single-server FIFO compute nodes (edge servers and UAVs),
//! minimum-queueing-delay offloading, and a HAP controller that estimates
//! per-town capacity deficits and dispatches UAVs to cover them. Output is
//! a per-town task-success-rate time series plus a run summary.
//!
//! ```
//! use aircsim_core::workload::build_disaster_scenario;
//! use aircsim_core::sim::run_scenario;
//!
//! let mut scenario = build_disaster_scenario(false);
//! scenario.duration = 200.0; // keep the doctest quick
//! scenario.events.retain(|e| e.at <= scenario.duration);
//! let out = run_scenario(&scenario).unwrap();
//! assert!(out.summary.overall_success_rate.unwrap() > 0.99);
//! ```

pub mod engine;
pub mod hap;
pub mod metrics;
pub mod model;
pub mod nodes;
pub mod offload;
pub mod sim;
pub mod workload;

pub use metrics::{MetricsCollector, RunSummary, SuccessWindow};
pub use model::{AirLayer, ApplicationProfile, GeoPosition, Task, TaskFate};
pub use sim::{run_scenario, RunOutput, Simulation};
pub use workload::{build_disaster_scenario, Scenario, ValidationError};
