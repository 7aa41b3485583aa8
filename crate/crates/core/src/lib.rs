//! Deterministic datacenter simulator coupling predictive resource
//! management with live inter-VM link auditing.
//!
//! Applications split into tasks running on VMs placed best-fit across
//! servers. A workload analyzer records per-VM usage, trains linear
//! autoregressive predictors and forecasts per-server load; the resource
//! manager migrates VMs off predicted-overloaded servers and consolidates
//! predicted-underloaded ones. In parallel, a security unit derives the set
//! of authorized VM links from application groupings, logs every observed
//! live link, and terminates attacker VMs whose links fail the audit —
//! before their breach dwell time elapses.
//!
//! The core is generic over the floating-point scalar (`f32` or `f64`) via
//! [`Scalar`]; the `*64` aliases below are the concrete types the CLI and
//! shipped scenarios use.

pub mod datacenter;
pub mod manager;
pub mod model;
pub mod output;
pub mod resources;
pub mod scalar;
pub mod security;
pub mod sim;
pub mod workload;

pub use scalar::Scalar;

/// Double-precision instantiations used by the CLI and presets.
pub type ResourceVector64 = resources::ResourceVector<f64>;
pub type DatacenterState64 = datacenter::DatacenterState<f64>;
pub type ScenarioConfig64 = sim::ScenarioConfig<f64>;
pub type Metrics64 = sim::Metrics<f64>;
pub type RunOutput64 = sim::RunOutput<f64>;
