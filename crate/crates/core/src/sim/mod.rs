//! Event-driven coexistence simulator.

pub mod config;
pub mod engine;
pub mod metrics;
pub mod phy;
pub mod topology;
pub mod trace;

pub use config::SimConfig;
pub use engine::{run, run_traced};
pub use metrics::{jain_index, median, summarize, Airtime, Metrics, NodeMetrics, Summary};
pub use topology::{generate_topology, Scenario};
