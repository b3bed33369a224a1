//! Network-impairment simulator for collaborative haptic virtual environments.
//!
//! Two clients and one server exchange quantized pose updates over simulated
//! lossy, jittery links. The crate covers the wire codec, channel model,
//! compensation techniques, the event-driven simulation itself and the
//! throughput/perception metrics computed from its traces.

pub mod channel;
pub mod cli;
pub mod compensation;
pub mod error;
pub mod metrics;
pub mod scenario_file;
pub mod sim;
pub mod state;

pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use sim::scenario::Scenario;
pub use sim::{run, RunOutput};
