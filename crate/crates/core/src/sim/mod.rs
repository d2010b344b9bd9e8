//! Discrete-time network simulator and the reference game.

mod engine;
mod metrics;
pub mod rfts;
mod scenario;

pub use engine::{roster_keys, run, SimError, SimNode, SimResult, Simulator};
pub use metrics::{FinalityRecord, ForkRecord, Metrics, StorageSample, Trace, VoteRecord};
pub use scenario::{parse_scenario, scenario_text, Behavior, FaultEvent, FaultKind, ScenarioError};
