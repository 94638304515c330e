//! The simulation loop, scenario configuration, and run metrics.

mod comms;
mod config;
mod events;
mod metrics;
mod sim;

pub use comms::{Comms, Delivery, ExchangeReport};
pub use config::{ConfigError, Roster, ScenarioConfig, WorldSource};
pub use events::{Event, EventKind};
pub use metrics::{
    events_csv, samples_csv, summarize, summary_json, MetricsLog, Percentiles, RobotStats, RobotSummary, RunMeta,
    Sample, SummaryRecord,
};
pub use sim::{finish, init, run, stream_seed, tick, EngineError, SimState, UAV_ID};
