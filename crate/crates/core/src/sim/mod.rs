//! Monte Carlo throughput experiments, CSV output and the oracle suite.
//!
//! A decoded message of user `s` contributes `L_s` normalized BPSK packets,
//! so `Th^s = L_s · N_s / N_beacon` and the system throughput is the sum
//! over users.

mod config;
pub mod oracle;
pub mod presets;
mod run;

pub use config::{MacParams, ScenarioConfig, SnrConfig, SnrSpec};
pub use oracle::{oracle_suite, oracle_suite_with, OracleReport, OracleResult};
pub use run::{
    emit_results, emit_trace, run_scenario, trace_scenario, write_results, Estimate,
    ThroughputRecord, Tier, TierThroughput, TraceRow,
};
