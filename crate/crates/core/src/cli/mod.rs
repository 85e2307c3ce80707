//! Configuration files, output writers and the command runners used by the
//! `ramsey-laser` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{
    cmd_analytic, cmd_replay, cmd_simulate, cmd_sweep, cmd_validate, exit_code, fringe_visibility,
    simulate_ensemble, AnalyticReport, AnalyticRow, Ensemble, ReplayReport, SimulateReport,
    SimulationReference, SweepReport, SweepRow, TrajectoryEstimate,
};
pub use config::{parse_config, set_parameter, AnalysisOptions, RunConfig, SeedPolicy, SimOptions, SweepSpec};
pub use output::{RunManifest, Table};
