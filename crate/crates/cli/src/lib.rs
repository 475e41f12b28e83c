//! Experiment harness for the `dealbal` simulators: scenario files, runs
//! with invariant checks, CSV traces, summaries and parameter sweeps.

pub mod commands;
pub mod runner;
pub mod scenario;
pub mod spec;
pub mod sweep;
pub mod trace;
