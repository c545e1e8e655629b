//! Command-line front end for `cvsense`: BSM ingestion, codec benchmarks,
//! scenario runs and sweeps, and CSV/SVG reports.

pub mod artifact;
pub mod bench;
pub mod bsm;
pub mod commands;
pub mod report;
pub mod svg;
pub mod sweep;
pub mod synth;
