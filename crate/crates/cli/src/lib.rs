//! Command-line front end: waves, boxes, spectral curves, Evans sweeps and
//! verdicts, written as CSV, JSON-lines and SVG.

pub mod commands;
pub mod config;
pub mod output;
