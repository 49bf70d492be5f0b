//! File formats, synthetic data, configuration and the end-to-end pipeline
//! behind the `cellnet` command.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod synth;
