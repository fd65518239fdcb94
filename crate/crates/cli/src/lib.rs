//! Experiment orchestration for the adversarial phase-retrieval laboratory:
//! configuration resolution, the experiments behind each CLI subcommand, and
//! CSV/JSON/gnuplot emission.

pub mod config;
pub mod experiments;
pub mod output;
