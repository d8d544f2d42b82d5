//! Experiment driver for the NOVQE simulation engine: configuration,
//! quasi-Newton state optimization, subspace-growth and measurement
//! trajectories, and the output-file contract of the `novqe` binary.

pub mod config;
pub mod experiment;
pub mod optimize;
pub mod output;
