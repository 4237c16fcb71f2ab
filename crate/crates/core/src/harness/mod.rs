//! Experiment plumbing: configuration, `θ`-ladder sweeps with rate
//! regression, expansion checks and CSV reports.

pub mod config;
pub mod experiment;

pub use config::{Config, ExperimentSpec, OptionSpec};
pub use experiment::{
    linear_fit, run_expansion_experiment, run_rate_experiment, ExpansionReport, ExpansionRow, ExpansionSeries, Experiment,
    FitVariable, LinearFit, RateReport, RateRow, ResidualBand,
};
