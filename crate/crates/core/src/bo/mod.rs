//! Equilibrium-toll benchmark: Bayesian optimization over constant tolls and
//! the no-toll / random-toll baselines.

pub mod acquisition;
pub mod benchmark;
pub mod gp;
pub mod optimizer;

pub use benchmark::{
    no_toll_days, random_toll_days, run_bo, BoRun, EquilibriumObjective, HistoryRow, SearchSpace, DEFAULT_CENTER,
    DEFAULT_WIDTH,
};
pub use gp::GaussianProcess;
pub use optimizer::{maximize, BoConfig, BoRecord, BoResult};
