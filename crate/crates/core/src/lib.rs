//! Day-to-day dynamic tolling laboratory for tradable credit schemes.
//!
//! The crate is layered bottom-up:
//!
//! * [`sim`] simulates one day of a multi-modal morning commute under a
//!   token-based tolling scheme: logit departure-time and mode choice, a
//!   trip-based MFD reservoir, token trading with a regulator, price
//!   adjustment and day-to-day perception learning.
//! * [`env`] wraps the simulator as a finite-horizon MDP whose actions are
//!   daily adjustments of a Gaussian toll profile.
//! * [`ppo`] is a small, dependency-free PPO trainer with a shared-trunk
//!   actor-critic MLP and optional action-smoothness penalties.
//! * [`bo`] provides the equilibrium benchmark (Gaussian-process Bayesian
//!   optimization over constant tolls) and the no-toll / random baselines.
//! * [`experiment`] contains scenario scaling, metric aggregation, transfer
//!   and sweep drivers and result emission used by the `toll-lab` CLI.

pub mod bo;
pub mod env;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod ppo;
pub mod sim;

pub use error::{Error, Result};
