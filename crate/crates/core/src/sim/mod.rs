//! One-reservoir commute simulator with a tradable credit market.

pub mod config;
pub mod demand;
pub mod learning;
pub mod market;
pub mod population;
pub mod supply;
pub mod system;
pub mod toll;

pub use config::{HeterogeneityConfig, MarketConfig, Scale, ScenarioConfig};
pub use learning::PerceptionTable;
pub use market::{MarketState, TokenWallet, Transaction};
pub use population::TravelerProfile;
pub use system::{Choice, DayOutcome, DaySummary, TcsSystem};
pub use toll::TollProfile;
