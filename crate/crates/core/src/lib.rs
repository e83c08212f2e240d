//! Discrete-time, agent-based simulator for data markets.
//!
//! Buyers want datasets, each worth a fixed amount per timestamp of
//! ownership. Every timestamp a buyer predicts prices from what it has
//! observed, solves a budget-constrained 0/1 selection of the datasets worth
//! pursuing, and is matched against sellers whose asks are fixed for the
//! step. Datasets have unlimited supply by default, so a sale never removes
//! a dataset from the seller's catalog.
//!
//! - [`money`]: fixed-point amounts
//! - [`market`]: players, datasets, transactions and settlement
//! - [`strategies`]: price predictors and seller pricing rules
//! - [`allocation`]: exact branch-and-bound selection plus a brute-force oracle
//! - [`engine`]: the timestamp loop and matching protocol
//! - [`config`] / [`experiment`]: TOML input, multi-run harness and CSV output

pub mod allocation;
pub mod config;
pub mod engine;
pub mod experiment;
pub mod market;
pub mod money;
pub mod rng;
pub mod strategies;

pub use allocation::{solve, solve_bruteforce, AllocationItem, AllocationProblem, AllocationResult};
pub use config::{load_config, parse_config, write_config, ConfigError, MarketConfig};
pub use engine::{plan_purchases, run, run_timestamp, RunOutput, StepReport};
pub use experiment::{emit_csv, run_experiment, Experiment};
pub use market::{BuyerId, DatasetId, MarketState, SellerId, Transaction};
pub use money::Money;
pub use strategies::{predict, PredictorKind, PriceSeries, SellerRule};
