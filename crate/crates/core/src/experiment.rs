//! Multi-run experiments and CSV output.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, MarketConfig};
use crate::engine::run;
use crate::market::{BuyerId, Transaction};
use crate::money::Money;
use crate::rng::run_seed;
use crate::strategies::PredictorKind;

pub const RUNS_HEADER: [&str; 7] = [
    "run_id",
    "t",
    "buyer_id",
    "predictor",
    "funds",
    "owned_count",
    "purchases",
];
pub const AGGREGATE_HEADER: [&str; 4] = ["t", "predictor", "mean_funds", "std_funds"];
pub const LEDGER_HEADER: [&str; 6] = ["run_id", "t", "buyer_id", "seller_id", "dataset_id", "price"];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("number of runs must be at least 1")]
    NoRuns,
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// One buyer at the end of one timestamp.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunRow {
    pub t: u64,
    pub buyer_id: BuyerId,
    pub predictor: PredictorKind,
    pub funds: Money,
    pub owned_count: usize,
    pub purchases: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunRecord {
    pub run_id: u64,
    pub seed: u64,
    /// Sorted by `(t, buyer_id)`.
    pub rows: Vec<RunRow>,
    pub ledger: Vec<Transaction>,
}

/// Funds per timestamp and predictor, across runs.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub t: u64,
    pub predictor: PredictorKind,
    /// Mean over every matching `(run, buyer)` row, rounded to a minor unit.
    pub mean_funds: Money,
    /// Population standard deviation across runs of the per-run mean.
    pub std_funds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub records: Vec<RunRecord>,
    pub aggregate: Vec<AggregateRow>,
}

/// Runs `config` once with `seed` overriding its own and records it.
pub fn run_once(config: &MarketConfig, run_id: u64, seed: u64) -> Result<RunRecord, ConfigError> {
    let mut config = config.clone();
    config.seed = seed;
    let out = run(&config)?;
    let predictors: Vec<PredictorKind> = out.state.buyers.iter().map(|b| b.predictor).collect();
    let mut rows = Vec::with_capacity(out.reports.len() * predictors.len());
    for report in &out.reports {
        let mut purchases: BTreeMap<BuyerId, usize> = BTreeMap::new();
        for tx in &report.transactions {
            *purchases.entry(tx.buyer).or_default() += 1;
        }
        for (&buyer_id, &funds) in &report.buyer_funds {
            rows.push(RunRow {
                t: report.t,
                buyer_id,
                predictor: predictors[buyer_id.0],
                funds,
                owned_count: report.buyer_owned_counts[&buyer_id],
                purchases: purchases.get(&buyer_id).copied().unwrap_or(0),
            });
        }
    }
    Ok(RunRecord {
        run_id,
        seed,
        rows,
        ledger: out.state.ledger,
    })
}

/// Runs `n_runs` independent simulations. Run `k` is seeded with
/// `run_seed(base_seed, k)`, so its output does not depend on `n_runs`.
pub fn run_experiment(
    config: &MarketConfig,
    n_runs: u64,
    base_seed: u64,
) -> Result<Experiment, ExperimentError> {
    if n_runs == 0 {
        return Err(ExperimentError::NoRuns);
    }
    config.validate()?;
    let records = (0..n_runs)
        .into_par_iter()
        .map(|k| run_once(config, k, run_seed(base_seed, k)))
        .collect::<Result<Vec<_>, _>>()?;
    let aggregate = aggregate(&records);
    Ok(Experiment { records, aggregate })
}

/// Mean and spread of funds per `(t, predictor)`.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    // (t, predictor) -> per-run funds
    let mut groups: BTreeMap<(u64, PredictorKind), BTreeMap<u64, Vec<Money>>> = BTreeMap::new();
    for record in records {
        for row in &record.rows {
            groups
                .entry((row.t, row.predictor))
                .or_default()
                .entry(record.run_id)
                .or_default()
                .push(row.funds);
        }
    }
    groups
        .into_iter()
        .map(|((t, predictor), per_run)| {
            let all: Vec<Money> = per_run.values().flatten().copied().collect();
            let mean_funds = Money::mean(&all).expect("group is non-empty");
            let run_means: Vec<f64> = per_run
                .values()
                .map(|v| v.iter().map(|m| m.to_f64()).sum::<f64>() / v.len() as f64)
                .collect();
            let mu = run_means.iter().sum::<f64>() / run_means.len() as f64;
            let var =
                run_means.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / run_means.len() as f64;
            AggregateRow {
                t,
                predictor,
                mean_funds,
                std_funds: var.sqrt(),
            }
        })
        .collect()
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), ExperimentError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let err = |message: String| ExperimentError::Io {
        path: path.to_owned(),
        message,
    };
    let file = File::create(path).map_err(|e| err(e.to_string()))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(header).map_err(|e| err(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}

/// Writes `runs.csv`, `aggregate.csv` and `ledger.csv` into `out_dir`
/// (created if missing) and returns their paths in that order.
pub fn emit_csv(experiment: &Experiment, out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(out_dir).map_err(|e| ExperimentError::Io {
        path: out_dir.to_owned(),
        message: e.to_string(),
    })?;
    let mut records: Vec<&RunRecord> = experiment.records.iter().collect();
    records.sort_by_key(|r| r.run_id);

    let runs_path = out_dir.join("runs.csv");
    write_csv(
        &runs_path,
        &RUNS_HEADER,
        records.iter().flat_map(|r| {
            r.rows.iter().map(move |row| {
                vec![
                    r.run_id.to_string(),
                    row.t.to_string(),
                    row.buyer_id.to_string(),
                    row.predictor.name().to_owned(),
                    row.funds.to_string(),
                    row.owned_count.to_string(),
                    row.purchases.to_string(),
                ]
            })
        }),
    )?;

    let aggregate_path = out_dir.join("aggregate.csv");
    write_csv(
        &aggregate_path,
        &AGGREGATE_HEADER,
        experiment.aggregate.iter().map(|row| {
            vec![
                row.t.to_string(),
                row.predictor.name().to_owned(),
                row.mean_funds.to_string(),
                format!("{:.4}", row.std_funds),
            ]
        }),
    )?;

    let ledger_path = out_dir.join("ledger.csv");
    write_csv(
        &ledger_path,
        &LEDGER_HEADER,
        records.iter().flat_map(|r| {
            r.ledger.iter().map(move |tx| {
                vec![
                    r.run_id.to_string(),
                    tx.timestamp.to_string(),
                    tx.buyer.to_string(),
                    tx.seller.to_string(),
                    tx.dataset.to_string(),
                    tx.price.to_string(),
                ]
            })
        }),
    )?;

    Ok(vec![runs_path, aggregate_path, ledger_path])
}
