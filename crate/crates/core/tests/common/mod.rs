#![allow(dead_code)]

use datamarket::config::{BuyerSpec, DatasetSpec, MarketConfig, Offer, SellerSpec, Want};
use datamarket::{DatasetId, Money, PredictorKind, SellerRule};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn examples_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn money(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Money {
    Money::from_f64(rng.random_range(lo..hi)).unwrap()
}

/// Random market with every seller rule and every predictor represented.
/// All datasets have infinite supply.
pub fn random_market(
    n_buyers: usize,
    n_sellers: usize,
    n_datasets: usize,
    horizon: u64,
    accrual: bool,
    seed: u64,
) -> MarketConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let datasets = (0..n_datasets)
        .map(|d| DatasetSpec {
            name: format!("d{d}"),
            domain: "synthetic".into(),
            num_examples: rng.random_range(100..10_000),
            num_features: rng.random_range(1..50),
            stock: None,
        })
        .collect();
    let rules = [
        SellerRule::Adaptive { up: 1.05, down: 0.95 },
        SellerRule::Linear {
            intercept: None,
            slope: 0.1,
        },
        SellerRule::NoisyAdaptive {
            up: 1.1,
            down: 0.9,
            sigma: 0.5,
        },
        SellerRule::NoisyLinear {
            intercept: None,
            slope: -0.05,
            sigma: 0.8,
        },
    ];
    let sellers = (0..n_sellers)
        .map(|s| {
            let mut ids: Vec<usize> = sample(&mut rng, n_datasets, (n_datasets * 3 / 5).max(1)).into_vec();
            // Everything is offered by at least one seller.
            ids.extend((0..n_datasets).filter(|d| d % n_sellers == s));
            ids.sort_unstable();
            ids.dedup();
            SellerSpec {
                budget: money(&mut rng, 0.0, 20.0),
                rule: rules[s % rules.len()],
                catalog: ids
                    .into_iter()
                    .map(|d| Offer {
                        dataset: DatasetId(d),
                        ask: money(&mut rng, 2.0, 20.0),
                    })
                    .collect(),
            }
        })
        .collect();
    let buyers = (0..n_buyers)
        .map(|b| {
            let mut ids: Vec<usize> = sample(&mut rng, n_datasets, (n_datasets / 2).max(1)).into_vec();
            ids.sort_unstable();
            BuyerSpec {
                budget: money(&mut rng, 40.0, 150.0),
                predictor: PredictorKind::ALL[b % 5],
                wants: ids
                    .into_iter()
                    .map(|d| Want {
                        dataset: DatasetId(d),
                        value: money(&mut rng, 0.05, 1.5),
                        estimate: None,
                    })
                    .collect(),
            }
        })
        .collect();
    MarketConfig {
        horizon,
        seed,
        price_floor: Money::from_f64(0.25).unwrap(),
        initial_estimate_range: (Money::from_units(1), Money::from_units(20)),
        accrual_to_budget: accrual,
        datasets,
        buyers,
        sellers,
    }
}
