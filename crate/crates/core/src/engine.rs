//! The mediator: timestamp loop and auction-free matching.
//!
//! Each timestamp runs five phases in order:
//!
//! 1. every buyer plans which wanted datasets to pursue by solving its
//!    allocation problem with its current cost estimates as bids;
//! 2. planned (buyer, dataset) pairs are matched in a random interleaving;
//!    each pair walks a random permutation of the sellers offering the
//!    dataset and buys from the first one whose ask is at most the bid and
//!    affordable. Every visited ask is recorded in the buyer's history.
//!    Asks stay frozen for the whole phase;
//! 3. owned datasets accrue their per-step valuation;
//! 4. sellers update their asks;
//! 5. the clock advances.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;

use crate::allocation::{solve, AllocationItem, AllocationProblem};
use crate::config::{ConfigError, MarketConfig};
use crate::market::{
    remaining_value, settle_with_bid, Buyer, BuyerId, Dataset, DatasetId, MarketError,
    MarketState, Seller, SellerId, SupplyMode, Transaction,
};
use crate::money::Money;
use crate::rng::{stream, Purpose};
use crate::strategies::{initial_estimate, seller_update};

/// One buyer visiting one seller for one dataset during matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatchAttempt {
    pub buyer: BuyerId,
    pub seller: SellerId,
    pub dataset: DatasetId,
    pub bid: Money,
    pub ask: Money,
    pub settled: bool,
}

/// Observable outcome of one timestamp.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepReport {
    pub t: u64,
    pub transactions: Vec<Transaction>,
    /// Buyer budgets at the end of the step (after accrual).
    pub buyer_funds: BTreeMap<BuyerId, Money>,
    pub buyer_owned_counts: BTreeMap<BuyerId, usize>,
    /// Valuation each buyer accrued this step.
    pub buyer_accrual: BTreeMap<BuyerId, Money>,
    /// Asks in force during the step.
    pub seller_asks: BTreeMap<(SellerId, DatasetId), Money>,
    pub attempts: Vec<MatchAttempt>,
}

/// Datasets `buyer` pursues at time `t`.
pub fn plan_purchases(buyer: &Buyer, t: u64, horizon: u64) -> BTreeSet<DatasetId> {
    plan_with_bids(buyer, t, horizon)
        .into_iter()
        .map(|(d, _)| d)
        .collect()
}

/// Planned datasets in id order, each with the bid (cost estimate) used.
fn plan_with_bids(buyer: &Buyer, t: u64, horizon: u64) -> Vec<(DatasetId, Money)> {
    if t >= horizon {
        return Vec::new();
    }
    let items: Vec<AllocationItem> = buyer
        .wishlist
        .iter()
        .filter_map(|&d| {
            let value = remaining_value(buyer, d, t, horizon).ok()?;
            let est_cost = buyer.estimate(d)?;
            Some(AllocationItem {
                dataset: d,
                value,
                est_cost,
                est_win: true,
            })
        })
        .collect();
    let problem = AllocationProblem {
        items,
        budget: buyer.budget,
    };
    let chosen = solve(&problem).chosen;
    problem
        .items
        .iter()
        .filter(|it| chosen.contains(&it.dataset))
        .map(|it| (it.dataset, it.est_cost))
        .collect()
}

/// Runs one timestamp of the market.
pub fn run_timestamp(state: &mut MarketState) -> Result<StepReport, MarketError> {
    if state.t >= state.horizon {
        return Err(MarketError::RunFinished {
            horizon: state.horizon,
        });
    }
    let t = state.t;
    let seed = state.rng_seed;
    for seller in &mut state.sellers {
        seller.sold_this_step.clear();
    }
    let seller_asks: BTreeMap<(SellerId, DatasetId), Money> = state
        .sellers
        .iter()
        .flat_map(|s| s.catalog.iter().map(move |(&d, e)| ((s.id, d), e.ask)))
        .collect();

    // Plan.
    let mut plans: Vec<VecDeque<(DatasetId, Money)>> = state
        .buyers
        .iter()
        .map(|b| plan_with_bids(b, t, state.horizon).into())
        .collect();

    // Random interleaving of pairs; each buyer keeps dataset-id order.
    let mut slots: Vec<usize> = plans
        .iter()
        .enumerate()
        .flat_map(|(b, plan)| std::iter::repeat_n(b, plan.len()))
        .collect();
    slots.shuffle(&mut stream(seed, Purpose::MatchOrder, &[t]));

    let ledger_start = state.ledger.len();
    let mut attempts = Vec::new();
    for b in slots {
        let (d, bid) = plans[b].pop_front().expect("one slot per planned pair");
        let buyer_id = BuyerId(b);
        let mut sellers: Vec<SellerId> = state
            .sellers
            .iter()
            .filter(|s| s.catalog.contains_key(&d))
            .map(|s| s.id)
            .collect();
        sellers.shuffle(&mut stream(
            seed,
            Purpose::SellerDraw,
            &[b as u64, d.0 as u64, t],
        ));

        for s in sellers {
            // A finite-supply seller may have sold out earlier this step.
            let Some(ask) = state.sellers[s.0].ask(d) else {
                continue;
            };
            state.buyers[b].observe(d, t, ask);
            let settled = bid >= ask
                && state.buyers[b].budget >= ask
                && settle_with_bid(state, buyer_id, s, d, bid).is_ok();
            attempts.push(MatchAttempt {
                buyer: buyer_id,
                seller: s,
                dataset: d,
                bid,
                ask,
                settled,
            });
            if settled {
                break;
            }
        }
    }
    let transactions = state.ledger[ledger_start..].to_vec();

    // Accrual.
    let mut buyer_accrual = BTreeMap::new();
    for buyer in &mut state.buyers {
        let earned: Money = buyer
            .owned
            .iter()
            .map(|d| buyer.valuation_per_step[d])
            .sum();
        buyer.accrued += earned;
        if state.accrual_to_budget {
            buyer.budget += earned;
        }
        buyer_accrual.insert(buyer.id, earned);
    }

    // Seller price updates for the next timestamp.
    let floor = state.price_floor;
    for seller in &mut state.sellers {
        let rule = seller.pricing_rule;
        for (&d, entry) in seller.catalog.iter_mut() {
            let sold = seller.sold_this_step.get(&d).copied().unwrap_or(0);
            let mut rng = stream(seed, Purpose::SellerNoise, &[seller.id.0 as u64, d.0 as u64, t]);
            entry.ask = seller_update(&rule, entry.ask, entry.base_ask, sold, t + 1, floor, &mut rng);
        }
    }

    state.t += 1;
    Ok(StepReport {
        t,
        transactions,
        buyer_funds: state.buyers.iter().map(|b| (b.id, b.budget)).collect(),
        buyer_owned_counts: state.buyers.iter().map(|b| (b.id, b.owned.len())).collect(),
        buyer_accrual,
        seller_asks,
        attempts,
    })
}

/// Builds the initial market state, drawing initial cost estimates where the
/// config does not pin them.
pub fn init_state(config: &MarketConfig) -> Result<MarketState, ConfigError> {
    config.validate()?;
    let mut state = MarketState::new(config.horizon, config.seed);
    state.price_floor = config.price_floor;
    state.accrual_to_budget = config.accrual_to_budget;

    state.datasets = config
        .datasets
        .iter()
        .enumerate()
        .map(|(i, spec)| Dataset {
            id: DatasetId(i),
            name: spec.name.clone(),
            domain_tag: spec.domain.clone(),
            num_examples: spec.num_examples,
            num_features: spec.num_features,
            supply: spec.stock.map_or(SupplyMode::Infinite, SupplyMode::Finite),
        })
        .collect();

    let (lo, hi) = config.initial_estimate_range;
    for (i, spec) in config.buyers.iter().enumerate() {
        let valuations = spec.wants.iter().map(|w| (w.dataset, w.value)).collect();
        let mut buyer = Buyer::new(BuyerId(i), spec.budget, valuations, spec.predictor);
        let mut rng = stream(config.seed, Purpose::InitialEstimate, &[i as u64]);
        for want in &spec.wants {
            // Always draw so pinning one estimate does not shift the others.
            let drawn = initial_estimate(&mut rng, lo, hi).map_err(|e| {
                ConfigError::invalid("market.initial_estimate_range", e.to_string())
            })?;
            buyer
                .initial_estimates
                .insert(want.dataset, want.estimate.unwrap_or(drawn));
        }
        state.buyers.push(buyer);
    }

    for (i, spec) in config.sellers.iter().enumerate() {
        let mut seller = Seller::new(SellerId(i), spec.budget, spec.rule);
        for offer in &spec.catalog {
            let supply = state.datasets[offer.dataset.0].supply;
            seller.offer(offer.dataset, offer.ask.max(config.price_floor), supply);
        }
        state.sellers.push(seller);
    }
    Ok(state)
}

/// Output of a full run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub reports: Vec<StepReport>,
    pub state: MarketState,
}

/// Runs a market from `config` for its full horizon.
pub fn run(config: &MarketConfig) -> Result<RunOutput, ConfigError> {
    let mut state = init_state(config)?;
    let mut reports = Vec::with_capacity(state.horizon as usize);
    while state.t < state.horizon {
        reports.push(run_timestamp(&mut state).expect("t < horizon"));
    }
    Ok(RunOutput { reports, state })
}
