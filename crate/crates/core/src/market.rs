//! Market entities and the settlement primitive.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;
use crate::strategies::{predict, PredictorKind, PriceSeries, SellerRule};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            pub const fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(
    /// Index into the market's dataset list.
    DatasetId
);
id_type!(BuyerId);
id_type!(SellerId);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupplyMode {
    Infinite,
    Finite(u64),
}

impl SupplyMode {
    /// Supply after one sale, or `None` if the item is sold out and must
    /// leave the catalog.
    fn after_sale(self) -> Option<SupplyMode> {
        match self {
            SupplyMode::Infinite => Some(SupplyMode::Infinite),
            SupplyMode::Finite(n) if n > 1 => Some(SupplyMode::Finite(n - 1)),
            SupplyMode::Finite(_) => None,
        }
    }
}

/// A tradable product. Metadata is carried but never read by decision logic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: DatasetId,
    pub name: String,
    pub domain_tag: String,
    pub num_examples: u64,
    pub num_features: u64,
    pub supply: SupplyMode,
}

/// One settled purchase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub timestamp: u64,
    pub buyer: BuyerId,
    pub seller: SellerId,
    pub dataset: DatasetId,
    /// Settled price: the seller's ask at settlement time.
    pub price: Money,
    /// The buyer's bid when the sale happened (equal to `price` for direct
    /// settlements that bypass matching).
    pub bid: Money,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Buyer {
    pub id: BuyerId,
    pub budget: Money,
    /// Datasets still wanted.
    pub wishlist: BTreeSet<DatasetId>,
    /// Value earned per timestamp of ownership. Fixed for the whole run.
    pub valuation_per_step: BTreeMap<DatasetId, Money>,
    pub owned: BTreeSet<DatasetId>,
    pub predictor: PredictorKind,
    /// Cost estimates used until the first price is observed.
    pub initial_estimates: BTreeMap<DatasetId, Money>,
    /// Every ask the buyer has encountered, per dataset.
    pub price_history: BTreeMap<DatasetId, PriceSeries>,
    pub transactions: Vec<Transaction>,
    /// Valuation accrued from owned datasets so far.
    pub accrued: Money,
}

impl Buyer {
    pub fn new(
        id: BuyerId,
        budget: Money,
        valuations: BTreeMap<DatasetId, Money>,
        predictor: PredictorKind,
    ) -> Self {
        Buyer {
            id,
            budget,
            wishlist: valuations.keys().copied().collect(),
            valuation_per_step: valuations,
            owned: BTreeSet::new(),
            predictor,
            initial_estimates: BTreeMap::new(),
            price_history: BTreeMap::new(),
            transactions: Vec::new(),
            accrued: Money::ZERO,
        }
    }

    /// Current cost estimate for `d`: the predictor over observed prices, or
    /// the initial estimate before anything was observed.
    pub fn estimate(&self, d: DatasetId) -> Option<Money> {
        match self.price_history.get(&d) {
            Some(series) if !series.is_empty() => predict(self.predictor, series).ok(),
            _ => self.initial_estimates.get(&d).copied(),
        }
    }

    pub fn observe(&mut self, d: DatasetId, t: u64, price: Money) {
        self.price_history.entry(d).or_default().push(t, price);
    }

    pub fn spent(&self) -> Money {
        self.transactions.iter().map(|tx| tx.price).sum()
    }

    /// Accrued valuation minus purchase spending.
    pub fn profit(&self) -> Money {
        self.accrued - self.spent()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatalogEntry {
    pub ask: Money,
    /// Ask the seller started the run with.
    pub base_ask: Money,
    pub supply: SupplyMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Seller {
    pub id: SellerId,
    pub budget: Money,
    pub catalog: BTreeMap<DatasetId, CatalogEntry>,
    pub pricing_rule: SellerRule,
    pub sold_this_step: BTreeMap<DatasetId, u64>,
    pub transactions: Vec<Transaction>,
}

impl Seller {
    pub fn new(id: SellerId, budget: Money, pricing_rule: SellerRule) -> Self {
        Seller {
            id,
            budget,
            catalog: BTreeMap::new(),
            pricing_rule,
            sold_this_step: BTreeMap::new(),
            transactions: Vec::new(),
        }
    }

    pub fn offer(&mut self, d: DatasetId, ask: Money, supply: SupplyMode) {
        self.catalog.insert(
            d,
            CatalogEntry {
                ask,
                base_ask: ask,
                supply,
            },
        );
    }

    pub fn ask(&self, d: DatasetId) -> Option<Money> {
        self.catalog.get(&d).map(|e| e.ask)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MarketError {
    #[error("dataset {0} is unknown to this player")]
    UnknownDataset(DatasetId),
    #[error("no buyer with id {0}")]
    UnknownBuyer(BuyerId),
    #[error("no seller with id {0}")]
    UnknownSeller(SellerId),
    #[error("time {t} is outside the horizon {horizon}")]
    InvalidTime { t: u64, horizon: u64 },
    #[error("insufficient funds: need {needed}, have {available}")]
    NoFunds { needed: Money, available: Money },
    #[error("seller {seller} does not offer dataset {dataset}")]
    NotOffered { seller: SellerId, dataset: DatasetId },
    #[error("buyer {buyer} does not want dataset {dataset}")]
    NotWanted { buyer: BuyerId, dataset: DatasetId },
    #[error("bid {bid} is below ask {ask}")]
    BidTooLow { bid: Money, ask: Money },
    #[error("run finished: horizon {horizon} reached")]
    RunFinished { horizon: u64 },
}

/// Full state of one market run.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketState {
    pub t: u64,
    pub horizon: u64,
    pub buyers: Vec<Buyer>,
    pub sellers: Vec<Seller>,
    pub datasets: Vec<Dataset>,
    /// Transactions in settlement order.
    pub ledger: Vec<Transaction>,
    pub rng_seed: u64,
    pub price_floor: Money,
    /// Whether accrued valuation is credited to the buyer's budget.
    pub accrual_to_budget: bool,
}

impl MarketState {
    pub fn new(horizon: u64, rng_seed: u64) -> Self {
        MarketState {
            t: 0,
            horizon,
            buyers: Vec::new(),
            sellers: Vec::new(),
            datasets: Vec::new(),
            ledger: Vec::new(),
            rng_seed,
            price_floor: Money::ZERO,
            accrual_to_budget: true,
        }
    }

    /// Sum of every player's budget.
    pub fn total_money(&self) -> Money {
        let buyers: Money = self.buyers.iter().map(|b| b.budget).sum();
        let sellers: Money = self.sellers.iter().map(|s| s.budget).sum();
        buyers + sellers
    }

    pub fn buyer(&self, id: BuyerId) -> Result<&Buyer, MarketError> {
        self.buyers.get(id.0).ok_or(MarketError::UnknownBuyer(id))
    }

    pub fn seller(&self, id: SellerId) -> Result<&Seller, MarketError> {
        self.sellers.get(id.0).ok_or(MarketError::UnknownSeller(id))
    }
}

/// Total value still obtainable from `d` if bought at time `t`:
/// `(horizon - t) * valuation_per_step[d]`.
pub fn remaining_value(
    buyer: &Buyer,
    d: DatasetId,
    t: u64,
    horizon: u64,
) -> Result<Money, MarketError> {
    if t > horizon {
        return Err(MarketError::InvalidTime { t, horizon });
    }
    let per_step = buyer
        .valuation_per_step
        .get(&d)
        .ok_or(MarketError::UnknownDataset(d))?;
    Ok(*per_step * (horizon - t))
}

/// Sells `d` from `seller` to `buyer` at the seller's current ask.
pub fn settle(
    state: &mut MarketState,
    buyer: BuyerId,
    seller: SellerId,
    d: DatasetId,
) -> Result<Transaction, MarketError> {
    settle_inner(state, buyer, seller, d, None)
}

/// Like [`settle`], but also requires `bid >= ask` and records the bid.
pub fn settle_with_bid(
    state: &mut MarketState,
    buyer: BuyerId,
    seller: SellerId,
    d: DatasetId,
    bid: Money,
) -> Result<Transaction, MarketError> {
    settle_inner(state, buyer, seller, d, Some(bid))
}

fn settle_inner(
    state: &mut MarketState,
    buyer_id: BuyerId,
    seller_id: SellerId,
    d: DatasetId,
    bid: Option<Money>,
) -> Result<Transaction, MarketError> {
    if state.t >= state.horizon {
        return Err(MarketError::RunFinished {
            horizon: state.horizon,
        });
    }
    let ask = state
        .seller(seller_id)?
        .ask(d)
        .ok_or(MarketError::NotOffered {
            seller: seller_id,
            dataset: d,
        })?;
    let buyer = state.buyer(buyer_id)?;
    if !buyer.wishlist.contains(&d) {
        return Err(MarketError::NotWanted {
            buyer: buyer_id,
            dataset: d,
        });
    }
    if let Some(bid) = bid {
        if bid < ask {
            return Err(MarketError::BidTooLow { bid, ask });
        }
    }
    if buyer.budget < ask {
        return Err(MarketError::NoFunds {
            needed: ask,
            available: buyer.budget,
        });
    }

    let tx = Transaction {
        timestamp: state.t,
        buyer: buyer_id,
        seller: seller_id,
        dataset: d,
        price: ask,
        bid: bid.unwrap_or(ask),
    };

    let buyer = &mut state.buyers[buyer_id.0];
    buyer.budget -= ask;
    buyer.wishlist.remove(&d);
    buyer.owned.insert(d);
    buyer.transactions.push(tx);

    let seller = &mut state.sellers[seller_id.0];
    seller.budget += ask;
    *seller.sold_this_step.entry(d).or_insert(0) += 1;
    let entry = seller.catalog.get_mut(&d).expect("checked above");
    match entry.supply.after_sale() {
        Some(supply) => entry.supply = supply,
        None => {
            seller.catalog.remove(&d);
        }
    }
    seller.transactions.push(tx);

    state.ledger.push(tx);
    Ok(tx)
}

/// Replays `ledger` against initial budgets and returns the resulting
/// `(buyer budgets, seller budgets)`. Accrual is not part of the ledger.
pub fn replay_budgets(
    buyer_budgets: &[Money],
    seller_budgets: &[Money],
    ledger: &[Transaction],
) -> (Vec<Money>, Vec<Money>) {
    let mut buyers = buyer_budgets.to_vec();
    let mut sellers = seller_budgets.to_vec();
    for tx in ledger {
        buyers[tx.buyer.0] -= tx.price;
        sellers[tx.seller.0] += tx.price;
    }
    (buyers, sellers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(x: i64) -> Money {
        Money::from_units(x)
    }

    fn one_on_one(ask: i64, budget: i64, supply: SupplyMode) -> MarketState {
        let mut state = MarketState::new(10, 0);
        let vals = BTreeMap::from([(DatasetId(0), units(1))]);
        state
            .buyers
            .push(Buyer::new(BuyerId(0), units(budget), vals, PredictorKind::Last));
        let mut seller = Seller::new(SellerId(0), units(0), SellerRule::default());
        seller.offer(DatasetId(0), units(ask), supply);
        state.sellers.push(seller);
        state
    }

    #[test]
    fn remaining_value_formula() {
        let vals = BTreeMap::from([(DatasetId(0), units(3)), (DatasetId(1), units(2))]);
        let b = Buyer::new(BuyerId(0), units(10), vals, PredictorKind::Last);
        assert_eq!(remaining_value(&b, DatasetId(0), 0, 5), Ok(units(15)));
        assert_eq!(remaining_value(&b, DatasetId(1), 5, 5), Ok(units(0)));
        assert_eq!(remaining_value(&b, DatasetId(1), 3, 5), Ok(units(4)));
        assert_eq!(
            remaining_value(&b, DatasetId(7), 0, 5),
            Err(MarketError::UnknownDataset(DatasetId(7)))
        );
        assert!(matches!(
            remaining_value(&b, DatasetId(0), 6, 5),
            Err(MarketError::InvalidTime { .. })
        ));
    }

    #[test]
    fn settle_moves_money_and_ownership() {
        let mut state = one_on_one(6, 10, SupplyMode::Infinite);
        let tx = settle(&mut state, BuyerId(0), SellerId(0), DatasetId(0)).unwrap();
        assert_eq!(tx.price, units(6));
        assert_eq!(state.buyers[0].budget, units(4));
        assert_eq!(state.sellers[0].budget, units(6));
        assert_eq!(state.ledger.len(), 1);
        assert!(state.buyers[0].owned.contains(&DatasetId(0)));
        assert!(state.buyers[0].wishlist.is_empty());
        assert_eq!(state.sellers[0].transactions, vec![tx]);
    }

    #[test]
    fn settle_without_funds_changes_nothing() {
        let mut state = one_on_one(6, 5, SupplyMode::Infinite);
        let before = state.clone();
        assert_eq!(
            settle(&mut state, BuyerId(0), SellerId(0), DatasetId(0)),
            Err(MarketError::NoFunds {
                needed: units(6),
                available: units(5)
            })
        );
        assert_eq!(state, before);
    }

    #[test]
    fn settle_rejects_unwanted_and_unoffered() {
        let mut state = one_on_one(6, 10, SupplyMode::Infinite);
        state.buyers[0].valuation_per_step.insert(DatasetId(1), units(1));
        state.buyers[0].wishlist.insert(DatasetId(1));
        assert!(matches!(
            settle(&mut state, BuyerId(0), SellerId(0), DatasetId(1)),
            Err(MarketError::NotOffered { .. })
        ));
        settle(&mut state, BuyerId(0), SellerId(0), DatasetId(0)).unwrap();
        assert!(matches!(
            settle(&mut state, BuyerId(0), SellerId(0), DatasetId(0)),
            Err(MarketError::NotWanted { .. })
        ));
    }

    #[test]
    fn bid_below_ask_is_refused() {
        let mut state = one_on_one(6, 10, SupplyMode::Infinite);
        assert_eq!(
            settle_with_bid(&mut state, BuyerId(0), SellerId(0), DatasetId(0), units(5)),
            Err(MarketError::BidTooLow {
                bid: units(5),
                ask: units(6)
            })
        );
        let tx =
            settle_with_bid(&mut state, BuyerId(0), SellerId(0), DatasetId(0), units(7)).unwrap();
        assert_eq!((tx.bid, tx.price), (units(7), units(6)));
    }

    #[test]
    fn infinite_supply_serves_every_buyer() {
        let mut state = one_on_one(6, 10, SupplyMode::Infinite);
        let vals = BTreeMap::from([(DatasetId(0), units(1))]);
        state
            .buyers
            .push(Buyer::new(BuyerId(1), units(10), vals, PredictorKind::Last));
        settle(&mut state, BuyerId(0), SellerId(0), DatasetId(0)).unwrap();
        settle(&mut state, BuyerId(1), SellerId(0), DatasetId(0)).unwrap();
        let entry = state.sellers[0].catalog[&DatasetId(0)];
        assert_eq!(entry.supply, SupplyMode::Infinite);
        assert_eq!(state.sellers[0].budget, units(12));
        assert_eq!(state.sellers[0].sold_this_step[&DatasetId(0)], 2);
    }

    #[test]
    fn finite_supply_runs_out() {
        let mut state = one_on_one(6, 10, SupplyMode::Finite(1));
        let vals = BTreeMap::from([(DatasetId(0), units(1))]);
        state
            .buyers
            .push(Buyer::new(BuyerId(1), units(10), vals, PredictorKind::Last));
        settle(&mut state, BuyerId(0), SellerId(0), DatasetId(0)).unwrap();
        assert!(state.sellers[0].catalog.is_empty());
        assert!(matches!(
            settle(&mut state, BuyerId(1), SellerId(0), DatasetId(0)),
            Err(MarketError::NotOffered { .. })
        ));
    }

    #[test]
    fn settle_after_horizon_fails() {
        let mut state = one_on_one(6, 10, SupplyMode::Infinite);
        state.t = state.horizon;
        assert_eq!(
            settle(&mut state, BuyerId(0), SellerId(0), DatasetId(0)),
            Err(MarketError::RunFinished { horizon: 10 })
        );
    }

    #[test]
    fn replay_reproduces_budgets() {
        let mut state = one_on_one(3, 10, SupplyMode::Infinite);
        let initial = state.clone();
        state.buyers[0].valuation_per_step.insert(DatasetId(1), units(1));
        state.buyers[0].wishlist.insert(DatasetId(1));
        state.sellers[0].offer(DatasetId(1), units(4), SupplyMode::Infinite);
        settle(&mut state, BuyerId(0), SellerId(0), DatasetId(0)).unwrap();
        settle(&mut state, BuyerId(0), SellerId(0), DatasetId(1)).unwrap();
        let (b, s) = replay_budgets(
            &initial.buyers.iter().map(|b| b.budget).collect::<Vec<_>>(),
            &initial.sellers.iter().map(|s| s.budget).collect::<Vec<_>>(),
            &state.ledger,
        );
        assert_eq!(b, vec![state.buyers[0].budget]);
        assert_eq!(s, vec![state.sellers[0].budget]);
        assert_eq!(initial.total_money(), state.total_money());
    }
}
