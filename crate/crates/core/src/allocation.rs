//! Budget-constrained 0/1 dataset selection.
//!
//! Given remaining values `v_i`, estimated costs `c_i` and win flags `w_i`,
//! pick `X ⊆ items` maximizing `Σ (v_i - c_i) w_i` subject to
//! `Σ c_i w_i <= budget`. This is a 0/1 knapsack with real-valued (here
//! fixed-point) weights, solved exactly by branch and bound.
//!
//! Among optimal selections the one whose sorted position list is
//! lexicographically smallest wins, so results are fully deterministic.
//! Items with `v_i <= c_i` are never selected.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::market::DatasetId;
use crate::money::Money;

/// Largest instance [`solve_bruteforce`] accepts.
pub const ORACLE_MAX_ITEMS: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AllocationItem {
    pub dataset: DatasetId,
    /// Remaining value if bought now.
    pub value: Money,
    pub est_cost: Money,
    /// Whether the buyer expects to win the item. Always true in an
    /// auction-free market.
    pub est_win: bool,
}

impl AllocationItem {
    fn profit(&self) -> i64 {
        self.value.minor() - self.est_cost.minor()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationProblem {
    pub items: Vec<AllocationItem>,
    pub budget: Money,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationResult {
    pub chosen: BTreeSet<DatasetId>,
    pub objective: Money,
    pub total_cost: Money,
}

impl AllocationResult {
    fn empty() -> Self {
        AllocationResult {
            chosen: BTreeSet::new(),
            objective: Money::ZERO,
            total_cost: Money::ZERO,
        }
    }

    fn from_positions(items: &[AllocationItem], positions: &[usize]) -> Self {
        let mut out = Self::empty();
        for &i in positions {
            out.chosen.insert(items[i].dataset);
            out.objective += items[i].value - items[i].est_cost;
            out.total_cost += items[i].est_cost;
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AllocationError {
    #[error("brute-force oracle limited to {max} items, got {got}")]
    OracleTooLarge { got: usize, max: usize },
}

/// Keeps only the items the buyer expects to win.
pub fn win_filter(problem: &AllocationProblem) -> AllocationProblem {
    AllocationProblem {
        items: problem.items.iter().filter(|it| it.est_win).copied().collect(),
        budget: problem.budget,
    }
}

/// Exact optimum by depth-first branch and bound.
///
/// Candidates are explored in decreasing profit density `(v - c) / c`; the
/// bound at each node is the fractional-knapsack relaxation of the items not
/// yet decided, rounded up to a whole minor unit.
pub fn solve(problem: &AllocationProblem) -> AllocationResult {
    let filtered = win_filter(problem);
    let items = &filtered.items;
    let budget = filtered.budget.minor();

    let mut order: Vec<usize> = (0..items.len())
        .filter(|&i| items[i].profit() > 0 && items[i].est_cost.minor() <= budget)
        .collect();
    order.sort_by(|&a, &b| by_density(&items[a], &items[b]).then(a.cmp(&b)));

    let mut search = Search {
        items,
        order: &order,
        best_profit: 0,
        best: Vec::new(),
        current: Vec::new(),
    };
    search.branch(0, budget, 0);

    let mut best = search.best;
    best.sort_unstable();
    AllocationResult::from_positions(items, &best)
}

/// Higher density first. Zero-cost items have infinite density.
fn by_density(a: &AllocationItem, b: &AllocationItem) -> Ordering {
    let lhs = a.profit() as i128 * b.est_cost.minor() as i128;
    let rhs = b.profit() as i128 * a.est_cost.minor() as i128;
    rhs.cmp(&lhs)
}

struct Search<'a> {
    items: &'a [AllocationItem],
    order: &'a [usize],
    best_profit: i64,
    /// Positions of the incumbent, sorted ascending.
    best: Vec<usize>,
    current: Vec<usize>,
}

impl Search<'_> {
    fn branch(&mut self, depth: usize, capacity: i64, profit: i64) {
        if depth == self.order.len() {
            self.offer(profit);
            return;
        }
        if self.bound(depth, capacity, profit) < self.best_profit {
            return;
        }
        let item = &self.items[self.order[depth]];
        let cost = item.est_cost.minor();
        if cost <= capacity {
            self.current.push(self.order[depth]);
            self.branch(depth + 1, capacity - cost, profit + item.profit());
            self.current.pop();
        }
        self.branch(depth + 1, capacity, profit);
    }

    /// Fractional relaxation over `order[depth..]`, rounded up.
    fn bound(&self, depth: usize, mut capacity: i64, profit: i64) -> i64 {
        let mut bound = profit;
        for &i in &self.order[depth..] {
            let item = &self.items[i];
            let cost = item.est_cost.minor();
            if cost <= capacity {
                capacity -= cost;
                bound += item.profit();
            } else {
                let frac = item.profit() as i128 * capacity as i128;
                let cost = cost as i128;
                bound += ((frac + cost - 1) / cost) as i64;
                break;
            }
        }
        bound
    }

    fn offer(&mut self, profit: i64) {
        if profit < self.best_profit {
            return;
        }
        let mut candidate = self.current.clone();
        candidate.sort_unstable();
        if profit > self.best_profit || candidate < self.best {
            self.best_profit = profit;
            self.best = candidate;
        }
    }
}

/// Exhaustive reference solver for testing: enumerates all `2^m` subsets of
/// the win-filtered items in Gray-code order.
pub fn solve_bruteforce(problem: &AllocationProblem) -> Result<AllocationResult, AllocationError> {
    let filtered = win_filter(problem);
    let items = &filtered.items;
    let m = items.len();
    if m > ORACLE_MAX_ITEMS {
        return Err(AllocationError::OracleTooLarge {
            got: m,
            max: ORACLE_MAX_ITEMS,
        });
    }
    let budget = filtered.budget.minor();

    let mut mask: u32 = 0;
    let (mut cost, mut profit, mut unprofitable) = (0i64, 0i64, 0usize);
    let mut best_mask: u32 = 0;
    let mut best_profit: i64 = 0;

    let positions = |mask: u32| -> Vec<usize> { (0..m).filter(|&i| mask >> i & 1 == 1).collect() };

    for step in 1u64..(1u64 << m) {
        let bit = step.trailing_zeros() as usize;
        let item = &items[bit];
        let sign = if mask >> bit & 1 == 1 { -1 } else { 1 };
        mask ^= 1 << bit;
        cost += sign * item.est_cost.minor();
        profit += sign * (item.value.minor() - item.est_cost.minor());
        if item.value <= item.est_cost {
            if sign > 0 {
                unprofitable += 1;
            } else {
                unprofitable -= 1;
            }
        }

        if unprofitable > 0 || cost > budget {
            continue;
        }
        let better = match profit.cmp(&best_profit) {
            Ordering::Greater => true,
            Ordering::Equal => positions(mask) < positions(best_mask),
            Ordering::Less => false,
        };
        if better {
            best_mask = mask;
            best_profit = profit;
        }
    }

    Ok(AllocationResult::from_positions(items, &positions(best_mask)))
}
