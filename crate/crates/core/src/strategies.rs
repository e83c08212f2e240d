//! Buyer price predictors and seller pricing rules.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::money::Money;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("price series is empty")]
    NoHistory,
    #[error("invalid estimate range: lo {lo} > hi {hi} or negative bound")]
    InvalidRange { lo: Money, hi: Money },
    #[error("unknown predictor {0:?}; valid names: last, mean, max, min, regression")]
    UnknownPredictor(String),
    #[error(
        "unknown seller rule {0:?}; valid names: adaptive, linear, noisy_adaptive, noisy_linear"
    )]
    UnknownRule(String),
    #[error("{0}")]
    InvalidParameter(String),
}

/// Observed prices for one dataset, in observation order.
///
/// Timestamps are non-decreasing. A buyer may see several asks for the same
/// dataset within one timestamp, so equal timestamps are allowed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PriceSeries {
    points: Vec<(u64, Money)>,
}

impl PriceSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: u64, price: Money) {
        debug_assert!(self.points.last().is_none_or(|&(last, _)| last <= t));
        self.points.push((t, price));
    }

    pub fn points(&self) -> &[(u64, Money)] {
        &self.points
    }

    pub fn prices(&self) -> impl Iterator<Item = Money> + '_ {
        self.points.iter().map(|&(_, p)| p)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<(u64, Money)> {
        self.points.last().copied()
    }
}

impl FromIterator<(u64, Money)> for PriceSeries {
    fn from_iter<I: IntoIterator<Item = (u64, Money)>>(iter: I) -> Self {
        let mut s = PriceSeries::new();
        for (t, p) in iter {
            s.push(t, p);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredictorKind {
    Last,
    Mean,
    Max,
    Min,
    Regression,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 5] = [
        PredictorKind::Last,
        PredictorKind::Mean,
        PredictorKind::Max,
        PredictorKind::Min,
        PredictorKind::Regression,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::Last => "last",
            PredictorKind::Mean => "mean",
            PredictorKind::Max => "max",
            PredictorKind::Min => "min",
            PredictorKind::Regression => "regression",
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredictorKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PredictorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| StrategyError::UnknownPredictor(s.to_owned()))
    }
}

/// Predicts the next market price from `series`.
pub fn predict(kind: PredictorKind, series: &PriceSeries) -> Result<Money, StrategyError> {
    let (_, last) = series.last().ok_or(StrategyError::NoHistory)?;
    Ok(match kind {
        PredictorKind::Last => last,
        PredictorKind::Mean => {
            let prices: Vec<Money> = series.prices().collect();
            Money::mean(&prices).expect("non-empty")
        }
        PredictorKind::Max => series.prices().max().expect("non-empty"),
        PredictorKind::Min => series.prices().min().expect("non-empty"),
        PredictorKind::Regression => match ols_forecast(series) {
            Some(units) => Money::from_f64(units.max(0.0)).unwrap_or(last),
            None => last,
        },
    })
}

/// Unrounded prediction in currency units. Agrees with [`predict`] up to
/// rounding to the nearest minor unit.
pub fn forecast(kind: PredictorKind, series: &PriceSeries) -> Result<f64, StrategyError> {
    let (_, last) = series.last().ok_or(StrategyError::NoHistory)?;
    Ok(match kind {
        PredictorKind::Mean => {
            let sum: f64 = series.prices().map(Money::to_f64).sum();
            sum / series.len() as f64
        }
        PredictorKind::Regression => match ols_forecast(series) {
            Some(units) => units.max(0.0),
            None => last.to_f64(),
        },
        _ => predict(kind, series)?.to_f64(),
    })
}

/// Least-squares line through `(timestamp, price)` evaluated one step past
/// the last timestamp. `None` when fewer than two distinct timestamps exist.
fn ols_forecast(series: &PriceSeries) -> Option<f64> {
    let pts = series.points();
    let (t_first, _) = *pts.first()?;
    let (t_last, _) = *pts.last()?;
    if t_first == t_last {
        return None;
    }
    let n = pts.len() as f64;
    let x_mean = pts.iter().map(|&(t, _)| t as f64).sum::<f64>() / n;
    let y_mean = pts.iter().map(|&(_, p)| p.to_f64()).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(t, p) in pts {
        let dx = t as f64 - x_mean;
        sxx += dx * dx;
        sxy += dx * (p.to_f64() - y_mean);
    }
    let slope = sxy / sxx;
    Some(y_mean + slope * ((t_last + 1) as f64 - x_mean))
}

/// Draws an initial cost estimate uniformly from `[lo, hi]` (inclusive, at
/// minor-unit resolution).
pub fn initial_estimate<R: Rng + ?Sized>(
    rng: &mut R,
    lo: Money,
    hi: Money,
) -> Result<Money, StrategyError> {
    if lo.is_negative() || lo > hi {
        return Err(StrategyError::InvalidRange { lo, hi });
    }
    Ok(Money::from_minor(rng.random_range(lo.minor()..=hi.minor())))
}

/// How a seller moves its ask between timestamps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SellerRule {
    /// Multiply the ask by `up` after a step with at least one sale, by
    /// `down` otherwise.
    Adaptive { up: f64, down: f64 },
    /// `intercept + slope * t`. Without an explicit intercept the dataset's
    /// starting ask is used, so each dataset keeps its own price level.
    Linear {
        intercept: Option<Money>,
        slope: f64,
    },
    NoisyAdaptive { up: f64, down: f64, sigma: f64 },
    NoisyLinear {
        intercept: Option<Money>,
        slope: f64,
        sigma: f64,
    },
}

impl Default for SellerRule {
    fn default() -> Self {
        SellerRule::Adaptive {
            up: 1.05,
            down: 0.95,
        }
    }
}

impl SellerRule {
    pub const NAMES: [&'static str; 4] = ["adaptive", "linear", "noisy_adaptive", "noisy_linear"];

    pub fn name(&self) -> &'static str {
        match self {
            SellerRule::Adaptive { .. } => "adaptive",
            SellerRule::Linear { .. } => "linear",
            SellerRule::NoisyAdaptive { .. } => "noisy_adaptive",
            SellerRule::NoisyLinear { .. } => "noisy_linear",
        }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let (up_down, slope, sigma) = match *self {
            SellerRule::Adaptive { up, down } => (Some((up, down)), None, None),
            SellerRule::Linear { slope, .. } => (None, Some(slope), None),
            SellerRule::NoisyAdaptive { up, down, sigma } => (Some((up, down)), None, Some(sigma)),
            SellerRule::NoisyLinear { slope, sigma, .. } => (None, Some(slope), Some(sigma)),
        };
        if let Some((up, down)) = up_down {
            if !(up.is_finite() && up > 1.0) {
                return Err(StrategyError::InvalidParameter(format!(
                    "up factor must be > 1, got {up}"
                )));
            }
            if !(down > 0.0 && down < 1.0) {
                return Err(StrategyError::InvalidParameter(format!(
                    "down factor must be in (0, 1), got {down}"
                )));
            }
        }
        if let Some(slope) = slope {
            if !slope.is_finite() {
                return Err(StrategyError::InvalidParameter(format!(
                    "slope must be finite, got {slope}"
                )));
            }
        }
        if let Some(sigma) = sigma {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(StrategyError::InvalidParameter(format!(
                    "sigma must be >= 0, got {sigma}"
                )));
            }
        }
        Ok(())
    }
}

/// Seller's ask for the next timestamp.
///
/// `t` is the timestamp the new ask will apply to; `base_ask` is the ask the
/// dataset started the run with. The result is clamped at `price_floor`.
pub fn seller_update<R: Rng + ?Sized>(
    rule: &SellerRule,
    current_ask: Money,
    base_ask: Money,
    sold_count: u64,
    t: u64,
    price_floor: Money,
    rng: &mut R,
) -> Money {
    let adaptive = |up: f64, down: f64| {
        current_ask.scale(if sold_count > 0 { up } else { down })
    };
    let linear = |intercept: Option<Money>, slope: f64| {
        let drift = Money::from_f64(slope * t as f64).unwrap_or(Money::ZERO);
        intercept.unwrap_or(base_ask) + drift
    };
    let noise = |sigma: f64, rng: &mut R| {
        let normal = Normal::new(0.0, sigma).expect("sigma validated");
        Money::from_f64(normal.sample(rng)).unwrap_or(Money::ZERO)
    };

    let next = match *rule {
        SellerRule::Adaptive { up, down } => adaptive(up, down),
        SellerRule::Linear { intercept, slope } => linear(intercept, slope),
        SellerRule::NoisyAdaptive { up, down, sigma } => adaptive(up, down) + noise(sigma, rng),
        SellerRule::NoisyLinear {
            intercept,
            slope,
            sigma,
        } => linear(intercept, slope) + noise(sigma, rng),
    };
    next.max(price_floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn series(points: &[(u64, i64)]) -> PriceSeries {
        points
            .iter()
            .map(|&(t, p)| (t, Money::from_units(p)))
            .collect()
    }

    fn units(x: i64) -> Money {
        Money::from_units(x)
    }

    #[test]
    fn baseline_predictors() {
        use PredictorKind::*;
        assert_eq!(predict(Last, &series(&[(1, 5), (2, 7), (3, 9)])), Ok(units(9)));
        assert_eq!(predict(Mean, &series(&[(1, 4), (2, 6), (3, 8)])), Ok(units(6)));
        let s = series(&[(1, 4), (2, 9), (3, 2)]);
        assert_eq!(predict(Max, &s), Ok(units(9)));
        assert_eq!(predict(Min, &s), Ok(units(2)));
        assert_eq!(
            predict(Regression, &series(&[(1, 2), (2, 4), (3, 6)])),
            Ok(units(8))
        );
    }

    #[test]
    fn regression_cold_start_falls_back_to_last() {
        let single = series(&[(1, 5)]);
        assert_eq!(ols_forecast(&single), None);
        assert_eq!(predict(PredictorKind::Regression, &single), Ok(units(5)));
        // Several observations at one timestamp still cannot fit a line.
        let same_t = series(&[(3, 5), (3, 9)]);
        assert_eq!(ols_forecast(&same_t), None);
        assert_eq!(predict(PredictorKind::Regression, &same_t), Ok(units(9)));
    }

    #[test]
    fn regression_is_clamped_at_zero() {
        let falling = series(&[(1, 10), (2, 5), (3, 1)]);
        assert!(ols_forecast(&falling).unwrap() < 0.0);
        assert_eq!(predict(PredictorKind::Regression, &falling), Ok(Money::ZERO));
        assert_eq!(forecast(PredictorKind::Regression, &falling), Ok(0.0));
    }

    #[test]
    fn empty_series_has_no_prediction() {
        for kind in PredictorKind::ALL {
            assert_eq!(predict(kind, &PriceSeries::new()), Err(StrategyError::NoHistory));
        }
    }

    #[test]
    fn predictor_names_round_trip() {
        for kind in PredictorKind::ALL {
            assert_eq!(kind.name().parse::<PredictorKind>(), Ok(kind));
        }
        let err = "regresion".parse::<PredictorKind>().unwrap_err();
        assert!(err.to_string().contains("regression"));
    }

    #[test]
    fn initial_estimate_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(initial_estimate(&mut rng, units(7), units(7)), Ok(units(7)));
        assert!(matches!(
            initial_estimate(&mut rng, units(8), units(7)),
            Err(StrategyError::InvalidRange { .. })
        ));
        assert!(initial_estimate(&mut rng, -units(1), units(7)).is_err());

        let a = initial_estimate(&mut ChaCha8Rng::seed_from_u64(9), units(0), units(10));
        let b = initial_estimate(&mut ChaCha8Rng::seed_from_u64(9), units(0), units(10));
        assert_eq!(a, b);
    }

    #[test]
    fn initial_estimate_mean_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let total: f64 = (0..n)
            .map(|_| initial_estimate(&mut rng, units(0), units(10)).unwrap().to_f64())
            .sum();
        let mean = total / n as f64;
        assert!((mean - 5.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn seller_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let adaptive = SellerRule::Adaptive { up: 1.1, down: 0.9 };
        assert_eq!(
            seller_update(&adaptive, units(10), units(10), 2, 1, Money::ZERO, &mut rng),
            units(11)
        );
        assert_eq!(
            seller_update(&adaptive, units(10), units(10), 0, 1, Money::ZERO, &mut rng),
            units(9)
        );
        let linear = SellerRule::Linear {
            intercept: Some(units(5)),
            slope: 0.5,
        };
        assert_eq!(
            seller_update(&linear, units(100), units(100), 0, 4, Money::ZERO, &mut rng),
            units(7)
        );
        let per_dataset = SellerRule::Linear {
            intercept: None,
            slope: 1.0,
        };
        assert_eq!(
            seller_update(&per_dataset, units(3), units(8), 0, 2, Money::ZERO, &mut rng),
            units(10)
        );
    }

    #[test]
    fn falling_linear_price_stops_at_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rule = SellerRule::Linear {
            intercept: Some(units(5)),
            slope: -1.0,
        };
        assert_eq!(
            seller_update(&rule, units(5), units(5), 0, 10, units(1), &mut rng),
            units(1)
        );
    }

    #[test]
    fn noisy_linear_mean_matches_base_rule() {
        let rule = SellerRule::NoisyLinear {
            intercept: Some(units(5)),
            slope: 0.5,
            sigma: 1.0,
        };
        let n = 10_000;
        let total: f64 = (0..n)
            .map(|seed| {
                let mut rng = stream(seed, Purpose::SellerNoise, &[0]);
                seller_update(&rule, units(5), units(5), 0, 4, Money::ZERO, &mut rng).to_f64()
            })
            .sum();
        let mean = total / n as f64;
        assert!((mean - 7.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn noisy_trajectories_repeat_under_seed() {
        let rule = SellerRule::NoisyAdaptive {
            up: 1.05,
            down: 0.95,
            sigma: 0.5,
        };
        let trajectory = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ask = units(10);
            (0..50)
                .map(|t| {
                    ask = seller_update(&rule, ask, units(10), t % 3, t, Money::ZERO, &mut rng);
                    ask
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(trajectory(11), trajectory(11));
        assert_ne!(trajectory(11), trajectory(12));
    }

    #[test]
    fn rule_validation() {
        assert!(SellerRule::default().validate().is_ok());
        assert!(SellerRule::Adaptive { up: 1.0, down: 0.9 }.validate().is_err());
        assert!(SellerRule::Adaptive { up: 1.1, down: 1.0 }.validate().is_err());
        assert!(SellerRule::NoisyLinear {
            intercept: None,
            slope: 1.0,
            sigma: -0.1
        }
        .validate()
        .is_err());
        assert!(SellerRule::Linear {
            intercept: None,
            slope: -2.0
        }
        .validate()
        .is_ok());
    }

    fn arb_series() -> impl Strategy<Value = PriceSeries> {
        prop::collection::vec((0u64..4, 0i64..2_000_000), 1..40).prop_map(|steps| {
            let mut t = 0;
            steps
                .into_iter()
                .map(|(dt, p)| {
                    t += dt;
                    (t, Money::from_minor(p))
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn min_mean_max_are_ordered(s in arb_series()) {
            let min = predict(PredictorKind::Min, &s).unwrap();
            let mean = predict(PredictorKind::Mean, &s).unwrap();
            let max = predict(PredictorKind::Max, &s).unwrap();
            prop_assert!(min <= mean && mean <= max);
        }

        #[test]
        fn constant_series_predicts_constant(c in 0i64..10_000_000, n in 1usize..30) {
            let s: PriceSeries = (0..n as u64).map(|t| (t, Money::from_minor(c))).collect();
            for kind in PredictorKind::ALL {
                prop_assert_eq!(predict(kind, &s).unwrap(), Money::from_minor(c));
            }
        }

        #[test]
        fn adaptive_never_drops_below_floor(
            sales in prop::collection::vec(0u64..3, 1..200),
            floor in 0i64..50_000,
            start in 0i64..1_000_000,
        ) {
            let rule = SellerRule::default();
            let floor = Money::from_minor(floor);
            let mut ask = Money::from_minor(start).max(floor);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for (t, sold) in sales.into_iter().enumerate() {
                ask = seller_update(&rule, ask, ask, sold, t as u64, floor, &mut rng);
                prop_assert!(ask >= floor);
            }
        }
    }
}
