//! Market configuration: TOML schema, validation and serialization.
//!
//! ```toml
//! [market]
//! horizon = 5
//! seed = 42
//! price_floor = 0.0                  # optional, default 0
//! initial_estimate_range = [1.0, 10.0]
//! accrual_to_budget = true           # optional, default true
//!
//! [[datasets]]                       # ids are positions, starting at 0
//! name = "viewers"
//! domain = "media"                   # optional metadata
//! num_examples = 1000
//! num_features = 12
//! stock = 3                          # optional; omitted means infinite supply
//!
//! [[buyers]]
//! budget = 10.0
//! predictor = "last"                 # last | mean | max | min | regression
//! wants = [{ dataset = 0, value = 3.0, estimate = 8.0 }]   # estimate optional
//!
//! [[sellers]]
//! budget = 0.0
//! rule = { kind = "adaptive", up = 1.05, down = 0.95 }
//! catalog = [{ dataset = 0, ask = 8.0 }]
//! ```
//!
//! Seller rule kinds and their parameters:
//! `adaptive` (`up` default 1.05, `down` default 0.95),
//! `linear` (`slope` default 0, optional `intercept`),
//! `noisy_adaptive` (`up`, `down`, `sigma`),
//! `noisy_linear` (`slope`, optional `intercept`, `sigma`).
//! A linear rule without an intercept keeps each dataset's starting ask as
//! its own intercept.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::DatasetId;
use crate::money::Money;
use crate::strategies::{PredictorKind, SellerRule, StrategyError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub name: String,
    pub domain: String,
    pub num_examples: u64,
    pub num_features: u64,
    /// `None` for infinite supply.
    pub stock: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Want {
    pub dataset: DatasetId,
    /// Value per timestamp of ownership.
    pub value: Money,
    /// Pins the initial cost estimate instead of drawing it.
    pub estimate: Option<Money>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuyerSpec {
    pub budget: Money,
    pub predictor: PredictorKind,
    pub wants: Vec<Want>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Offer {
    pub dataset: DatasetId,
    pub ask: Money,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SellerSpec {
    pub budget: Money,
    pub rule: SellerRule,
    pub catalog: Vec<Offer>,
}

/// Full input of one simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketConfig {
    pub horizon: u64,
    pub seed: u64,
    pub price_floor: Money,
    pub initial_estimate_range: (Money, Money),
    pub accrual_to_budget: bool,
    pub datasets: Vec<DatasetSpec>,
    pub buyers: Vec<BuyerSpec>,
    pub sellers: Vec<SellerSpec>,
}

impl MarketConfig {
    /// Checks every cross-reference and monetary bound.
    pub fn validate(&self) -> Result<(), ConfigError> {
        non_negative("market.price_floor", self.price_floor)?;
        let (lo, hi) = self.initial_estimate_range;
        non_negative("market.initial_estimate_range[0]", lo)?;
        non_negative("market.initial_estimate_range[1]", hi)?;
        if lo > hi {
            return Err(ConfigError::invalid(
                "market.initial_estimate_range",
                format!("lower bound {lo} exceeds upper bound {hi}"),
            ));
        }

        let n = self.datasets.len();
        let check_id = |field: String, d: DatasetId| {
            if d.0 < n {
                Ok(())
            } else {
                Err(ConfigError::invalid(
                    field,
                    format!("dataset {d} is not declared ({n} datasets)"),
                ))
            }
        };

        for (i, b) in self.buyers.iter().enumerate() {
            non_negative(format!("buyers[{i}].budget"), b.budget)?;
            let mut seen = BTreeSet::new();
            for (j, w) in b.wants.iter().enumerate() {
                let at = format!("buyers[{i}].wants[{j}]");
                check_id(format!("{at}.dataset"), w.dataset)?;
                if !seen.insert(w.dataset) {
                    return Err(ConfigError::invalid(
                        format!("{at}.dataset"),
                        format!("dataset {} listed twice", w.dataset),
                    ));
                }
                non_negative(format!("{at}.value"), w.value)?;
                if let Some(e) = w.estimate {
                    non_negative(format!("{at}.estimate"), e)?;
                }
            }
        }

        for (i, s) in self.sellers.iter().enumerate() {
            non_negative(format!("sellers[{i}].budget"), s.budget)?;
            s.rule
                .validate()
                .map_err(|e| ConfigError::invalid(format!("sellers[{i}].rule"), e.to_string()))?;
            if let SellerRule::Linear {
                intercept: Some(a), ..
            }
            | SellerRule::NoisyLinear {
                intercept: Some(a), ..
            } = s.rule
            {
                non_negative(format!("sellers[{i}].rule.intercept"), a)?;
            }
            let mut seen = BTreeSet::new();
            for (j, o) in s.catalog.iter().enumerate() {
                let at = format!("sellers[{i}].catalog[{j}]");
                check_id(format!("{at}.dataset"), o.dataset)?;
                if !seen.insert(o.dataset) {
                    return Err(ConfigError::invalid(
                        format!("{at}.dataset"),
                        format!("dataset {} listed twice", o.dataset),
                    ));
                }
                non_negative(format!("{at}.ask"), o.ask)?;
            }
        }
        Ok(())
    }
}

fn non_negative(field: impl Into<String>, amount: Money) -> Result<(), ConfigError> {
    if amount.is_negative() {
        Err(ConfigError::invalid(field, format!("must be >= 0, got {amount}")))
    } else {
        Ok(())
    }
}

// On-disk layout. Strategy names stay strings here so that validation can
// report them with a field path.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    market: RawMarket,
    #[serde(default)]
    datasets: Vec<RawDataset>,
    #[serde(default)]
    buyers: Vec<RawBuyer>,
    #[serde(default)]
    sellers: Vec<RawSeller>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarket {
    horizon: u64,
    seed: RawSeed,
    #[serde(default)]
    price_floor: Money,
    initial_estimate_range: [Money; 2],
    #[serde(default = "default_true")]
    accrual_to_budget: bool,
}

fn default_true() -> bool {
    true
}

/// TOML integers are signed 64-bit, so seeds above `i64::MAX` are written
/// as decimal strings.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawSeed {
    Int(u64),
    Text(String),
}

impl RawSeed {
    fn new(seed: u64) -> Self {
        if seed <= i64::MAX as u64 {
            RawSeed::Int(seed)
        } else {
            RawSeed::Text(seed.to_string())
        }
    }

    fn value(&self) -> Result<u64, ConfigError> {
        match self {
            RawSeed::Int(v) => Ok(*v),
            RawSeed::Text(s) => s
                .parse()
                .map_err(|_| ConfigError::invalid("market.seed", format!("{s:?} is not a u64"))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    name: String,
    #[serde(default)]
    domain: String,
    #[serde(default)]
    num_examples: u64,
    #[serde(default)]
    num_features: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stock: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWant {
    dataset: usize,
    value: Money,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    estimate: Option<Money>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBuyer {
    budget: Money,
    predictor: String,
    #[serde(default)]
    wants: Vec<RawWant>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    up: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    down: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intercept: Option<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOffer {
    dataset: usize,
    ask: Money,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeller {
    budget: Money,
    rule: RawRule,
    #[serde(default)]
    catalog: Vec<RawOffer>,
}

impl RawRule {
    fn into_rule(self, field: &str) -> Result<SellerRule, ConfigError> {
        let sigma = |s: Option<f64>| {
            s.ok_or_else(|| ConfigError::invalid(format!("{field}.sigma"), "required for noisy rules"))
        };
        let up = self.up.unwrap_or(1.05);
        let down = self.down.unwrap_or(0.95);
        let slope = self.slope.unwrap_or(0.0);
        let rule = match self.kind.as_str() {
            "adaptive" => SellerRule::Adaptive { up, down },
            "linear" => SellerRule::Linear {
                intercept: self.intercept,
                slope,
            },
            "noisy_adaptive" => SellerRule::NoisyAdaptive {
                up,
                down,
                sigma: sigma(self.sigma)?,
            },
            "noisy_linear" => SellerRule::NoisyLinear {
                intercept: self.intercept,
                slope,
                sigma: sigma(self.sigma)?,
            },
            other => {
                return Err(ConfigError::invalid(
                    format!("{field}.kind"),
                    StrategyError::UnknownRule(other.to_owned()).to_string(),
                ))
            }
        };
        let misplaced = match rule {
            SellerRule::Adaptive { .. } | SellerRule::NoisyAdaptive { .. } => {
                [("intercept", self.intercept.is_some()), ("slope", self.slope.is_some())]
            }
            SellerRule::Linear { .. } | SellerRule::NoisyLinear { .. } => {
                [("up", self.up.is_some()), ("down", self.down.is_some())]
            }
        };
        let sigma_misplaced = matches!(rule, SellerRule::Adaptive { .. } | SellerRule::Linear { .. })
            && self.sigma.is_some();
        for (name, present) in misplaced
            .into_iter()
            .chain(std::iter::once(("sigma", sigma_misplaced)))
        {
            if present {
                return Err(ConfigError::invalid(
                    format!("{field}.{name}"),
                    format!("not a parameter of rule {:?}", rule.name()),
                ));
            }
        }
        Ok(rule)
    }

    fn from_rule(rule: &SellerRule) -> Self {
        let mut raw = RawRule {
            kind: rule.name().to_owned(),
            ..RawRule::default()
        };
        match *rule {
            SellerRule::Adaptive { up, down } => {
                raw.up = Some(up);
                raw.down = Some(down);
            }
            SellerRule::Linear { intercept, slope } => {
                raw.intercept = intercept;
                raw.slope = Some(slope);
            }
            SellerRule::NoisyAdaptive { up, down, sigma } => {
                raw.up = Some(up);
                raw.down = Some(down);
                raw.sigma = Some(sigma);
            }
            SellerRule::NoisyLinear {
                intercept,
                slope,
                sigma,
            } => {
                raw.intercept = intercept;
                raw.slope = Some(slope);
                raw.sigma = Some(sigma);
            }
        }
        raw
    }
}

impl RawConfig {
    fn into_config(self) -> Result<MarketConfig, ConfigError> {
        let buyers = self
            .buyers
            .into_iter()
            .enumerate()
            .map(|(i, b)| {
                let predictor = b.predictor.parse::<PredictorKind>().map_err(|e| {
                    ConfigError::invalid(format!("buyers[{i}].predictor"), e.to_string())
                })?;
                Ok(BuyerSpec {
                    budget: b.budget,
                    predictor,
                    wants: b
                        .wants
                        .into_iter()
                        .map(|w| Want {
                            dataset: DatasetId(w.dataset),
                            value: w.value,
                            estimate: w.estimate,
                        })
                        .collect(),
                })
            })
            .collect::<Result<_, ConfigError>>()?;
        let sellers = self
            .sellers
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(SellerSpec {
                    budget: s.budget,
                    rule: s.rule.into_rule(&format!("sellers[{i}].rule"))?,
                    catalog: s
                        .catalog
                        .into_iter()
                        .map(|o| Offer {
                            dataset: DatasetId(o.dataset),
                            ask: o.ask,
                        })
                        .collect(),
                })
            })
            .collect::<Result<_, ConfigError>>()?;
        let config = MarketConfig {
            horizon: self.market.horizon,
            seed: self.market.seed.value()?,
            price_floor: self.market.price_floor,
            initial_estimate_range: (
                self.market.initial_estimate_range[0],
                self.market.initial_estimate_range[1],
            ),
            accrual_to_budget: self.market.accrual_to_budget,
            datasets: self
                .datasets
                .into_iter()
                .map(|d| DatasetSpec {
                    name: d.name,
                    domain: d.domain,
                    num_examples: d.num_examples,
                    num_features: d.num_features,
                    stock: d.stock,
                })
                .collect(),
            buyers,
            sellers,
        };
        config.validate()?;
        Ok(config)
    }

    fn from_config(c: &MarketConfig) -> Self {
        RawConfig {
            market: RawMarket {
                horizon: c.horizon,
                seed: RawSeed::new(c.seed),
                price_floor: c.price_floor,
                initial_estimate_range: [c.initial_estimate_range.0, c.initial_estimate_range.1],
                accrual_to_budget: c.accrual_to_budget,
            },
            datasets: c
                .datasets
                .iter()
                .map(|d| RawDataset {
                    name: d.name.clone(),
                    domain: d.domain.clone(),
                    num_examples: d.num_examples,
                    num_features: d.num_features,
                    stock: d.stock,
                })
                .collect(),
            buyers: c
                .buyers
                .iter()
                .map(|b| RawBuyer {
                    budget: b.budget,
                    predictor: b.predictor.name().to_owned(),
                    wants: b
                        .wants
                        .iter()
                        .map(|w| RawWant {
                            dataset: w.dataset.0,
                            value: w.value,
                            estimate: w.estimate,
                        })
                        .collect(),
                })
                .collect(),
            sellers: c
                .sellers
                .iter()
                .map(|s| RawSeller {
                    budget: s.budget,
                    rule: RawRule::from_rule(&s.rule),
                    catalog: s
                        .catalog
                        .iter()
                        .map(|o| RawOffer {
                            dataset: o.dataset.0,
                            ask: o.ask,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Parses and validates a config from TOML text.
pub fn parse_config(text: &str) -> Result<MarketConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    raw.into_config()
}

pub fn load_config(path: impl AsRef<Path>) -> Result<MarketConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_config(&text)
}

/// Serializes a config to TOML text accepted by [`parse_config`].
pub fn write_config(config: &MarketConfig) -> String {
    toml::to_string(&RawConfig::from_config(config)).expect("config is always representable")
}
