//! Rule-based baseline strategies and the discretizers used to compare the
//! continuous agent against discrete action sets.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::PriceSeries;
use crate::env::FeePolicy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    RandomC,
    RandomD,
    BuyHold,
    SellHold,
    Long,
    Short,
    Mrma,
    Tfma,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 8] = [
        StrategyKind::RandomC,
        StrategyKind::RandomD,
        StrategyKind::BuyHold,
        StrategyKind::SellHold,
        StrategyKind::Long,
        StrategyKind::Short,
        StrategyKind::Mrma,
        StrategyKind::Tfma,
    ];

    pub fn id(self) -> &'static str {
        match self {
            StrategyKind::RandomC => "random_c",
            StrategyKind::RandomD => "random_d",
            StrategyKind::BuyHold => "buy_hold",
            StrategyKind::SellHold => "sell_hold",
            StrategyKind::Long => "long",
            StrategyKind::Short => "short",
            StrategyKind::Mrma => "mrma",
            StrategyKind::Tfma => "tfma",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, StrategyKind::RandomC | StrategyKind::RandomD)
    }

    /// Buy-and-hold and sell-and-hold keep one position for the whole
    /// segment, so they pay only on the first open and the final close.
    pub fn fee_policy(self) -> FeePolicy {
        match self {
            StrategyKind::BuyHold | StrategyKind::SellHold => FeePolicy::OpenAndClose,
            _ => FeePolicy::EveryStep,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub ma_window: usize,
    pub seed: u64,
}

pub const DEFAULT_MA_WINDOW: usize = 20;

impl StrategySpec {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            ma_window: DEFAULT_MA_WINDOW,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.kind, StrategyKind::Mrma | StrategyKind::Tfma) && self.ma_window < 2 {
            return Err(Error::Config(format!(
                "ma_window must be >= 2 (got {})",
                self.ma_window
            )));
        }
        Ok(())
    }
}

/// Simple moving average of the closes `t - window + 1 ..= t`.
pub fn moving_average(prices: &PriceSeries, t: usize, window: usize) -> Result<f64> {
    if window == 0 || t < window || t >= prices.len() {
        return Err(Error::InsufficientHistory { t, window });
    }
    let sum: f64 = prices.bars()[t + 1 - window..=t].iter().map(|b| b.close).sum();
    Ok(sum / window as f64)
}

/// Action of a baseline at close index `t`.
pub fn act<R: Rng + ?Sized>(spec: &StrategySpec, t: usize, prices: &PriceSeries, rng: &mut R) -> Result<f64> {
    if t >= prices.len() {
        return Err(Error::InsufficientHistory {
            t,
            window: prices.len(),
        });
    }
    Ok(match spec.kind {
        StrategyKind::RandomC => rng.random_range(-1.0..=1.0),
        StrategyKind::RandomD => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        StrategyKind::BuyHold | StrategyKind::Long => 1.0,
        StrategyKind::SellHold | StrategyKind::Short => -1.0,
        StrategyKind::Mrma => {
            let ma = moving_average(prices, t, spec.ma_window)?;
            if prices.close(t) < ma {
                1.0
            } else {
                -1.0
            }
        }
        StrategyKind::Tfma => {
            let ma = moving_average(prices, t, spec.ma_window)?;
            if prices.close(t) > ma {
                1.0
            } else {
                -1.0
            }
        }
    })
}

/// `-1` for `a <= 0`, `+1` otherwise.
pub fn sign_discretize(a: f64) -> f64 {
    if a <= 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `-1` for `a <= -1/3`, `0` for `-1/3 < a <= 1/3`, `+1` above.
pub fn d3_discretize(a: f64) -> f64 {
    const THIRD: f64 = 1.0 / 3.0;
    if a <= -THIRD {
        -1.0
    } else if a <= THIRD {
        0.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discretizer {
    Sign,
    D3,
}

impl Discretizer {
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Discretizer::Sign => sign_discretize(a),
            Discretizer::D3 => d3_discretize(a),
        }
    }
}
