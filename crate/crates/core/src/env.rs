//! Daily trading MDP over close prices.
//!
//! Each step the agent commits `|a| * cash` at the close `p_t`, long for
//! `a > 0` and short for `a < 0`, and the position is closed at `p_{t+1}`.
//! The reward is the log growth of cash over the step.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{pct_change, window_at, PriceSeries, ReturnSeries, WindowState};
use crate::error::{Error, Result};

/// Cash left after a wiped-out position; keeps the log reward finite.
pub const CASH_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub window: usize,
    /// Percent of opening notional.
    pub transaction_cost: f64,
    pub initial_cash: f64,
    pub annualization_days: u32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            window: 30,
            transaction_cost: 0.0,
            initial_cash: 100_000.0,
            annualization_days: 252,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        if !(self.transaction_cost >= 0.0) || !self.transaction_cost.is_finite() {
            return Err(Error::Config("transaction_cost must be >= 0".into()));
        }
        if !(self.initial_cash > 0.0) || !self.initial_cash.is_finite() {
            return Err(Error::Config("initial_cash must be > 0".into()));
        }
        if self.annualization_days == 0 {
            return Err(Error::Config("annualization_days must be > 0".into()));
        }
        Ok(())
    }

    /// Prices a segment needs for at least one step: `w + 1` for the first
    /// full window of changes plus the next close.
    pub fn min_segment_len(&self) -> usize {
        self.window + 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    /// Index of the current close within the segment.
    pub t: usize,
    pub cash: f64,
    pub terminal: bool,
}

/// Cash accounting for one open-and-close round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CashStep {
    pub cash: f64,
    pub reward: f64,
    pub held_shares: f64,
    pub committed_cash: f64,
    pub fee: f64,
    /// The position value hit zero; cash is floored and the episode ends.
    pub bankrupt: bool,
}

/// One step of the cash rule:
/// `c' = c - h + max(n * Δ + h - n * TC * p_t / 100, 0)` with `h = |a| c`,
/// `n = h / p_t`, `Δ = p_next - p_t` for longs and `p_t - p_next` for shorts.
pub fn step_cash(
    cash: f64,
    action: f64,
    p_t: f64,
    p_next: f64,
    transaction_cost: f64,
    charge_fee: bool,
) -> Result<CashStep> {
    if !(-1.0..=1.0).contains(&action) {
        return Err(Error::ActionOutOfRange(action));
    }
    for p in [p_t, p_next] {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::NonPositivePrice(p));
        }
    }
    if !(cash > 0.0) {
        return Err(Error::NonPositiveCash(cash));
    }
    if action == 0.0 {
        return Ok(CashStep {
            cash,
            reward: 0.0,
            held_shares: 0.0,
            committed_cash: 0.0,
            fee: 0.0,
            bankrupt: false,
        });
    }

    let committed = action.abs() * cash;
    let shares = committed / p_t;
    let delta = if action > 0.0 { p_next - p_t } else { p_t - p_next };
    let fee = if charge_fee {
        shares * transaction_cost * p_t / 100.0
    } else {
        0.0
    };
    let position_value = shares * delta + committed - fee;
    let raw = cash - committed + position_value.max(0.0);
    let bankrupt = position_value < 0.0 || raw < CASH_FLOOR;
    let next = if bankrupt { raw.max(CASH_FLOOR) } else { raw };
    Ok(CashStep {
        cash: next,
        reward: (next / cash).ln(),
        held_shares: shares,
        committed_cash: committed,
        fee,
        bankrupt,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub observation: WindowState,
    pub held_shares: f64,
    pub committed_cash: f64,
    pub fee: f64,
}

/// An environment bound to one price segment.
#[derive(Debug, Clone)]
pub struct TradingEnv {
    segment: PriceSeries,
    returns: ReturnSeries,
    config: EnvConfig,
    state: EnvState,
}

impl TradingEnv {
    pub fn new(segment: &PriceSeries, config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let needed = config.min_segment_len();
        if segment.len() < needed {
            return Err(Error::SeriesTooShort {
                needed,
                got: segment.len(),
            });
        }
        let returns = pct_change(segment)?;
        let state = EnvState {
            t: config.window,
            cash: config.initial_cash,
            terminal: false,
        };
        Ok(Self {
            segment: segment.clone(),
            returns,
            config,
            state,
        })
    }

    pub fn reset(&mut self) -> (EnvState, WindowState) {
        self.state = EnvState {
            t: self.config.window,
            cash: self.config.initial_cash,
            terminal: false,
        };
        (self.state, self.observation_at(self.state.t))
    }

    /// Changes into closes `t - w + 1 ..= t`.
    fn observation_at(&self, t: usize) -> WindowState {
        window_at(&self.returns, t - 1, self.config.window).expect("t >= window by construction")
    }

    pub fn observation(&self) -> WindowState {
        self.observation_at(self.state.t)
    }

    pub fn state(&self) -> EnvState {
        self.state
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn segment(&self) -> &PriceSeries {
        &self.segment
    }

    /// Steps in a full episode without bankruptcy.
    pub fn episode_len(&self) -> usize {
        self.segment.len() - 1 - self.config.window
    }

    /// True when the next step is the last one of the segment.
    pub fn is_last_step(&self) -> bool {
        self.state.t + 2 == self.segment.len()
    }

    pub fn step(&mut self, action: f64) -> Result<StepOutcome> {
        self.step_with_fee(action, true)
    }

    pub fn step_with_fee(&mut self, action: f64, charge_fee: bool) -> Result<StepOutcome> {
        if self.state.terminal {
            return Err(Error::Terminal);
        }
        let t = self.state.t;
        let cash = step_cash(
            self.state.cash,
            action,
            self.segment.close(t),
            self.segment.close(t + 1),
            self.config.transaction_cost,
            charge_fee,
        )?;
        let next_t = t + 1;
        self.state = EnvState {
            t: next_t,
            cash: cash.cash,
            terminal: cash.bankrupt || next_t + 1 == self.segment.len(),
        };
        Ok(StepOutcome {
            next_state: self.state,
            reward: cash.reward,
            observation: self.observation_at(next_t),
            held_shares: cash.held_shares,
            committed_cash: cash.committed_cash,
            fee: cash.fee,
        })
    }
}

/// `R_T = log(c_T / c_0)`.
pub fn episode_return(cash_curve: &[f64]) -> Result<f64> {
    let (first, last) = match (cash_curve.first(), cash_curve.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::EmptyCurve),
    };
    if let Some(&bad) = cash_curve.iter().find(|&&c| !(c > 0.0)) {
        return Err(Error::NonPositiveCash(bad));
    }
    Ok((last / first).ln())
}

/// When fees are charged during an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeePolicy {
    #[default]
    EveryStep,
    /// Only on the first and last step: a single position held throughout.
    OpenAndClose,
}

/// What a policy sees before choosing an action.
pub struct StepContext<'a> {
    /// Index of the current close within the segment.
    pub t: usize,
    pub observation: &'a WindowState,
    pub prices: &'a PriceSeries,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    /// Date of each cash point; the first entry is the starting cash.
    pub dates: Vec<NaiveDate>,
    pub cash: Vec<f64>,
    /// Decision date of each action.
    pub action_dates: Vec<NaiveDate>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
}

/// Runs one full episode from reset, asking `policy` for each action.
pub fn run_episode<F>(env: &mut TradingEnv, fees: FeePolicy, mut policy: F) -> Result<EpisodeLog>
where
    F: FnMut(&StepContext<'_>) -> Result<f64>,
{
    let (mut state, mut obs) = env.reset();
    let mut log = EpisodeLog {
        dates: vec![env.segment.date(state.t)],
        cash: vec![state.cash],
        ..Default::default()
    };
    let mut first = true;
    while !state.terminal {
        let action = policy(&StepContext {
            t: state.t,
            observation: &obs,
            prices: &env.segment,
        })?;
        let charge = match fees {
            FeePolicy::EveryStep => true,
            FeePolicy::OpenAndClose => first || env.is_last_step(),
        };
        let date = env.segment.date(state.t);
        let out = env.step_with_fee(action, charge)?;
        first = false;
        log.action_dates.push(date);
        log.actions.push(action);
        log.rewards.push(out.reward);
        log.dates.push(env.segment.date(out.next_state.t));
        log.cash.push(out.next_state.cash);
        state = out.next_state;
        obs = out.observation;
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn half_long_example() {
        let s = step_cash(100_000.0, 0.5, 100.0, 110.0, 0.0, true).unwrap();
        assert!(close(s.committed_cash, 50_000.0));
        assert!(close(s.held_shares, 500.0));
        assert!(close(s.cash, 105_000.0));
        assert!(close(s.reward, 1.05f64.ln()));
        assert!(!s.bankrupt);
    }

    #[test]
    fn hold_example() {
        let s = step_cash(100_000.0, 0.0, 100.0, 50.0, 1.0, true).unwrap();
        assert_eq!(s.cash, 100_000.0);
        assert_eq!(s.reward, 0.0);
    }

    #[test]
    fn full_short_with_fee() {
        let s = step_cash(100_000.0, -1.0, 100.0, 90.0, 0.1, true).unwrap();
        assert!(close(s.committed_cash, 100_000.0));
        assert!(close(s.held_shares, 1000.0));
        assert!(close(s.fee, 100.0));
        assert!(close(s.cash, 109_900.0));
    }

    #[test]
    fn short_wipeout_floors_cash() {
        let s = step_cash(100_000.0, -1.0, 100.0, 210.0, 0.0, true).unwrap();
        assert!(s.bankrupt);
        assert_eq!(s.cash, CASH_FLOOR);
        assert!(close(s.reward, (1.0f64 / 100_000.0).ln()));
    }

    #[test]
    fn step_errors() {
        assert!(matches!(
            step_cash(1.0, 1.5, 1.0, 1.0, 0.0, true),
            Err(Error::ActionOutOfRange(_))
        ));
        assert!(matches!(
            step_cash(1.0, 0.5, 0.0, 1.0, 0.0, true),
            Err(Error::NonPositivePrice(_))
        ));
    }

    fn segment(closes: &[f64]) -> PriceSeries {
        PriceSeries::from_closes(NaiveDate::from_ymd_opt(2021, 3, 1).unwrap(), closes).unwrap()
    }

    #[test]
    fn reset_and_boundary_lengths() {
        let config = EnvConfig {
            window: 3,
            ..Default::default()
        };
        let mut env = TradingEnv::new(&segment(&[1.0, 2.0, 3.0, 4.0, 5.0]), config).unwrap();
        let (state, obs) = env.reset();
        assert_eq!(state.cash, 100_000.0);
        assert!(!state.terminal);
        assert_eq!(obs.len(), 3);
        assert_eq!(env.episode_len(), 1);
        let out = env.step(1.0).unwrap();
        assert!(out.next_state.terminal);
        assert!(matches!(env.step(1.0), Err(Error::Terminal)));

        assert!(TradingEnv::new(&segment(&[1.0, 2.0, 3.0, 4.0]), config).is_err());
        assert!(TradingEnv::new(&segment(&[1.0, 2.0, 3.0]), config).is_err());
    }

    #[test]
    fn episode_return_examples() {
        assert!(close(
            episode_return(&[100_000.0, 105_000.0, 103_950.0]).unwrap(),
            1.0395f64.ln()
        ));
        assert_eq!(episode_return(&[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(episode_return(&[100_000.0]).unwrap(), 0.0);
        assert!(matches!(episode_return(&[]), Err(Error::EmptyCurve)));
        assert!(matches!(episode_return(&[1.0, 0.0]), Err(Error::NonPositiveCash(_))));
    }

    #[test]
    fn open_and_close_fees() {
        let config = EnvConfig {
            window: 1,
            transaction_cost: 1.0,
            ..Default::default()
        };
        let mut env = TradingEnv::new(&segment(&[10.0, 10.0, 10.0, 10.0, 10.0, 10.0]), config).unwrap();
        let log = run_episode(&mut env, FeePolicy::OpenAndClose, |_| Ok(1.0)).unwrap();
        // 4 steps at flat prices; only the first and last pay 1%.
        assert_eq!(log.actions.len(), 4);
        let expected = 100_000.0 * 0.99 * 0.99;
        assert!(close(*log.cash.last().unwrap(), expected));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn hold_is_neutral(c in 1.0f64..1e7, p in 0.1f64..1e4, q in 0.1f64..1e4, tc in 0.0f64..5.0) {
                let s = step_cash(c, 0.0, p, q, tc, true).unwrap();
                prop_assert_eq!(s.cash, c);
            }

            #[test]
            fn long_short_symmetry(c in 1.0f64..1e7, a in 0.0f64..1.0, p in 1.0f64..1e3, q_ratio in 0.5f64..1.5) {
                let q = p * q_ratio;
                let long = step_cash(c, a, p, q, 0.0, true).unwrap();
                let short = step_cash(c, -a, p, q, 0.0, true).unwrap();
                prop_assume!(!long.bankrupt && !short.bankrupt);
                prop_assert!(((long.cash - c) + (short.cash - c)).abs() <= 1e-9 * c);
            }

            #[test]
            fn fee_is_monotone(c in 1.0f64..1e7, a in -1.0f64..1.0, p in 1.0f64..1e3, q in 1.0f64..1e3,
                               tc1 in 0.0f64..2.0, tc2 in 0.0f64..2.0) {
                let (lo, hi) = if tc1 <= tc2 { (tc1, tc2) } else { (tc2, tc1) };
                let a1 = step_cash(c, a, p, q, lo, true).unwrap();
                let a2 = step_cash(c, a, p, q, hi, true).unwrap();
                prop_assert!(a2.cash <= a1.cash);
            }

            #[test]
            fn scale_equivariance(k in 0.01f64..100.0, actions in prop::collection::vec(-1.0f64..1.0, 6),
                                  closes in prop::collection::vec(80.0f64..120.0, 8)) {
                let seg = segment(&closes);
                let base = EnvConfig { window: 1, ..Default::default() };
                let scaled = EnvConfig { initial_cash: base.initial_cash * k, ..base };
                let mut e1 = TradingEnv::new(&seg, base).unwrap();
                let mut e2 = TradingEnv::new(&seg, scaled).unwrap();
                let mut i = 0;
                let l1 = run_episode(&mut e1, FeePolicy::EveryStep, |_| { i += 1; Ok(actions[(i - 1) % 6]) }).unwrap();
                let mut j = 0;
                let l2 = run_episode(&mut e2, FeePolicy::EveryStep, |_| { j += 1; Ok(actions[(j - 1) % 6]) }).unwrap();
                for (a, b) in l1.cash.iter().zip(&l2.cash) {
                    prop_assert!((a * k - b).abs() <= 1e-9 * b.abs());
                }
                for (a, b) in l1.rewards.iter().zip(&l2.rewards) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }
}
