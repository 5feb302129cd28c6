//! Performance metrics and the paired one-sided t-test.

use chrono::NaiveDate;

use crate::env::EpisodeLog;
use crate::error::{Error, Result};

/// `100 * (final - initial) / initial`.
pub fn return_pct(initial: f64, final_cash: f64) -> Result<f64> {
    if !(initial > 0.0) {
        return Err(Error::NonPositiveInitial(initial));
    }
    Ok(100.0 * (final_cash - initial) / initial)
}

/// Simple per-step returns `(c_t - c_{t-1}) / c_{t-1}` of an equity curve.
pub fn daily_returns(equity: &[f64]) -> Vec<f64> {
    equity.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance (n - 1 denominator).
fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

/// Annualized Sharpe ratio `sqrt(days) * mean / std` with sample std.
pub fn sharpe(returns: &[f64], annualization_days: u32) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: returns.len(),
        });
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("returns"));
    }
    let std = sample_variance(returns).sqrt();
    if returns.iter().all(|&r| r == returns[0]) || std == 0.0 {
        return Err(Error::ZeroStd);
    }
    Ok(f64::from(annualization_days).sqrt() * mean(returns) / std)
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// `P(T > t0)` for a Student-t variable with `df` degrees of freedom.
pub fn t_upper_tail(t0: f64, df: u64) -> Result<f64> {
    if df < 1 {
        return Err(Error::InvalidDf(df));
    }
    if t0.is_nan() {
        return Err(Error::NonFinite("t statistic"));
    }
    let v = df as f64;
    // I_x(v/2, 1/2) with x = v / (v + t^2) is P(|T| > |t|).
    let two_sided = if t0.is_infinite() {
        0.0
    } else {
        regularized_incomplete_beta(0.5 * v, 0.5, v / (v + t0 * t0))
    };
    let tail = 0.5 * two_sided;
    Ok(if t0 >= 0.0 { tail } else { 1.0 - tail })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t0: f64,
    pub p_value: f64,
    pub df: u64,
}

impl TTestResult {
    /// `H0: mu_x >= mu_y` is rejected when the p-value falls below `alpha_conf`.
    pub fn rejects_null(&self, alpha_conf: f64) -> bool {
        self.p_value < alpha_conf
    }
}

/// Paired one-sided t-test of `H0: mu_x >= mu_y` against `H1: mu_x < mu_y`
/// on `D_i = x_i - y_i`, `T0 = mean(D) / sqrt(S_D^2 / n)`, `df = n - 1`.
///
/// The p-value is the probability under `H0` of a statistic at least as far
/// toward `H1` as `T0`, i.e. `P(T <= T0)`. Identical samples give `T0 = 0`
/// and `p = 0.5`.
pub fn paired_ttest_one_sided(x: &[f64], y: &[f64]) -> Result<TTestResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired samples"));
    }
    let df = (n - 1) as u64;
    let d_bar = mean(&diffs);
    let var = sample_variance(&diffs);
    let constant = diffs.iter().all(|&d| d == diffs[0]);
    if constant || var == 0.0 {
        if diffs[0] == 0.0 {
            return Ok(TTestResult {
                t0: 0.0,
                p_value: 0.5,
                df,
            });
        }
        return Err(Error::ZeroVariance);
    }
    let t0 = d_bar / (var / n as f64).sqrt();
    let p_value = t_upper_tail(-t0, df)?;
    Ok(TTestResult { t0, p_value, df })
}

/// One evaluated run of a strategy over a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub strategy: String,
    pub seed: u64,
    pub dates: Vec<NaiveDate>,
    pub equity: Vec<f64>,
    pub action_dates: Vec<NaiveDate>,
    pub actions: Vec<f64>,
    pub daily_returns: Vec<f64>,
    pub return_pct: f64,
    /// NaN when undefined (fewer than two returns, or constant nonzero
    /// returns); zero for a flat equity curve.
    pub sharpe: f64,
}

impl RunReport {
    pub fn from_episode(
        strategy: impl Into<String>,
        seed: u64,
        log: EpisodeLog,
        annualization_days: u32,
    ) -> Result<Self> {
        let first = *log.cash.first().ok_or(Error::EmptyCurve)?;
        let last = *log.cash.last().expect("non-empty");
        let daily = daily_returns(&log.cash);
        Ok(Self {
            strategy: strategy.into(),
            seed,
            return_pct: return_pct(first, last)?,
            sharpe: sharpe_or_flat(&daily, annualization_days),
            dates: log.dates,
            equity: log.cash,
            action_dates: log.action_dates,
            actions: log.actions,
            daily_returns: daily,
        })
    }
}

/// Sharpe ratio for reporting: zero when every return is exactly zero,
/// NaN when otherwise undefined.
pub fn sharpe_or_flat(returns: &[f64], annualization_days: u32) -> f64 {
    match sharpe(returns, annualization_days) {
        Ok(s) => s,
        Err(_) if !returns.is_empty() && returns.iter().all(|&r| r == 0.0) => 0.0,
        Err(_) => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn return_pct_examples() {
        assert!((return_pct(100_000.0, 109_300.0).unwrap() - 9.3).abs() < 1e-9);
        assert_eq!(return_pct(5.0, 5.0).unwrap(), 0.0);
        assert!((return_pct(100_000.0, 64_700.0).unwrap() + 35.3).abs() < 1e-9);
        assert!(return_pct(0.0, 1.0).is_err());
    }

    #[test]
    fn sharpe_examples() {
        let r = [0.01, -0.005, 0.02];
        let s = sharpe(&r, 252).unwrap();
        assert!((s - 10.513).abs() < 1e-3, "{s}");
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        assert_eq!(sharpe(&neg, 252).unwrap(), -s);
        assert!(matches!(sharpe(&[0.01, 0.01, 0.01], 252), Err(Error::ZeroStd)));
        assert!(matches!(sharpe(&[0.01], 252), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn sharpe_or_flat_cases() {
        assert_eq!(sharpe_or_flat(&[0.0, 0.0, 0.0], 252), 0.0);
        assert!(sharpe_or_flat(&[0.01, 0.01], 252).is_nan());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn t_tail_closed_forms() {
        // df = 1 is Cauchy: P(T > t) = 1/2 - atan(t)/pi.
        for t in [-3.0, -0.5, 0.7, 4.0] {
            let expect = 0.5 - f64::atan(t) / std::f64::consts::PI;
            assert!((t_upper_tail(t, 1).unwrap() - expect).abs() < 1e-13);
        }
        // df = 2: P(T > t) = 1/2 - t / (2 sqrt(t^2 + 2)).
        for t in [-2.0, 0.3, 3.4641] {
            let expect = 0.5 - t / (2.0 * (t * t + 2.0f64).sqrt());
            assert!((t_upper_tail(t, 2).unwrap() - expect).abs() < 1e-13);
        }
        assert_eq!(t_upper_tail(0.0, 17).unwrap(), 0.5);
        assert_eq!(t_upper_tail(f64::INFINITY, 5).unwrap(), 0.0);
        assert!(t_upper_tail(1e9, 5).unwrap() < 1e-40);
        assert!(matches!(t_upper_tail(1.0, 0), Err(Error::InvalidDf(0))));
    }

    #[test]
    fn ttest_examples() {
        let r = paired_ttest_one_sided(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((r.t0 - 3.4641).abs() < 1e-4);
        assert_eq!(r.df, 2);
        // X above Y: evidence is against H1 (mu_x < mu_y).
        assert!((r.p_value - (1.0 - 0.0371)).abs() < 1e-4, "{}", r.p_value);
        assert!((t_upper_tail(r.t0, 2).unwrap() - 0.0371).abs() < 1e-4);

        let same = paired_ttest_one_sided(&[0.3, 0.1, 0.7], &[0.3, 0.1, 0.7]).unwrap();
        assert_eq!((same.t0, same.p_value), (0.0, 0.5));
        assert!(!same.rejects_null(0.01));

        assert!(matches!(
            paired_ttest_one_sided(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch(2, 1))
        ));
        assert!(matches!(
            paired_ttest_one_sided(&[1.0], &[1.0]),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(matches!(
            paired_ttest_one_sided(&[1.0, 2.0], &[0.0, 1.0]),
            Err(Error::ZeroVariance)
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tail_antisymmetry(t in -50.0f64..50.0, df in 1u64..200) {
                let a = t_upper_tail(t, df).unwrap();
                let b = t_upper_tail(-t, df).unwrap();
                prop_assert!((a - (1.0 - b)).abs() <= 1e-10);
                prop_assert!((0.0..=1.0).contains(&a));
            }

            #[test]
            fn swapping_negates_t0(x in prop::collection::vec(-10.0f64..10.0, 3..30), shift in -1.0f64..1.0) {
                let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * 0.5 + shift + (i as f64).sin()).collect();
                let a = paired_ttest_one_sided(&x, &y).unwrap();
                let b = paired_ttest_one_sided(&y, &x).unwrap();
                prop_assert_eq!(a.t0, -b.t0);
            }

            #[test]
            fn sharpe_scale_free(r in prop::collection::vec(-0.1f64..0.1, 3..40), k in 0.01f64..100.0) {
                prop_assume!(r.iter().any(|&v| v != r[0]));
                let scaled: Vec<f64> = r.iter().map(|v| v * k).collect();
                let a = sharpe(&r, 252).unwrap();
                let b = sharpe(&scaled, 252).unwrap();
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }

            #[test]
            fn return_pct_compounds(c0 in 1.0f64..1e6, g1 in 0.2f64..3.0, g2 in 0.2f64..3.0) {
                let c1 = c0 * g1;
                let c2 = c1 * g2;
                let r1 = return_pct(c0, c1).unwrap() / 100.0;
                let r2 = return_pct(c1, c2).unwrap() / 100.0;
                let whole = return_pct(c0, c2).unwrap() / 100.0;
                let composed = (1.0 + r1) * (1.0 + r2) - 1.0;
                prop_assert!((composed - whole).abs() <= 1e-9 * whole.abs().max(1e-3));
            }
        }
    }
}
