//! Reference implementations used as test oracles. Each one follows a
//! different code path from the library routine it checks.
#![allow(dead_code)]

use chrono::NaiveDate;
use tradelab::data::PriceSeries;

/// Literal trade-by-trade simulation of one open-and-close round trip.
/// Returns `(cash, bankrupt)`.
pub fn simulate_trade(cash: f64, action: f64, p_open: f64, p_close: f64, tc_pct: f64) -> (f64, bool) {
    if action == 0.0 {
        return (cash, false);
    }
    let stake = action.abs() * cash;
    let idle = cash - stake;
    let shares = stake / p_open;
    let fee = shares * p_open * tc_pct / 100.0;
    let position = if action > 0.0 {
        // Buy at the open, sell at the close.
        shares * p_close - fee
    } else {
        // Post the stake as collateral, sell borrowed shares, buy them back.
        let proceeds = shares * p_open;
        let buyback = shares * p_close;
        stake + proceeds - buyback - fee
    };
    let wiped = position < 0.0;
    let after = idle + if wiped { 0.0 } else { position };
    if wiped || after < 1.0 {
        (after.max(1.0), true)
    } else {
        (after, false)
    }
}

/// Replays `actions` over `closes[start..]` with the literal simulator and
/// returns the cash curve, stopping at bankruptcy.
pub fn simulate_path(c0: f64, actions: &[f64], closes: &[f64], start: usize, tc_pct: f64) -> Vec<f64> {
    let mut curve = vec![c0];
    let mut cash = c0;
    for (k, &a) in actions.iter().enumerate() {
        let (next, bankrupt) = simulate_trade(cash, a, closes[start + k], closes[start + k + 1], tc_pct);
        cash = next;
        curve.push(cash);
        if bankrupt {
            break;
        }
    }
    curve
}

pub fn series(closes: &[f64]) -> PriceSeries {
    PriceSeries::from_closes(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), closes).unwrap()
}

/// Closes whose daily changes alternate in sign with magnitude
/// `1 + 0.5 sin(t / 7)` percent.
pub fn alternating_closes(n: usize) -> Vec<f64> {
    let mut p = 100.0;
    let mut out = vec![p];
    for t in 1..n {
        let mag = (1.0 + 0.5 * (t as f64 / 7.0).sin()) / 100.0;
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        p *= 1.0 + sign * mag;
        out.push(p);
    }
    out
}

/// Deterministic finite MDP: `next[s][a]`, `reward[s][a]`, `terminal[s][a]`.
pub struct FiniteMdp {
    pub next: Vec<Vec<usize>>,
    pub reward: Vec<Vec<f64>>,
    pub terminal: Vec<Vec<bool>>,
}

impl FiniteMdp {
    pub fn n_states(&self) -> usize {
        self.next.len()
    }

    pub fn n_actions(&self) -> usize {
        self.next[0].len()
    }

    /// Optimal action values by Bellman optimality iteration to a fixed point.
    pub fn value_iteration(&self, gamma: f64) -> Vec<Vec<f64>> {
        let (ns, na) = (self.n_states(), self.n_actions());
        let mut q = vec![vec![0.0; na]; ns];
        loop {
            let v: Vec<f64> = q
                .iter()
                .map(|row| row.iter().cloned().fold(f64::MIN, f64::max))
                .collect();
            let mut change: f64 = 0.0;
            for s in 0..ns {
                for a in 0..na {
                    let boot = if self.terminal[s][a] { 0.0 } else { v[self.next[s][a]] };
                    let new = self.reward[s][a] + gamma * boot;
                    change = change.max((new - q[s][a]).abs());
                    q[s][a] = new;
                }
            }
            if change < 1e-15 {
                return q;
            }
        }
    }
}

/// Five-state ring: action 1 moves right, action 0 moves left. Moving right
/// out of the last state pays 1 and wraps to the start; moving left out of
/// state 2 pays 0.3 and ends the episode.
pub fn ring_mdp() -> FiniteMdp {
    let n = 5;
    let mut next = vec![vec![0; 2]; n];
    let mut reward = vec![vec![0.0; 2]; n];
    let mut terminal = vec![vec![false; 2]; n];
    for s in 0..n {
        next[s][0] = s.saturating_sub(1);
        next[s][1] = (s + 1) % n;
    }
    reward[4][1] = 1.0;
    reward[2][0] = 0.3;
    terminal[2][0] = true;
    reward[0][0] = -0.1;
    FiniteMdp { next, reward, terminal }
}

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `P(T > t)` for Student's t with `df` degrees of freedom by quadrature.
/// With `x = sqrt(df) tan(theta)` the density becomes proportional to
/// `cos(theta)^(df - 1)` on `(-pi/2, pi/2)`, so no gamma function is needed.
pub fn t_tail_quadrature(t: f64, df: u64) -> f64 {
    let k = df as f64 - 1.0;
    let g = |th: f64| th.cos().powf(k);
    let half = std::f64::consts::FRAC_PI_2;
    let total = simpson(&g, 0.0, half, 1e-15);
    let theta = (t.abs() / (df as f64).sqrt()).atan();
    let beyond = simpson(&g, theta, half, 1e-15) / (2.0 * total);
    if t >= 0.0 {
        beyond
    } else {
        1.0 - beyond
    }
}

/// Central finite difference of `f` with respect to each coordinate of `x`.
pub fn finite_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut point = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = point[i];
            point[i] = orig + h;
            let up = f(&point);
            point[i] = orig - h;
            let down = f(&point);
            point[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| <= max(rel * max(|a|, |b|), abs_floor)`.
pub fn close_rel(a: f64, b: f64, rel: f64, abs_floor: f64) -> bool {
    (a - b).abs() <= (rel * a.abs().max(b.abs())).max(abs_floor)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
