use crate::error::{Error, Result};

/// Lookup-table Q-learning:
/// `Q(s, a) += alpha * (r + gamma * max_a' Q(s', a') - Q(s, a))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    n_states: usize,
    n_actions: usize,
    alpha: f64,
    gamma: f64,
    table: Vec<f64>,
}

impl TabularQ {
    pub fn new(n_states: usize, n_actions: usize, alpha: f64, gamma: f64) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Config("empty state or action space".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) || !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!(
                "need 0 < alpha <= 1 and 0 <= gamma < 1 (got {alpha}, {gamma})"
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            alpha,
            gamma,
            table: vec![0.0; n_states * n_actions],
        })
    }

    pub fn q(&self, state: usize, action: usize) -> f64 {
        self.table[state * self.n_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.table[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Applies one temporal-difference update and returns the TD error.
    pub fn update(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
        terminal: bool,
    ) -> Result<f64> {
        if state >= self.n_states || next_state >= self.n_states || action >= self.n_actions {
            return Err(Error::ShapeMismatch {
                expected: self.n_states * self.n_actions,
                got: state * self.n_actions + action,
            });
        }
        let target = if terminal {
            reward
        } else {
            reward + self.gamma * self.row(next_state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let slot = &mut self.table[state * self.n_actions + action];
        let td = target - *slot;
        *slot += self.alpha * td;
        Ok(td)
    }
}
