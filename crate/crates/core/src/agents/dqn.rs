//! Discrete deep Q-network with experience replay, an ε-greedy behaviour
//! policy and a hard-synced target network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::replay::{ReplayBuffer, Transition};
use super::schedule::NoiseSchedule;
use super::{config_hash, Checkpoint, TrainLog, ValidationTracker};
use crate::data::PriceSeries;
use crate::env::{run_episode, EnvConfig, FeePolicy, TradingEnv};
use crate::error::{Error, Result};
use crate::neuralnet::{clip_gradients, Activation, AdamState, Mlp};

/// Discrete positions available to the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSet {
    /// Full short or full long.
    Sign,
    /// Full short, flat or full long.
    D3,
}

impl ActionSet {
    pub fn values(self) -> &'static [f64] {
        match self {
            ActionSet::Sign => &[-1.0, 1.0],
            ActionSet::D3 => &[-1.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub gamma: f64,
    pub epsilon: NoiseSchedule,
    /// Updates between hard copies into the target network (M).
    pub target_sync: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub action_set: ActionSet,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    /// Dropout rate on hidden layers during updates; 0 disables.
    pub dropout: f64,
    pub grad_clip: f64,
    pub warmup_episodes: usize,
    pub episodes: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            epsilon: NoiseSchedule::new(1.0, 0.05, 50.0),
            target_sync: 100,
            batch_size: 64,
            lr: 1e-3,
            action_set: ActionSet::Sign,
            buffer_capacity: 100_000,
            hidden: vec![64, 32],
            dropout: 0.0,
            grad_clip: 1.0,
            warmup_episodes: 10,
            episodes: 50,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if self.epsilon.initial > 1.0 {
            return bad("epsilon must lie in [0, 1]".into());
        }
        self.epsilon.validate("epsilon")?;
        if self.target_sync == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("target_sync, batch_size and buffer_capacity must be positive".into());
        }
        if !(self.lr > 0.0 && self.grad_clip > 0.0) {
            return bad("lr and grad_clip must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        Ok(())
    }
}

/// `r` at the terminal step, otherwise `r + gamma * max_a' Q_target(s', a')`.
pub fn dqn_target(reward: f64, terminal: bool, gamma: f64, target_q_next: &[f64]) -> Result<f64> {
    if target_q_next.is_empty() {
        return Err(Error::EmptyQValues);
    }
    if terminal {
        return Ok(reward);
    }
    let max = target_q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(reward + gamma * max)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Uniform random index with probability `epsilon`, greedy otherwise.
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    config: DqnConfig,
    pub q: Mlp,
    pub q_target: Mlp,
    opt: AdamState,
    buffer: ReplayBuffer<usize>,
    rng: ChaCha8Rng,
    updates: u64,
    episodes_done: u64,
}

impl DqnAgent {
    /// Agent over `window`-dimensional states with a ReLU network whose
    /// output has one unit per action in the configured set.
    pub fn new(window: usize, config: DqnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims: Vec<usize> = std::iter::once(window)
            .chain(config.hidden.iter().copied())
            .chain(std::iter::once(config.action_set.values().len()))
            .collect();
        let q = Mlp::new(&dims, Activation::Relu, Activation::Identity, &mut rng)?;
        Self::assemble(q, config, rng)
    }

    /// Agent around a caller-built Q-network (one output per action index).
    pub fn with_network(q: Mlp, config: DqnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Self::assemble(q, config, ChaCha8Rng::seed_from_u64(seed))
    }

    fn assemble(q: Mlp, config: DqnConfig, mut rng: ChaCha8Rng) -> Result<Self> {
        let buffer = ReplayBuffer::new(config.buffer_capacity, rng.random())?;
        Ok(Self {
            opt: AdamState::new(q.num_params(), config.lr),
            q_target: q.clone(),
            q,
            buffer,
            rng,
            updates: 0,
            episodes_done: 0,
            config,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn buffer_mut(&mut self) -> &mut ReplayBuffer<usize> {
        &mut self.buffer
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.q.forward(state)
    }

    /// Greedy action index.
    pub fn greedy(&self, state: &[f64]) -> Result<usize> {
        Ok(argmax(&self.q.forward(state)?))
    }

    /// Greedy position in `[-1, 1]`.
    pub fn act(&self, state: &[f64]) -> Result<f64> {
        Ok(self.config.action_set.values()[self.greedy(state)?])
    }

    pub fn select_action(&mut self, state: &[f64], epsilon: f64) -> Result<usize> {
        let q = self.q.forward(state)?;
        Ok(epsilon_greedy(&q, epsilon, &mut self.rng))
    }

    /// One gradient step on the mean squared error of the taken-action
    /// Q-values; the target network is re-synced every `target_sync` calls.
    pub fn update(&mut self, batch: &[Transition<usize>]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = batch.len() as f64;
        let outputs = self.q.output_dim();
        let mut grads = vec![0.0; self.q.num_params()];
        let mut loss = 0.0;
        let mut upstream = vec![0.0; outputs];
        for tr in batch {
            if tr.action >= outputs {
                return Err(Error::ShapeMismatch {
                    expected: outputs,
                    got: tr.action + 1,
                });
            }
            let q_next = self.q_target.forward(&tr.next_state)?;
            let y = dqn_target(tr.reward, tr.terminal, self.config.gamma, &q_next)?;
            let trace = self
                .q
                .forward_trace_dropout(&tr.state, self.config.dropout, &mut self.rng)?;
            let err = trace.output()[tr.action] - y;
            loss += err * err / n;
            upstream.iter_mut().for_each(|u| *u = 0.0);
            upstream[tr.action] = 2.0 * err / n;
            self.q.backward_into(&trace, &upstream, &mut grads)?;
        }
        clip_gradients(&mut grads, self.config.grad_clip);
        self.opt.step(self.q.params_mut(), &grads)?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_sync) {
            self.q_target.copy_from(&self.q)?;
        }
        Ok(loss)
    }

    /// Samples a batch from the replay buffer and updates, if it holds
    /// enough transitions.
    pub fn update_from_buffer(&mut self) -> Result<Option<f64>> {
        if self.buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let batch: Vec<Transition<usize>> = self
            .buffer
            .sample(self.config.batch_size)?
            .into_iter()
            .cloned()
            .collect();
        self.update(&batch).map(Some)
    }

    /// Same protocol as the TD3 trainer: warmup episodes with uniform random
    /// actions, then ε-greedy episodes with one update per step, keeping the
    /// network with the best validation Sharpe ratio.
    pub fn train(
        &mut self,
        segment: &PriceSeries,
        validation: Option<&PriceSeries>,
        env_config: &EnvConfig,
        episodes: usize,
    ) -> Result<TrainLog> {
        let mut env = TradingEnv::new(segment, *env_config)?;
        let mut val_env = validation.map(|v| TradingEnv::new(v, *env_config)).transpose()?;
        let mut log = TrainLog::default();
        let mut tracker = ValidationTracker::default();

        for _ in 0..self.config.warmup_episodes {
            let reward = self.run_training_episode(&mut env, None)?;
            log.episode_rewards.push(reward);
        }
        for episode in 0..episodes as u64 {
            let reward = self.run_training_episode(&mut env, Some(episode))?;
            log.episode_rewards.push(reward);
            self.episodes_done += 1;
            if let Some(val_env) = val_env.as_mut() {
                let days = env_config.annualization_days;
                let vlog = run_episode(val_env, FeePolicy::EveryStep, |ctx| self.act(ctx.observation))?;
                let sharpe = crate::stats::sharpe_or_flat(&crate::stats::daily_returns(&vlog.cash), days);
                log.validation_sharpe.push(sharpe);
                tracker.offer(episode as usize, sharpe, || self.q.clone());
            }
        }
        if let Some((episode, q)) = tracker.into_best() {
            self.q = q;
            log.best_episode = Some(episode);
        }
        log.updates = self.updates;
        Ok(log)
    }

    fn run_training_episode(&mut self, env: &mut TradingEnv, episode: Option<u64>) -> Result<f64> {
        let actions = self.config.action_set.values();
        let (mut state, mut obs) = env.reset();
        let mut total = 0.0;
        while !state.terminal {
            let index = match episode {
                None => self.rng.random_range(0..actions.len()),
                Some(ep) => self.select_action(&obs, self.config.epsilon.value(ep))?,
            };
            let out = env.step(actions[index])?;
            total += out.reward;
            self.buffer.push(Transition::new(
                &obs,
                index,
                out.reward,
                &out.observation,
                out.next_state.terminal,
            ));
            if episode.is_some() {
                self.update_from_buffer()?;
            }
            state = out.next_state;
            obs = out.observation;
        }
        Ok(total)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: "dqn".into(),
            config_hash: config_hash(&self.config),
            episodes: self.episodes_done,
            networks: vec![("q".into(), self.q.clone()), ("q_target".into(), self.q_target.clone())],
        }
    }

    pub fn from_checkpoint(checkpoint: &Checkpoint, config: DqnConfig, seed: u64) -> Result<Self> {
        checkpoint.expect("dqn", &config_hash(&config))?;
        let q = checkpoint.network("q")?.clone();
        let q_target = checkpoint.network("q_target")?.clone();
        let mut agent = Self::with_network(q, config, seed)?;
        agent.q_target = q_target;
        agent.episodes_done = checkpoint.episodes;
        Ok(agent)
    }
}
