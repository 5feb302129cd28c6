//! Twin-delayed deep deterministic policy gradient.
//!
//! Two critics regress onto a shared target built from the smaller of the
//! two target-critic estimates at a smoothed target action. The actor and
//! all target networks move only every `policy_delay` critic updates; the
//! actor ascends `Q1(s, pi(s))` with a clipped gradient and the targets
//! follow by Polyak averaging.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::replay::{ReplayBuffer, Transition};
use super::schedule::NoiseSchedule;
use super::{config_hash, Checkpoint, TrainLog, ValidationTracker};
use crate::data::PriceSeries;
use crate::env::{run_episode, EnvConfig, FeePolicy, TradingEnv};
use crate::error::{Error, Result};
use crate::neuralnet::{clip_gradients, soft_update, Activation, AdamState, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u64,
    pub batch_size: usize,
    pub warmup_episodes: usize,
    pub episodes: usize,
    /// Exploration noise std (sigma).
    pub exploration: NoiseSchedule,
    /// Target-policy smoothing noise std.
    pub policy_noise: NoiseSchedule,
    /// Bound on the smoothing noise (K).
    pub noise_clip: NoiseSchedule,
    pub action_low: f64,
    pub action_high: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub grad_clip: f64,
    pub buffer_capacity: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            batch_size: 64,
            warmup_episodes: 10,
            episodes: 50,
            exploration: NoiseSchedule::new(0.5, 0.05, 50.0),
            policy_noise: NoiseSchedule::new(0.4, 0.1, 50.0),
            noise_clip: NoiseSchedule::new(0.5, 0.2, 50.0),
            action_low: -1.0,
            action_high: 1.0,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            grad_clip: 1.0,
            buffer_capacity: 100_000,
            actor_hidden: vec![64, 32],
            critic_hidden: vec![64, 32],
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau {} outside [0, 1]", self.tau));
        }
        if self.policy_delay == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("policy_delay, batch_size and buffer_capacity must be positive".into());
        }
        if !(self.action_low < self.action_high && self.action_low >= -1.0 && self.action_high <= 1.0) {
            return bad(format!(
                "action bounds must satisfy -1 <= low < high <= 1 (got {}, {})",
                self.action_low, self.action_high
            ));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.grad_clip > 0.0) {
            return bad("learning rates and grad_clip must be positive".into());
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        self.exploration.validate("exploration")?;
        self.policy_noise.validate("policy_noise")?;
        self.noise_clip.validate("noise_clip")?;
        Ok(())
    }
}

/// Gaussian exploration noise; exactly zero when `sigma` is zero.
pub fn exploration_noise<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    } else {
        0.0
    }
}

/// `clamp(pi(s) + N(0, sigma), -1, 1)`.
pub fn td3_select_action<R: Rng + ?Sized>(actor: &Mlp, state: &[f64], sigma: f64, rng: &mut R) -> Result<f64> {
    let mean = actor.forward(state)?[0];
    Ok((mean + exploration_noise(sigma, rng)).clamp(-1.0, 1.0))
}

/// Smoothed target action `clamp(pi'(s') + clamp(N(0, sigma), -K, K), low, high)`.
pub fn td3_target_action<R: Rng + ?Sized>(
    actor_target: &Mlp,
    next_state: &[f64],
    sigma: f64,
    noise_clip: f64,
    low: f64,
    high: f64,
    rng: &mut R,
) -> Result<f64> {
    let mean = actor_target.forward(next_state)?[0];
    let noise = exploration_noise(sigma, rng).clamp(-noise_clip, noise_clip);
    Ok((mean + noise).clamp(low, high))
}

/// `r` for terminal transitions, otherwise `r + gamma * min(q1, q2)`.
pub fn td3_critic_target(reward: f64, terminal: bool, gamma: f64, q1_next: f64, q2_next: f64) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * q1_next.min(q2_next)
    }
}

fn critic_input(state: &[f64], action: f64) -> Vec<f64> {
    let mut input = Vec::with_capacity(state.len() + 1);
    input.extend_from_slice(state);
    input.push(action);
    input
}

/// Gradient of `mean_i Q(s_i, pi(s_i))` with respect to the actor
/// parameters, chaining `dQ/da` through `dpi/dphi`. Also returns the mean.
pub fn td3_actor_gradient<'a, I>(actor: &Mlp, critic: &Mlp, states: I) -> Result<(Vec<f64>, f64)>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let states: Vec<&[f64]> = states.into_iter().collect();
    if states.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = states.len() as f64;
    let mut grads = vec![0.0; actor.num_params()];
    let mut objective = 0.0;
    for s in states {
        let actor_trace = actor.forward_trace(s)?;
        let a = actor_trace.output()[0];
        let critic_trace = critic.forward_trace(&critic_input(s, a))?;
        objective += critic_trace.output()[0];
        let d_input = critic.input_gradient(&critic_trace, &[1.0])?;
        let dq_da = d_input[s.len()];
        actor.backward_into(&actor_trace, &[dq_da / n], &mut grads)?;
    }
    Ok((grads, objective / n))
}

/// Per-call diagnostics from [`Td3Agent::update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Td3UpdateStats {
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    /// `Some(mean Q1(s, pi(s)))` on calls that moved the actor.
    pub actor_objective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Td3Agent {
    config: Td3Config,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    actor_opt: AdamState,
    critic1_opt: AdamState,
    critic2_opt: AdamState,
    buffer: ReplayBuffer<f64>,
    rng: ChaCha8Rng,
    iterations: u64,
    episodes_done: u64,
}

impl Td3Agent {
    pub fn new(window: usize, config: Td3Config, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor_dims: Vec<usize> = std::iter::once(window)
            .chain(config.actor_hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        let critic_dims: Vec<usize> = std::iter::once(window + 1)
            .chain(config.critic_hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        let actor = Mlp::new(&actor_dims, Activation::Relu, Activation::Tanh, &mut rng)?;
        let critic1 = Mlp::new(&critic_dims, Activation::Relu, Activation::Identity, &mut rng)?;
        let critic2 = Mlp::new(&critic_dims, Activation::Relu, Activation::Identity, &mut rng)?;
        let buffer = ReplayBuffer::new(config.buffer_capacity, rng.random())?;
        Ok(Self {
            actor_opt: AdamState::new(actor.num_params(), config.actor_lr),
            critic1_opt: AdamState::new(critic1.num_params(), config.critic_lr),
            critic2_opt: AdamState::new(critic2.num_params(), config.critic_lr),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            buffer,
            rng,
            iterations: 0,
            episodes_done: 0,
            config,
        })
    }

    pub fn config(&self) -> &Td3Config {
        &self.config
    }

    pub fn window(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn episodes_done(&self) -> u64 {
        self.episodes_done
    }

    pub fn buffer(&self) -> &ReplayBuffer<f64> {
        &self.buffer
    }

    /// Deterministic policy output `pi(s)`.
    pub fn act(&self, state: &[f64]) -> Result<f64> {
        Ok(self.actor.forward(state)?[0])
    }

    /// One TD3 iteration on `batch` with noise schedules evaluated at `episode`.
    pub fn update(&mut self, batch: &[Transition<f64>], episode: u64) -> Result<Td3UpdateStats> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = batch.len() as f64;
        let smoothing = self.config.policy_noise.value(episode);
        let clip = self.config.noise_clip.value(episode);

        let mut g1 = vec![0.0; self.critic1.num_params()];
        let mut g2 = vec![0.0; self.critic2.num_params()];
        let (mut loss1, mut loss2) = (0.0, 0.0);
        for tr in batch {
            let target_action = td3_target_action(
                &self.actor_target,
                &tr.next_state,
                smoothing,
                clip,
                self.config.action_low,
                self.config.action_high,
                &mut self.rng,
            )?;
            let next_input = critic_input(&tr.next_state, target_action);
            let q1_next = self.critic1_target.forward(&next_input)?[0];
            let q2_next = self.critic2_target.forward(&next_input)?[0];
            let y = td3_critic_target(tr.reward, tr.terminal, self.config.gamma, q1_next, q2_next);

            let input = critic_input(&tr.state, tr.action);
            let t1 = self.critic1.forward_trace(&input)?;
            let e1 = t1.output()[0] - y;
            self.critic1.backward_into(&t1, &[2.0 * e1 / n], &mut g1)?;
            let t2 = self.critic2.forward_trace(&input)?;
            let e2 = t2.output()[0] - y;
            self.critic2.backward_into(&t2, &[2.0 * e2 / n], &mut g2)?;
            loss1 += e1 * e1 / n;
            loss2 += e2 * e2 / n;
        }
        self.critic1_opt.step(self.critic1.params_mut(), &g1)?;
        self.critic2_opt.step(self.critic2.params_mut(), &g2)?;

        self.iterations += 1;
        let mut actor_objective = None;
        if self.iterations.is_multiple_of(self.config.policy_delay) {
            let (mut grad, objective) =
                td3_actor_gradient(&self.actor, &self.critic1, batch.iter().map(|t| t.state.as_slice()))?;
            clip_gradients(&mut grad, self.config.grad_clip);
            // Adam descends; negate for ascent on Q.
            for g in grad.iter_mut() {
                *g = -*g;
            }
            self.actor_opt.step(self.actor.params_mut(), &grad)?;
            soft_update(&mut self.actor_target, &self.actor, self.config.tau)?;
            soft_update(&mut self.critic1_target, &self.critic1, self.config.tau)?;
            soft_update(&mut self.critic2_target, &self.critic2, self.config.tau)?;
            actor_objective = Some(objective);
        }
        Ok(Td3UpdateStats {
            critic1_loss: loss1,
            critic2_loss: loss2,
            actor_objective,
        })
    }

    /// Warmup episodes with uniform random actions followed by `episodes`
    /// learning episodes, each one chronological pass over `segment` with one
    /// update per step once the buffer holds a batch. With a validation
    /// segment, the actor with the best validation Sharpe ratio is kept.
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
                let sharpe = self.validation_sharpe(val_env)?;
                log.validation_sharpe.push(sharpe);
                tracker.offer(episode as usize, sharpe, || self.actor.clone());
            }
        }
        if let Some((episode, actor)) = tracker.into_best() {
            self.actor = actor;
            log.best_episode = Some(episode);
        }
        log.updates = self.iterations;
        Ok(log)
    }

    /// `episode = None` runs a warmup pass with uniform random actions.
    fn run_training_episode(&mut self, env: &mut TradingEnv, episode: Option<u64>) -> Result<f64> {
        let (mut state, mut obs) = env.reset();
        let mut total = 0.0;
        while !state.terminal {
            let action = match episode {
                None => self.rng.random_range(-1.0..=1.0),
                Some(ep) => {
                    let sigma = self.config.exploration.value(ep);
                    td3_select_action(&self.actor, &obs, sigma, &mut self.rng)?
                }
            };
            let out = env.step(action)?;
            total += out.reward;
            self.buffer.push(Transition::new(
                &obs,
                action,
                out.reward,
                &out.observation,
                out.next_state.terminal,
            ));
            if let Some(ep) = episode {
                if self.buffer.len() >= self.config.batch_size {
                    let batch: Vec<Transition<f64>> = self
                        .buffer
                        .sample(self.config.batch_size)?
                        .into_iter()
                        .cloned()
                        .collect();
                    self.update(&batch, ep)?;
                }
            }
            state = out.next_state;
            obs = out.observation;
        }
        Ok(total)
    }

    fn validation_sharpe(&self, env: &mut TradingEnv) -> Result<f64> {
        let days = env.config().annualization_days;
        let log = run_episode(env, FeePolicy::EveryStep, |ctx| self.act(ctx.observation))?;
        let returns = crate::stats::daily_returns(&log.cash);
        Ok(crate::stats::sharpe_or_flat(&returns, days))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: "td3".into(),
            config_hash: config_hash(&self.config),
            episodes: self.episodes_done,
            networks: vec![
                ("actor".into(), self.actor.clone()),
                ("actor_target".into(), self.actor_target.clone()),
                ("critic1".into(), self.critic1.clone()),
                ("critic2".into(), self.critic2.clone()),
                ("critic1_target".into(), self.critic1_target.clone()),
                ("critic2_target".into(), self.critic2_target.clone()),
            ],
        }
    }

    /// Rebuilds an agent from a checkpoint written with the same config.
    /// Optimizer moments and the replay buffer start fresh.
    pub fn from_checkpoint(checkpoint: &Checkpoint, config: Td3Config, seed: u64) -> Result<Self> {
        checkpoint.expect("td3", &config_hash(&config))?;
        let actor = checkpoint.network("actor")?;
        let mut agent = Self::new(actor.input_dim(), config, seed)?;
        for (name, slot) in [
            ("actor", &mut agent.actor),
            ("actor_target", &mut agent.actor_target),
            ("critic1", &mut agent.critic1),
            ("critic2", &mut agent.critic2),
            ("critic1_target", &mut agent.critic1_target),
            ("critic2_target", &mut agent.critic2_target),
        ] {
            slot.copy_from(checkpoint.network(name)?)?;
        }
        agent.episodes_done = checkpoint.episodes;
        Ok(agent)
    }
}
