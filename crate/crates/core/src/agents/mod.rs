//! Learning agents: TD3 for continuous positions, a DQN over a discrete
//! action set, tabular Q-learning, and their shared replay and schedules.

pub mod dqn;
pub mod replay;
pub mod schedule;
pub mod tabular;
pub mod td3;

use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use dqn::{argmax, dqn_target, epsilon_greedy, ActionSet, DqnAgent, DqnConfig};
pub use replay::{ReplayBuffer, Transition};
pub use schedule::NoiseSchedule;
pub use tabular::TabularQ;
pub use td3::{
    exploration_noise, td3_actor_gradient, td3_critic_target, td3_select_action, td3_target_action, Td3Agent,
    Td3Config, Td3UpdateStats,
};

use crate::error::{Error, Result};
use crate::neuralnet::Mlp;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// Summed reward of every episode, warmup included.
    pub episode_rewards: Vec<f64>,
    /// Validation Sharpe ratio after each learning episode.
    pub validation_sharpe: Vec<f64>,
    /// Learning episode whose policy was kept.
    pub best_episode: Option<usize>,
    pub updates: u64,
}

/// Keeps the snapshot with the highest finite score; ties keep the earlier one.
pub(crate) struct ValidationTracker<T> {
    best: Option<(usize, f64, T)>,
}

impl<T> Default for ValidationTracker<T> {
    fn default() -> Self {
        Self { best: None }
    }
}

impl<T> ValidationTracker<T> {
    pub(crate) fn offer(&mut self, episode: usize, score: f64, snapshot: impl FnOnce() -> T) {
        if !score.is_finite() {
            return;
        }
        if self.best.as_ref().is_none_or(|(_, best, _)| score > *best) {
            self.best = Some((episode, score, snapshot()));
        }
    }

    pub(crate) fn into_best(self) -> Option<(usize, T)> {
        self.best.map(|(e, _, t)| (e, t))
    }
}

/// Short SHA-256 digest of a config's TOML rendering.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let text = toml::to_string(config).expect("agent configs serialize");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Named networks of one agent plus the config hash and episode count they
/// were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub config_hash: String,
    pub episodes: u64,
    pub networks: Vec<(String, Mlp)>,
}

const CHECKPOINT_HEADER: &str = "tradelab-checkpoint v1";

fn take_field<'a>(lines: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<String> {
    let line = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("unexpected end of checkpoint".into()))?;
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .map(str::to_string)
        .ok_or_else(|| Error::Checkpoint(format!("expected `{key}`, got {line:?}")))
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{CHECKPOINT_HEADER}").unwrap();
        writeln!(out, "kind {}", self.kind).unwrap();
        writeln!(out, "config_hash {}", self.config_hash).unwrap();
        writeln!(out, "episodes {}", self.episodes).unwrap();
        writeln!(out, "networks {}", self.networks.len()).unwrap();
        for (name, net) in &self.networks {
            writeln!(out, "net {name}").unwrap();
            out.push_str(&net.to_checkpoint());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let mut lines = text.lines();
        if lines.next() != Some(CHECKPOINT_HEADER) {
            return Err(bad("missing checkpoint header".into()));
        }
        let kind = take_field(&mut lines, "kind")?;
        let config_hash = take_field(&mut lines, "config_hash")?;
        let episodes = take_field(&mut lines, "episodes")?
            .parse()
            .map_err(|_| bad("bad episode count".into()))?;
        let count: usize = take_field(&mut lines, "networks")?
            .parse()
            .map_err(|_| bad("bad network count".into()))?;
        let mut networks = Vec::with_capacity(count);
        for _ in 0..count {
            let name = take_field(&mut lines, "net")?;
            let net = Mlp::read_checkpoint(&mut lines)?;
            networks.push((name, net));
        }
        Ok(Self {
            kind,
            config_hash,
            episodes,
            networks,
        })
    }

    pub fn network(&self, name: &str) -> Result<&Mlp> {
        self.networks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, net)| net)
            .ok_or_else(|| Error::Checkpoint(format!("no network named {name:?}")))
    }

    /// Checks the agent kind and config hash.
    pub fn expect(&self, kind: &str, config_hash: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!(
                "checkpoint is for {:?}, expected {kind:?}",
                self.kind
            )));
        }
        if self.config_hash != config_hash {
            return Err(Error::Checkpoint(format!(
                "config hash {} does not match {config_hash}",
                self.config_hash
            )));
        }
        Ok(())
    }
}
