//! Experiment orchestration: config loading, per-seed training and
//! evaluation, comparison tables, paired t-tests and report files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{Checkpoint, DqnAgent, DqnConfig, Td3Agent, Td3Config, TrainLog};
use crate::baselines::{self, Discretizer, StrategyKind, StrategySpec, DEFAULT_MA_WINDOW};
use crate::data::{chronological_split, load_csv, CsvSchema, PriceSeries, SplitSpec};
use crate::env::{run_episode, EnvConfig, FeePolicy, TradingEnv};
use crate::error::{Error, Result};
use crate::stats::{paired_ttest_one_sided, RunReport, TTestResult};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A strategy that can appear in a comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    /// Trained TD3 actor, continuous positions.
    Td3,
    /// TD3 actor output passed through the sign map.
    Td3Sign,
    /// TD3 actor output passed through the three-level map.
    Td3D3,
    /// Greedy DQN agent.
    Tdqn,
    Baseline(StrategyKind),
}

impl Strategy {
    pub fn all() -> Vec<Strategy> {
        let mut all = vec![Strategy::Td3, Strategy::Td3Sign, Strategy::Td3D3, Strategy::Tdqn];
        all.extend(StrategyKind::ALL.into_iter().map(Strategy::Baseline));
        all
    }

    pub fn id(self) -> &'static str {
        match self {
            Strategy::Td3 => "td3",
            Strategy::Td3Sign => "td3_sign",
            Strategy::Td3D3 => "td3_d3",
            Strategy::Tdqn => "tdqn",
            Strategy::Baseline(kind) => kind.id(),
        }
    }

    pub fn needs_td3(self) -> bool {
        matches!(self, Strategy::Td3 | Strategy::Td3Sign | Strategy::Td3D3)
    }

    pub fn needs_dqn(self) -> bool {
        self == Strategy::Tdqn
    }

    fn stream(self) -> u64 {
        match self {
            Strategy::Td3 | Strategy::Td3Sign | Strategy::Td3D3 => 1,
            Strategy::Tdqn => 2,
            Strategy::Baseline(kind) => 16 + kind as u64,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::all()
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.id().to_string()
    }
}

/// One paired comparison: `x` is the challenger, `y` the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TTestPair {
    pub x: Strategy,
    pub y: Strategy,
}

impl TTestPair {
    pub fn new(x: Strategy, y: Strategy) -> Self {
        Self { x, y }
    }

    pub fn id(&self) -> String {
        format!("{}_vs_{}", self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// OHLCV CSV; relative paths resolve against the config file.
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub strategies: Vec<Strategy>,
    pub ma_window: usize,
    /// Significance level for the paired t-tests.
    pub alpha_conf: f64,
    /// Worker threads for the seed fan-out; 0 picks the core count.
    pub workers: usize,
    pub ttest_pairs: Vec<TTestPair>,
    pub schema: CsvSchema,
    pub split: SplitSpec,
    pub env: EnvConfig,
    pub td3: Td3Config,
    pub dqn: DqnConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            output_dir: PathBuf::from("out"),
            seeds: (0..40).collect(),
            strategies: Strategy::all(),
            ma_window: DEFAULT_MA_WINDOW,
            alpha_conf: 0.01,
            workers: 0,
            ttest_pairs: vec![
                TTestPair::new(Strategy::Td3Sign, Strategy::Td3),
                TTestPair::new(Strategy::Td3D3, Strategy::Td3),
            ],
            schema: CsvSchema::default(),
            split: SplitSpec::default(),
            env: EnvConfig::default(),
            td3: Td3Config::default(),
            dqn: DqnConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves a relative dataset path against
    /// the file's directory into an absolute one. Does not validate.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if config.dataset.is_relative() && !config.dataset.as_os_str().is_empty() {
            if let Some(dir) = path.parent() {
                config.dataset = dir.join(&config.dataset);
            }
            if let Ok(abs) = std::fs::canonicalize(&config.dataset) {
                config.dataset = abs;
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn needs_td3(&self) -> bool {
        self.strategies.iter().any(|s| s.needs_td3())
    }

    pub fn needs_dqn(&self) -> bool {
        self.strategies.iter().any(|s| s.needs_dqn())
    }

    /// Pairs whose strategies are both selected.
    pub fn active_pairs(&self) -> Vec<TTestPair> {
        self.ttest_pairs
            .iter()
            .copied()
            .filter(|p| self.strategies.contains(&p.x) && self.strategies.contains(&p.y))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required".into());
        }
        if self.strategies.iter().collect::<BTreeSet<_>>().len() != self.strategies.len() {
            return bad("strategies must be distinct".into());
        }
        if self.dataset.as_os_str().is_empty() {
            return bad("dataset path is required".into());
        }
        if !self.dataset.is_file() {
            return bad(format!("dataset {} does not exist", self.dataset.display()));
        }
        if !(self.alpha_conf > 0.0 && self.alpha_conf < 1.0) {
            return bad(format!("alpha_conf must lie in (0, 1) (got {})", self.alpha_conf));
        }
        self.split.validate()?;
        self.env.validate()?;
        for strategy in &self.strategies {
            if let Strategy::Baseline(kind) = strategy {
                StrategySpec {
                    kind: *kind,
                    ma_window: self.ma_window,
                    seed: 0,
                }
                .validate()?;
                if matches!(kind, StrategyKind::Mrma | StrategyKind::Tfma) && self.ma_window > self.env.window {
                    return bad(format!(
                        "ma_window {} exceeds the observation window {}",
                        self.ma_window, self.env.window
                    ));
                }
            }
        }
        if self.needs_td3() {
            self.td3.validate()?;
        }
        if self.needs_dqn() {
            self.dqn.validate()?;
        }
        Ok(())
    }
}

/// Independent stream for `(seed, stream)` via a splitmix64 finalizer.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segments {
    pub train: PriceSeries,
    pub validation: PriceSeries,
    pub test: PriceSeries,
}

pub fn load_segments(config: &ExperimentConfig) -> Result<Segments> {
    let prices = load_csv(&config.dataset, &config.schema)?;
    let (train, validation, test) = chronological_split(&prices, &config.split, config.env.min_segment_len())?;
    Ok(Segments {
        train,
        validation,
        test,
    })
}

/// Agents for one seed, trained or restored from checkpoints.
#[derive(Debug, Clone, Default)]
pub struct SeedAgents {
    pub td3: Option<Td3Agent>,
    pub dqn: Option<DqnAgent>,
    pub td3_log: Option<TrainLog>,
    pub dqn_log: Option<TrainLog>,
}

/// Trains the agents the config's strategies need. Only the training and
/// validation segments are visible here.
pub fn train_agents(
    config: &ExperimentConfig,
    train: &PriceSeries,
    validation: &PriceSeries,
    seed: u64,
) -> Result<SeedAgents> {
    let mut out = SeedAgents::default();
    if config.needs_td3() {
        let mut agent = Td3Agent::new(config.env.window, config.td3.clone(), derive_seed(seed, 1))?;
        let log = agent.train(train, Some(validation), &config.env, config.td3.episodes)?;
        out.td3 = Some(agent);
        out.td3_log = Some(log);
    }
    if config.needs_dqn() {
        let mut agent = DqnAgent::new(config.env.window, config.dqn.clone(), derive_seed(seed, 2))?;
        let log = agent.train(train, Some(validation), &config.env, config.dqn.episodes)?;
        out.dqn = Some(agent);
        out.dqn_log = Some(log);
    }
    Ok(out)
}

fn missing_agent(name: &str) -> Error {
    Error::Config(format!("strategy needs a trained {name} agent"))
}

/// Evaluates one strategy once over the test segment.
pub fn evaluate_strategy(
    config: &ExperimentConfig,
    strategy: Strategy,
    test: &PriceSeries,
    seed: u64,
    agents: &SeedAgents,
) -> Result<RunReport> {
    let mut env = TradingEnv::new(test, config.env)?;
    let log = match strategy {
        Strategy::Td3 | Strategy::Td3Sign | Strategy::Td3D3 => {
            let agent = agents.td3.as_ref().ok_or_else(|| missing_agent("td3"))?;
            let map = match strategy {
                Strategy::Td3Sign => Some(Discretizer::Sign),
                Strategy::Td3D3 => Some(Discretizer::D3),
                _ => None,
            };
            run_episode(&mut env, FeePolicy::EveryStep, |ctx| {
                let a = agent.act(ctx.observation)?;
                Ok(map.map_or(a, |d| d.apply(a)))
            })?
        }
        Strategy::Tdqn => {
            let agent = agents.dqn.as_ref().ok_or_else(|| missing_agent("dqn"))?;
            run_episode(&mut env, FeePolicy::EveryStep, |ctx| agent.act(ctx.observation))?
        }
        Strategy::Baseline(kind) => {
            let spec = StrategySpec {
                kind,
                ma_window: config.ma_window,
                seed: derive_seed(seed, strategy.stream()),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            run_episode(&mut env, kind.fee_policy(), |ctx| {
                baselines::act(&spec, ctx.t, ctx.prices, &mut rng)
            })?
        }
    };
    RunReport::from_episode(strategy.id(), seed, log, config.env.annualization_days)
}

pub fn evaluate_seed(
    config: &ExperimentConfig,
    test: &PriceSeries,
    seed: u64,
    agents: &SeedAgents,
) -> Result<Vec<RunReport>> {
    config
        .strategies
        .iter()
        .map(|&s| evaluate_strategy(config, s, test, seed, agents))
        .collect()
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub strategy: String,
    pub seed: u64,
    pub return_pct: f64,
    pub sharpe: f64,
}

impl From<&RunReport> for RunSummary {
    fn from(r: &RunReport) -> Self {
        Self {
            strategy: r.strategy.clone(),
            seed: r.seed,
            return_pct: r.return_pct,
            sharpe: r.sharpe,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub strategy: String,
    /// Mean over seeds.
    pub return_pct: f64,
    /// Mean over seeds; NaN if any run's Sharpe ratio is undefined.
    pub sharpe: f64,
    /// Per-seed results in seed order.
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

impl ComparisonTable {
    /// One row per strategy in `order`, averaging that strategy's runs.
    pub fn build(order: &[String], runs: &[RunSummary]) -> Result<Self> {
        let mut rows = Vec::with_capacity(order.len());
        for strategy in order {
            let mut mine: Vec<RunSummary> = runs.iter().filter(|r| &r.strategy == strategy).cloned().collect();
            if mine.is_empty() {
                return Err(Error::MissingStrategy(strategy.clone()));
            }
            mine.sort_by_key(|r| r.seed);
            rows.push(ComparisonRow {
                strategy: strategy.clone(),
                return_pct: mean(mine.iter().map(|r| r.return_pct)),
                sharpe: mean(mine.iter().map(|r| r.sharpe)),
                runs: mine,
            });
        }
        Ok(Self { rows })
    }

    pub fn row(&self, strategy: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    ReturnPct,
    Sharpe,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::ReturnPct, Metric::Sharpe];

    pub fn id(self) -> &'static str {
        match self {
            Metric::ReturnPct => "return_pct",
            Metric::Sharpe => "sharpe",
        }
    }

    fn of(self, run: &RunSummary) -> f64 {
        match self {
            Metric::ReturnPct => run.return_pct,
            Metric::Sharpe => run.sharpe,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTestRow {
    pub pair: String,
    pub metric: Metric,
    pub result: TTestResult,
    /// Whether `mean(x) >= mean(y)` is rejected at the configured level.
    pub rejected: bool,
}

fn runs_by_seed<'a>(runs: &'a [RunSummary], strategy: &str) -> Result<BTreeMap<u64, &'a RunSummary>> {
    let mut map = BTreeMap::new();
    for r in runs.iter().filter(|r| r.strategy == strategy) {
        if map.insert(r.seed, r).is_some() {
            return Err(Error::Config(format!("duplicate seed {} for {strategy}", r.seed)));
        }
    }
    if map.is_empty() {
        return Err(Error::MissingStrategy(strategy.to_string()));
    }
    Ok(map)
}

/// Paired one-sided t-test per pair and metric, matching runs by seed.
/// Differences that are constant but nonzero have no t statistic and are
/// reported as NaN.
pub fn compare_report(runs: &[RunSummary], pairs: &[TTestPair], alpha_conf: f64) -> Result<Vec<TTestRow>> {
    let mut rows = Vec::with_capacity(pairs.len() * Metric::ALL.len());
    for pair in pairs {
        let xs = runs_by_seed(runs, pair.x.id())?;
        let ys = runs_by_seed(runs, pair.y.id())?;
        if !xs.keys().eq(ys.keys()) {
            return Err(Error::MisalignedSeeds {
                x: pair.x.to_string(),
                y: pair.y.to_string(),
            });
        }
        for metric in Metric::ALL {
            let x: Vec<f64> = xs.values().map(|r| metric.of(r)).collect();
            let y: Vec<f64> = ys.values().map(|r| metric.of(r)).collect();
            let result = match paired_ttest_one_sided(&x, &y) {
                Ok(r) => r,
                Err(Error::ZeroVariance) => TTestResult {
                    t0: f64::NAN,
                    p_value: f64::NAN,
                    df: x.len() as u64 - 1,
                },
                Err(e) => return Err(e),
            };
            rows.push(TTestRow {
                pair: pair.id(),
                metric,
                rejected: result.rejects_null(alpha_conf),
                result,
            });
        }
    }
    Ok(rows)
}

/// Everything one experiment produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub table: ComparisonTable,
    pub reports: Vec<RunReport>,
    pub ttests: Vec<TTestRow>,
}

impl ExperimentOutcome {
    /// Paired t-tests need at least two seeds and are skipped otherwise.
    fn assemble(config: &ExperimentConfig, per_seed: Vec<Vec<RunReport>>) -> Result<Self> {
        let mut reports: Vec<RunReport> = per_seed.into_iter().flatten().collect();
        let rank = |s: &str| config.strategies.iter().position(|k| k.id() == s);
        reports.sort_by_key(|a| (rank(&a.strategy), a.seed));
        let summaries: Vec<RunSummary> = reports.iter().map(RunSummary::from).collect();
        let order: Vec<String> = config.strategies.iter().map(|s| s.id().to_string()).collect();
        let table = ComparisonTable::build(&order, &summaries)?;
        let ttests = if config.seeds.len() >= 2 {
            compare_report(&summaries, &config.active_pairs(), config.alpha_conf)?
        } else {
            Vec::new()
        };
        Ok(Self { table, reports, ttests })
    }
}

/// Runs `f` over every seed on a bounded pool; results keep seed order.
fn fan_out<T, F>(config: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| config.seeds.par_iter().map(|&seed| f(seed)).collect())
}

/// Trains, selects on validation and evaluates on test for every seed,
/// without writing anything.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let segments = load_segments(config)?;
    let per_seed = fan_out(config, |seed| {
        let agents = train_agents(config, &segments.train, &segments.validation, seed)?;
        evaluate_seed(config, &segments.test, seed, &agents)
    })?;
    ExperimentOutcome::assemble(config, per_seed)
}

/// Full pipeline: [`execute`], then every report and the resolved config
/// written to the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let outcome = execute(config)?;
    emit_outputs(&outcome, &config.output_dir)?;
    write_resolved_config(config, &config.output_dir)?;
    Ok(outcome)
}

fn checkpoint_path(dir: &Path, agent: &str, seed: u64) -> PathBuf {
    dir.join("checkpoints").join(format!("{agent}_{seed}.ckpt"))
}

/// Trains every seed and writes checkpoints plus per-episode training logs.
pub fn train_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<Vec<(u64, SeedAgents)>> {
    config.validate()?;
    let segments = load_segments(config)?;
    let trained = fan_out(config, |seed| {
        train_agents(config, &segments.train, &segments.validation, seed).map(|a| (seed, a))
    })?;
    for (seed, agents) in &trained {
        if let (Some(agent), Some(log)) = (&agents.td3, &agents.td3_log) {
            write_atomic(&checkpoint_path(dir, "td3", *seed), &agent.checkpoint().to_text())?;
            write_atomic(&dir.join(format!("train_td3_{seed}.csv")), &train_log_csv(log))?;
        }
        if let (Some(agent), Some(log)) = (&agents.dqn, &agents.dqn_log) {
            write_atomic(&checkpoint_path(dir, "tdqn", *seed), &agent.checkpoint().to_text())?;
            write_atomic(&dir.join(format!("train_tdqn_{seed}.csv")), &train_log_csv(log))?;
        }
    }
    write_resolved_config(config, dir)?;
    Ok(trained)
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_text(&text)
}

/// Restores the agents of one seed from checkpoints under `dir`.
pub fn load_agents(config: &ExperimentConfig, dir: &Path, seed: u64) -> Result<SeedAgents> {
    let mut agents = SeedAgents::default();
    if config.needs_td3() {
        let ckpt = read_checkpoint(&checkpoint_path(dir, "td3", seed))?;
        agents.td3 = Some(Td3Agent::from_checkpoint(
            &ckpt,
            config.td3.clone(),
            derive_seed(seed, 1),
        )?);
    }
    if config.needs_dqn() {
        let ckpt = read_checkpoint(&checkpoint_path(dir, "tdqn", seed))?;
        agents.dqn = Some(DqnAgent::from_checkpoint(
            &ckpt,
            config.dqn.clone(),
            derive_seed(seed, 2),
        )?);
    }
    Ok(agents)
}

/// Evaluates checkpoints written by [`train_to_dir`] on the test segment
/// and writes the reports next to them.
pub fn evaluate_from_dir(config: &ExperimentConfig, dir: &Path) -> Result<ExperimentOutcome> {
    config.validate()?;
    let segments = load_segments(config)?;
    let per_seed = fan_out(config, |seed| {
        let agents = load_agents(config, dir, seed)?;
        evaluate_seed(config, &segments.test, seed, &agents)
    })?;
    let outcome = ExperimentOutcome::assemble(config, per_seed)?;
    emit_outputs(&outcome, dir)?;
    write_resolved_config(config, dir)?;
    Ok(outcome)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn train_log_csv(log: &TrainLog) -> String {
    let warmup = log.episode_rewards.len() - log.validation_sharpe.len();
    let mut out = String::from("episode,phase,reward,validation_sharpe\n");
    for (i, reward) in log.episode_rewards.iter().enumerate() {
        let (phase, sharpe) = if i < warmup {
            ("warmup", String::new())
        } else {
            (
                "learn",
                log.validation_sharpe.get(i - warmup).map_or(String::new(), |&s| num(s)),
            )
        };
        writeln!(out, "{i},{phase},{},{sharpe}", num(*reward)).unwrap();
    }
    out
}

pub fn comparison_csv(table: &ComparisonTable) -> String {
    let mut out = String::from("strategy,return_pct,sharpe\n");
    for row in &table.rows {
        writeln!(out, "{},{},{}", row.strategy, num(row.return_pct), num(row.sharpe)).unwrap();
    }
    out
}

pub fn runs_csv(table: &ComparisonTable) -> String {
    let mut out = String::from("strategy,seed,return_pct,sharpe\n");
    for run in table.rows.iter().flat_map(|r| &r.runs) {
        writeln!(
            out,
            "{},{},{},{}",
            run.strategy,
            run.seed,
            num(run.return_pct),
            num(run.sharpe)
        )
        .unwrap();
    }
    out
}

pub fn equity_csv(report: &RunReport) -> String {
    let mut out = String::from("date,cash\n");
    for (date, cash) in report.dates.iter().zip(&report.equity) {
        writeln!(out, "{date},{}", num(*cash)).unwrap();
    }
    out
}

pub fn actions_csv(report: &RunReport) -> String {
    let mut out = String::from("date,action\n");
    for (date, action) in report.action_dates.iter().zip(&report.actions) {
        writeln!(out, "{date},{}", num(*action)).unwrap();
    }
    out
}

pub fn ttest_csv(rows: &[TTestRow]) -> String {
    let mut out = String::from("pair,metric,t0,df,p_value\n");
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.pair,
            row.metric.id(),
            num(row.result.t0),
            row.result.df,
            num(row.result.p_value)
        )
        .unwrap();
    }
    out
}

/// Writes through a temporary file in the same directory so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn equity_file_name(strategy: &str, seed: u64) -> String {
    format!("equity_{strategy}_{seed}.csv")
}

pub fn actions_file_name(strategy: &str, seed: u64) -> String {
    format!("actions_{strategy}_{seed}.csv")
}

/// Writes the comparison table, per-seed results, equity curves, action
/// logs and t-test summary into `dir`.
pub fn emit_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    write_atomic(&dir.join("comparison.csv"), &comparison_csv(&outcome.table))?;
    write_atomic(&dir.join("runs.csv"), &runs_csv(&outcome.table))?;
    for report in &outcome.reports {
        write_atomic(
            &dir.join(equity_file_name(&report.strategy, report.seed)),
            &equity_csv(report),
        )?;
        write_atomic(
            &dir.join(actions_file_name(&report.strategy, report.seed)),
            &actions_csv(report),
        )?;
    }
    write_atomic(&dir.join("ttest.csv"), &ttest_csv(&outcome.ttests))
}

pub fn write_resolved_config(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    write_atomic(&dir.join("config.resolved.toml"), &config.to_toml())
}

#[derive(Debug, Deserialize)]
struct RunRecord {
    strategy: String,
    seed: u64,
    return_pct: f64,
    sharpe: f64,
}

/// Reads a `runs.csv` written by [`emit_outputs`].
pub fn read_runs(path: &Path) -> Result<Vec<RunSummary>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut runs = Vec::new();
    for (i, record) in reader.deserialize::<RunRecord>().enumerate() {
        let r = record.map_err(|e| Error::BadRow {
            path: path.to_path_buf(),
            line: (i + 2) as u64,
            message: e.to_string(),
        })?;
        runs.push(RunSummary {
            strategy: r.strategy,
            seed: r.seed,
            return_pct: r.return_pct,
            sharpe: r.sharpe,
        });
    }
    Ok(runs)
}
