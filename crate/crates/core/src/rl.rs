//! Air-tanker fire suppression environment.
//!
//! An agent flies over a burning grid, sees a square window of the fire
//! layer around itself, and drops water by opening a valve. Each step applies
//! effects in a fixed order: the agent moves, the valve drops water on the
//! agent's new cell, then the fire advances one stochastic step. The reward is
//! `−c` per burning cell after the fire step, plus a terminal bonus when the
//! fire is out.
//!
//! Randomness comes from the episode's [`RngKey`]: fire step `t` uses
//! `key.advance(t)`, exactly as [`run_stochastic`](crate::engine::run_stochastic)
//! would, so a closed-valve episode reproduces a bare simulation run. Reset
//! and policy draws use step numbers far above any episode length.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::step_stochastic;
use crate::grid::{
    CellIndex, CellState, Dims, FireState, FuelField, GridError, GridState, SimConfig, SlopeField, WindField,
};
use crate::rng::RngKey;

/// Reward for ending an episode with no burning cells.
pub const TERMINAL_BONUS: f64 = 10.0;

const RESET_STEP: u64 = u64::MAX;
const POLICY_STEP_BASE: u64 = 1 << 63;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("episode is already done")]
    EpisodeDone,
    #[error("non-finite policy parameter at index {index} after episode {episode}")]
    NonFiniteParameters { episode: usize, index: usize },
    #[error("batch must contain at least one episode")]
    EmptyBatch,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub dims: Dims,
    /// The observation window is `(2r+1)×(2r+1)` cells.
    pub view_radius: usize,
    /// Number of water drops per episode.
    pub water_capacity: u32,
    /// Penalty per burning cell per step.
    pub burn_penalty: f64,
    pub max_steps: usize,
    pub wind_speed: f64,
    pub wind_direction: f64,
    /// Uniform `(μ_veg, μ_den)` of the landscape.
    pub fuel: (f64, f64),
    pub sim: SimConfig,
    pub n_ignitions: usize,
    /// Only consume water when the drop lands on a burning cell.
    pub no_waste: bool,
}

impl Default for EnvConfig {
    /// The 20×20 preset. Spread is close to critical, so an unattended fire
    /// tends to grow while a directed agent can usually put it out.
    fn default() -> Self {
        Self {
            dims: Dims::new(20, 20),
            view_radius: 2,
            water_capacity: 30,
            burn_penalty: 0.05,
            max_steps: 100,
            wind_speed: 1.0,
            wind_direction: 0.0,
            fuel: (0.0, 0.0),
            sim: SimConfig {
                p_base: 0.04,
                alpha_w1: 0.1,
                alpha_w2: 0.3,
                alpha_s: 0.0,
                alpha_gamma: 1.0,
                p_continue: 0.93,
                max_steps: 100,
            },
            n_ignitions: 1,
            no_waste: false,
        }
    }
}

impl EnvConfig {
    /// A 10×10 preset with slow spread, used for policy-gradient training.
    /// Fires grow little but rarely burn out on their own, so the return
    /// mostly reflects whether the agent finds and douses them.
    pub fn slow_spread() -> Self {
        let base = Self::default();
        Self {
            dims: Dims::new(10, 10),
            water_capacity: 10,
            max_steps: 60,
            wind_speed: 0.0,
            sim: SimConfig {
                p_base: 0.01,
                p_continue: 0.99,
                max_steps: 60,
                ..base.sim
            },
            ..base
        }
    }

    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: String| Err(RlError::InvalidConfig(m));
        if self.dims.is_empty() {
            return bad("grid must be at least 1x1".into());
        }
        if self.water_capacity == 0 {
            return bad("water capacity must be at least 1".into());
        }
        if !(self.burn_penalty > 0.0 && self.burn_penalty.is_finite()) {
            return bad(format!("burn penalty must be positive, got {}", self.burn_penalty));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1".into());
        }
        if self.n_ignitions > self.dims.len() {
            return bad(format!(
                "{} ignitions do not fit in {} cells",
                self.n_ignitions,
                self.dims.len()
            ));
        }
        self.sim.validate()?;
        Ok(())
    }

    /// Length of [`Observation::features`].
    pub fn feature_len(&self) -> usize {
        let side = 2 * self.view_radius + 1;
        side * side * 3 + 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    North,
    South,
    East,
    West,
    Stay,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::North, Move::South, Move::East, Move::West, Move::Stay];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Valve {
    Closed,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action {
    pub movement: Move,
    pub valve: Valve,
}

impl Action {
    pub const COUNT: usize = 10;

    pub const fn new(movement: Move, valve: Valve) -> Self {
        Self { movement, valve }
    }

    /// Actions are ordered move-major: `index = 2·move + valve`.
    pub fn index(&self) -> usize {
        let m = Move::ALL.iter().position(|&m| m == self.movement).expect("listed");
        2 * m + usize::from(self.valve == Valve::Open)
    }

    pub fn from_index(i: usize) -> Option<Self> {
        if i >= Self::COUNT {
            return None;
        }
        let valve = if i % 2 == 1 { Valve::Open } else { Valve::Closed };
        Some(Self::new(Move::ALL[i / 2], valve))
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..Self::COUNT).map(|i| Self::from_index(i).expect("in range"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub fire: FireState,
    pub agent: CellIndex,
    pub water: u32,
    pub step: usize,
    /// Episode key; fire step `t` draws from `key.advance(t)`.
    pub key: RngKey,
    pub ever_burned: bool,
    pub done: bool,
}

impl EnvState {
    pub fn burning(&self) -> usize {
        self.fire.count(CellState::Burning)
    }

    /// Key for the policy's draw at the current step.
    pub fn policy_key(&self) -> RngKey {
        self.key.with_step(POLICY_STEP_BASE + self.step as u64)
    }
}

/// What the agent sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub radius: usize,
    /// Row-major window from the southernmost row up, three channels per
    /// cell (unburned, burning, burned). Cells off the grid are all zero.
    pub window: Vec<f64>,
    /// Water remaining over capacity.
    pub water: f64,
    /// Agent row and column scaled to `[0, 1]`.
    pub position: [f64; 2],
}

impl Observation {
    /// Window, water and position as one flat vector.
    pub fn features(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(self.window.len() + 3);
        f.extend_from_slice(&self.window);
        f.push(self.water);
        f.extend_from_slice(&self.position);
        f
    }

    /// Channel triple at window offset `(dr, dc)` from the agent.
    pub fn cell(&self, dr: isize, dc: isize) -> [f64; 3] {
        let side = 2 * self.radius + 1;
        let r = (dr + self.radius as isize) as usize;
        let c = (dc + self.radius as isize) as usize;
        let k = 3 * (r * side + c);
        [self.window[k], self.window[k + 1], self.window[k + 2]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
}

/// The environment: a config plus the landscape it builds.
#[derive(Debug, Clone)]
pub struct FireEnv {
    cfg: EnvConfig,
    grid: Arc<GridState>,
}

impl FireEnv {
    /// Flat terrain with uniform fuel and wind from `cfg`.
    pub fn new(cfg: EnvConfig) -> Result<Self, RlError> {
        cfg.validate()?;
        let dims = cfg.dims;
        let grid = GridState::new(
            dims,
            FireState::unburned(dims),
            WindField::uniform(dims, cfg.wind_speed, cfg.wind_direction)?,
            FuelField::uniform(dims, cfg.fuel.0, cfg.fuel.1)?,
            SlopeField::flat(dims),
        )?;
        Self::with_grid(cfg, grid)
    }

    /// Uses a custom landscape; its fire layer is ignored.
    pub fn with_grid(cfg: EnvConfig, grid: GridState) -> Result<Self, RlError> {
        cfg.validate()?;
        if grid.dims() != cfg.dims {
            return Err(RlError::InvalidConfig(format!(
                "landscape is {}x{}, config says {}x{}",
                grid.dims().height,
                grid.dims().width,
                cfg.dims.height,
                cfg.dims.width
            )));
        }
        Ok(Self {
            cfg,
            grid: Arc::new(grid),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &GridState {
        &self.grid
    }

    /// Random distinct ignitions and a random agent position, full water.
    pub fn reset(&self, key: RngKey) -> (EnvState, Observation) {
        let dims = self.cfg.dims;
        let n = dims.len() as u64;
        let draws = key.with_step(RESET_STEP);
        let mut counter = 0u64;
        let mut ignitions: Vec<CellIndex> = Vec::with_capacity(self.cfg.n_ignitions);
        while ignitions.len() < self.cfg.n_ignitions {
            let cell = dims.cell(draws.below(counter, n) as usize);
            counter += 1;
            if !ignitions.contains(&cell) {
                ignitions.push(cell);
            }
        }
        let agent = dims.cell(draws.below(counter, n) as usize);
        let fire = FireState::with_ignitions(dims, &ignitions).expect("cells are in bounds");
        let state = EnvState {
            ever_burned: !ignitions.is_empty(),
            fire,
            agent,
            water: self.cfg.water_capacity,
            step: 0,
            key,
            done: false,
        };
        let obs = self.observe(&state);
        (state, obs)
    }

    pub fn observe(&self, state: &EnvState) -> Observation {
        let dims = self.cfg.dims;
        let r = self.cfg.view_radius as isize;
        let side = 2 * self.cfg.view_radius + 1;
        let mut window = vec![0.0; side * side * 3];
        for wr in 0..side {
            for wc in 0..side {
                let row = state.agent.row as isize + wr as isize - r;
                let col = state.agent.col as isize + wc as isize - r;
                if row < 0 || col < 0 || row >= dims.height as isize || col >= dims.width as isize {
                    continue;
                }
                let cell = CellIndex {
                    row: row as usize,
                    col: col as usize,
                };
                let ch = state.fire.get(cell) as usize;
                window[3 * (wr * side + wc) + ch] = 1.0;
            }
        }
        let scale = |x: usize, n: usize| if n > 1 { x as f64 / (n - 1) as f64 } else { 0.0 };
        Observation {
            radius: self.cfg.view_radius,
            window,
            water: state.water as f64 / self.cfg.water_capacity as f64,
            position: [scale(state.agent.row, dims.height), scale(state.agent.col, dims.width)],
        }
    }

    pub fn step(&self, state: &EnvState, action: Action) -> Result<StepOutcome, RlError> {
        if state.done {
            return Err(RlError::EpisodeDone);
        }
        let dims = self.cfg.dims;
        let mut fire = state.fire.clone();
        let mut water = state.water;

        let mut agent = state.agent;
        match action.movement {
            Move::North => agent.row = (agent.row + 1).min(dims.height - 1),
            Move::South => agent.row = agent.row.saturating_sub(1),
            Move::East => agent.col = (agent.col + 1).min(dims.width - 1),
            Move::West => agent.col = agent.col.saturating_sub(1),
            Move::Stay => {}
        }

        if action.valve == Valve::Open && water > 0 {
            let on_fire = fire.get(agent) == CellState::Burning;
            if on_fire {
                fire.set(agent, CellState::Burned);
            }
            if on_fire || !self.cfg.no_waste {
                water -= 1;
            }
        }

        let fire = step_stochastic(&fire, &self.grid, &self.cfg.sim, state.key.advance(state.step as u64));
        let burning = fire.count(CellState::Burning);
        let mut reward = -self.cfg.burn_penalty * burning as f64;
        let extinguished = burning == 0;
        if extinguished && state.ever_burned {
            reward += TERMINAL_BONUS;
        }
        let step = state.step + 1;
        let done = extinguished || step >= self.cfg.max_steps;
        let next = EnvState {
            fire,
            agent,
            water,
            step,
            key: state.key,
            ever_burned: state.ever_burned,
            done,
        };
        let observation = self.observe(&next);
        Ok(StepOutcome {
            state: next,
            observation,
            reward,
            done,
        })
    }
}

/// Chooses actions. Implementations must be deterministic given the key.
pub trait Policy: Sync {
    fn act(&self, env: &FireEnv, state: &EnvState, obs: &Observation, key: RngKey) -> Action;
}

/// Heads for the nearest burning cell and drops water on it.
///
/// Reads the full fire layer, which the agent's own observation does not
/// provide. Distance is Manhattan (the agent moves in four directions); ties
/// go to the lowest flat index, and the longer axis is closed first.
pub fn heuristic_policy(state: &EnvState) -> Action {
    let dims = state.fire.dims();
    let here = state.agent;
    if state.fire.get(here) == CellState::Burning {
        let valve = if state.water > 0 { Valve::Open } else { Valve::Closed };
        return Action::new(Move::Stay, valve);
    }
    let nearest = state
        .fire
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == CellState::Burning)
        .map(|(i, _)| dims.cell(i))
        .min_by_key(|c| (c.row.abs_diff(here.row) + c.col.abs_diff(here.col), dims.index(*c)));
    let Some(target) = nearest else {
        return Action::new(Move::Stay, Valve::Closed);
    };
    let dr = target.row as isize - here.row as isize;
    let dc = target.col as isize - here.col as isize;
    let movement = if dc.abs() >= dr.abs() {
        if dc > 0 {
            Move::East
        } else {
            Move::West
        }
    } else if dr > 0 {
        Move::North
    } else {
        Move::South
    };
    Action::new(movement, Valve::Closed)
}

/// Uniform over the ten actions.
pub fn random_policy(key: RngKey) -> Action {
    Action::from_index(key.below(0, Action::COUNT as u64) as usize).expect("in range")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicPolicy;

impl Policy for HeuristicPolicy {
    fn act(&self, _env: &FireEnv, state: &EnvState, _obs: &Observation, _key: RngKey) -> Action {
        heuristic_policy(state)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(&self, _env: &FireEnv, _state: &EnvState, _obs: &Observation, key: RngKey) -> Action {
        random_policy(key)
    }
}

/// Keeps the valve closed and stays put.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdlePolicy;

impl Policy for IdlePolicy {
    fn act(&self, _env: &FireEnv, _state: &EnvState, _obs: &Observation, _key: RngKey) -> Action {
        Action::new(Move::Stay, Valve::Closed)
    }
}

/// Softmax over linear action scores of the observation features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmaxPolicy {
    n_features: usize,
    /// `COUNT × (n_features + 1)`, last column is the bias.
    weights: Vec<f64>,
}

impl LinearSoftmaxPolicy {
    /// All-zero weights, i.e. the uniform policy.
    pub fn new(n_features: usize) -> Self {
        Self {
            n_features,
            weights: vec![0.0; Action::COUNT * (n_features + 1)],
        }
    }

    pub fn for_env(cfg: &EnvConfig) -> Self {
        Self::new(cfg.feature_len())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn probabilities(&self, features: &[f64]) -> [f64; Action::COUNT] {
        assert_eq!(features.len(), self.n_features, "feature length");
        let stride = self.n_features + 1;
        let mut logits = [0.0; Action::COUNT];
        for (a, l) in logits.iter_mut().enumerate() {
            let w = &self.weights[a * stride..(a + 1) * stride];
            *l = w[self.n_features] + w.iter().zip(features).map(|(w, x)| w * x).sum::<f64>();
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        logits.map(|e| e / total)
    }

    fn sample(&self, features: &[f64], u: f64) -> usize {
        let probs = self.probabilities(features);
        let mut acc = 0.0;
        for (a, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        Action::COUNT - 1
    }
}

impl Policy for LinearSoftmaxPolicy {
    fn act(&self, _env: &FireEnv, _state: &EnvState, obs: &Observation, key: RngKey) -> Action {
        Action::from_index(self.sample(&obs.features(), key.uniform(0))).expect("in range")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub action: Action,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    /// States from reset through the final step.
    pub states: Vec<EnvState>,
    pub total_return: f64,
    pub success: bool,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Plays one episode to completion.
pub fn run_episode(env: &FireEnv, policy: &dyn Policy, key: RngKey) -> Episode {
    let (mut state, mut obs) = env.reset(key);
    let mut states = vec![state.clone()];
    let mut transitions = Vec::new();
    let mut total = 0.0;
    let mut success = false;
    while !state.done {
        let action = policy.act(env, &state, &obs, state.policy_key());
        let out = env.step(&state, action).expect("episode not done");
        total += out.reward;
        success = out.done && out.state.burning() == 0 && state.ever_burned;
        transitions.push(Transition {
            observation: obs,
            action,
            reward: out.reward,
        });
        state = out.state;
        obs = out.observation;
        states.push(state.clone());
    }
    Episode {
        transitions,
        states,
        total_return: total,
        success,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub success_rate: f64,
    pub returns: Vec<f64>,
}

impl ReturnStats {
    pub fn from_outcomes(outcomes: &[(f64, bool)]) -> Self {
        let n = outcomes.len() as f64;
        let mean = outcomes.iter().map(|o| o.0).sum::<f64>() / n;
        let var = outcomes.iter().map(|o| (o.0 - mean).powi(2)).sum::<f64>() / n;
        let successes = outcomes.iter().filter(|o| o.1).count() as f64;
        Self {
            mean,
            std: var.sqrt(),
            success_rate: successes / n,
            returns: outcomes.iter().map(|o| o.0).collect(),
        }
    }
}

/// Key of episode `k` in a batch started from `key`.
pub fn episode_key(key: RngKey, k: usize) -> RngKey {
    key.with_stream(key.stream.wrapping_add(k as u64))
}

/// Runs `n` independent episodes in parallel; episode `k` uses stream
/// `key.stream + k`.
pub fn run_batch_episodes(env: &FireEnv, policy: &dyn Policy, n: usize, key: RngKey) -> Result<ReturnStats, RlError> {
    if n == 0 {
        return Err(RlError::EmptyBatch);
    }
    let outcomes: Vec<(f64, bool)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let ep = run_episode(env, policy, episode_key(key, k));
            (ep.total_return, ep.success)
        })
        .collect();
    Ok(ReturnStats::from_outcomes(&outcomes))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub episodes: usize,
    pub lr: f64,
    pub discount: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            episodes: 10_000,
            lr: 0.03,
            discount: 0.9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub policy: LinearSoftmaxPolicy,
    /// Undiscounted return of each training episode.
    pub history: Vec<f64>,
}

/// Weight of the newest episode in the running baseline.
const BASELINE_RATE: f64 = 0.05;

/// REINFORCE with a running mean-return baseline.
///
/// After each episode, step `t`'s log-probability gradient is weighted by its
/// discounted return-to-go minus the running mean of the returns-to-go seen at
/// step `t` in earlier episodes. Advantages are divided by their RMS and the
/// gradient by the episode length, so `lr` sets the step size directly.
/// The first episode only seeds the baseline. Episode `e` uses stream `e` of
/// `opts.seed`.
pub fn train_reinforce(
    env: &FireEnv,
    init: LinearSoftmaxPolicy,
    opts: &TrainOptions,
) -> Result<TrainResult, RlError> {
    let mut policy = init;
    let mut history = Vec::with_capacity(opts.episodes);
    let mut baseline: Vec<f64> = Vec::new();
    let stride = policy.n_features + 1;
    let base_key = RngKey::new(opts.seed);

    for e in 0..opts.episodes {
        let ep = run_episode(env, &policy, base_key.with_stream(e as u64));
        history.push(ep.total_return);

        let mut returns = vec![0.0; ep.len()];
        let mut g = 0.0;
        for (t, tr) in ep.transitions.iter().enumerate().rev() {
            g = tr.reward + opts.discount * g;
            returns[t] = g;
        }

        let advantages: Vec<f64> = returns
            .iter()
            .zip(&baseline)
            .map(|(ret, b)| ret - b)
            .collect();
        let scale = if advantages.is_empty() {
            0.0
        } else {
            let ms = advantages.iter().map(|a| a * a).sum::<f64>() / advantages.len() as f64;
            if ms > 0.0 {
                1.0 / (ms.sqrt() * ep.len() as f64)
            } else {
                0.0
            }
        };
        let mut grad = vec![0.0; policy.weights.len()];
        for (tr, &adv) in ep.transitions.iter().zip(&advantages) {
            let adv = adv * scale;
            let x = tr.observation.features();
            let probs = policy.probabilities(&x);
            let chosen = tr.action.index();
            for (a, p) in probs.iter().enumerate() {
                let coef = adv * (f64::from(u8::from(a == chosen)) - p);
                if coef == 0.0 {
                    continue;
                }
                let row = &mut grad[a * stride..(a + 1) * stride];
                for (gw, xi) in row.iter_mut().zip(&x) {
                    *gw += coef * xi;
                }
                row[policy.n_features] += coef;
            }
        }
        for (w, gw) in policy.weights.iter_mut().zip(&grad) {
            *w += opts.lr * gw;
        }
        if let Some(index) = policy.weights.iter().position(|w| !w.is_finite()) {
            return Err(RlError::NonFiniteParameters { episode: e, index });
        }
        for (t, &ret) in returns.iter().enumerate() {
            match baseline.get_mut(t) {
                Some(b) => *b += BASELINE_RATE * (ret - *b),
                None => baseline.push(ret),
            }
        }
    }
    Ok(TrainResult { policy, history })
}

/// Trailing moving average with the window shortened at the start.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}
