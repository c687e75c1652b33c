//! Reward design and tabular Q-learning over a product model.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eldgba::ELdgbaState;
use crate::error::{Error, Result};
use crate::product::{ExtendedAction, ProductModel, ProductState};
use crate::scalar::Scalar;

/// Accepting reward, violation weight and discount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig<R> {
    pub r_acc: R,
    pub beta: R,
    pub gamma: R,
}

impl<R: Scalar> RewardConfig<R> {
    pub fn new(r_acc: R, beta: R, gamma: R) -> Result<Self> {
        let cfg = RewardConfig { r_acc, beta, gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_acc > R::zero()) {
            return Err(Error::InvalidConfig(format!("r_acc must be positive, got {}", self.r_acc)));
        }
        if !(self.beta > R::zero()) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.gamma > R::zero() && self.gamma < R::one()) {
            return Err(Error::InvalidConfig(format!("gamma must lie in (0,1), got {}", self.gamma)));
        }
        Ok(())
    }
}

/// `r_acc` if the state lies in any accepting set.
pub fn accepting_reward<R: Scalar>(membership: u32, cfg: &RewardConfig<R>) -> R {
    if membership != 0 {
        cfg.r_acc
    } else {
        R::zero()
    }
}

/// Accepting reward of the current state minus the weighted violation cost.
pub fn immediate_reward<R: Scalar>(membership: u32, cost: u32, cfg: &RewardConfig<R>) -> R {
    accepting_reward(membership, cfg) - cfg.beta * R::from_u32(cost).expect("cost fits")
}

/// Q-values and visit counts. A row holds every action enabled at its state,
/// all starting at zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable<R> {
    index: HashMap<ProductState, usize>,
    states: Vec<ProductState>,
    actions: Vec<Vec<ExtendedAction>>,
    values: Vec<Vec<R>>,
    counts: Vec<Vec<u64>>,
}

impl<R: Scalar> QTable<R> {
    pub fn new() -> Self {
        QTable {
            index: HashMap::new(),
            states: Vec::new(),
            actions: Vec::new(),
            values: Vec::new(),
            counts: Vec::new(),
        }
    }

    /// Row of `x`, creating it from the model's action set if needed.
    pub fn row<M: ProductModel<R>>(&mut self, x: &ProductState, model: &M) -> usize {
        if let Some(&r) = self.index.get(x) {
            return r;
        }
        let acts = model.actions(x);
        self.insert_row(*x, acts)
    }

    fn insert_row(&mut self, x: ProductState, acts: Vec<ExtendedAction>) -> usize {
        let r = self.states.len();
        self.index.insert(x, r);
        self.states.push(x);
        self.values.push(vec![R::zero(); acts.len()]);
        self.counts.push(vec![0; acts.len()]);
        self.actions.push(acts);
        r
    }

    /// Adds a saved row. Actions must be distinct; they are stored in
    /// canonical order.
    pub fn restore_row(&mut self, x: ProductState, mut entries: Vec<(ExtendedAction, R, u64)>) -> Result<()> {
        if self.index.contains_key(&x) {
            return Err(Error::InvalidConfig(format!("duplicate Q-table row {x:?}")));
        }
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidConfig(format!("duplicate action in Q-table row {x:?}")));
        }
        let r = self.insert_row(x, entries.iter().map(|e| e.0).collect());
        for (k, (_, v, c)) in entries.into_iter().enumerate() {
            self.values[r][k] = v;
            self.counts[r][k] = c;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ProductState] {
        &self.states
    }

    pub fn row_of(&self, x: &ProductState) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn row_actions(&self, row: usize) -> &[ExtendedAction] {
        &self.actions[row]
    }

    pub fn row_values(&self, row: usize) -> &[R] {
        &self.values[row]
    }

    pub fn row_counts(&self, row: usize) -> &[u64] {
        &self.counts[row]
    }

    /// `Q(x,u)`, zero when unseen.
    pub fn get(&self, x: &ProductState, u: &ExtendedAction) -> R {
        self.slot(x, u).map_or_else(R::zero, |(r, k)| self.values[r][k])
    }

    pub fn count(&self, x: &ProductState, u: &ExtendedAction) -> u64 {
        self.slot(x, u).map_or(0, |(r, k)| self.counts[r][k])
    }

    fn slot(&self, x: &ProductState, u: &ExtendedAction) -> Option<(usize, usize)> {
        let r = *self.index.get(x)?;
        let k = self.actions[r].binary_search(u).ok()?;
        Some((r, k))
    }

    /// Overwrites `Q(x,u)`; the row must exist and contain `u`.
    pub fn set(&mut self, x: &ProductState, u: &ExtendedAction, value: R) -> Result<()> {
        let (r, k) = self.slot(x, u).ok_or_else(|| Error::InvalidAction(format!("{u:?} at {x:?}")))?;
        self.values[r][k] = value;
        Ok(())
    }

    /// Highest value in a row, zero for a row without actions.
    pub fn row_max(&self, row: usize) -> R {
        self.values[row].iter().copied().fold(None, |m: Option<R>, v| Some(m.map_or(v, |m| m.max(v)))).unwrap_or_else(R::zero)
    }

    /// Index of the first maximal entry of a row.
    pub fn row_argmax(&self, row: usize) -> Option<usize> {
        let vals = &self.values[row];
        let mut best: Option<usize> = None;
        for (k, v) in vals.iter().enumerate() {
            if best.is_none_or(|b| *v > vals[b]) {
                best = Some(k);
            }
        }
        best
    }

    fn update_slot(&mut self, row: usize, k: usize, r: R, next_max: R, gamma: R) {
        self.counts[row][k] += 1;
        let alpha = R::one() / R::from_u64(self.counts[row][k]).expect("count fits");
        let q = &mut self.values[row][k];
        *q = (R::one() - alpha) * *q + alpha * (r + gamma * next_max);
    }
}

/// One Q-learning update with `α = 1/Count(x,u)`.
pub fn q_update<R: Scalar, M: ProductModel<R>>(
    qt: &mut QTable<R>,
    model: &M,
    x: &ProductState,
    u: &ExtendedAction,
    r: R,
    x_next: &ProductState,
    gamma: R,
) -> Result<()> {
    let row = qt.row(x, model);
    let k = qt.actions[row]
        .binary_search(u)
        .map_err(|_| Error::InvalidAction(format!("{u:?} at {x:?}")))?;
    let next = qt.row(x_next, model);
    let next_max = qt.row_max(next);
    qt.update_slot(row, k, r, next_max, gamma);
    Ok(())
}

/// Greedy action and utility per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<R> {
    pub actions: HashMap<ProductState, ExtendedAction>,
    pub utility: HashMap<ProductState, R>,
}

impl<R: Scalar> Policy<R> {
    /// The stored action, or the first canonical action of the model at a
    /// state the policy has never seen (its Q-values all read as zero). The
    /// flag is false in the latter case.
    pub fn choose<M: ProductModel<R>>(&self, x: &ProductState, model: &M) -> Option<(ExtendedAction, bool)> {
        match self.actions.get(x) {
            Some(u) => Some((*u, true)),
            None => model.actions(x).first().map(|u| (*u, false)),
        }
    }

    pub fn utility(&self, x: &ProductState) -> R {
        self.utility.get(x).copied().unwrap_or_else(R::zero)
    }
}

/// Greedy policy over the table; ties go to the lowest canonical action.
pub fn extract_policy<R: Scalar>(qt: &QTable<R>) -> Policy<R> {
    let mut actions = HashMap::new();
    for (row, x) in qt.states.iter().enumerate() {
        if let Some(k) = qt.row_argmax(row) {
            actions.insert(*x, qt.actions[row][k]);
        }
    }
    Policy { actions, utility: extract_utility(qt) }
}

/// `U(x) = max_u Q(x,u)`.
pub fn extract_utility<R: Scalar>(qt: &QTable<R>) -> HashMap<ProductState, R> {
    qt.states.iter().enumerate().map(|(row, x)| (*x, qt.row_max(row))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    /// Every episode starts at the scenario's initial state.
    Fixed,
    /// Uniform MDP state, label drawn from its distribution.
    #[default]
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<R> {
    pub reward: RewardConfig<R>,
    pub episodes: usize,
    pub tau: usize,
    pub seed: u64,
    pub start: StartMode,
    /// Stop once the windowed mean reward has settled.
    pub stop_on_convergence: bool,
    pub window: usize,
}

impl<R: Scalar> TrainConfig<R> {
    pub fn new(reward: RewardConfig<R>, episodes: usize, tau: usize, seed: u64) -> Self {
        TrainConfig { reward, episodes, tau, seed, start: StartMode::Random, stop_on_convergence: false, window: 500 }
    }

    pub fn validate(&self) -> Result<()> {
        self.reward.validate()?;
        if self.episodes == 0 || self.tau == 0 || self.window == 0 {
            return Err(Error::InvalidConfig("episodes, tau and window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-episode rewards and their sliding-window mean.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub episode_reward: Vec<f64>,
    pub mean_reward: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub converged_at: Option<usize>,
}

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,mean_reward,epsilon\n");
        for (i, (m, e)) in self.mean_reward.iter().zip(&self.epsilon).enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, m, e));
        }
        out
    }
}

/// Detects a settled windowed mean: five consecutive window-to-window
/// changes below one percent.
#[derive(Debug, Clone)]
struct ConvergenceMonitor {
    window: usize,
    last_mean: Option<f64>,
    stable: usize,
}

impl ConvergenceMonitor {
    const REL_TOL: f64 = 0.01;
    const NEEDED: usize = 5;

    fn observe(&mut self, episode: usize, mean: f64) -> bool {
        if !episode.is_multiple_of(self.window) {
            return false;
        }
        if let Some(prev) = self.last_mean {
            let scale = prev.abs().max(1e-12);
            if (mean - prev).abs() < Self::REL_TOL * scale {
                self.stable += 1;
            } else {
                self.stable = 0;
            }
        }
        self.last_mean = Some(mean);
        self.stable >= Self::NEEDED
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<R> {
    pub qtable: QTable<R>,
    pub policy: Policy<R>,
    pub curve: LearningCurve,
    pub episodes_run: usize,
    pub updates: u64,
}

fn start_state<R: Scalar, M: ProductModel<R>, G: Rng>(model: &M, mode: StartMode, rng: &mut G) -> ProductState {
    match mode {
        StartMode::Fixed => model.initial(),
        StartMode::Random => {
            let mdp = model.mdp();
            let s = rng.gen_range(0..mdp.num_states());
            let l = mdp.sample_label(s, rng);
            let es = ELdgbaState::initial(model.ldgba());
            ProductState { s, l, q: es.q, t: es.t }
        }
    }
}

/// Q-learning with `ε = 1/episode` exploration and `α = 1/Count` steps.
/// Episodes last at most `tau` steps and end early at states without
/// actions.
pub fn train<R: Scalar, M: ProductModel<R>>(model: &M, cfg: &TrainConfig<R>) -> Result<TrainOutcome<R>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut qt = QTable::new();
    let mut curve = LearningCurve::default();
    let mut monitor = ConvergenceMonitor { window: cfg.window, last_mean: None, stable: 0 };
    let mut window_sum = 0.0;
    let mut updates = 0u64;
    let gamma = cfg.reward.gamma;
    let mut episodes_run = 0;

    for episode in 1..=cfg.episodes {
        let eps = 1.0 / episode as f64;
        let mut x = start_state(model, cfg.start, &mut rng);
        let mut row = qt.row(&x, model);
        let mut total = R::zero();
        for _ in 0..cfg.tau {
            let n = qt.actions[row].len();
            if n == 0 {
                break;
            }
            let k = if rng.gen::<f64>() < eps {
                rng.gen_range(0..n)
            } else {
                qt.row_argmax(row).expect("nonempty row")
            };
            let u = qt.actions[row][k];
            let (next, cost) = model.sample_step(&x, &u, &mut rng)?;
            let r = immediate_reward(model.membership(&x), cost, &cfg.reward);
            let next_row = qt.row(&next, model);
            let next_max = qt.row_max(next_row);
            qt.update_slot(row, k, r, next_max, gamma);
            updates += 1;
            total += r;
            x = next;
            row = next_row;
        }
        let total = total.to_f64().unwrap_or(f64::NAN);
        curve.episode_reward.push(total);
        window_sum += total;
        if episode > cfg.window {
            window_sum -= curve.episode_reward[episode - 1 - cfg.window];
        }
        let mean = window_sum / episode.min(cfg.window) as f64;
        curve.mean_reward.push(mean);
        curve.epsilon.push(eps);
        episodes_run = episode;
        if monitor.observe(episode, mean) && curve.converged_at.is_none() {
            curve.converged_at = Some(episode);
            if cfg.stop_on_convergence {
                break;
            }
        }
    }
    let policy = extract_policy(&qt);
    Ok(TrainOutcome { qtable: qt, policy, curve, episodes_run, updates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::LabelSet;

    fn cfg() -> RewardConfig<f64> {
        RewardConfig::new(10.0, 8.0, 0.999).unwrap()
    }

    #[test]
    fn rewards() {
        assert_eq!(accepting_reward(0b1, &cfg()), 10.0);
        assert_eq!(accepting_reward(0b11, &cfg()), 10.0);
        assert_eq!(accepting_reward(0, &cfg()), 0.0);
        assert_eq!(immediate_reward(0b1, 0, &cfg()), 10.0);
        assert_eq!(immediate_reward(0, 1, &cfg()), -8.0);
        assert_eq!(immediate_reward(0, 0, &cfg()), 0.0);
    }

    #[test]
    fn invalid_reward_configs() {
        assert!(RewardConfig::new(0.0, 1.0, 0.9).is_err());
        assert!(RewardConfig::new(1.0, -1.0, 0.9).is_err());
        assert!(RewardConfig::new(1.0, 1.0, 1.0).is_err());
        assert!(RewardConfig::new(1.0, 1.0, f64::NAN).is_err());
    }

    fn table_with_row(acts: Vec<ExtendedAction>) -> (QTable<f64>, ProductState) {
        let mut qt = QTable::new();
        let x = ProductState { s: 0, l: LabelSet::EMPTY, q: 0, t: 1 };
        qt.insert_row(x, acts);
        (qt, x)
    }

    #[test]
    fn update_arithmetic() {
        let u = ExtendedAction::Epsilon { target: 0 };
        let (mut qt, x) = table_with_row(vec![u]);
        qt.update_slot(0, 0, 10.0, 0.0, 0.5);
        assert_eq!(qt.get(&x, &u), 10.0);
        qt.update_slot(0, 0, 10.0, 10.0, 0.5);
        assert_eq!(qt.get(&x, &u), 12.5);
        assert_eq!(qt.count(&x, &u), 2);
    }

    #[test]
    fn argmax_ties_and_scaling() {
        let a = ExtendedAction::Move { action: 0, target: 0 };
        let b = ExtendedAction::Move { action: 1, target: 0 };
        let (mut qt, x) = table_with_row(vec![a, b]);
        assert_eq!(extract_policy(&qt).actions[&x], a);
        assert_eq!(extract_utility(&qt)[&x], 0.0);
        qt.set(&x, &a, 3.0).unwrap();
        qt.set(&x, &b, 3.0).unwrap();
        assert_eq!(extract_policy(&qt).actions[&x], a);
        qt.set(&x, &b, 4.0).unwrap();
        assert_eq!(extract_policy(&qt).actions[&x], b);
        qt.set(&x, &a, 3.0 * 7.5).unwrap();
        qt.set(&x, &b, 4.0 * 7.5).unwrap();
        assert_eq!(extract_policy(&qt).actions[&x], b);
    }

    #[test]
    fn convergence_monitor_needs_five_stable_windows() {
        let mut m = ConvergenceMonitor { window: 2, last_mean: None, stable: 0 };
        let mut hits = Vec::new();
        for ep in 1..=14 {
            if m.observe(ep, 100.0) {
                hits.push(ep);
            }
        }
        assert_eq!(hits.first(), Some(&12));
    }
}
