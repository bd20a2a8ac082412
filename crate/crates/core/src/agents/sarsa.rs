//! Tabular SARSA with ε-greedy exploration and multiplicative ε decay.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::qtable::QTable;
use crate::env::{ControlAction, StateObservation, ACTION_COUNT};
use crate::sim::{rng_stream, StreamId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UpdateRule {
    /// `Q + α(r + γQ' − Q)`.
    #[default]
    Standard,
    /// `(1 − α)Q + α(r + γQ' − Q)`, which subtracts `Q` twice.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SarsaParams {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    pub rule: UpdateRule,
}

impl Default for SarsaParams {
    fn default() -> Self {
        Self::throughput()
    }
}

impl SarsaParams {
    fn preset(lambda: f64) -> Self {
        Self {
            alpha: 0.2,
            gamma: 0.9,
            lambda,
            epsilon: 1.0,
            epsilon_decay: 0.99995,
            epsilon_floor: 0.01,
            rule: UpdateRule::Standard,
        }
    }

    /// λ = 0.8.
    pub fn throughput() -> Self {
        Self::preset(0.8)
    }

    /// λ = 0.5.
    pub fn balanced() -> Self {
        Self::preset(0.5)
    }

    /// λ = 0.2.
    pub fn energy() -> Self {
        Self::preset(0.2)
    }

    pub fn validate(&self) -> Result<(), String> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.alpha) || !unit(self.gamma) || !unit(self.epsilon) || !unit(self.epsilon_decay) {
            return Err("alpha, gamma, epsilon and epsilon decay must lie in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err("lambda must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon_floor) {
            return Err("epsilon floor must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// ε-greedy over `0..n_actions`: uniform with probability ε, else greedy
/// (lowest index on ties).
pub fn select_action<R: Rng + ?Sized>(q: &QTable, state: u32, n_actions: usize, epsilon: f64, rng: &mut R) -> u8 {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..n_actions as u8)
    } else {
        q.best_action(state, n_actions)
    }
}

/// One SARSA backup of `Q(s, a)` toward `r + γ·Q(s', a')`; `next = None` marks a terminal transition.
pub fn sarsa_update(
    q: &mut QTable,
    state: u32,
    action: u8,
    reward: f64,
    next: Option<(u32, u8)>,
    alpha: f64,
    gamma: f64,
    rule: UpdateRule,
) -> f64 {
    let old = q.get(state, action);
    let bootstrap = next.map_or(0.0, |(s, a)| q.get(s, a));
    let td = reward + gamma * bootstrap - old;
    let new = match rule {
        UpdateRule::Standard => old + alpha * td,
        UpdateRule::Printed => (1.0 - alpha) * old + alpha * td,
    };
    q.set(state, action, new);
    new
}

pub fn decay_epsilon(epsilon: f64, decay: f64, floor: f64) -> f64 {
    (epsilon * decay).max(floor)
}

/// SARSA learner over the link's state/action spaces.
#[derive(Debug, Clone)]
pub struct SarsaAgent {
    q: QTable,
    params: SarsaParams,
    epsilon: f64,
    rng: ChaCha8Rng,
}

impl SarsaAgent {
    pub fn new(params: SarsaParams, seed: u64) -> Self {
        Self::with_table(QTable::new(), params, seed)
    }

    pub fn with_table(q: QTable, params: SarsaParams, seed: u64) -> Self {
        Self { q, epsilon: params.epsilon, params, rng: rng_stream(seed, StreamId::Exploration) }
    }

    pub fn act(&mut self, s: &StateObservation) -> ControlAction {
        let a = select_action(&self.q, s.index(), ACTION_COUNT, self.epsilon, &mut self.rng);
        ControlAction::from_index(a as usize).expect("action in range")
    }

    pub fn greedy(&self, s: &StateObservation) -> ControlAction {
        ControlAction::from_index(self.q.best_action(s.index(), ACTION_COUNT) as usize).expect("action in range")
    }

    pub fn learn(
        &mut self,
        s: &StateObservation,
        a: ControlAction,
        r: f64,
        next: Option<(&StateObservation, ControlAction)>,
    ) -> f64 {
        sarsa_update(
            &mut self.q,
            s.index(),
            a.index() as u8,
            r,
            next.map(|(ns, na)| (ns.index(), na.index() as u8)),
            self.params.alpha,
            self.params.gamma,
            self.params.rule,
        )
    }

    pub fn decay(&mut self) {
        self.epsilon = decay_epsilon(self.epsilon, self.params.epsilon_decay, self.params.epsilon_floor);
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
    }

    pub fn params(&self) -> &SarsaParams {
        &self.params
    }

    pub fn table(&self) -> &QTable {
        &self.q
    }

    pub fn into_table(self) -> QTable {
        self.q
    }
}
