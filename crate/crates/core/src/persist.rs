//! JSON files for learned Q-tables and policies.
//!
//! A state is keyed by `{s, l, q, t}`: the MDP state name, the label bitmask
//! over the scenario's proposition order, the automaton state id and the
//! frontier bitmask. An action is `{kind: "move", action, target}` with the
//! MDP action name, or `{kind: "epsilon", target}`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::eldgba::FrontierMode;
use crate::error::{Error, Result};
use crate::label::LabelSet;
use crate::learning::{Policy, QTable, RewardConfig};
use crate::mdp::LabeledMdp;
use crate::product::{ExtendedAction, ProductState};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateKey {
    pub s: String,
    pub l: u32,
    pub q: usize,
    pub t: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ActionKey {
    Move { action: String, target: usize },
    Epsilon { target: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEntry {
    pub action: ActionKey,
    pub value: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QRow {
    pub state: StateKey,
    pub entries: Vec<QEntry>,
}

/// What was trained on, so a saved policy can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    /// Scenario path or `builtin:NAME`.
    pub scenario: String,
    /// Automaton override, if one was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub automaton: Option<String>,
    pub frontier: FrontierMode,
    pub r_acc: f64,
    pub beta: f64,
    pub gamma: f64,
    pub episodes: usize,
    pub tau: usize,
    pub seed: u64,
}

impl RunInfo {
    pub fn reward<R: Scalar>(&self) -> Result<RewardConfig<R>> {
        RewardConfig::new(R::lit(self.r_acc), R::lit(self.beta), R::lit(self.gamma))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub state: StateKey,
    pub action: ActionKey,
    pub utility: f64,
}

/// A trained greedy policy plus the full Q-table it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub version: u32,
    pub run: RunInfo,
    pub props: Vec<String>,
    pub policy: Vec<PolicyEntry>,
    pub qtable: Vec<QRow>,
}

fn f64_of<R: Scalar>(v: R) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

pub fn state_key<R: Scalar>(x: &ProductState, mdp: &LabeledMdp<R>) -> StateKey {
    StateKey { s: mdp.state_name(x.s).to_string(), l: x.l.bits(), q: x.q, t: x.t }
}

pub fn action_key<R: Scalar>(u: &ExtendedAction, mdp: &LabeledMdp<R>) -> ActionKey {
    match *u {
        ExtendedAction::Move { action, target } => {
            ActionKey::Move { action: mdp.action_name(action).to_string(), target }
        }
        ExtendedAction::Epsilon { target } => ActionKey::Epsilon { target },
    }
}

pub fn parse_state<R: Scalar>(k: &StateKey, mdp: &LabeledMdp<R>) -> Result<ProductState> {
    let s = mdp
        .state_by_name(&k.s)
        .ok_or_else(|| Error::Scenario(format!("unknown state `{}` in policy file", k.s)))?;
    Ok(ProductState { s, l: LabelSet(k.l), q: k.q, t: k.t })
}

pub fn parse_action<R: Scalar>(k: &ActionKey, mdp: &LabeledMdp<R>) -> Result<ExtendedAction> {
    match k {
        ActionKey::Move { action, target } => {
            let a = mdp
                .action_by_name(action)
                .ok_or_else(|| Error::Scenario(format!("unknown action `{action}` in policy file")))?;
            Ok(ExtendedAction::Move { action: a, target: *target })
        }
        ActionKey::Epsilon { target } => Ok(ExtendedAction::Epsilon { target: *target }),
    }
}

/// Rows sorted by state, so equal tables give equal files.
fn sorted_states(qt: &QTable<impl Scalar>) -> Vec<(usize, ProductState)> {
    let mut v: Vec<(usize, ProductState)> = qt.states().iter().copied().enumerate().collect();
    v.sort_by_key(|(_, x)| *x);
    v
}

impl PolicyFile {
    pub fn new<R: Scalar>(run: RunInfo, mdp: &LabeledMdp<R>, qt: &QTable<R>, policy: &Policy<R>) -> Self {
        let mut rows = Vec::with_capacity(qt.len());
        let mut entries = Vec::new();
        for (row, x) in sorted_states(qt) {
            let state = state_key(&x, mdp);
            rows.push(QRow {
                state: state.clone(),
                entries: qt
                    .row_actions(row)
                    .iter()
                    .zip(qt.row_values(row))
                    .zip(qt.row_counts(row))
                    .map(|((u, v), c)| QEntry { action: action_key(u, mdp), value: f64_of(*v), count: *c })
                    .collect(),
            });
            if let Some(u) = policy.actions.get(&x) {
                entries.push(PolicyEntry { state, action: action_key(u, mdp), utility: f64_of(policy.utility(&x)) });
            }
        }
        PolicyFile { version: FORMAT_VERSION, run, props: mdp.props().to_vec(), policy: entries, qtable: rows }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: PolicyFile = serde_json::from_str(text).map_err(|e| Error::Scenario(format!("policy file: {e}")))?;
        if f.version != FORMAT_VERSION {
            return Err(Error::Scenario(format!("unsupported policy file version {}", f.version)));
        }
        Ok(f)
    }

    fn check_props<R: Scalar>(&self, mdp: &LabeledMdp<R>) -> Result<()> {
        if self.props != mdp.props() {
            return Err(Error::ApMismatch(format!(
                "policy file propositions {:?} differ from the scenario's {:?}",
                self.props,
                mdp.props()
            )));
        }
        Ok(())
    }

    pub fn policy<R: Scalar>(&self, mdp: &LabeledMdp<R>) -> Result<Policy<R>> {
        self.check_props(mdp)?;
        let mut actions = HashMap::new();
        let mut utility = HashMap::new();
        for e in &self.policy {
            let x = parse_state(&e.state, mdp)?;
            actions.insert(x, parse_action(&e.action, mdp)?);
            utility.insert(x, R::lit(e.utility));
        }
        Ok(Policy { actions, utility })
    }

    pub fn qtable<R: Scalar>(&self, mdp: &LabeledMdp<R>) -> Result<QTable<R>> {
        self.check_props(mdp)?;
        let mut qt = QTable::new();
        for row in &self.qtable {
            let x = parse_state(&row.state, mdp)?;
            let mut acts = Vec::with_capacity(row.entries.len());
            for e in &row.entries {
                acts.push((parse_action(&e.action, mdp)?, R::lit(e.value), e.count));
            }
            qt.restore_row(x, acts)?;
        }
        Ok(qt)
    }
}
