//! Scenario files: a workspace, its label distributions, the task automaton
//! and default learning parameters, stored as TOML.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::automaton::{infer_limit_deterministic, Gba, HoaAutomaton, Ldgba};
use crate::error::{Error, Result};
use crate::label::LabelSet;
use crate::learning::{RewardConfig, StartMode};
use crate::mdp::{LabeledMdp, LabeledMdpBuilder};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

/// Grid move probabilities: the intended cell, and each of the two diagonal
/// drifts of a turn.
const GRID_SUCCESS: f64 = 0.9;
const GRID_DRIFT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "schema_version")]
    pub version: u32,
    pub props: Vec<String>,
    pub workspace: Workspace,
    #[serde(default)]
    pub labels: Vec<CellLabels>,
    pub automaton: AutomatonRef,
    #[serde(default)]
    pub reward: RewardDefaults,
    #[serde(default)]
    pub episodes: EpisodeDefaults,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Workspace {
    /// Cells named `r{row}c{col}`, row 0 at the top. Actions FR (north),
    /// BK (south), TL (west), TR (east) and ST.
    Grid { rows: usize, cols: usize, initial: String },
    /// Named regions with undirected links. `to:<region>` reaches the
    /// neighbor with probability `success`; the rest is spread evenly over
    /// the other neighbors.
    Regions {
        regions: Vec<String>,
        links: Vec<[String; 2]>,
        #[serde(default = "default_success")]
        success: f64,
        initial: String,
    },
    /// Arbitrary states and actions.
    Explicit { states: Vec<String>, initial: String, transitions: Vec<ExplicitMove> },
}

fn default_success() -> f64 {
    GRID_SUCCESS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitMove {
    pub from: String,
    pub action: String,
    pub to: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub state: String,
    pub p: f64,
}

/// Label distribution of one cell. Mass not listed goes to the empty label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLabels {
    pub cell: String,
    pub dist: Vec<LabelProb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelProb {
    pub props: Vec<String>,
    pub p: f64,
}

/// `file` is a path relative to the scenario file, or `builtin:<name>`.
/// ε-edges and the deterministic part are given as HOA state ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutomatonRef {
    pub file: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilon: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deterministic: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardDefaults {
    pub r_acc: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for RewardDefaults {
    fn default() -> Self {
        Self { r_acc: 10.0, beta: 8.0, gamma: 0.999 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDefaults {
    pub episodes: usize,
    pub tau: usize,
    #[serde(default)]
    pub start: StartMode,
}

impl Default for EpisodeDefaults {
    fn default() -> Self {
        Self { episodes: 100_000, tau: 100, start: StartMode::Random }
    }
}

/// A scenario with its model and automaton built.
#[derive(Debug, Clone)]
pub struct Instance<R> {
    pub scenario: Scenario,
    pub mdp: LabeledMdp<R>,
    pub ldgba: Ldgba,
}

pub fn cell_name(row: usize, col: usize) -> String {
    format!("r{row}c{col}")
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        if sc.version != SCHEMA_VERSION {
            return Err(bad(format!("unsupported schema version {}", sc.version)));
        }
        Ok(sc)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| bad(e.to_string()))
    }

    /// Reads a scenario file, or a built-in one given as `builtin:<name>`.
    /// Returns the directory that relative automaton paths resolve against.
    pub fn load(path: &str) -> Result<(Self, Option<PathBuf>)> {
        if let Some(name) = path.strip_prefix("builtin:") {
            let sc = builtin_scenario(name).ok_or_else(|| bad(format!("no built-in scenario {name:?}")))?;
            return Ok((sc, None));
        }
        let text = std::fs::read_to_string(path)?;
        let base = Path::new(path).parent().map(Path::to_path_buf);
        Ok((Self::from_toml(&text)?, base))
    }

    pub fn state_names(&self) -> Vec<String> {
        match &self.workspace {
            Workspace::Grid { rows, cols, .. } => {
                (0..*rows).flat_map(|r| (0..*cols).map(move |c| cell_name(r, c))).collect()
            }
            Workspace::Regions { regions, .. } => regions.clone(),
            Workspace::Explicit { states, .. } => states.clone(),
        }
    }

    fn label_set(&self, props: &[String]) -> Result<LabelSet> {
        let mut l = LabelSet::EMPTY;
        for p in props {
            let i = self.props.iter().position(|q| q == p).ok_or_else(|| bad(format!("undeclared proposition {p:?}")))?;
            l = l.with(i);
        }
        Ok(l)
    }

    /// Builds the labeled MDP of the workspace.
    pub fn build_mdp<R: Scalar>(&self) -> Result<LabeledMdp<R>> {
        if self.props.len() > 32 {
            return Err(Error::AlphabetTooLarge(self.props.len()));
        }
        let names = self.state_names();
        if names.is_empty() {
            return Err(bad("workspace has no states"));
        }
        let mut index = BTreeMap::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(bad(format!("duplicate state {n:?}")));
            }
        }
        let lookup = |n: &str| index.get(n).copied().ok_or_else(|| bad(format!("unknown state {n:?}")));
        let mut b = LabeledMdpBuilder::<R>::new(self.props.clone());
        for n in &names {
            b.add_state(n.clone());
        }
        let lit = R::lit;
        let initial = match &self.workspace {
            Workspace::Grid { rows, cols, initial } => {
                if *rows == 0 || *cols == 0 {
                    return Err(bad("grid needs at least one row and one column"));
                }
                let acts = ["FR", "BK", "TL", "TR", "ST"].map(|a| b.action(a));
                for r in 0..*rows {
                    for c in 0..*cols {
                        let s = r * cols + c;
                        for (k, &a) in acts.iter().enumerate() {
                            let dist = grid_kernel(r, c, *rows, *cols, k)
                                .into_iter()
                                .map(|((r2, c2), p)| (r2 * cols + c2, lit(p)))
                                .collect();
                            b.transition(s, a, dist);
                        }
                    }
                }
                initial
            }
            Workspace::Regions { regions, links, success, initial } => {
                if !(0.0..=1.0).contains(success) {
                    return Err(bad(format!("success probability {success} outside [0, 1]")));
                }
                let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); regions.len()];
                for [x, y] in links {
                    let (i, j) = (lookup(x)?, lookup(y)?);
                    if i == j {
                        return Err(bad(format!("region {x:?} linked to itself")));
                    }
                    adj[i].insert(j);
                    adj[j].insert(i);
                }
                let stay = b.action("stay");
                for (i, nb) in adj.iter().enumerate() {
                    b.transition(i, stay, vec![(i, R::one())]);
                    for &j in nb {
                        let a = b.action(&format!("to:{}", regions[j]));
                        let others: Vec<usize> = nb.iter().copied().filter(|&k| k != j).collect();
                        let mut dist = vec![(j, lit(*success))];
                        if others.is_empty() {
                            dist.push((i, lit(1.0 - success)));
                        } else {
                            let share = (1.0 - success) / others.len() as f64;
                            dist.extend(others.iter().map(|&k| (k, lit(share))));
                        }
                        b.transition(i, a, dist);
                    }
                }
                initial
            }
            Workspace::Explicit { initial, transitions, .. } => {
                for m in transitions {
                    let s = lookup(&m.from)?;
                    let a = b.action(&m.action);
                    let dist = m.to.iter().map(|o| Ok((lookup(&o.state)?, lit(o.p)))).collect::<Result<Vec<_>>>()?;
                    b.transition(s, a, dist);
                }
                initial
            }
        };
        let mut seen = BTreeSet::new();
        for cl in &self.labels {
            let s = lookup(&cl.cell)?;
            if !seen.insert(s) {
                return Err(bad(format!("labels for {:?} given twice", cl.cell)));
            }
            let mut dist = Vec::new();
            let mut total = 0.0;
            for lp in &cl.dist {
                if !(0.0..=1.0).contains(&lp.p) {
                    return Err(bad(format!("label probability {} at {:?} outside [0, 1]", lp.p, cl.cell)));
                }
                total += lp.p;
                dist.push((self.label_set(&lp.props)?, lit(lp.p)));
            }
            if total > 1.0 + 1e-9 {
                return Err(bad(format!("label probabilities at {:?} sum to {total}", cl.cell)));
            }
            if total < 1.0 {
                dist.push((LabelSet::EMPTY, lit(1.0 - total)));
            }
            b.labels(s, dist);
        }
        b.initial(lookup(initial)?, None);
        b.build()
    }

    /// Reads, re-expresses over the scenario propositions and checks the task automaton.
    pub fn load_automaton(&self, base: Option<&Path>) -> Result<Ldgba> {
        let text = match self.automaton.file.strip_prefix("builtin:") {
            Some(name) => builtin_automaton(name).ok_or_else(|| bad(format!("no built-in automaton {name:?}")))?.to_string(),
            None => {
                let path = match base {
                    Some(dir) => dir.join(&self.automaton.file),
                    None => PathBuf::from(&self.automaton.file),
                };
                // Built-in scenarios name their automata like the bundled files.
                let bundled = || {
                    let stem = Path::new(&self.automaton.file).file_stem()?.to_str()?;
                    builtin_automaton(stem)
                };
                match std::fs::read_to_string(&path) {
                    Ok(text) => text,
                    Err(e) if base.is_none() && e.kind() == std::io::ErrorKind::NotFound => {
                        bundled().ok_or(e)?.to_string()
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        };
        let hoa = HoaAutomaton::parse(&text)?.with_props(&self.props)?;
        let eps: Vec<(usize, usize)> = self.automaton.epsilon.iter().map(|&[a, b]| (a, b)).collect();
        let gba = Gba::from_hoa(&hoa, &eps)?;
        match &self.automaton.deterministic {
            None => infer_limit_deterministic(gba),
            Some(origins) => {
                let q_d: Vec<usize> = (0..gba.num_states()).filter(|&q| origins.contains(&gba.origin(q))).collect();
                Ldgba::with_partition(gba, &q_d)
            }
        }
    }

    pub fn instantiate<R: Scalar>(&self, base: Option<&Path>) -> Result<Instance<R>> {
        Ok(Instance { scenario: self.clone(), mdp: self.build_mdp()?, ldgba: self.load_automaton(base)? })
    }

    pub fn reward_config<R: Scalar>(&self) -> Result<RewardConfig<R>> {
        RewardConfig::new(R::lit(self.reward.r_acc), R::lit(self.reward.beta), R::lit(self.reward.gamma))
    }
}

/// Outcome distribution of grid action `k` (FR, BK, TL, TR, ST) from `(r, c)`.
/// Forward and backward moves stay put on failure; turns drift to the
/// diagonal cells. Coordinates are clamped to the grid.
pub fn grid_kernel(r: usize, c: usize, rows: usize, cols: usize, k: usize) -> Vec<((usize, usize), f64)> {
    let step = |dr: isize, dc: isize| {
        let r2 = (r as isize + dr).clamp(0, rows as isize - 1);
        let c2 = (c as isize + dc).clamp(0, cols as isize - 1);
        (r2 as usize, c2 as usize)
    };
    let fail = 1.0 - GRID_SUCCESS;
    match k {
        0 => vec![(step(-1, 0), GRID_SUCCESS), ((r, c), fail)],
        1 => vec![(step(1, 0), GRID_SUCCESS), ((r, c), fail)],
        2 => vec![(step(0, -1), GRID_SUCCESS), (step(-1, -1), GRID_DRIFT), (step(1, -1), GRID_DRIFT)],
        3 => vec![(step(0, 1), GRID_SUCCESS), (step(-1, 1), GRID_DRIFT), (step(1, 1), GRID_DRIFT)],
        _ => vec![((r, c), 1.0)],
    }
}

const HOA_FIXTURES: &[(&str, &str)] = &[
    ("gfa_gfb", include_str!("../fixtures/gfa_gfb.hoa")),
    ("case1", include_str!("../fixtures/case1.hoa")),
    ("case2", include_str!("../fixtures/case2.hoa")),
    ("case3", include_str!("../fixtures/case3.hoa")),
    ("office", include_str!("../fixtures/office.hoa")),
];

const SCENARIO_FIXTURES: &[(&str, &str)] = &[
    ("fig1", include_str!("../fixtures/fig1.toml")),
    ("case1", include_str!("../fixtures/case1.toml")),
    ("case2", include_str!("../fixtures/case2.toml")),
    ("case3-low", include_str!("../fixtures/case3-low.toml")),
    ("case3-high", include_str!("../fixtures/case3-high.toml")),
    ("office-open", include_str!("../fixtures/office-open.toml")),
    ("office-closed", include_str!("../fixtures/office-closed.toml")),
];

pub fn builtin_automaton(name: &str) -> Option<&'static str> {
    HOA_FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Names accepted by [`builtin_scenario`], including the scaled surveillance
/// grids `grid15`, `grid25` and `grid40`.
pub fn builtin_names() -> Vec<String> {
    let mut v: Vec<String> = SCENARIO_FIXTURES.iter().map(|(n, _)| n.to_string()).collect();
    v.extend(SCALED_SIZES.iter().map(|n| format!("grid{n}")));
    v
}

pub const SCALED_SIZES: [usize; 3] = [15, 25, 40];

pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    if let Some(n) = name.strip_prefix("grid").and_then(|n| n.parse::<usize>().ok()) {
        return (n >= 5).then(|| surveillance_grid(n));
    }
    let text = SCENARIO_FIXTURES.iter().find(|(n, _)| *n == name)?.1;
    Some(Scenario::from_toml(text).expect("built-in scenario parses"))
}

/// An n×n version of the surveillance grid: three adjacent full-height base
/// columns in the middle, and likely obstacles in the corners. Needs `n >= 3`.
pub fn surveillance_grid(n: usize) -> Scenario {
    assert!(n >= 3, "grid side {n} is too small for three base columns");
    let mid = n / 2;
    let mut labels = vec![obstacle(0, 0, 0.2), obstacle(0, n - 1, 0.3)];
    for r in 0..n {
        for j in 0..3 {
            labels.push(CellLabels {
                cell: cell_name(r, mid - 1 + j),
                dist: vec![LabelProb { props: vec![format!("Base{}", j + 1)], p: 1.0 }],
            });
        }
    }
    labels.push(obstacle(n - 1, n - 1, 0.2));
    Scenario {
        name: format!("surveillance-{n}x{n}"),
        version: SCHEMA_VERSION,
        props: ["Base1", "Base2", "Base3", "Obs"].map(String::from).to_vec(),
        workspace: Workspace::Grid { rows: n, cols: n, initial: cell_name(mid, mid - 1) },
        labels,
        automaton: AutomatonRef { file: "builtin:case1".into(), epsilon: Vec::new(), deterministic: None },
        reward: RewardDefaults::default(),
        episodes: EpisodeDefaults::default(),
    }
}

fn obstacle(r: usize, c: usize, p: f64) -> CellLabels {
    CellLabels { cell: cell_name(r, c), dist: vec![LabelProb { props: vec!["Obs".into()], p }] }
}
