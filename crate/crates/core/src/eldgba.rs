//! Frontier-tracking runtime state over an LDGBA.
//!
//! The frontier `T` is a bitmask of accepting-set indices not yet visited in
//! the current round. When a round completes `T` is left empty and the next
//! accepting visit restarts from the full set, so an empty frontier admits
//! every accepting state.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::automaton::{AutState, Gba};
use crate::graph::tarjan_scc;
use crate::label::LabelSet;

/// Bitmask over accepting-set indices.
pub type Frontier = u32;

/// Whether admissibility and frontier updates are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontierMode {
    #[default]
    Tracking,
    /// Ablation: every successor is admitted and `T` stays full.
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ELdgbaState {
    pub q: AutState,
    pub t: Frontier,
}

impl ELdgbaState {
    pub fn initial(g: &Gba) -> Self {
        ELdgbaState { q: g.initial(), t: g.full_sets() }
    }
}

/// Frontier after landing in a state with set membership `membership`.
pub fn update_frontier(membership: u32, t: Frontier, full: u32) -> Frontier {
    if membership == 0 {
        t
    } else if t == 0 {
        full & !membership
    } else {
        t & !membership
    }
}

/// A state is admitted if it is not accepting or belongs to a set still in
/// the frontier.
pub fn admissible(membership: u32, t: Frontier, full: u32) -> bool {
    let effective = if t == 0 { full } else { t };
    membership == 0 || membership & effective != 0
}

/// Moves to `target` if admitted, updating the frontier.
pub fn advance(g: &Gba, es: ELdgbaState, target: AutState, mode: FrontierMode) -> Option<ELdgbaState> {
    match mode {
        FrontierMode::Disabled => Some(ELdgbaState { q: target, t: es.t }),
        FrontierMode::Tracking => {
            let m = g.membership(target);
            let full = g.full_sets();
            admissible(m, es.t, full).then(|| ELdgbaState { q: target, t: update_frontier(m, es.t, full) })
        }
    }
}

/// Whether some cycle of E-LDGBA states reachable from the start meets
/// every accepting set when letters are ignored, i.e. whether a relaxed
/// product over any MDP can complete rounds forever.
pub fn has_accepting_cycle(g: &Gba) -> bool {
    let mut index: HashMap<ELdgbaState, usize> = HashMap::new();
    let mut states = vec![ELdgbaState::initial(g)];
    index.insert(states[0], 0);
    let mut adj: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let es = states[i];
        let mut out = Vec::new();
        let targets = g.targets(es.q).iter().map(|(t, _)| *t).chain(g.epsilon(es.q).iter().copied());
        for t in targets {
            if let Some(next) = advance(g, es, t, FrontierMode::Tracking) {
                let j = *index.entry(next).or_insert_with(|| {
                    states.push(next);
                    states.len() - 1
                });
                out.push(j);
            }
        }
        adj.push(out);
        i += 1;
    }
    tarjan_scc(&adj).iter().any(|scc| {
        let cyclic = scc.len() > 1 || adj[scc[0]].contains(&scc[0]);
        let sets = scc.iter().fold(0, |m, &k| m | g.membership(states[k].q));
        cyclic && sets == g.full_sets()
    })
}

/// One step on letter `l`. When `q` has several successors the lowest one
/// is taken; `None` means the step is blocked.
pub fn e_step(g: &Gba, es: ELdgbaState, l: LabelSet) -> Option<ELdgbaState> {
    let target = *g.successors(es.q, l).first()?;
    advance(g, es, target, FrontierMode::Tracking)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub states: Vec<ELdgbaState>,
    /// Number of times the frontier emptied.
    pub rounds: usize,
    pub blocked: bool,
}

/// Reads up to `len` letters from `letters`, stopping at the first blocked
/// step or when the source runs dry.
pub fn generate_run<I>(g: &Gba, letters: I, len: usize) -> Run
where
    I: IntoIterator<Item = LabelSet>,
{
    let mut es = ELdgbaState::initial(g);
    let mut run = Run { states: vec![es], rounds: 0, blocked: false };
    for l in letters.into_iter().take(len) {
        match e_step(g, es, l) {
            Some(next) => {
                if next.t == 0 && (es.t != 0 || g.is_accepting(next.q)) {
                    run.rounds += 1;
                }
                es = next;
                run.states.push(es);
            }
            None => {
                run.blocked = true;
                break;
            }
        }
    }
    run
}

/// Decides whether some admissible run over `prefix · cycle^ω`, ε-moves
/// included, visits every accepting set infinitely often.
pub fn eldgba_lasso_accepted(g: &Gba, prefix: &[LabelSet], cycle: &[LabelSet]) -> bool {
    assert!(!cycle.is_empty(), "lasso cycle must be nonempty");
    let p = prefix.len();
    let len = p + cycle.len();
    let letter = |pos: usize| if pos < p { prefix[pos] } else { cycle[pos - p] };
    let next_pos = |pos: usize| if pos + 1 < len { pos + 1 } else { p };

    let mut index = std::collections::HashMap::new();
    let mut nodes: Vec<(ELdgbaState, usize)> = Vec::new();
    let mut adj: Vec<Vec<(usize, bool)>> = Vec::new();
    let start = (ELdgbaState::initial(g), 0usize);
    index.insert(start, 0usize);
    nodes.push(start);
    adj.push(Vec::new());
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        let (es, pos) = nodes[v];
        let mut succ = Vec::new();
        for t in g.successors(es.q, letter(pos)) {
            if let Some(n) = advance(g, es, t, FrontierMode::Tracking) {
                succ.push(((n, next_pos(pos)), true));
            }
        }
        for &t in g.epsilon(es.q) {
            if let Some(n) = advance(g, es, t, FrontierMode::Tracking) {
                succ.push(((n, pos), false));
            }
        }
        for (key, consumes) in succ {
            let w = *index.entry(key).or_insert_with(|| {
                nodes.push(key);
                adj.push(Vec::new());
                stack.push(nodes.len() - 1);
                nodes.len() - 1
            });
            adj[v].push((w, consumes));
        }
    }
    let plain: Vec<Vec<usize>> = adj.iter().map(|o| o.iter().map(|&(w, _)| w).collect()).collect();
    let comps = tarjan_scc(&plain);
    let mut comp_of = vec![0; nodes.len()];
    for (i, c) in comps.iter().enumerate() {
        for &v in c {
            comp_of[v] = i;
        }
    }
    let full = g.full_sets();
    comps.iter().enumerate().any(|(i, c)| {
        let consumes = c.iter().any(|&v| adj[v].iter().any(|&(w, cons)| cons && comp_of[w] == i));
        let sets = c.iter().fold(0u32, |acc, &v| acc | g.membership(nodes[v].0.q));
        consumes && sets == full
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::parse_hoa;

    const GFA_GFB: &str = r#"HOA: v1
States: 1
Start: 0
AP: 2 "a" "b"
Acceptance: 2 Inf(0)&Inf(1)
--BODY--
State: 0
[0 & 1] 0 {0 1}
[0 & !1] 0 {0}
[!0 & 1] 0 {1}
[!0 & !1] 0
--END--
"#;

    #[test]
    fn frontier_update_cases() {
        let full = 0b111;
        assert_eq!(update_frontier(0b001, 0b111, full), 0b110);
        assert_eq!(update_frontier(0, 0b101, full), 0b101);
        assert_eq!(update_frontier(0b010, 0, full), 0b101);
        assert_eq!(update_frontier(0b011, 0b111, full), 0b100);
        let seq = update_frontier(0b010, update_frontier(0b001, 0b111, full), full);
        assert_eq!(seq, 0b100);
    }

    #[test]
    fn step_blocks_repeated_set() {
        let g = parse_hoa(GFA_GFB).unwrap();
        let a = LabelSet(1);
        let s0 = ELdgbaState::initial(&g);
        let s1 = e_step(&g, s0, a).unwrap();
        assert_eq!(s1.t, 0b10);
        assert_eq!(e_step(&g, s1, a), None);
        let s2 = e_step(&g, s1, LabelSet::EMPTY).unwrap();
        assert_eq!(s2.t, 0b10);
    }

    #[test]
    fn runs_count_rounds() {
        let g = parse_hoa(GFA_GFB).unwrap();
        assert_eq!(generate_run(&g, std::iter::empty(), 0).states, vec![ELdgbaState::initial(&g)]);
        let alt = [LabelSet(1), LabelSet(2)].into_iter().cycle();
        let run = generate_run(&g, alt, 6);
        assert_eq!(run.rounds, 3);
        assert_eq!(run.states.len(), 7);
        let quiet = generate_run(&g, std::iter::repeat(LabelSet::EMPTY), 20);
        assert!(quiet.states.iter().all(|s| s.q == g.initial() && s.t == g.full_sets()));
        assert!(!quiet.blocked);
    }

    #[test]
    fn lasso_on_alternating_letters() {
        let g = parse_hoa(GFA_GFB).unwrap();
        assert!(eldgba_lasso_accepted(&g, &[], &[LabelSet(1), LabelSet(2)]));
        assert!(!eldgba_lasso_accepted(&g, &[], &[LabelSet(1)]));
    }
}
