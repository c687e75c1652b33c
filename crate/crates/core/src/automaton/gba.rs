use std::collections::{BTreeMap, HashMap, VecDeque};
use std::ops::Deref;

use crate::automaton::guard::{Guard, MAX_ENUMERABLE_PROPS};
use crate::automaton::hoa::HoaAutomaton;
use crate::error::{Error, LimitDeterminismClause, Result};
use crate::graph::tarjan_scc;
use crate::label::LabelSet;

/// Automaton state id.
pub type AutState = usize;

/// Largest number of accepting sets a [`Gba`] may carry.
pub const MAX_SETS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub guard: Guard,
    pub target: AutState,
}

/// State-based generalized Büchi automaton with optional ε-edges.
#[derive(Debug, Clone)]
pub struct Gba {
    props: Vec<String>,
    names: Vec<String>,
    origin: Vec<usize>,
    edges: Vec<Vec<Edge>>,
    epsilon: Vec<Vec<AutState>>,
    initial: AutState,
    num_sets: usize,
    membership: Vec<u32>,
    // distinct letter successors of each state with their enabling letters
    targets: Vec<Vec<(AutState, Vec<LabelSet>)>>,
}

impl Gba {
    /// Builds an automaton. `accepting[i]` lists the states of `F_i`.
    pub fn new(
        props: Vec<String>,
        names: Vec<String>,
        edges: Vec<Vec<Edge>>,
        epsilon: Vec<Vec<AutState>>,
        initial: AutState,
        accepting: &[Vec<AutState>],
    ) -> Result<Self> {
        let n = names.len();
        let mut membership = vec![0u32; n];
        for (i, set) in accepting.iter().enumerate() {
            for &q in set {
                if q >= n {
                    return Err(Error::UnknownState(q));
                }
                membership[q] |= 1 << i;
            }
        }
        Self::with_membership(props, names, edges, epsilon, initial, accepting.len(), membership)
    }

    fn with_membership(
        props: Vec<String>,
        names: Vec<String>,
        edges: Vec<Vec<Edge>>,
        mut epsilon: Vec<Vec<AutState>>,
        initial: AutState,
        num_sets: usize,
        membership: Vec<u32>,
    ) -> Result<Self> {
        let n = names.len();
        if props.len() > MAX_ENUMERABLE_PROPS {
            return Err(Error::AlphabetTooLarge(props.len()));
        }
        if num_sets == 0 {
            return Err(Error::UnsupportedAcceptance("at least one accepting set is required".into()));
        }
        if num_sets > MAX_SETS {
            return Err(Error::UnsupportedAcceptance(format!("{num_sets} accepting sets exceed {MAX_SETS}")));
        }
        if edges.len() != n || epsilon.len() != n || membership.len() != n {
            return Err(Error::InvalidModel("state tables disagree in length".into()));
        }
        if initial >= n {
            return Err(Error::UnknownState(initial));
        }
        for i in 0..num_sets {
            if !membership.iter().any(|m| m & (1 << i) != 0) {
                return Err(Error::UnsupportedAcceptance(format!("accepting set {i} is empty")));
            }
        }
        for e in edges.iter().flatten() {
            if e.target >= n {
                return Err(Error::UnknownState(e.target));
            }
            if let Some(m) = e.guard.max_atom() {
                if m >= props.len() {
                    return Err(Error::ApMismatch(format!("guard uses proposition {m} of {}", props.len())));
                }
            }
        }
        for eps in &mut epsilon {
            eps.sort_unstable();
            eps.dedup();
            if let Some(&t) = eps.iter().find(|&&t| t >= n) {
                return Err(Error::UnknownState(t));
            }
        }
        let np = props.len();
        let mut targets = Vec::with_capacity(n);
        for out in &edges {
            let mut by_target: BTreeMap<AutState, Vec<LabelSet>> = BTreeMap::new();
            for e in out {
                let letters = e.guard.letters(np)?;
                if !letters.is_empty() {
                    by_target.entry(e.target).or_default().extend(letters);
                }
            }
            targets.push(
                by_target
                    .into_iter()
                    .map(|(t, mut ls)| {
                        ls.sort_unstable();
                        ls.dedup();
                        (t, ls)
                    })
                    .collect(),
            );
        }
        Ok(Gba { props, origin: (0..n).collect(), names, edges, epsilon, initial, num_sets, membership, targets })
    }

    /// Converts a parsed HOA automaton, adding the given ε-edges between HOA
    /// state ids. Edge marks are moved onto states by splitting each HOA
    /// state into one copy per set of incoming marks; only copies reachable
    /// from the start are kept, and each remembers its HOA state as origin.
    pub fn from_hoa(hoa: &HoaAutomaton, epsilon: &[(usize, usize)]) -> Result<Self> {
        let n = hoa.states.len();
        for &(a, b) in epsilon {
            if a >= n || b >= n {
                return Err(Error::UnknownState(a.max(b)));
            }
        }
        if hoa.num_sets > MAX_SETS {
            return Err(Error::UnsupportedAcceptance(format!("{} accepting sets exceed {MAX_SETS}", hoa.num_sets)));
        }
        let bits = |marks: &[usize]| marks.iter().fold(0u32, |acc, &m| acc | 1 << m);
        let name_of = |id: usize| hoa.states[id].name.clone().unwrap_or_else(|| id.to_string());

        if !hoa.has_edge_marks() {
            let names = (0..n).map(name_of).collect();
            let edges = hoa
                .states
                .iter()
                .map(|s| s.edges.iter().map(|e| Edge { guard: e.guard.clone(), target: e.target }).collect())
                .collect();
            let mut eps = vec![Vec::new(); n];
            for &(a, b) in epsilon {
                eps[a].push(b);
            }
            let membership = hoa.states.iter().map(|s| bits(&s.marks)).collect();
            return Self::with_membership(
                hoa.aps.clone(),
                names,
                edges,
                eps,
                hoa.start,
                hoa.num_sets,
                membership,
            );
        }

        let mut index: HashMap<(usize, u32), usize> = HashMap::new();
        let mut copies: Vec<(usize, u32)> = Vec::new();
        let mut queue = VecDeque::new();
        let mut intern = |key: (usize, u32), copies: &mut Vec<(usize, u32)>, queue: &mut VecDeque<usize>| {
            *index.entry(key).or_insert_with(|| {
                copies.push(key);
                queue.push_back(copies.len() - 1);
                copies.len() - 1
            })
        };
        intern((hoa.start, 0), &mut copies, &mut queue);
        let mut edges: Vec<Vec<Edge>> = Vec::new();
        let mut eps: Vec<Vec<usize>> = Vec::new();
        while let Some(c) = queue.pop_front() {
            let (o, _) = copies[c];
            let mut out = Vec::new();
            for e in &hoa.states[o].edges {
                let t = intern((e.target, bits(&e.marks)), &mut copies, &mut queue);
                out.push(Edge { guard: e.guard.clone(), target: t });
            }
            let mut out_eps = Vec::new();
            for &(a, b) in epsilon {
                if a == o {
                    out_eps.push(intern((b, 0), &mut copies, &mut queue));
                }
            }
            if edges.len() <= c {
                edges.resize(c + 1, Vec::new());
                eps.resize(c + 1, Vec::new());
            }
            edges[c] = out;
            eps[c] = out_eps;
        }
        edges.resize(copies.len(), Vec::new());
        eps.resize(copies.len(), Vec::new());
        let membership: Vec<u32> = copies.iter().map(|&(o, m)| m | bits(&hoa.states[o].marks)).collect();
        let names = copies
            .iter()
            .map(|&(o, m)| {
                if m == 0 {
                    name_of(o)
                } else {
                    let sets: Vec<String> = (0..32).filter(|i| m & (1 << i) != 0).map(|i| i.to_string()).collect();
                    format!("{}^{{{}}}", name_of(o), sets.join(","))
                }
            })
            .collect();
        let mut g = Self::with_membership(hoa.aps.clone(), names, edges, eps, 0, hoa.num_sets, membership)?;
        g.origin = copies.iter().map(|&(o, _)| o).collect();
        Ok(g)
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn props(&self) -> &[String] {
        &self.props
    }

    pub fn initial(&self) -> AutState {
        self.initial
    }

    pub fn num_sets(&self) -> usize {
        self.num_sets
    }

    /// Bitmask of all accepting-set indices.
    pub fn full_sets(&self) -> u32 {
        if self.num_sets == 32 {
            u32::MAX
        } else {
            (1u32 << self.num_sets) - 1
        }
    }

    /// Bitmask of the accepting sets containing `q`.
    pub fn membership(&self, q: AutState) -> u32 {
        self.membership[q]
    }

    pub fn is_accepting(&self, q: AutState) -> bool {
        self.membership[q] != 0
    }

    pub fn state_name(&self, q: AutState) -> &str {
        &self.names[q]
    }

    /// The state of the source file this state was split from.
    pub fn origin(&self, q: AutState) -> usize {
        self.origin[q]
    }

    pub fn edges(&self, q: AutState) -> &[Edge] {
        &self.edges[q]
    }

    pub fn epsilon(&self, q: AutState) -> &[AutState] {
        &self.epsilon[q]
    }

    /// Letter successors of `q` on `l`, sorted.
    pub fn successors(&self, q: AutState, l: LabelSet) -> Vec<AutState> {
        let mut out: Vec<AutState> =
            self.edges[q].iter().filter(|e| e.guard.eval(l)).map(|e| e.target).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Distinct letter successors of `q` with the letters enabling each.
    pub fn targets(&self, q: AutState) -> &[(AutState, Vec<LabelSet>)] {
        &self.targets[q]
    }

    /// The letters moving `q` to `target`; empty if there is no such edge.
    pub fn letters(&self, q: AutState, target: AutState) -> &[LabelSet] {
        match self.targets[q].binary_search_by_key(&target, |(t, _)| *t) {
            Ok(i) => &self.targets[q][i].1,
            Err(_) => &[],
        }
    }

    /// Same states, acceptance and transition relation, compared letter by
    /// letter rather than by guard syntax.
    pub fn same_structure(&self, other: &Gba) -> bool {
        self.props == other.props
            && self.num_states() == other.num_states()
            && self.initial == other.initial
            && self.num_sets == other.num_sets
            && self.membership == other.membership
            && self.targets == other.targets
    }
}

/// A [`Gba`] with its limit-deterministic partition.
#[derive(Debug, Clone)]
pub struct Ldgba {
    gba: Gba,
    deterministic: Vec<bool>,
}

impl Deref for Ldgba {
    type Target = Gba;

    fn deref(&self) -> &Gba {
        &self.gba
    }
}

impl Ldgba {
    /// Checks a declared deterministic part against every clause.
    pub fn with_partition(gba: Gba, q_d: &[AutState]) -> Result<Self> {
        let mut deterministic = vec![false; gba.num_states()];
        for &q in q_d {
            if q >= gba.num_states() {
                return Err(Error::UnknownState(q));
            }
            deterministic[q] = true;
        }
        for q in 0..gba.num_states() {
            let fail = |clause| Err(Error::NotLimitDeterministic { state: q, clause });
            if !deterministic[q] {
                if gba.is_accepting(q) {
                    return fail(LimitDeterminismClause::AcceptingOutsideDeterministicPart);
                }
                if gba.epsilon(q).iter().any(|&t| !deterministic[t]) {
                    return fail(LimitDeterminismClause::EpsilonIntoNondeterministicPart);
                }
                continue;
            }
            if !gba.epsilon(q).is_empty() {
                return fail(LimitDeterminismClause::EpsilonInDeterministicPart);
            }
            for l in LabelSet::all(gba.props().len()) {
                let succ = gba.successors(q, l);
                match succ.len() {
                    0 => return fail(LimitDeterminismClause::NotTotal),
                    1 if !deterministic[succ[0]] => {
                        return fail(LimitDeterminismClause::LeavesDeterministicPart)
                    }
                    1 => {}
                    _ => return fail(LimitDeterminismClause::NotDeterministic),
                }
            }
        }
        Ok(Ldgba { gba, deterministic })
    }

    pub fn gba(&self) -> &Gba {
        &self.gba
    }

    pub fn into_gba(self) -> Gba {
        self.gba
    }

    pub fn is_deterministic(&self, q: AutState) -> bool {
        self.deterministic[q]
    }

    /// The deterministic part `Q_D`, sorted.
    pub fn deterministic_states(&self) -> Vec<AutState> {
        (0..self.num_states()).filter(|&q| self.deterministic[q]).collect()
    }
}

/// Computes the largest ε-free, total, deterministic and closed set of
/// states and checks that it holds every accepting state and receives every
/// ε-edge.
pub fn infer_limit_deterministic(gba: Gba) -> Result<Ldgba> {
    let n = gba.num_states();
    let mut reason: Vec<Option<LimitDeterminismClause>> = vec![None; n];
    for (q, r) in reason.iter_mut().enumerate() {
        if !gba.epsilon(q).is_empty() {
            *r = Some(LimitDeterminismClause::EpsilonInDeterministicPart);
            continue;
        }
        for l in LabelSet::all(gba.props().len()) {
            match gba.successors(q, l).len() {
                0 => *r = Some(LimitDeterminismClause::NotTotal),
                1 => {}
                _ => *r = Some(LimitDeterminismClause::NotDeterministic),
            }
            if r.is_some() {
                break;
            }
        }
    }
    loop {
        let mut changed = false;
        for q in 0..n {
            if reason[q].is_none() && gba.targets(q).iter().any(|(t, _)| reason[*t].is_some()) {
                reason[q] = Some(LimitDeterminismClause::LeavesDeterministicPart);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for (q, r) in reason.iter().enumerate() {
        if gba.is_accepting(q) {
            if let Some(clause) = r {
                return Err(Error::NotLimitDeterministic { state: q, clause: *clause });
            }
        }
    }
    for (q, r) in reason.iter().enumerate() {
        if r.is_some() && gba.epsilon(q).iter().any(|&t| reason[t].is_some()) {
            return Err(Error::NotLimitDeterministic {
                state: q,
                clause: LimitDeterminismClause::EpsilonIntoNondeterministicPart,
            });
        }
    }
    let deterministic = reason.iter().map(Option::is_none).collect();
    Ok(Ldgba { gba, deterministic })
}

/// Decides whether `prefix · cycle^ω` is accepted by some run, ε-moves
/// included.
pub fn lasso_accepted(gba: &Gba, prefix: &[LabelSet], cycle: &[LabelSet]) -> bool {
    assert!(!cycle.is_empty(), "lasso cycle must be nonempty");
    let p = prefix.len();
    let len = p + cycle.len();
    let letter = |pos: usize| if pos < p { prefix[pos] } else { cycle[pos - p] };
    let next_pos = |pos: usize| if pos + 1 < len { pos + 1 } else { p };
    let node = |q: usize, pos: usize| q * len + pos;
    let total = gba.num_states() * len;

    // consuming edges flagged true
    let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); total];
    let mut seen = vec![false; total];
    let start = node(gba.initial(), 0);
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        let (q, pos) = (v / len, v % len);
        let mut out: Vec<(usize, bool)> =
            gba.successors(q, letter(pos)).into_iter().map(|t| (node(t, next_pos(pos)), true)).collect();
        out.extend(gba.epsilon(q).iter().map(|&t| (node(t, pos), false)));
        for &(w, _) in &out {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
        adj[v] = out;
    }
    let plain: Vec<Vec<usize>> = adj.iter().map(|o| o.iter().map(|&(w, _)| w).collect()).collect();
    let comps = tarjan_scc(&plain);
    let full = gba.full_sets();
    let mut comp_of = vec![usize::MAX; total];
    for (i, c) in comps.iter().enumerate() {
        for &v in c {
            comp_of[v] = i;
        }
    }
    comps.iter().enumerate().any(|(i, c)| {
        if !seen[c[0]] {
            return false;
        }
        let consumes = c.iter().any(|&v| adj[v].iter().any(|&(w, cons)| cons && comp_of[w] == i));
        let sets = c.iter().fold(0u32, |acc, &v| acc | gba.membership(v / len));
        consumes && sets == full
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::hoa::parse_hoa;

    fn props(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    // one state, both sets visited through split copies
    pub(crate) fn gfa_gfb() -> Gba {
        let e = |g: &str, t| Edge { guard: Guard::parse(g).unwrap(), target: t };
        // 0: neutral, 1: just read a, 2: just read b, 3: read a and b
        let out = vec![e("0 & !1", 1), e("!0 & 1", 2), e("0 & 1", 3), e("!0 & !1", 0)];
        Gba::new(
            props(&["a", "b"]),
            vec!["n".into(), "a".into(), "b".into(), "ab".into()],
            vec![out.clone(), out.clone(), out.clone(), out],
            vec![Vec::new(); 4],
            0,
            &[vec![1, 3], vec![2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn deterministic_automaton_is_all_q_d() {
        let l = infer_limit_deterministic(gfa_gfb()).unwrap();
        assert_eq!(l.deterministic_states(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn accepting_state_with_two_successors_is_rejected() {
        let e = |g: &str, t| Edge { guard: Guard::parse(g).unwrap(), target: t };
        let g = Gba::new(
            props(&["a"]),
            vec!["0".into(), "1".into()],
            vec![vec![e("t", 0), e("0", 1)], vec![e("t", 1)]],
            vec![vec![], vec![]],
            0,
            &[vec![0]],
        )
        .unwrap();
        match infer_limit_deterministic(g) {
            Err(Error::NotLimitDeterministic { state, clause }) => {
                assert_eq!(state, 0);
                assert_eq!(clause, LimitDeterminismClause::NotDeterministic);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn epsilon_from_nondeterministic_part() {
        let e = |g: &str, t| Edge { guard: Guard::parse(g).unwrap(), target: t };
        // q0 loops on anything and may jump to q1, which accepts on a
        let g = Gba::new(
            props(&["a"]),
            vec!["init".into(), "acc".into(), "rej".into()],
            vec![vec![e("t", 0)], vec![e("0", 1), e("!0", 2)], vec![e("t", 2)]],
            vec![vec![1], vec![], vec![]],
            0,
            &[vec![1]],
        )
        .unwrap();
        let l = infer_limit_deterministic(g.clone()).unwrap();
        assert_eq!(l.deterministic_states(), vec![1, 2]);
        let again = infer_limit_deterministic(l.into_gba()).unwrap();
        assert_eq!(again.deterministic_states(), vec![1, 2]);
        let a = LabelSet(1);
        let none = LabelSet::EMPTY;
        assert!(lasso_accepted(&g, &[none, none], &[a]));
        assert!(!lasso_accepted(&g, &[], &[a, none]));
        assert!(Ldgba::with_partition(g.clone(), &[1, 2]).is_ok());
        assert!(Ldgba::with_partition(g, &[0, 1, 2]).is_err());
    }

    #[test]
    fn lasso_examples() {
        let g = gfa_gfb();
        let a = LabelSet(1);
        let b = LabelSet(2);
        assert!(lasso_accepted(&g, &[], &[a, b]));
        assert!(!lasso_accepted(&g, &[], &[a]));
        assert!(lasso_accepted(&g, &[a, a, a], &[LabelSet(3)]));
    }

    #[test]
    fn edge_marks_are_split_onto_states() {
        let text = r#"HOA: v1
States: 1
Start: 0
AP: 2 "a" "b"
acc-name: generalized-Buchi 2
Acceptance: 2 Inf(0)&Inf(1)
--BODY--
State: 0
[0 & 1] 0 {0 1}
[0 & !1] 0 {0}
[!0 & 1] 0 {1}
[!0 & !1] 0
--END--
"#;
        let g = parse_hoa(text).unwrap();
        assert_eq!(g.num_states(), 4);
        assert!((0..4).all(|q| g.origin(q) == 0));
        assert_eq!(g.num_sets(), 2);
        assert!(g.same_structure(&parse_hoa(&crate::automaton::hoa::emit_hoa(&g)).unwrap()));
        let a = LabelSet(1);
        let b = LabelSet(2);
        assert!(lasso_accepted(&g, &[], &[a, b]));
        assert!(!lasso_accepted(&g, &[], &[b]));
    }
}
