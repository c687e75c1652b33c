//! Probabilistic labeled MDPs: transition kernel over states and actions plus a
//! label distribution per state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::tarjan_scc;
use crate::label::{LabelSet, MAX_PROPS};
use crate::scalar::Scalar;

pub type StateId = usize;
pub type ActionId = usize;

/// Draws an outcome from a finite distribution given as `(outcome, probability)`.
pub(crate) fn sample_from<T: Copy, R: Scalar, G: Rng + ?Sized>(dist: &[(T, R)], rng: &mut G) -> T {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(x, p) in dist {
        acc += p.to_f64().unwrap_or(0.0);
        if u < acc {
            return x;
        }
    }
    // rounding remainder goes to the last outcome with positive mass
    dist.iter()
        .rev()
        .find(|(_, p)| *p > R::zero())
        .map(|(x, _)| *x)
        .expect("distribution with positive mass")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMdp<R> {
    state_names: Vec<String>,
    action_names: Vec<String>,
    props: Vec<String>,
    /// Per state, enabled actions sorted by id with their successor distributions.
    moves: Vec<Vec<(ActionId, Vec<(StateId, R)>)>>,
    labels: Vec<Vec<(LabelSet, R)>>,
    initial_state: StateId,
    initial_label: LabelSet,
}

/// One violated model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoActions { state: StateId },
    TransitionSum { state: StateId, action: ActionId, sum: f64 },
    NegativeProbability { state: StateId, action: Option<ActionId> },
    UnknownSuccessor { state: StateId, action: ActionId, target: StateId },
    LabelSum { state: StateId, sum: f64 },
    LabelOutOfRange { state: StateId },
    InitialState,
    InitialLabel,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            match v {
                Violation::NoActions { state } => write!(f, "state {state} has no actions")?,
                Violation::TransitionSum { state, action, sum } => {
                    write!(f, "p_S({state},{action},·) sums to {sum}")?
                }
                Violation::NegativeProbability { state, action } => {
                    write!(f, "negative probability at state {state} action {action:?}")?
                }
                Violation::UnknownSuccessor { state, action, target } => {
                    write!(f, "({state},{action}) reaches unknown state {target}")?
                }
                Violation::LabelSum { state, sum } => write!(f, "p_L({state},·) sums to {sum}")?,
                Violation::LabelOutOfRange { state } => {
                    write!(f, "state {state} uses a proposition outside the list")?
                }
                Violation::InitialState => f.write_str("initial state out of range")?,
                Violation::InitialLabel => {
                    f.write_str("initial label has zero probability at the initial state")?
                }
            }
        }
        Ok(())
    }
}

/// Incremental construction of a [`LabeledMdp`].
#[derive(Debug, Clone)]
pub struct LabeledMdpBuilder<R> {
    state_names: Vec<String>,
    action_names: Vec<String>,
    props: Vec<String>,
    moves: Vec<BTreeMap<ActionId, Vec<(StateId, R)>>>,
    labels: Vec<Vec<(LabelSet, R)>>,
    initial: Option<(StateId, Option<LabelSet>)>,
}

impl<R: Scalar> LabeledMdpBuilder<R> {
    pub fn new(props: Vec<String>) -> Self {
        Self {
            state_names: Vec::new(),
            action_names: Vec::new(),
            props,
            moves: Vec::new(),
            labels: Vec::new(),
            initial: None,
        }
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> StateId {
        self.state_names.push(name.into());
        self.moves.push(BTreeMap::new());
        self.labels.push(vec![(LabelSet::EMPTY, R::one())]);
        self.state_names.len() - 1
    }

    /// Returns the id of the named action, registering it on first use.
    pub fn action(&mut self, name: &str) -> ActionId {
        match self.action_names.iter().position(|a| a == name) {
            Some(i) => i,
            None => {
                self.action_names.push(name.to_string());
                self.action_names.len() - 1
            }
        }
    }

    /// Sets `p_S(s, a, ·)`; repeated targets are merged.
    pub fn transition(&mut self, s: StateId, a: ActionId, dist: Vec<(StateId, R)>) -> &mut Self {
        let mut merged: BTreeMap<StateId, R> = BTreeMap::new();
        for (t, p) in dist {
            *merged.entry(t).or_insert_with(R::zero) += p;
        }
        self.moves[s].insert(a, merged.into_iter().filter(|(_, p)| *p != R::zero()).collect());
        self
    }

    /// Sets `p_L(s, ·)`; repeated label sets are merged.
    pub fn labels(&mut self, s: StateId, dist: Vec<(LabelSet, R)>) -> &mut Self {
        let mut merged: BTreeMap<LabelSet, R> = BTreeMap::new();
        for (l, p) in dist {
            *merged.entry(l).or_insert_with(R::zero) += p;
        }
        self.labels[s] = merged.into_iter().filter(|(_, p)| *p != R::zero()).collect();
        self
    }

    /// Sets the initial state; without an explicit label the most likely one is used.
    pub fn initial(&mut self, s: StateId, label: Option<LabelSet>) -> &mut Self {
        self.initial = Some((s, label));
        self
    }

    /// Assembles the model without checking it.
    pub fn finish(self) -> LabeledMdp<R> {
        let (s0, l0) = self.initial.unwrap_or((0, None));
        let l0 = l0.unwrap_or_else(|| {
            self.labels
                .get(s0)
                .and_then(|d| {
                    d.iter()
                        .fold(None::<(LabelSet, R)>, |best, &(l, p)| match best {
                            Some((_, bp)) if bp >= p => best,
                            _ => Some((l, p)),
                        })
                        .map(|(l, _)| l)
                })
                .unwrap_or(LabelSet::EMPTY)
        });
        LabeledMdp {
            state_names: self.state_names,
            action_names: self.action_names,
            props: self.props,
            moves: self.moves.into_iter().map(|m| m.into_iter().collect()).collect(),
            labels: self.labels,
            initial_state: s0,
            initial_label: l0,
        }
    }

    /// Assembles and validates the model. Rows within tolerance are renormalized.
    pub fn build(self) -> Result<LabeledMdp<R>> {
        let mut mdp = self.finish();
        let report = validate(&mdp);
        if !report.is_ok() {
            return Err(Error::InvalidModel(report.to_string()));
        }
        mdp.normalize();
        Ok(mdp)
    }
}

impl<R: Scalar> LabeledMdp<R> {
    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn props(&self) -> &[String] {
        &self.props
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s]
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.action_names[a]
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn action_by_name(&self, name: &str) -> Option<ActionId> {
        self.action_names.iter().position(|n| n == name)
    }

    pub fn initial_state(&self) -> StateId {
        self.initial_state
    }

    pub fn initial_label(&self) -> LabelSet {
        self.initial_label
    }

    /// Enabled actions at `s`, in increasing id order.
    pub fn actions(&self, s: StateId) -> impl Iterator<Item = ActionId> + '_ {
        self.moves[s].iter().map(|(a, _)| *a)
    }

    pub fn transition(&self, s: StateId, a: ActionId) -> Result<&[(StateId, R)]> {
        let row = self.moves.get(s).ok_or(Error::UnknownState(s))?;
        row.binary_search_by_key(&a, |(b, _)| *b)
            .map(|i| row[i].1.as_slice())
            .map_err(|_| Error::UnknownAction { state: s, action: a })
    }

    pub fn label_dist(&self, s: StateId) -> &[(LabelSet, R)] {
        &self.labels[s]
    }

    pub fn label_prob(&self, s: StateId, l: LabelSet) -> R {
        self.labels[s]
            .iter()
            .find(|(x, _)| *x == l)
            .map(|(_, p)| *p)
            .unwrap_or_else(R::zero)
    }

    /// States reachable with positive probability by taking `a` at `s`.
    pub fn post(&self, s: StateId, a: ActionId) -> Result<Vec<StateId>> {
        Ok(self
            .transition(s, a)?
            .iter()
            .filter(|(_, p)| *p > R::zero())
            .map(|(t, _)| *t)
            .collect())
    }

    pub fn sample_label<G: Rng + ?Sized>(&self, s: StateId, rng: &mut G) -> LabelSet {
        sample_from(&self.labels[s], rng)
    }

    /// Draws the successor state, then its label.
    pub fn sample_step<G: Rng + ?Sized>(
        &self,
        s: StateId,
        a: ActionId,
        rng: &mut G,
    ) -> Result<(StateId, LabelSet)> {
        let next = sample_from(self.transition(s, a)?, rng);
        Ok((next, self.sample_label(next, rng)))
    }

    fn normalize(&mut self) {
        for row in &mut self.moves {
            for (_, dist) in row.iter_mut() {
                let sum: R = dist.iter().map(|(_, p)| *p).sum();
                dist.iter_mut().for_each(|(_, p)| *p /= sum);
            }
        }
        for dist in &mut self.labels {
            let sum: R = dist.iter().map(|(_, p)| *p).sum();
            dist.iter_mut().for_each(|(_, p)| *p /= sum);
        }
    }
}

/// Checks the model invariants: stochastic rows, label distributions summing
/// to one, and an initial label with positive probability.
pub fn validate<R: Scalar>(mdp: &LabeledMdp<R>) -> ValidationReport {
    let tol = R::prob_tolerance();
    let n = mdp.num_states();
    let mut violations = Vec::new();
    let prop_mask = if mdp.props.len() >= MAX_PROPS { u32::MAX } else { (1u32 << mdp.props.len()) - 1 };
    for s in 0..n {
        if mdp.moves[s].is_empty() {
            violations.push(Violation::NoActions { state: s });
        }
        for (a, dist) in &mdp.moves[s] {
            if dist.iter().any(|(_, p)| *p < R::zero()) {
                violations.push(Violation::NegativeProbability { state: s, action: Some(*a) });
            }
            if let Some((t, _)) = dist.iter().find(|(t, _)| *t >= n) {
                violations.push(Violation::UnknownSuccessor { state: s, action: *a, target: *t });
            }
            let sum: R = dist.iter().map(|(_, p)| *p).sum();
            if (sum - R::one()).abs() > tol {
                violations.push(Violation::TransitionSum {
                    state: s,
                    action: *a,
                    sum: sum.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let labels = &mdp.labels[s];
        if labels.iter().any(|(_, p)| *p < R::zero()) {
            violations.push(Violation::NegativeProbability { state: s, action: None });
        }
        if labels.iter().any(|(l, _)| l.bits() & !prop_mask != 0) {
            violations.push(Violation::LabelOutOfRange { state: s });
        }
        let sum: R = labels.iter().map(|(_, p)| *p).sum();
        if (sum - R::one()).abs() > tol {
            violations.push(Violation::LabelSum { state: s, sum: sum.to_f64().unwrap_or(f64::NAN) });
        }
    }
    if mdp.initial_state >= n {
        violations.push(Violation::InitialState);
    } else if mdp.label_prob(mdp.initial_state, mdp.initial_label) <= R::zero() {
        violations.push(Violation::InitialLabel);
    }
    ValidationReport { violations }
}

/// A finite nondeterministic model whose end components can be computed:
/// states `0..n`, per-state action ids, and the support of each action.
pub trait EndComponentModel {
    fn num_states(&self) -> usize;
    fn enabled(&self, s: usize) -> Vec<usize>;
    fn support(&self, s: usize, a: usize) -> Vec<usize>;
}

impl<R: Scalar> EndComponentModel for LabeledMdp<R> {
    fn num_states(&self) -> usize {
        self.num_states()
    }

    fn enabled(&self, s: usize) -> Vec<usize> {
        self.actions(s).collect()
    }

    fn support(&self, s: usize, a: usize) -> Vec<usize> {
        self.post(s, a).unwrap_or_default()
    }
}

/// A sub-MDP: a state subset with a nonempty action restriction per state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SubMdp {
    pub actions: BTreeMap<usize, BTreeSet<usize>>,
}

impl SubMdp {
    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.actions.keys().copied()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.actions.contains_key(&s)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// The whole model as a sub-MDP (states without actions are dropped).
    pub fn full<M: EndComponentModel>(model: &M) -> Self {
        let actions = (0..model.num_states())
            .filter_map(|s| {
                let a: BTreeSet<usize> = model.enabled(s).into_iter().collect();
                (!a.is_empty()).then_some((s, a))
            })
            .collect();
        SubMdp { actions }
    }

    /// Every restricted action keeps all successors inside the subset.
    pub fn is_closed<M: EndComponentModel>(&self, model: &M) -> bool {
        self.actions.iter().all(|(&s, acts)| {
            acts.iter().all(|&a| model.support(s, a).iter().all(|t| self.contains(*t)))
        })
    }

    /// The induced graph is strongly connected.
    pub fn is_strongly_connected<M: EndComponentModel>(&self, model: &M) -> bool {
        let states: Vec<usize> = self.states().collect();
        if states.is_empty() {
            return false;
        }
        let local: BTreeMap<usize, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let adj: Vec<Vec<usize>> = states
            .iter()
            .map(|s| {
                let mut out: Vec<usize> = self.actions[s]
                    .iter()
                    .flat_map(|&a| model.support(*s, a))
                    .filter_map(|t| local.get(&t).copied())
                    .collect();
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect();
        tarjan_scc(&adj).len() == 1
    }

    /// Closed, strongly connected and every state has at least one action.
    pub fn is_end_component<M: EndComponentModel>(&self, model: &M) -> bool {
        !self.is_empty()
            && self.actions.values().all(|a| !a.is_empty())
            && self.is_closed(model)
            && self.is_strongly_connected(model)
    }

    /// `self` is contained in `other`, states and actions.
    pub fn is_subset_of(&self, other: &SubMdp) -> bool {
        self.actions
            .iter()
            .all(|(s, a)| other.actions.get(s).is_some_and(|b| a.is_subset(b)))
    }
}

/// Maximal end component decomposition of `within` (or the whole model), by
/// the iterated SCC-and-prune fixpoint.
pub fn maximal_end_components<M: EndComponentModel>(model: &M, within: Option<&SubMdp>) -> Vec<SubMdp> {
    let n = model.num_states();
    let mut allowed: Vec<Option<Vec<(usize, Vec<usize>)>>> = vec![None; n];
    let base = within.cloned().unwrap_or_else(|| SubMdp::full(model));
    for (s, acts) in &base.actions {
        allowed[*s] = Some(acts.iter().map(|&a| (a, model.support(*s, a))).collect());
    }

    loop {
        // drop actions leaving the candidate set, then states without actions
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..n {
                let Some(acts) = &allowed[s] else { continue };
                let keep: Vec<(usize, Vec<usize>)> = acts
                    .iter()
                    .filter(|(_, succ)| succ.iter().all(|t| allowed[*t].is_some()))
                    .cloned()
                    .collect();
                if keep.is_empty() {
                    allowed[s] = None;
                    changed = true;
                } else if keep.len() != acts.len() {
                    allowed[s] = Some(keep);
                    changed = true;
                }
            }
        }

        let adj: Vec<Vec<usize>> = allowed
            .iter()
            .map(|acts| match acts {
                Some(acts) => {
                    let mut out: Vec<usize> = acts.iter().flat_map(|(_, succ)| succ.iter().copied()).collect();
                    out.sort_unstable();
                    out.dedup();
                    out
                }
                None => Vec::new(),
            })
            .collect();
        let comps = tarjan_scc(&adj);
        let comp_of = crate::graph::component_ids(n, &comps);

        let mut pruned = false;
        for s in 0..n {
            let Some(acts) = &allowed[s] else { continue };
            let keep: Vec<(usize, Vec<usize>)> = acts
                .iter()
                .filter(|(_, succ)| succ.iter().all(|t| comp_of[*t] == comp_of[s]))
                .cloned()
                .collect();
            if keep.len() != acts.len() {
                pruned = true;
                allowed[s] = if keep.is_empty() { None } else { Some(keep) };
            }
        }
        if pruned {
            continue;
        }

        let mut out: Vec<SubMdp> = comps
            .iter()
            .filter(|c| allowed[c[0]].is_some())
            .map(|c| SubMdp {
                actions: c
                    .iter()
                    .map(|&s| {
                        let acts = allowed[s].as_ref().expect("allowed state");
                        (s, acts.iter().map(|(a, _)| *a).collect())
                    })
                    .collect(),
            })
            .collect();
        out.sort();
        return out;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state() -> LabeledMdpBuilder<f64> {
        let mut b = LabeledMdpBuilder::new(vec!["a".into()]);
        let s0 = b.add_state("s0");
        let s1 = b.add_state("s1");
        let go = b.action("go");
        b.transition(s0, go, vec![(s1, 1.0)]);
        b.transition(s1, go, vec![(s0, 0.5), (s1, 0.5)]);
        b.labels(s1, vec![(LabelSet::from_props([0]), 1.0)]);
        b.initial(s0, None);
        b
    }

    #[test]
    fn well_formed_model_validates() {
        let mdp = two_state().finish();
        assert!(validate(&mdp).is_ok());
        assert!(two_state().build().is_ok());
    }

    #[test]
    fn bad_transition_row_is_reported() {
        let mut b = two_state();
        b.transition(0, 0, vec![(1, 0.9)]);
        let report = validate(&b.finish());
        assert!(matches!(report.violations[..], [Violation::TransitionSum { state: 0, action: 0, .. }]));
    }

    #[test]
    fn bad_label_row_is_reported() {
        let mut b = two_state();
        b.labels(1, vec![(LabelSet::from_props([0]), 0.6), (LabelSet::EMPTY, 0.5)]);
        let report = validate(&b.finish());
        assert!(matches!(report.violations[..], [Violation::LabelSum { state: 1, .. }]));
        let mut b = two_state();
        b.labels(1, vec![(LabelSet::from_props([0]), 0.6), (LabelSet::EMPTY, 0.5)]);
        assert!(b.build().is_err());
    }

    #[test]
    fn initial_label_must_be_possible() {
        let mut b = two_state();
        b.initial(0, Some(LabelSet::from_props([0])));
        assert_eq!(validate(&b.finish()).violations, vec![Violation::InitialLabel]);
    }

    #[test]
    fn post_is_the_support() {
        let mdp = two_state().build().unwrap();
        assert_eq!(mdp.post(0, 0).unwrap(), vec![1]);
        assert_eq!(mdp.post(1, 0).unwrap(), vec![0, 1]);
        assert!(matches!(mdp.post(0, 3), Err(Error::UnknownAction { .. })));
        assert!(matches!(mdp.post(7, 0), Err(Error::UnknownState(7))));

        let mut b = LabeledMdpBuilder::<f64>::new(vec![]);
        let s: Vec<_> = (0..3).map(|i| b.add_state(format!("s{i}"))).collect();
        let a = b.action("a");
        for &x in &s {
            b.transition(x, a, s.iter().map(|&t| (t, 1.0 / 3.0)).collect());
        }
        assert_eq!(b.build().unwrap().post(0, a).unwrap().len(), 3);
    }

    #[test]
    fn sampling_is_reproducible() {
        let mdp = two_state().build().unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(mdp.sample_step(1, 0, &mut r1).unwrap(), mdp.sample_step(1, 0, &mut r2).unwrap());
        }
        assert_eq!(mdp.sample_step(0, 0, &mut r1).unwrap(), (1, LabelSet::from_props([0])));
    }

    #[test]
    fn empirical_frequencies_match_kernel() {
        let mdp = two_state().build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let hits = (0..n).filter(|_| mdp.sample_step(1, 0, &mut rng).unwrap().0 == 0).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn absorbing_state_is_a_mec() {
        let mut b = LabeledMdpBuilder::<f64>::new(vec![]);
        let s0 = b.add_state("s0");
        let s1 = b.add_state("s1");
        let a = b.action("a");
        b.transition(s0, a, vec![(s1, 1.0)]);
        b.transition(s1, a, vec![(s1, 1.0)]);
        let mdp = b.build().unwrap();
        let mecs = maximal_end_components(&mdp, None);
        assert_eq!(mecs.len(), 1);
        assert_eq!(mecs[0].states().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn disjoint_cycles_give_two_mecs() {
        let mut b = LabeledMdpBuilder::<f64>::new(vec![]);
        let s: Vec<_> = (0..4).map(|i| b.add_state(format!("s{i}"))).collect();
        let a = b.action("a");
        b.transition(s[0], a, vec![(s[1], 1.0)]);
        b.transition(s[1], a, vec![(s[0], 1.0)]);
        b.transition(s[2], a, vec![(s[3], 1.0)]);
        b.transition(s[3], a, vec![(s[2], 1.0)]);
        let mdp = b.build().unwrap();
        let mecs = maximal_end_components(&mdp, None);
        assert_eq!(mecs.len(), 2);
        for m in &mecs {
            assert!(m.is_end_component(&mdp));
        }
    }
}
