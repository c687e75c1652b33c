//! Products of a labeled MDP with a frontier-tracking LDGBA.
//!
//! [`RelaxedProduct`] lets the automaton take any admissible edge and
//! charges the Hamming distance between the observed label and the edge's
//! letters. [`StandardProduct`] only follows edges enabled by the observed
//! label. Both are evaluated on the fly; [`ExplicitProduct`] materializes
//! the reachable part for analysis.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::automaton::{AutState, Ldgba};
use crate::eldgba::{advance, ELdgbaState, Frontier, FrontierMode};
use crate::error::{Error, Result};
use crate::label::{dist, LabelSet};
use crate::mdp::{ActionId, EndComponentModel, LabeledMdp, StateId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductState {
    pub s: StateId,
    pub l: LabelSet,
    pub q: AutState,
    pub t: Frontier,
}

impl ProductState {
    pub fn automaton(&self) -> ELdgbaState {
        ELdgbaState { q: self.q, t: self.t }
    }
}

/// An MDP action paired with the automaton successor it commits to, or an
/// ε-move. The derived order is the canonical action order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExtendedAction {
    Move { action: ActionId, target: AutState },
    Epsilon { target: AutState },
}

impl ExtendedAction {
    pub fn target(&self) -> AutState {
        match *self {
            ExtendedAction::Move { target, .. } | ExtendedAction::Epsilon { target } => target,
        }
    }

    pub fn describe<R: Scalar>(&self, mdp: &LabeledMdp<R>) -> String {
        match *self {
            ExtendedAction::Move { action, target } => format!("{}>{}", mdp.action_name(action), target),
            ExtendedAction::Epsilon { target } => format!("eps>{target}"),
        }
    }
}

/// Common interface of the product models.
pub trait ProductModel<R: Scalar> {
    fn mdp(&self) -> &LabeledMdp<R>;
    fn ldgba(&self) -> &Ldgba;

    /// Enabled actions at `x` in canonical order.
    fn actions(&self, x: &ProductState) -> Vec<ExtendedAction>;

    /// Violation cost of taking `u` at `x`.
    fn cost(&self, x: &ProductState, u: &ExtendedAction) -> u32;

    /// Where the automaton component lands, or `None` if `u` is not enabled.
    fn automaton_step(&self, x: &ProductState, u: &ExtendedAction) -> Option<ELdgbaState>;

    fn initial(&self) -> ProductState {
        let mdp = self.mdp();
        let es = ELdgbaState::initial(self.ldgba());
        ProductState { s: mdp.initial_state(), l: mdp.initial_label(), q: es.q, t: es.t }
    }

    /// Every `(s, l)` with positive label probability, paired with the
    /// automaton's initial state and a full frontier.
    fn initial_states(&self) -> Vec<ProductState> {
        let mdp = self.mdp();
        let es = ELdgbaState::initial(self.ldgba());
        (0..mdp.num_states())
            .flat_map(|s| {
                mdp.label_dist(s)
                    .iter()
                    .filter(|(_, p)| *p > R::zero())
                    .map(move |&(l, _)| ProductState { s, l, q: es.q, t: es.t })
            })
            .collect()
    }

    /// Bitmask of accepting sets containing `x`.
    fn membership(&self, x: &ProductState) -> u32 {
        self.ldgba().membership(x.q)
    }

    fn transition(&self, x: &ProductState, u: &ExtendedAction) -> Result<Vec<(ProductState, R)>> {
        let next = self
            .automaton_step(x, u)
            .ok_or_else(|| Error::InvalidAction(format!("{u:?} at {x:?}")))?;
        match *u {
            ExtendedAction::Epsilon { .. } => Ok(vec![(ProductState { q: next.q, t: next.t, ..*x }, R::one())]),
            ExtendedAction::Move { action, .. } => {
                let mdp = self.mdp();
                let mut out = Vec::new();
                for &(s2, ps) in mdp.transition(x.s, action)? {
                    if ps <= R::zero() {
                        continue;
                    }
                    for &(l2, pl) in mdp.label_dist(s2) {
                        if pl > R::zero() {
                            out.push((ProductState { s: s2, l: l2, q: next.q, t: next.t }, ps * pl));
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Samples one step, returning the successor and the violation cost.
    fn sample_step<G: Rng + ?Sized>(
        &self,
        x: &ProductState,
        u: &ExtendedAction,
        rng: &mut G,
    ) -> Result<(ProductState, u32)> {
        let next = self
            .automaton_step(x, u)
            .ok_or_else(|| Error::InvalidAction(format!("{u:?} at {x:?}")))?;
        let cost = self.cost(x, u);
        let (s, l) = match *u {
            ExtendedAction::Epsilon { .. } => (x.s, x.l),
            ExtendedAction::Move { action, .. } => self.mdp().sample_step(x.s, action, rng)?,
        };
        Ok((ProductState { s, l, q: next.q, t: next.t }, cost))
    }
}

fn epsilon_actions(ldgba: &Ldgba, es: ELdgbaState, mode: FrontierMode, out: &mut Vec<ExtendedAction>) {
    for &t in ldgba.epsilon(es.q) {
        if advance(ldgba, es, t, mode).is_some() {
            out.push(ExtendedAction::Epsilon { target: t });
        }
    }
}

/// The relaxed product, evaluated lazily.
#[derive(Debug, Clone, Copy)]
pub struct RelaxedProduct<'a, R> {
    mdp: &'a LabeledMdp<R>,
    ldgba: &'a Ldgba,
    mode: FrontierMode,
}

impl<'a, R: Scalar> RelaxedProduct<'a, R> {
    pub fn new(mdp: &'a LabeledMdp<R>, ldgba: &'a Ldgba) -> Self {
        Self::with_mode(mdp, ldgba, FrontierMode::Tracking)
    }

    pub fn with_mode(mdp: &'a LabeledMdp<R>, ldgba: &'a Ldgba, mode: FrontierMode) -> Self {
        RelaxedProduct { mdp, ldgba, mode }
    }

    pub fn mode(&self) -> FrontierMode {
        self.mode
    }
}

impl<R: Scalar> ProductModel<R> for RelaxedProduct<'_, R> {
    fn mdp(&self) -> &LabeledMdp<R> {
        self.mdp
    }

    fn ldgba(&self) -> &Ldgba {
        self.ldgba
    }

    fn actions(&self, x: &ProductState) -> Vec<ExtendedAction> {
        let es = x.automaton();
        let targets: Vec<AutState> = self
            .ldgba
            .targets(x.q)
            .iter()
            .map(|(t, _)| *t)
            .filter(|&t| advance(self.ldgba, es, t, self.mode).is_some())
            .collect();
        let mut out = Vec::new();
        for a in self.mdp.actions(x.s) {
            out.extend(targets.iter().map(|&target| ExtendedAction::Move { action: a, target }));
        }
        epsilon_actions(self.ldgba, es, self.mode, &mut out);
        out
    }

    fn cost(&self, x: &ProductState, u: &ExtendedAction) -> u32 {
        match *u {
            ExtendedAction::Epsilon { .. } => 0,
            ExtendedAction::Move { target, .. } => {
                dist(x.l, self.ldgba.letters(x.q, target)).expect("enabled move has letters")
            }
        }
    }

    fn automaton_step(&self, x: &ProductState, u: &ExtendedAction) -> Option<ELdgbaState> {
        let es = x.automaton();
        match *u {
            ExtendedAction::Move { action, target } => {
                self.mdp.transition(x.s, action).ok()?;
                if self.ldgba.letters(x.q, target).is_empty() {
                    return None;
                }
                advance(self.ldgba, es, target, self.mode)
            }
            ExtendedAction::Epsilon { target } => {
                if !self.ldgba.epsilon(x.q).contains(&target) {
                    return None;
                }
                advance(self.ldgba, es, target, self.mode)
            }
        }
    }
}

/// The standard product: the automaton reads the observed label.
#[derive(Debug, Clone, Copy)]
pub struct StandardProduct<'a, R> {
    mdp: &'a LabeledMdp<R>,
    ldgba: &'a Ldgba,
}

impl<'a, R: Scalar> StandardProduct<'a, R> {
    pub fn new(mdp: &'a LabeledMdp<R>, ldgba: &'a Ldgba) -> Self {
        StandardProduct { mdp, ldgba }
    }
}

impl<R: Scalar> ProductModel<R> for StandardProduct<'_, R> {
    fn mdp(&self) -> &LabeledMdp<R> {
        self.mdp
    }

    fn ldgba(&self) -> &Ldgba {
        self.ldgba
    }

    fn actions(&self, x: &ProductState) -> Vec<ExtendedAction> {
        let es = x.automaton();
        let succ: Vec<AutState> = self
            .ldgba
            .successors(x.q, x.l)
            .into_iter()
            .filter(|&t| advance(self.ldgba, es, t, FrontierMode::Tracking).is_some())
            .collect();
        let mut out = Vec::new();
        for a in self.mdp.actions(x.s) {
            out.extend(succ.iter().map(|&target| ExtendedAction::Move { action: a, target }));
        }
        epsilon_actions(self.ldgba, es, FrontierMode::Tracking, &mut out);
        out
    }

    fn cost(&self, _x: &ProductState, _u: &ExtendedAction) -> u32 {
        0
    }

    fn automaton_step(&self, x: &ProductState, u: &ExtendedAction) -> Option<ELdgbaState> {
        let es = x.automaton();
        match *u {
            ExtendedAction::Move { action, target } => {
                self.mdp.transition(x.s, action).ok()?;
                if !self.ldgba.successors(x.q, x.l).contains(&target) {
                    return None;
                }
                advance(self.ldgba, es, target, FrontierMode::Tracking)
            }
            ExtendedAction::Epsilon { target } => {
                if !self.ldgba.epsilon(x.q).contains(&target) {
                    return None;
                }
                advance(self.ldgba, es, target, FrontierMode::Tracking)
            }
        }
    }
}

/// States reachable from `roots`, without materializing probabilities.
pub fn reachable_states<R: Scalar, M: ProductModel<R>>(
    model: &M,
    roots: &[ProductState],
    budget: usize,
) -> Result<Vec<ProductState>> {
    let mdp = model.mdp();
    let mut seen: HashSet<ProductState> = HashSet::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    for &r in roots {
        if seen.insert(r) {
            queue.push_back(r);
        }
    }
    while let Some(x) = queue.pop_front() {
        order.push(x);
        if order.len() > budget {
            return Err(Error::BudgetExceeded(budget));
        }
        for u in model.actions(&x) {
            let Some(next) = model.automaton_step(&x, &u) else { continue };
            let mut push = |y: ProductState| {
                if seen.insert(y) {
                    queue.push_back(y);
                }
            };
            match u {
                ExtendedAction::Epsilon { .. } => push(ProductState { q: next.q, t: next.t, ..x }),
                ExtendedAction::Move { action, .. } => {
                    for &(s2, ps) in mdp.transition(x.s, action)? {
                        if ps <= R::zero() {
                            continue;
                        }
                        for &(l2, pl) in mdp.label_dist(s2) {
                            if pl > R::zero() {
                                push(ProductState { s: s2, l: l2, q: next.q, t: next.t });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(order)
}

/// Number of distinct `(MDP state, automaton state)` pairs, where split
/// automaton states count as the state they were split from.
pub fn count_state_pairs(states: &[ProductState], ldgba: &Ldgba) -> usize {
    states.iter().map(|x| (x.s, ldgba.origin(x.q))).collect::<HashSet<_>>().len()
}

/// Reachable part of a product with every transition stored explicitly.
#[derive(Debug, Clone)]
pub struct ExplicitProduct<R> {
    pub states: Vec<ProductState>,
    pub index: HashMap<ProductState, usize>,
    pub actions: Vec<Vec<ExtendedAction>>,
    /// `trans[x][k]` is the distribution of action `actions[x][k]`.
    pub trans: Vec<Vec<Vec<(usize, R)>>>,
    pub costs: Vec<Vec<u32>>,
    pub membership: Vec<u32>,
    pub num_sets: usize,
    pub roots: Vec<usize>,
}

/// Default cap on stored transitions.
pub const DEFAULT_BUDGET: usize = 1_000_000;

impl<R: Scalar> ExplicitProduct<R> {
    /// Explores from `roots` breadth-first. Fails once more than `budget`
    /// transition entries would be stored.
    pub fn build<M: ProductModel<R>>(model: &M, roots: &[ProductState], budget: usize) -> Result<Self> {
        let mut ep = ExplicitProduct {
            states: Vec::new(),
            index: HashMap::new(),
            actions: Vec::new(),
            trans: Vec::new(),
            costs: Vec::new(),
            membership: Vec::new(),
            num_sets: model.ldgba().num_sets(),
            roots: Vec::new(),
        };
        for &r in roots {
            let id = ep.intern(r, model);
            if !ep.roots.contains(&id) {
                ep.roots.push(id);
            }
        }
        let mut stored = 0usize;
        let mut next = 0;
        while next < ep.states.len() {
            let x = ep.states[next];
            let acts = model.actions(&x);
            let mut rows = Vec::with_capacity(acts.len());
            let mut costs = Vec::with_capacity(acts.len());
            for u in &acts {
                let dist = model.transition(&x, u)?;
                stored += dist.len();
                if stored > budget {
                    return Err(Error::BudgetExceeded(budget));
                }
                rows.push(dist.into_iter().map(|(y, p)| (ep.intern(y, model), p)).collect());
                costs.push(model.cost(&x, u));
            }
            ep.actions[next] = acts;
            ep.trans[next] = rows;
            ep.costs[next] = costs;
            next += 1;
        }
        Ok(ep)
    }

    fn intern<M: ProductModel<R>>(&mut self, x: ProductState, model: &M) -> usize {
        if let Some(&i) = self.index.get(&x) {
            return i;
        }
        let i = self.states.len();
        self.states.push(x);
        self.index.insert(x, i);
        self.actions.push(Vec::new());
        self.trans.push(Vec::new());
        self.costs.push(Vec::new());
        self.membership.push(model.membership(&x));
        i
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn num_transitions(&self) -> usize {
        self.trans.iter().flatten().map(Vec::len).sum()
    }

    pub fn full_sets(&self) -> u32 {
        if self.num_sets >= 32 {
            u32::MAX
        } else {
            (1u32 << self.num_sets) - 1
        }
    }

    /// Index of action `u` at state `x`.
    pub fn action_index(&self, x: usize, u: &ExtendedAction) -> Option<usize> {
        self.actions[x].binary_search(u).ok()
    }

    /// Union of the accepting sets met by the given states.
    pub fn sets_of(&self, states: impl IntoIterator<Item = usize>) -> u32 {
        states.into_iter().fold(0, |acc, x| acc | self.membership[x])
    }
}

impl<R: Scalar> EndComponentModel for ExplicitProduct<R> {
    fn num_states(&self) -> usize {
        self.states.len()
    }

    fn enabled(&self, s: usize) -> Vec<usize> {
        (0..self.actions[s].len()).collect()
    }

    fn support(&self, s: usize, a: usize) -> Vec<usize> {
        self.trans[s][a].iter().filter(|(_, p)| *p > R::zero()).map(|(t, _)| *t).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{infer_limit_deterministic, Edge, Gba, Guard};
    use crate::mdp::LabeledMdpBuilder;

    fn two_prop_ldgba() -> Ldgba {
        // q0 -a&b-> q1 (accepting), q0 -!(a&b)-> q0, q1 -t-> q0
        let e = |g: &str, t| Edge { guard: Guard::parse(g).unwrap(), target: t };
        let g = Gba::new(
            vec!["a".into(), "b".into()],
            vec!["q0".into(), "q1".into()],
            vec![vec![e("0 & 1", 1), e("!(0 & 1)", 0)], vec![e("t", 0)]],
            vec![vec![], vec![]],
            0,
            &[vec![1]],
        )
        .unwrap();
        infer_limit_deterministic(g).unwrap()
    }

    fn chain_mdp() -> LabeledMdp<f64> {
        let mut b = LabeledMdpBuilder::new(vec!["a".into(), "b".into()]);
        let s0 = b.add_state("s0");
        let s1 = b.add_state("s1");
        let s2 = b.add_state("s2");
        for name in ["n", "e", "s", "w"] {
            let a = b.action(name);
            b.transition(s0, a, vec![(s1, 0.9), (s2, 0.1)]);
            b.transition(s1, a, vec![(s1, 1.0)]);
            b.transition(s2, a, vec![(s2, 1.0)]);
        }
        b.labels(s1, vec![(LabelSet(1), 0.8), (LabelSet(2), 0.2)]);
        b.initial(s0, None);
        b.build().unwrap()
    }

    #[test]
    fn action_count_and_costs() {
        let mdp = chain_mdp();
        let l = two_prop_ldgba();
        let r = RelaxedProduct::new(&mdp, &l);
        let x0 = r.initial();
        let acts = r.actions(&x0);
        assert_eq!(acts.len(), 8);
        assert!(acts.len() <= 4 * (4 + 1));
        let to_acc = ExtendedAction::Move { action: 0, target: 1 };
        let stay = ExtendedAction::Move { action: 0, target: 0 };
        assert_eq!(r.cost(&x0, &to_acc), 2);
        assert_eq!(r.cost(&x0, &stay), 0);
        let x = ProductState { l: LabelSet(1), ..x0 };
        assert_eq!(r.cost(&x, &to_acc), 1);
    }

    #[test]
    fn transition_probabilities_multiply() {
        let mdp = chain_mdp();
        let l = two_prop_ldgba();
        let r = RelaxedProduct::new(&mdp, &l);
        let x0 = r.initial();
        let mut d = r.transition(&x0, &ExtendedAction::Move { action: 0, target: 0 }).unwrap();
        d.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let ps: Vec<f64> = d.iter().map(|(_, p)| *p).collect();
        assert_eq!(ps.len(), 3);
        assert!((ps[0] - 0.72).abs() < 1e-12 && (ps[1] - 0.18).abs() < 1e-12 && (ps[2] - 0.1).abs() < 1e-12);
        assert!(r.transition(&x0, &ExtendedAction::Epsilon { target: 0 }).is_err());
    }

    #[test]
    fn standard_moves_follow_the_label() {
        let mdp = chain_mdp();
        let l = two_prop_ldgba();
        let p = StandardProduct::new(&mdp, &l);
        let x0 = p.initial();
        assert!(p.actions(&x0).iter().all(|u| u.target() == 0));
        let ep = ExplicitProduct::build(&p, &[x0], DEFAULT_BUDGET).unwrap();
        assert!(ep.states.iter().all(|x| x.q == 0));
    }
}
