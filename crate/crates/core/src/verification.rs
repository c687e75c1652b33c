//! Explicit-state analysis: policy-induced chains, exact policy evaluation,
//! optimal values, and structural checks of the relaxed product.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::automaton::Ldgba;
use crate::error::{Error, Result};
use crate::graph::tarjan_scc;
use crate::learning::{Policy, RewardConfig};
use crate::mdp::{maximal_end_components, LabeledMdp, SubMdp};
use crate::product::{
    ExplicitProduct, ExtendedAction, ProductModel, ProductState, RelaxedProduct, StandardProduct,
};
use crate::scalar::Scalar;

/// Strongly connected blocks up to this size are solved directly.
const DENSE_LIMIT: usize = 600;
/// Sweep cap for iterative solves.
pub const ITERATION_CAP: usize = 1_000_000;

/// Solves `(I - γ P_CC) x = b` for one block by Gaussian elimination.
fn dense_solve<R: Scalar>(comp: &[usize], local: &HashMap<usize, usize>, rows: &[Vec<(usize, R)>], gamma: R, b: Vec<R>) -> Result<Vec<R>> {
    let n = comp.len();
    let mut a = vec![vec![R::zero(); n + 1]; n];
    for (i, &x) in comp.iter().enumerate() {
        a[i][i] = R::one();
        for &(y, p) in &rows[x] {
            if let Some(&j) = local.get(&y) {
                a[i][j] -= gamma * p;
            }
        }
        a[i][n] = b[i];
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty");
        if a[pivot][col].abs() <= R::epsilon() {
            return Err(Error::InvalidModel("singular policy-evaluation system".into()));
        }
        a.swap(col, pivot);
        let inv = R::one() / a[col][col];
        for k in col..=n {
            a[col][k] *= inv;
        }
        let pivot_row = a[col].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i == col {
                continue;
            }
            let f = row[col];
            if f != R::zero() {
                for k in col..=n {
                    row[k] -= f * pivot_row[k];
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[n]).collect())
}

/// Solves `v = c + γ P v` over a sparse row-stochastic (or substochastic)
/// matrix, block by block in reverse topological order. States with a
/// `fixed` value keep it. `γ = 1` is allowed when every unfixed block
/// leaks probability.
pub fn solve_linear<R: Scalar>(
    rows: &[Vec<(usize, R)>],
    c: &[R],
    gamma: R,
    fixed: Option<&[Option<R>]>,
    tol: R,
) -> Result<Vec<R>> {
    let n = rows.len();
    let adj: Vec<Vec<usize>> = rows.iter().map(|r| r.iter().map(|&(y, _)| y).collect()).collect();
    let mut v = vec![R::zero(); n];
    for comp in tarjan_scc(&adj) {
        if let Some(f) = fixed {
            if comp.iter().all(|&x| f[x].is_some()) {
                for &x in &comp {
                    v[x] = f[x].expect("fixed");
                }
                continue;
            }
        }
        let single = comp.len() == 1 && !rows[comp[0]].iter().any(|&(y, _)| y == comp[0]);
        if single {
            let x = comp[0];
            v[x] = c[x] + gamma * rows[x].iter().map(|&(y, p)| p * v[y]).sum::<R>();
            continue;
        }
        let local: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let b: Vec<R> = comp
            .iter()
            .map(|&x| {
                c[x] + gamma
                    * rows[x].iter().filter(|(y, _)| !local.contains_key(y)).map(|&(y, p)| p * v[y]).sum::<R>()
            })
            .collect();
        if comp.len() <= DENSE_LIMIT {
            for (x, val) in comp.iter().zip(dense_solve(&comp, &local, rows, gamma, b)?) {
                v[*x] = val;
            }
        } else {
            let mut sweeps = 0;
            loop {
                let mut delta = R::zero();
                for (i, &x) in comp.iter().enumerate() {
                    let inner: R = rows[x].iter().filter(|(y, _)| local.contains_key(y)).map(|&(y, p)| p * v[y]).sum();
                    let new = b[i] + gamma * inner;
                    delta = delta.max((new - v[x]).abs());
                    v[x] = new;
                }
                sweeps += 1;
                let stop = if gamma < R::one() { tol * (R::one() - gamma) } else { tol };
                if delta <= stop {
                    break;
                }
                if sweeps >= ITERATION_CAP {
                    return Err(Error::NonConvergence(ITERATION_CAP));
                }
            }
        }
    }
    Ok(v)
}

/// Bottom strongly connected components of the chain given by `rows`,
/// i.e. its recurrent classes, plus the class of each state.
pub fn recurrent_classes<R: Scalar>(rows: &[Vec<(usize, R)>]) -> (Vec<Vec<usize>>, Vec<Option<usize>>) {
    let adj: Vec<Vec<usize>> =
        rows.iter().map(|r| r.iter().filter(|(_, p)| *p > R::zero()).map(|&(y, _)| y).collect()).collect();
    let comps = tarjan_scc(&adj);
    let mut comp_of = vec![0; rows.len()];
    for (i, c) in comps.iter().enumerate() {
        for &x in c {
            comp_of[x] = i;
        }
    }
    let mut classes = Vec::new();
    let mut class_of = vec![None; rows.len()];
    for (i, c) in comps.iter().enumerate() {
        if c.iter().all(|&x| adj[x].iter().all(|&y| comp_of[y] == i)) {
            for &x in c {
                class_of[x] = Some(classes.len());
            }
            classes.push(c.clone());
        }
    }
    (classes, class_of)
}

/// Markov chain obtained by fixing a policy, restricted to the states it
/// reaches. A state without actions gets a self-loop with no reward.
#[derive(Debug, Clone)]
pub struct InducedChain<R> {
    pub states: Vec<ProductState>,
    pub index: HashMap<ProductState, usize>,
    pub rows: Vec<Vec<(usize, R)>>,
    pub action: Vec<Option<ExtendedAction>>,
    pub cost: Vec<u32>,
    pub membership: Vec<u32>,
    pub full: u32,
    pub classes: Vec<Vec<usize>>,
    pub class_of: Vec<Option<usize>>,
    /// States where the policy fell back to the first canonical action.
    pub undefined: Vec<usize>,
}

struct ChainBuilder<R> {
    chain: InducedChain<R>,
    queue: VecDeque<usize>,
    budget: usize,
}

impl<R: Scalar> ChainBuilder<R> {
    fn new(full: u32, budget: usize) -> Self {
        ChainBuilder {
            chain: InducedChain {
                states: Vec::new(),
                index: HashMap::new(),
                rows: Vec::new(),
                action: Vec::new(),
                cost: Vec::new(),
                membership: Vec::new(),
                full,
                classes: Vec::new(),
                class_of: Vec::new(),
                undefined: Vec::new(),
            },
            queue: VecDeque::new(),
            budget,
        }
    }

    fn intern(&mut self, x: ProductState, membership: u32) -> Result<usize> {
        if let Some(&i) = self.chain.index.get(&x) {
            return Ok(i);
        }
        let c = &mut self.chain;
        if c.states.len() >= self.budget {
            return Err(Error::BudgetExceeded(self.budget));
        }
        let i = c.states.len();
        c.states.push(x);
        c.index.insert(x, i);
        c.rows.push(Vec::new());
        c.action.push(None);
        c.cost.push(0);
        c.membership.push(membership);
        self.queue.push_back(i);
        Ok(i)
    }

    fn finish(mut self) -> InducedChain<R> {
        let (classes, class_of) = recurrent_classes(&self.chain.rows);
        self.chain.classes = classes;
        self.chain.class_of = class_of;
        self.chain
    }
}

/// Builds the chain of `policy` over `model` from `roots`. When `policy`
/// returns `None` at a state with actions the first canonical action is
/// used and the state is recorded in `undefined`.
pub fn induced_chain<R, M, P>(model: &M, policy: P, roots: &[ProductState], budget: usize) -> Result<InducedChain<R>>
where
    R: Scalar,
    M: ProductModel<R>,
    P: Fn(&ProductState) -> Option<ExtendedAction>,
{
    let mut b = ChainBuilder::new(model.ldgba().full_sets(), budget);
    for r in roots {
        b.intern(*r, model.membership(r))?;
    }
    while let Some(i) = b.queue.pop_front() {
        let x = b.chain.states[i];
        let acts = model.actions(&x);
        let u = match policy(&x) {
            Some(u) => u,
            None => match acts.first() {
                Some(u) => {
                    b.chain.undefined.push(i);
                    *u
                }
                None => {
                    b.chain.rows[i] = vec![(i, R::one())];
                    continue;
                }
            },
        };
        let dist = model.transition(&x, &u)?;
        let mut row = Vec::with_capacity(dist.len());
        for (y, p) in dist {
            let j = b.intern(y, model.membership(&y))?;
            row.push((j, p));
        }
        b.chain.cost[i] = model.cost(&x, &u);
        b.chain.action[i] = Some(u);
        b.chain.rows[i] = row;
    }
    Ok(b.finish())
}

/// Chain of an action-index policy over an explicit product, from `roots`.
pub fn induced_chain_explicit<R: Scalar>(
    ep: &ExplicitProduct<R>,
    policy: &[Option<usize>],
    roots: &[usize],
) -> Result<InducedChain<R>> {
    let mut b = ChainBuilder::new(ep.full_sets(), usize::MAX);
    for &r in roots {
        b.intern(ep.states[r], ep.membership[r])?;
    }
    while let Some(i) = b.queue.pop_front() {
        let x = b.chain.states[i];
        let e = ep.index[&x];
        if ep.actions[e].is_empty() {
            b.chain.rows[i] = vec![(i, R::one())];
            continue;
        }
        let k = policy[e].ok_or_else(|| Error::UndefinedPolicy(format!("{x:?}")))?;
        let mut row = Vec::with_capacity(ep.trans[e][k].len());
        for &(y, p) in &ep.trans[e][k] {
            let j = b.intern(ep.states[y], ep.membership[y])?;
            row.push((j, p));
        }
        b.chain.cost[i] = ep.costs[e][k];
        b.chain.action[i] = Some(ep.actions[e][k]);
        b.chain.rows[i] = row;
    }
    Ok(b.finish())
}

impl<R: Scalar> InducedChain<R> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_recurrent(&self, i: usize) -> bool {
        self.class_of[i].is_some()
    }

    pub fn class_sets(&self, j: usize) -> u32 {
        self.classes[j].iter().fold(0, |acc, &x| acc | self.membership[x])
    }

    /// Immediate reward per state under the chain's actions.
    pub fn rewards(&self, cfg: &RewardConfig<R>) -> Vec<R> {
        (0..self.len())
            .map(|i| match self.action[i] {
                None => R::zero(),
                Some(_) => crate::learning::immediate_reward(self.membership[i], self.cost[i], cfg),
            })
            .collect()
    }

    /// Stationary distribution of recurrent class `j`, by iterating the
    /// lazy chain `(I + P) / 2`.
    pub fn stationary(&self, j: usize) -> Result<Vec<(usize, R)>> {
        let comp = &self.classes[j];
        let local: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let n = comp.len();
        let half = R::lit(0.5);
        let mut pi = vec![R::one() / R::from_usize(n).expect("size"); n];
        let tol = R::lit(1e-13).max(R::epsilon() * R::lit(10.0));
        for _ in 0..ITERATION_CAP {
            let mut next: Vec<R> = pi.iter().map(|&p| p * half).collect();
            for (i, &x) in comp.iter().enumerate() {
                for &(y, p) in &self.rows[x] {
                    next[local[&y]] += half * pi[i] * p;
                }
            }
            let delta = pi.iter().zip(&next).map(|(a, b)| (*a - *b).abs()).fold(R::zero(), R::max);
            pi = next;
            if delta <= tol {
                return Ok(comp.iter().copied().zip(pi).collect());
            }
        }
        Err(Error::NonConvergence(ITERATION_CAP))
    }

    /// Long-run average violation cost per step inside class `j`.
    pub fn class_violation_rate(&self, j: usize) -> Result<R> {
        Ok(self.stationary(j)?.into_iter().map(|(x, p)| p * R::from_u32(self.cost[x]).expect("cost")).sum())
    }

    /// Long-run average violation cost from each state: class rates
    /// weighted by absorption probabilities.
    pub fn long_run_violation(&self) -> Result<Vec<R>> {
        let mut fixed = vec![None; self.len()];
        for j in 0..self.classes.len() {
            let rate = self.class_violation_rate(j)?;
            for &x in &self.classes[j] {
                fixed[x] = Some(rate);
            }
        }
        solve_linear(&self.rows, &vec![R::zero(); self.len()], R::one(), Some(&fixed), R::lit(1e-12))
    }

    /// Discounted expected violation cost from each state.
    pub fn expected_violation(&self, gamma: R) -> Result<Vec<R>> {
        let c: Vec<R> = self.cost.iter().map(|&c| R::from_u32(c).expect("cost")).collect();
        solve_linear(&self.rows, &c, gamma, None, R::lit(1e-10))
    }

    /// Whether some recurrent class meets every accepting set.
    /// A class made of one state without actions: the run is stuck there
    /// rather than cycling.
    pub fn is_blocked_class(&self, j: usize) -> bool {
        matches!(self.classes[j][..], [x] if self.action[x].is_none())
    }

    /// Some recurrent class, other than a blocked state, meets every set.
    pub fn has_accepting_class(&self) -> bool {
        (0..self.classes.len()).any(|j| !self.is_blocked_class(j) && self.class_sets(j) == self.full)
    }

    /// Whether any state the chain reaches takes a costly action.
    pub fn any_violation(&self) -> bool {
        self.cost.iter().any(|&c| c > 0)
    }

    pub fn describe_state<T: Scalar>(&self, i: usize, mdp: &LabeledMdp<T>) -> String {
        let x = self.states[i];
        format!("({}, {}, q{}, T={:b})", mdp.state_name(x.s), x.l.display(mdp.props()), x.q, x.t)
    }
}

/// Expected discounted return of the chain from every state.
pub fn policy_return<R: Scalar>(chain: &InducedChain<R>, cfg: &RewardConfig<R>, tol: R) -> Result<Vec<R>> {
    solve_linear(&chain.rows, &chain.rewards(cfg), cfg.gamma, None, tol)
}

/// A learned policy measured against the optimum from the initial state.
#[derive(Debug, Clone)]
pub struct OracleComparison<R> {
    pub explicit_states: usize,
    pub optimal: R,
    pub learned: R,
    /// Chain of an optimal policy from the initial state.
    pub optimal_chain: InducedChain<R>,
    /// Chain of the learned policy from the initial state.
    pub learned_chain: InducedChain<R>,
}

impl<R: Scalar> OracleComparison<R> {
    /// `|optimal - learned| / |optimal|`, or the absolute gap when the
    /// optimum is zero.
    pub fn relative_gap(&self) -> R {
        let gap = (self.optimal - self.learned).abs();
        if self.optimal == R::zero() {
            gap
        } else {
            gap / self.optimal.abs()
        }
    }
}

/// Solves the explicit product reachable from every initial state, then
/// evaluates both the optimal and the learned policy from `model.initial()`.
pub fn compare_with_optimum<R: Scalar, M: ProductModel<R>>(
    model: &M,
    policy: &Policy<R>,
    cfg: &RewardConfig<R>,
    tol: R,
    budget: usize,
) -> Result<OracleComparison<R>> {
    let x0 = model.initial();
    let mut roots = model.initial_states();
    if !roots.contains(&x0) {
        roots.push(x0);
    }
    let ep = ExplicitProduct::build(model, &roots, budget)?;
    let sol = value_iteration(&ep, cfg, tol)?;
    let e0 = ep.index[&x0];
    let optimal_chain = induced_chain_explicit(&ep, &sol.policy, &[e0])?;
    let learned_chain = induced_chain(model, |x| policy.actions.get(x).copied(), &[x0], budget)?;
    let learned = policy_return(&learned_chain, cfg, tol)?[0];
    Ok(OracleComparison { explicit_states: ep.len(), optimal: sol.values[e0], learned, optimal_chain, learned_chain })
}

/// Expected discounted return of an action-index policy on every state of
/// an explicit product.
pub fn evaluate_policy<R: Scalar>(
    ep: &ExplicitProduct<R>,
    policy: &[Option<usize>],
    cfg: &RewardConfig<R>,
    tol: R,
) -> Result<Vec<R>> {
    let n = ep.len();
    let mut rows = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for x in 0..n {
        match policy[x] {
            Some(k) => {
                rows.push(ep.trans[x][k].clone());
                c.push(crate::learning::immediate_reward(ep.membership[x], ep.costs[x][k], cfg));
            }
            None if ep.actions[x].is_empty() => {
                rows.push(vec![(x, R::one())]);
                c.push(R::zero());
            }
            None => return Err(Error::UndefinedPolicy(format!("{:?}", ep.states[x]))),
        }
    }
    solve_linear(&rows, &c, cfg.gamma, None, tol)
}

fn q_value<R: Scalar>(ep: &ExplicitProduct<R>, x: usize, k: usize, u: &[R], cfg: &RewardConfig<R>) -> R {
    crate::learning::immediate_reward(ep.membership[x], ep.costs[x][k], cfg)
        + cfg.gamma * ep.trans[x][k].iter().map(|&(y, p)| p * u[y]).sum::<R>()
}

/// Largest Bellman residual of `u`, and the greedy policy it induces (ties
/// to the lowest action index).
pub fn bellman_residual<R: Scalar>(ep: &ExplicitProduct<R>, u: &[R], cfg: &RewardConfig<R>) -> (R, Vec<Option<usize>>) {
    let mut worst = R::zero();
    let mut policy = vec![None; ep.len()];
    for x in 0..ep.len() {
        let mut best: Option<(usize, R)> = None;
        for k in 0..ep.actions[x].len() {
            let q = q_value(ep, x, k, u, cfg);
            if best.is_none_or(|(_, b)| q > b) {
                best = Some((k, q));
            }
        }
        let target = best.map_or_else(R::zero, |(_, q)| q);
        policy[x] = best.map(|(k, _)| k);
        worst = worst.max((target - u[x]).abs());
    }
    (worst, policy)
}

#[derive(Debug, Clone)]
pub struct Solution<R> {
    pub values: Vec<R>,
    pub policy: Vec<Option<usize>>,
    pub iterations: usize,
    pub residual: R,
}

/// Optimal values and a greedy optimal policy. Runs policy iteration with
/// exact evaluation, then confirms the Bellman residual is within `tol`;
/// falls back to Gauss-Seidel value iteration otherwise.
pub fn value_iteration<R: Scalar>(ep: &ExplicitProduct<R>, cfg: &RewardConfig<R>, tol: R) -> Result<Solution<R>> {
    cfg.validate()?;
    let n = ep.len();
    let mut policy: Vec<Option<usize>> = (0..n).map(|x| (!ep.actions[x].is_empty()).then_some(0)).collect();
    let mut iterations = 0;
    let eval_tol = tol * R::lit(1e-2);
    let mut values = evaluate_policy(ep, &policy, cfg, eval_tol)?;
    while iterations < 10_000 {
        iterations += 1;
        let mut changed = false;
        for x in 0..n {
            let Some(cur) = policy[x] else { continue };
            let cur_q = q_value(ep, x, cur, &values, cfg);
            let margin = R::lit(1e-12) * (R::one() + cur_q.abs());
            let mut best = (cur, cur_q);
            for k in 0..ep.actions[x].len() {
                let q = q_value(ep, x, k, &values, cfg);
                if q > best.1 + margin {
                    best = (k, q);
                }
            }
            if best.0 != cur {
                policy[x] = Some(best.0);
                changed = true;
            }
        }
        if !changed {
            break;
        }
        values = evaluate_policy(ep, &policy, cfg, eval_tol)?;
    }
    let (residual, greedy) = bellman_residual(ep, &values, cfg);
    if residual <= tol {
        return Ok(Solution { values, policy: greedy, iterations, residual });
    }
    gauss_seidel(ep, cfg, tol, values)
}

fn gauss_seidel<R: Scalar>(ep: &ExplicitProduct<R>, cfg: &RewardConfig<R>, tol: R, mut u: Vec<R>) -> Result<Solution<R>> {
    for sweep in 1..=ITERATION_CAP {
        let mut delta = R::zero();
        for x in 0..ep.len() {
            let best = (0..ep.actions[x].len()).map(|k| q_value(ep, x, k, &u, cfg)).fold(None, |m: Option<R>, q| {
                Some(m.map_or(q, |m| m.max(q)))
            });
            let new = best.unwrap_or_else(R::zero);
            delta = delta.max((new - u[x]).abs());
            u[x] = new;
        }
        if delta <= tol * (R::one() - cfg.gamma) {
            let (residual, policy) = bellman_residual(ep, &u, cfg);
            return Ok(Solution { values: u, policy, iterations: sweep, residual });
        }
    }
    Err(Error::NonConvergence(ITERATION_CAP))
}

/// Outcome of checking that recurrent classes meet all accepting sets or
/// none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaReport {
    pub classes: usize,
    /// Blocked states, excluded from the condition.
    pub blocked: usize,
    pub accepting_classes: usize,
    /// Classes meeting some but not all accepting sets, with the sets met.
    pub violations: Vec<(usize, u32)>,
}

impl LemmaReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that each recurrent class meets every accepting set or none.
/// Blocked states are counted apart.
pub fn check_lemma_accepting_sets<R: Scalar>(chain: &InducedChain<R>) -> LemmaReport {
    let mut violations = Vec::new();
    let mut accepting = 0;
    let mut blocked = 0;
    for j in 0..chain.classes.len() {
        if chain.is_blocked_class(j) {
            blocked += 1;
            continue;
        }
        let sets = chain.class_sets(j);
        if sets == chain.full {
            accepting += 1;
        } else if sets != 0 {
            violations.push((j, sets));
        }
    }
    LemmaReport { classes: chain.classes.len() - blocked, blocked, accepting_classes: accepting, violations }
}

/// Maximal end components of an explicit product meeting every accepting
/// set.
pub fn accepting_mecs<R: Scalar>(ep: &ExplicitProduct<R>) -> Vec<SubMdp> {
    let full = ep.full_sets();
    maximal_end_components(ep, None).into_iter().filter(|m| ep.sets_of(m.states()) == full).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Theorem1Report {
    pub relaxed_states: usize,
    pub standard_states: usize,
    pub relaxed_amecs: usize,
    pub standard_amecs: usize,
    /// The relaxed product has an accepting MEC.
    pub property1: bool,
    /// Every standard transition appears in the relaxed product with the
    /// same probability.
    pub property2: bool,
    /// Every standard accepting MEC lies inside a relaxed one; `None` when
    /// the standard product has none.
    pub property3: Option<bool>,
    pub counterexamples: Vec<String>,
}

impl Theorem1Report {
    pub fn passed(&self) -> bool {
        self.property1 && self.property2 && self.property3 != Some(false)
    }
}

impl fmt::Display for Theorem1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = |b: bool| if b { "pass" } else { "FAIL" };
        writeln!(f, "relaxed product: {} states, {} accepting MECs", self.relaxed_states, self.relaxed_amecs)?;
        writeln!(f, "standard product: {} states, {} accepting MECs", self.standard_states, self.standard_amecs)?;
        writeln!(f, "property 1 (relaxed accepting MEC exists): {}", verdict(self.property1))?;
        writeln!(f, "property 2 (standard transitions preserved): {}", verdict(self.property2))?;
        match self.property3 {
            Some(b) => writeln!(f, "property 3 (accepting MEC containment): {}", verdict(b))?,
            None => writeln!(f, "property 3 (accepting MEC containment): n/a, task infeasible")?,
        }
        for c in &self.counterexamples {
            writeln!(f, "  counterexample: {c}")?;
        }
        Ok(())
    }
}

/// Builds both products from the initial state and checks the three
/// structural properties relating them.
pub fn check_theorem1<R: Scalar>(mdp: &LabeledMdp<R>, ldgba: &Ldgba, budget: usize) -> Result<Theorem1Report> {
    let relaxed = RelaxedProduct::new(mdp, ldgba);
    let standard = StandardProduct::new(mdp, ldgba);
    let r = ExplicitProduct::build(&relaxed, &[relaxed.initial()], budget)?;
    let p = ExplicitProduct::build(&standard, &[standard.initial()], budget)?;
    let mut counterexamples = Vec::new();
    let tol = R::prob_tolerance();

    let r_amecs = accepting_mecs(&r);
    let p_amecs = accepting_mecs(&p);

    let mut property2 = true;
    'outer: for (x, state) in p.states.iter().enumerate() {
        let Some(&rx) = r.index.get(state) else {
            property2 = false;
            counterexamples.push(format!("standard state {state:?} missing from relaxed product"));
            break;
        };
        for (k, u) in p.actions[x].iter().enumerate() {
            let Some(rk) = r.action_index(rx, u) else {
                property2 = false;
                counterexamples.push(format!("action {u:?} at {state:?} missing from relaxed product"));
                break 'outer;
            };
            let mut a: Vec<(ProductState, R)> = p.trans[x][k].iter().map(|&(y, q)| (p.states[y], q)).collect();
            let mut b: Vec<(ProductState, R)> = r.trans[rx][rk].iter().map(|&(y, q)| (r.states[y], q)).collect();
            a.sort_by_key(|m| m.0);
            b.sort_by_key(|m| m.0);
            let same = a.len() == b.len() && a.iter().zip(&b).all(|(m, n)| m.0 == n.0 && (m.1 - n.1).abs() <= tol);
            if !same {
                property2 = false;
                counterexamples.push(format!("distribution of {u:?} at {state:?} differs"));
                break 'outer;
            }
        }
    }

    let property3 = if p_amecs.is_empty() {
        None
    } else {
        let contained = |m: &SubMdp| {
            r_amecs.iter().any(|big| {
                m.actions.iter().all(|(&x, acts)| {
                    let rx = r.index[&p.states[x]];
                    big.actions.get(&rx).is_some_and(|ra| {
                        acts.iter().all(|&k| r.action_index(rx, &p.actions[x][k]).is_some_and(|rk| ra.contains(&rk)))
                    })
                })
            })
        };
        let ok = p_amecs.iter().all(|m| {
            let c = contained(m);
            if !c {
                counterexamples.push(format!("standard accepting MEC with {} states not contained", m.len()));
            }
            c
        });
        Some(ok)
    };

    if r_amecs.is_empty() {
        counterexamples.push("relaxed product has no accepting MEC".into());
    }
    Ok(Theorem1Report {
        relaxed_states: r.len(),
        standard_states: p.len(),
        relaxed_amecs: r_amecs.len(),
        standard_amecs: p_amecs.len(),
        property1: !r_amecs.is_empty(),
        property2,
        property3,
        counterexamples,
    })
}

/// Quantities entering the reward-design inequalities for one recurrent
/// class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassBound<R> {
    /// Class size `N_j`.
    pub size: usize,
    /// Smallest entry of `P ∘ V` inside the class (non-positive).
    pub v_min: R,
    /// Lower bound on the probability of reaching an accepting state of the
    /// class within `N_j` steps, from any class state.
    pub p_min: R,
    pub accepting: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainBounds<R> {
    pub classes: Vec<ClassBound<R>>,
    /// Total recurrent size `Ñ`.
    pub n_tilde: usize,
    /// Smallest recurrent `P ∘ V` entry over all classes.
    pub v_rec_min: R,
    pub transient: usize,
}

pub fn chain_bounds<R: Scalar>(chain: &InducedChain<R>) -> ChainBounds<R> {
    let mut classes = Vec::new();
    for (j, comp) in chain.classes.iter().enumerate() {
        let mut v_min = R::zero();
        for &x in comp {
            let c = R::from_u32(chain.cost[x]).expect("cost");
            for &(_, p) in &chain.rows[x] {
                v_min = v_min.min(-(p * c));
            }
        }
        let accepting = chain.class_sets(j) != 0;
        let p_min = if accepting {
            // d_n(x) = P^n(x, accepting states of the class)
            let local: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &x)| (x, i)).collect();
            let mut d: Vec<R> =
                comp.iter().map(|&x| if chain.membership[x] != 0 { R::one() } else { R::zero() }).collect();
            let mut best = d.clone();
            for _ in 0..comp.len() {
                d = comp
                    .iter()
                    .map(|&x| chain.rows[x].iter().map(|&(y, p)| p * d[local[&y]]).sum())
                    .collect();
                for (b, v) in best.iter_mut().zip(&d) {
                    *b = b.max(*v);
                }
            }
            best.into_iter().fold(R::one(), R::min)
        } else {
            R::zero()
        };
        classes.push(ClassBound { size: comp.len(), v_min, p_min, accepting });
    }
    let n_tilde = classes.iter().map(|c| c.size).sum();
    let v_rec_min = classes.iter().map(|c| c.v_min).fold(R::zero(), R::min);
    ChainBounds { classes, n_tilde, v_rec_min, transient: chain.len() - n_tilde }
}

/// `P̲·r + β·N²·V̲ ≥ 0`.
pub fn recurrent_condition<R: Scalar>(p_min: R, r_acc: R, beta: R, size: usize, v_min: R) -> bool {
    let n = R::from_usize(size).expect("size");
    p_min * r_acc + beta * n * n * v_min >= R::zero()
}

/// `r + β·Ñ·V̲ > 0`.
pub fn transient_condition<R: Scalar>(r_acc: R, beta: R, n_tilde: usize, v_min: R) -> bool {
    r_acc + beta * R::from_usize(n_tilde).expect("size") * v_min > R::zero()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperparameterReport<R> {
    pub bounds: ChainBounds<R>,
    /// Per accepting class: whether the recurrent inequality holds.
    pub recurrent: Vec<(usize, bool)>,
    /// `None` when the chain has no transient states.
    pub transient: Option<bool>,
}

impl<R: Scalar> HyperparameterReport<R> {
    pub fn satisfied(&self) -> bool {
        self.recurrent.iter().all(|(_, ok)| *ok) && self.transient != Some(false)
    }
}

impl<R: Scalar> fmt::Display for HyperparameterReport<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, ok) in &self.recurrent {
            let c = &self.bounds.classes[*j];
            writeln!(
                f,
                "class {j}: N={} V_min={} P_min={} -> {}",
                c.size,
                c.v_min,
                c.p_min,
                if *ok { "satisfied" } else { "violated" }
            )?;
        }
        match self.transient {
            Some(ok) => writeln!(
                f,
                "transient: N~={} V_min={} -> {}",
                self.bounds.n_tilde,
                self.bounds.v_rec_min,
                if ok { "satisfied" } else { "violated" }
            ),
            None => writeln!(f, "transient: none"),
        }
    }
}

/// Checks both reward-design inequalities on precomputed bounds.
pub fn check_bounds<R: Scalar>(bounds: ChainBounds<R>, cfg: &RewardConfig<R>) -> HyperparameterReport<R> {
    let recurrent = bounds
        .classes
        .iter()
        .enumerate()
        .filter(|(_, c)| c.accepting)
        .map(|(j, c)| (j, recurrent_condition(c.p_min, cfg.r_acc, cfg.beta, c.size, c.v_min)))
        .collect();
    let transient =
        (bounds.transient > 0).then(|| transient_condition(cfg.r_acc, cfg.beta, bounds.n_tilde, bounds.v_rec_min));
    HyperparameterReport { bounds, recurrent, transient }
}

/// Validates reward hyperparameters against the chain of a policy.
pub fn validate_hyperparameters<R: Scalar>(chain: &InducedChain<R>, cfg: &RewardConfig<R>) -> HyperparameterReport<R> {
    check_bounds(chain_bounds(chain), cfg)
}
