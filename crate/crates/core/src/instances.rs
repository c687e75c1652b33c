//! Small random MDPs and LDGBAs for structural testing.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::automaton::{Edge, Gba, Guard, Ldgba};
use crate::eldgba::has_accepting_cycle;
use crate::error::Result;
use crate::label::LabelSet;
use crate::mdp::{LabeledMdp, LabeledMdpBuilder};
use crate::product::ExplicitProduct;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceSize {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_aut_states: usize,
    pub max_sets: usize,
    pub max_props: usize,
}

impl Default for InstanceSize {
    fn default() -> Self {
        InstanceSize { max_states: 8, max_actions: 3, max_aut_states: 4, max_sets: 2, max_props: 3 }
    }
}

pub fn prop_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

/// Positive weights summing to one over `k` outcomes.
fn weights<R: Scalar, G: Rng>(k: usize, rng: &mut G) -> Vec<R> {
    let w: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: u32 = w.iter().sum();
    w.into_iter().map(|x| R::lit(f64::from(x) / f64::from(total))).collect()
}

/// Every state gets 1 to `max_actions` actions with up to three successors
/// each, and one or two label sets.
pub fn random_mdp<R: Scalar, G: Rng>(props: Vec<String>, size: &InstanceSize, rng: &mut G) -> Result<LabeledMdp<R>> {
    let np = props.len();
    let n = rng.gen_range(1..=size.max_states.max(1));
    let mut b = LabeledMdpBuilder::new(props);
    let ids: Vec<usize> = (0..n).map(|i| b.add_state(format!("s{i}"))).collect();
    let all_labels: Vec<LabelSet> = LabelSet::all(np).collect();
    for &s in &ids {
        let na = rng.gen_range(1..=size.max_actions.max(1));
        for a in 0..na {
            let a = b.action(&format!("a{a}"));
            let k = rng.gen_range(1..=n.min(3));
            let succ: Vec<usize> = ids.choose_multiple(rng, k).copied().collect();
            let dist = succ.into_iter().zip(weights::<R, _>(k, rng)).collect();
            b.transition(s, a, dist);
        }
        let k = rng.gen_range(1..=2.min(all_labels.len()));
        let ls: Vec<LabelSet> = all_labels.choose_multiple(rng, k).copied().collect();
        b.labels(s, ls.into_iter().zip(weights::<R, _>(k, rng)).collect());
    }
    b.initial(0, None);
    b.build()
}

fn guard_of(letters: &[LabelSet], np: usize) -> Guard {
    letters.iter().map(|&l| Guard::minterm(l, np)).reduce(Guard::or).unwrap_or(Guard::False)
}

/// Groups `(letter, target)` pairs into one edge per target.
fn edges_from(pairs: Vec<(LabelSet, usize)>, np: usize) -> Vec<Edge> {
    let mut by_target: BTreeMap<usize, Vec<LabelSet>> = BTreeMap::new();
    for (l, t) in pairs {
        by_target.entry(t).or_default().push(l);
    }
    by_target.into_iter().map(|(target, ls)| Edge { guard: guard_of(&ls, np), target }).collect()
}

/// A random LDGBA whose E-LDGBA has a reachable cycle through every
/// accepting set (see [`has_accepting_cycle`]). Draws are repeated until one
/// qualifies; a single deterministic state always does.
pub fn random_ldgba<G: Rng>(props: Vec<String>, size: &InstanceSize, rng: &mut G) -> Result<Ldgba> {
    loop {
        let a = random_ldgba_unconditioned(props.clone(), size, rng)?;
        if has_accepting_cycle(&a) {
            return Ok(a);
        }
    }
}

/// A random LDGBA. The deterministic part `D` is total and contains a
/// cycle through all of its states, so every accepting set (a nonempty
/// subset of `D`) lies on one reachable cycle of the LDGBA. The frontier
/// may still block that cycle. Any remaining states form a
/// nondeterministic initial part that reaches `D` by letters or ε-edges.
pub fn random_ldgba_unconditioned<G: Rng>(props: Vec<String>, size: &InstanceSize, rng: &mut G) -> Result<Ldgba> {
    let np = props.len();
    let letters: Vec<LabelSet> = LabelSet::all(np).collect();
    let n = rng.gen_range(1..=size.max_aut_states.max(1));
    let nd = rng.gen_range(1..=n);
    let nn = n - nd;
    // states 0..nn are nondeterministic, nn..n deterministic
    let det: Vec<usize> = (nn..n).collect();
    let mut edges = Vec::with_capacity(n);
    let mut epsilon = vec![Vec::new(); n];
    for q in 0..nn {
        let mut pairs = Vec::new();
        for &l in &letters {
            for t in 0..n {
                if rng.gen_bool(0.3) {
                    pairs.push((l, t));
                }
            }
        }
        // a guaranteed way forward: the next initial-part state, or D
        let forward = if q + 1 < nn { q + 1 } else { *det.choose(rng).expect("nonempty") };
        if forward >= nn && rng.gen_bool(0.5) {
            epsilon[q].push(forward);
        } else {
            pairs.push((*letters.choose(rng).expect("nonempty"), forward));
        }
        for &t in &det {
            if rng.gen_bool(0.2) {
                epsilon[q].push(t);
            }
        }
        edges.push(edges_from(pairs, np));
    }
    for i in 0..nd {
        let cycle_next = det[(i + 1) % nd];
        let cycle_letter = rng.gen_range(0..letters.len());
        let pairs = letters
            .iter()
            .enumerate()
            .map(|(k, &l)| (l, if k == cycle_letter { cycle_next } else { *det.choose(rng).expect("nonempty") }))
            .collect();
        edges.push(edges_from(pairs, np));
    }
    let k = rng.gen_range(1..=size.max_sets.max(1));
    let sets: Vec<Vec<usize>> = (0..k)
        .map(|_| {
            let m = rng.gen_range(1..=nd);
            let mut s: Vec<usize> = det.choose_multiple(rng, m).copied().collect();
            s.sort_unstable();
            s
        })
        .collect();
    let names = (0..n).map(|q| format!("q{q}")).collect();
    let gba = Gba::new(props, names, edges, epsilon, 0, &sets)?;
    Ldgba::with_partition(gba, &det)
}

/// A random MDP and LDGBA over the same 1 to `max_props` propositions.
pub fn random_instance<R: Scalar, G: Rng>(size: &InstanceSize, rng: &mut G) -> Result<(LabeledMdp<R>, Ldgba)> {
    let np = rng.gen_range(1..=size.max_props.max(1));
    let mdp = random_mdp(prop_names(np), size, rng)?;
    let ldgba = random_ldgba(prop_names(np), size, rng)?;
    Ok((mdp, ldgba))
}

/// A uniformly random memoryless policy over an explicit product, as action
/// indices; `None` where no action is enabled.
pub fn random_policy<R: Scalar, G: Rng>(ep: &ExplicitProduct<R>, rng: &mut G) -> Vec<Option<usize>> {
    ep.actions.iter().map(|acts| (!acts.is_empty()).then(|| rng.gen_range(0..acts.len()))).collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::product::{ProductModel, RelaxedProduct};
    use crate::verification::{check_theorem1, induced_chain_explicit, check_lemma_accepting_sets};

    #[test]
    fn instances_are_valid_and_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let size = InstanceSize::default();
        for _ in 0..200 {
            let (mdp, ldgba) = random_instance::<f64, _>(&size, &mut rng).unwrap();
            assert!(mdp.num_states() <= 8);
            assert!(ldgba.num_states() <= 4);
            assert_eq!(mdp.props(), ldgba.props());
        }
    }

    #[test]
    fn frontier_can_block_every_accepting_cycle() {
        // F1 = {q0,q1,q2}, F0 = {q3}; the only cycle meets F1 three times in a row
        let hoa = "HOA: v1\nStates: 4\nStart: 0\nAP: 1 \"p0\"\nAcceptance: 2 Inf(0)&Inf(1)\n--BODY--\n\
                   State: 0 {1}\n[t] 1\nState: 1 {1}\n[t] 2\nState: 2 {1}\n[t] 3\nState: 3 {0}\n[t] 0\n--END--\n";
        let g = crate::automaton::parse_hoa(hoa).unwrap();
        assert!(!has_accepting_cycle(&g));
        let mdp = random_mdp::<f64, _>(prop_names(1), &InstanceSize::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let ldgba = crate::automaton::infer_limit_deterministic(g).unwrap();
        assert!(!check_theorem1(&mdp, &ldgba, 100_000).unwrap().property1);
    }

    #[test]
    fn theorem1_and_lemma_hold_on_a_few() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let size = InstanceSize::default();
        for _ in 0..100 {
            let (mdp, ldgba) = random_instance::<f64, _>(&size, &mut rng).unwrap();
            let rep = check_theorem1(&mdp, &ldgba, 100_000).unwrap();
            assert!(rep.passed(), "{rep}");
            let rp = RelaxedProduct::new(&mdp, &ldgba);
            let ep = ExplicitProduct::build(&rp, &[rp.initial()], 100_000).unwrap();
            let pol = random_policy(&ep, &mut rng);
            let chain = induced_chain_explicit(&ep, &pol, &ep.roots).unwrap();
            assert!(check_lemma_accepting_sets(&chain).holds());
        }
    }
}
