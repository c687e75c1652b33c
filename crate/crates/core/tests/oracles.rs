//! Fast implementations against brute-force oracles.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ldgba_rl::automaton::{lasso_accepted, Gba, Guard};
use ldgba_rl::eldgba::{advance, eldgba_lasso_accepted, ELdgbaState, FrontierMode};
use ldgba_rl::instances::{prop_names, random_instance, random_ldgba_unconditioned, random_mdp, random_policy, InstanceSize};
use ldgba_rl::label::{dist, LabelSet};
use ldgba_rl::learning::RewardConfig;
use ldgba_rl::mdp::{maximal_end_components, EndComponentModel, SubMdp};
use ldgba_rl::product::{ExplicitProduct, ProductModel, RelaxedProduct};
use ldgba_rl::verification::{
    check_lemma_accepting_sets, check_theorem1, induced_chain_explicit, policy_return, recurrent_classes,
    value_iteration,
};

fn guard_strategy(n: usize) -> impl Strategy<Value = Guard> {
    let leaf = prop_oneof![Just(Guard::True), Just(Guard::False), (0..n).prop_map(Guard::Atom)];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Guard::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Guard::and(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Guard::or(a, b)),
        ]
    })
}

fn random_guard<G: Rng>(n: usize, depth: usize, rng: &mut G) -> Guard {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..12) {
            0 => Guard::True,
            1 => Guard::False,
            _ => Guard::Atom(rng.gen_range(0..n)),
        };
    }
    match rng.gen_range(0..3) {
        0 => Guard::not(random_guard(n, depth - 1, rng)),
        1 => Guard::and(random_guard(n, depth - 1, rng), random_guard(n, depth - 1, rng)),
        _ => Guard::or(random_guard(n, depth - 1, rng), random_guard(n, depth - 1, rng)),
    }
}

/// Transitive closure with reflexivity.
fn closure(adj: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    let mut r = vec![vec![false; n]; n];
    for (i, out) in adj.iter().enumerate() {
        r[i][i] = true;
        for &j in out {
            r[i][j] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

/// Acceptance of a lasso by a generalized Büchi graph over `(node, pos)`:
/// some reachable node lies on cycles through every accepting set.
fn brute_lasso<N: Copy + Eq + std::hash::Hash>(
    start: N,
    succ: impl Fn(N, usize) -> Vec<(N, usize)>,
    sets: impl Fn(N) -> u32,
    full: u32,
) -> bool {
    let mut index: HashMap<(N, usize), usize> = HashMap::new();
    let mut nodes = vec![(start, 0)];
    index.insert((start, 0), 0);
    let mut adj: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < nodes.len() {
        let (q, pos) = nodes[i];
        let mut out = Vec::new();
        for key in succ(q, pos) {
            let j = *index.entry(key).or_insert_with(|| {
                nodes.push(key);
                nodes.len() - 1
            });
            out.push(j);
        }
        adj.push(out);
        i += 1;
    }
    let r = closure(&adj);
    let n = nodes.len();
    (0..n).any(|v| {
        let on_cycle = adj[v].iter().any(|&w| r[w][v]);
        let mut met = 0;
        for w in 0..n {
            if r[v][w] && r[w][v] {
                met |= sets(nodes[w].0);
            }
        }
        on_cycle && met == full
    })
}

fn lasso_oracle(g: &Gba, prefix: &[LabelSet], cycle: &[LabelSet], frontier: bool) -> bool {
    let p = prefix.len();
    let len = p + cycle.len();
    let letter = |pos: usize| if pos < p { prefix[pos] } else { cycle[pos - p] };
    let next = |pos: usize| if pos + 1 < len { pos + 1 } else { p };
    let mode = if frontier { FrontierMode::Tracking } else { FrontierMode::Disabled };
    brute_lasso(
        ELdgbaState::initial(g),
        |es: ELdgbaState, pos| {
            let mut out = Vec::new();
            for t in g.successors(es.q, letter(pos)) {
                if let Some(n) = advance(g, es, t, mode) {
                    out.push((n, next(pos)));
                }
            }
            for &t in g.epsilon(es.q) {
                if let Some(n) = advance(g, es, t, mode) {
                    out.push((n, pos));
                }
            }
            out
        },
        |es| g.membership(es.q),
        g.full_sets(),
    )
}

/// Maximal end components by enumerating state subsets.
fn brute_mecs<M: EndComponentModel>(m: &M) -> BTreeSet<SubMdp> {
    let n = m.num_states();
    let mut ecs: Vec<SubMdp> = Vec::new();
    for mask in 1u32..(1 << n) {
        let inside = |s: usize| mask >> s & 1 == 1;
        let mut actions = BTreeMap::new();
        let mut ok = true;
        for s in (0..n).filter(|&s| inside(s)) {
            let acts: BTreeSet<usize> =
                m.enabled(s).into_iter().filter(|&a| m.support(s, a).iter().all(|&t| inside(t))).collect();
            if acts.is_empty() {
                ok = false;
                break;
            }
            actions.insert(s, acts);
        }
        if !ok {
            continue;
        }
        let idx: Vec<usize> = actions.keys().copied().collect();
        let local: HashMap<usize, usize> = idx.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let adj: Vec<Vec<usize>> = idx
            .iter()
            .map(|&s| actions[&s].iter().flat_map(|&a| m.support(s, a)).map(|t| local[&t]).collect())
            .collect();
        let r = closure(&adj);
        if r.iter().all(|row| row.iter().all(|&b| b)) {
            ecs.push(SubMdp { actions });
        }
    }
    let states = |e: &SubMdp| e.states().collect::<BTreeSet<_>>();
    ecs.iter()
        .filter(|e| !ecs.iter().any(|f| states(f).is_superset(&states(e)) && states(f) != states(e)))
        .cloned()
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dist_is_min_hamming_over_satisfying_letters(n in 1usize..=10, bits in any::<u32>(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_guard(n, 5, &mut rng);
        let l = LabelSet(bits & ((1u64 << n) - 1) as u32);
        let brute = (0..1u32 << n).filter(|&x| g.eval(LabelSet(x))).map(|x| (x ^ l.0).count_ones()).min();
        prop_assert_eq!(dist(l, &g.letters(n).unwrap()), brute);
    }

    #[test]
    fn dist_with_generated_guards(n in 1usize..=10, g in guard_strategy(10), bits in any::<u32>()) {
        let g = g.map_atoms(&|i| i % n);
        let l = LabelSet(bits & ((1u64 << n) - 1) as u32);
        let brute = (0..1u32 << n).filter(|&x| g.eval(LabelSet(x))).map(|x| (x ^ l.0).count_ones()).min();
        prop_assert_eq!(dist(l, &g.letters(n).unwrap()), brute);
    }

    #[test]
    fn mecs_match_subset_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = InstanceSize { max_states: 6, ..InstanceSize::default() };
        let mdp = random_mdp::<f64, _>(prop_names(1), &size, &mut rng).unwrap();
        let fast: BTreeSet<SubMdp> = maximal_end_components(&mdp, None).into_iter().collect();
        prop_assert_eq!(fast, brute_mecs(&mdp));
    }

    #[test]
    fn lasso_acceptance_matches_closure_oracle(seed in any::<u64>(), p in 0usize..4, c in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let np = rng.gen_range(1..=2);
        let a = random_ldgba_unconditioned(prop_names(np), &InstanceSize::default(), &mut rng).unwrap();
        let word: Vec<LabelSet> = (0..p + c).map(|_| LabelSet(rng.gen_range(0..1u32 << np))).collect();
        let (prefix, cycle) = word.split_at(p);
        prop_assert_eq!(lasso_accepted(&a, prefix, cycle), lasso_oracle(&a, prefix, cycle, false));
        prop_assert_eq!(eldgba_lasso_accepted(&a, prefix, cycle), lasso_oracle(&a, prefix, cycle, true));
        // the frontier only removes runs
        prop_assert!(!eldgba_lasso_accepted(&a, prefix, cycle) || lasso_accepted(&a, prefix, cycle));
    }

    #[test]
    fn recurrent_classes_match_reachability(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 20;
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|_| {
                let k = rng.gen_range(1..=3);
                let succ: BTreeSet<usize> = (0..k).map(|_| rng.gen_range(0..n)).collect();
                let p = 1.0 / succ.len() as f64;
                succ.into_iter().map(|t| (t, p)).collect()
            })
            .collect();
        let adj: Vec<Vec<usize>> = rows.iter().map(|r| r.iter().map(|&(t, _)| t).collect()).collect();
        let r = closure(&adj);
        let (classes, class_of) = recurrent_classes(&rows);
        for i in 0..n {
            let recurrent = (0..n).all(|j| !r[i][j] || r[j][i]);
            prop_assert_eq!(class_of[i].is_some(), recurrent, "state {}", i);
            if let Some(c) = class_of[i] {
                for j in 0..n {
                    prop_assert_eq!(classes[c].contains(&j), r[i][j] && r[j][i]);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn theorem1_holds_on_random_instances(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mdp, ldgba) = random_instance::<f64, _>(&InstanceSize::default(), &mut rng).unwrap();
        let rep = check_theorem1(&mdp, &ldgba, 1 << 20).unwrap();
        prop_assert!(rep.passed(), "{}", rep);
    }

    #[test]
    fn lemma1_holds_for_random_policies(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mdp, ldgba) = random_instance::<f64, _>(&InstanceSize::default(), &mut rng).unwrap();
        let model = RelaxedProduct::new(&mdp, &ldgba);
        let ep = ExplicitProduct::build(&model, &model.initial_states(), 1 << 20).unwrap();
        let pol = random_policy(&ep, &mut rng);
        let chain = induced_chain_explicit(&ep, &pol, &ep.roots).unwrap();
        let rep = check_lemma_accepting_sets(&chain);
        prop_assert!(rep.holds(), "{:?}", rep);
    }

    #[test]
    fn policy_return_agrees_with_value_iteration(seed in any::<u64>(), gamma in 0.5f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mdp, ldgba) = random_instance::<f64, _>(&InstanceSize::default(), &mut rng).unwrap();
        let cfg = RewardConfig::new(10.0, rng.gen_range(0.5..12.0), gamma).unwrap();
        let model = RelaxedProduct::new(&mdp, &ldgba);
        let ep = ExplicitProduct::build(&model, &model.initial_states(), 1 << 20).unwrap();
        let sol = value_iteration(&ep, &cfg, 1e-10).unwrap();
        for &root in &ep.roots {
            let chain = induced_chain_explicit(&ep, &sol.policy, &[root]).unwrap();
            let u = policy_return(&chain, &cfg, 1e-10).unwrap()[0];
            prop_assert!((u - sol.values[root]).abs() < 1e-6 * (1.0 + u.abs()), "{} vs {}", u, sol.values[root]);
        }
        // no random policy beats the optimum
        let pol = random_policy(&ep, &mut rng);
        let chain = induced_chain_explicit(&ep, &pol, &[ep.roots[0]]).unwrap();
        let u = policy_return(&chain, &cfg, 1e-10).unwrap()[0];
        prop_assert!(u <= sol.values[ep.roots[0]] + 1e-6);
    }
}

#[test]
fn accepting_self_loop_closed_form() {
    let mut b = ldgba_rl::mdp::LabeledMdpBuilder::<f64>::new(prop_names(1));
    let s = b.add_state("s");
    let a = b.action("stay");
    b.transition(s, a, vec![(s, 1.0)]).labels(s, vec![(LabelSet(1), 1.0)]);
    let mdp = b.build().unwrap();
    let hoa = "HOA: v1\nStates: 1\nStart: 0\nAP: 1 \"p0\"\nAcceptance: 1 Inf(0)\n--BODY--\nState: 0 {0}\n[t] 0\n--END--\n";
    let ldgba = ldgba_rl::automaton::infer_limit_deterministic(ldgba_rl::automaton::parse_hoa(hoa).unwrap()).unwrap();
    let model = RelaxedProduct::new(&mdp, &ldgba);
    let ep = ExplicitProduct::build(&model, &[model.initial()], 1000).unwrap();
    let cfg = RewardConfig::new(10.0, 1.0, 0.9).unwrap();
    let sol = value_iteration(&ep, &cfg, 1e-10).unwrap();
    assert!((sol.values[0] - 100.0).abs() < 1e-6);
}
