//! Executing a policy on the relaxed product and recording what happened.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learning::{immediate_reward, Policy, RewardConfig};
use crate::product::{ExtendedAction, ProductModel, ProductState};
use crate::scalar::Scalar;

pub const TRAJECTORY_CSV_HEADER: &str = "step,s,l,q,T,action,cost,reward";

#[derive(Debug, Clone, PartialEq)]
pub struct Step<R> {
    pub step: usize,
    pub x: ProductState,
    /// `None` on the last entry and at states without actions.
    pub action: Option<ExtendedAction>,
    pub cost: u32,
    pub reward: R,
    /// False when the policy had no entry and the canonical action was used.
    pub defined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<R> {
    pub steps: Vec<Step<R>>,
    pub total_reward: R,
    pub total_violation: u64,
    /// Completed rounds: entries into an accepting state that emptied the frontier.
    pub rounds: usize,
    /// Visits per accepting set.
    pub set_visits: Vec<usize>,
}

impl<R: Scalar> Trajectory<R> {
    pub fn states(&self) -> impl Iterator<Item = &ProductState> {
        self.steps.iter().map(|s| &s.x)
    }

    pub fn undefined_states(&self) -> Vec<ProductState> {
        self.steps.iter().filter(|s| !s.defined).map(|s| s.x).collect()
    }

    pub fn to_csv<M: ProductModel<R>>(&self, model: &M) -> String {
        let mdp = model.mdp();
        let mut out = String::from(TRAJECTORY_CSV_HEADER);
        out.push('\n');
        for st in &self.steps {
            let l: Vec<&str> = st.x.l.props().map(|i| mdp.props()[i].as_str()).collect();
            let action = st.action.map(|u| u.describe(mdp)).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                st.step,
                mdp.state_name(st.x.s),
                l.join("+"),
                st.x.q,
                st.x.t,
                action,
                st.cost,
                st.reward
            ));
        }
        out
    }
}

/// Runs `policy` for `n` steps from the model's initial state. States the
/// policy does not cover fall back to the first canonical action and are
/// flagged.
pub fn execute_policy<R: Scalar, M: ProductModel<R>>(
    model: &M,
    policy: &Policy<R>,
    cfg: &RewardConfig<R>,
    n: usize,
    seed: u64,
) -> Result<Trajectory<R>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = model.ldgba().num_sets();
    let mut traj = Trajectory {
        steps: Vec::with_capacity(n + 1),
        total_reward: R::zero(),
        total_violation: 0,
        rounds: 0,
        set_visits: vec![0; f],
    };
    let mut x = model.initial();
    for step in 0..n {
        let Some((u, defined)) = policy.choose(&x, model) else {
            // No enabled action: the run is stuck here.
            let reward = immediate_reward(model.membership(&x), 0, cfg);
            traj.total_reward += reward;
            traj.steps.push(Step { step, x, action: None, cost: 0, reward, defined: true });
            continue;
        };
        let (next, cost) = model.sample_step(&x, &u, &mut rng)?;
        let reward = immediate_reward(model.membership(&x), cost, cfg);
        traj.total_reward += reward;
        traj.total_violation += u64::from(cost);
        traj.steps.push(Step { step, x, action: Some(u), cost, reward, defined });
        let m = model.membership(&next);
        if m != 0 {
            for (j, v) in traj.set_visits.iter_mut().enumerate() {
                if m >> j & 1 == 1 {
                    *v += 1;
                }
            }
            if next.t == 0 {
                traj.rounds += 1;
            }
        }
        x = next;
    }
    traj.steps.push(Step { step: n, x, action: None, cost: 0, reward: R::zero(), defined: true });
    Ok(traj)
}

/// Checks that every logged step is a positive-probability transition of
/// `model` with the logged cost.
pub fn validate_trajectory<R: Scalar, M: ProductModel<R>>(model: &M, traj: &Trajectory<R>) -> Result<()> {
    for w in traj.steps.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let Some(u) = a.action else {
            if a.x != b.x {
                return Err(Error::InvalidModel(format!("step {} moved without an action", a.step)));
            }
            continue;
        };
        let p: R = model.transition(&a.x, &u)?.iter().filter(|(y, _)| *y == b.x).map(|&(_, p)| p).sum();
        if p <= R::zero() {
            return Err(Error::InvalidModel(format!("step {} has probability zero", a.step)));
        }
        if model.cost(&a.x, &u) != a.cost {
            return Err(Error::InvalidModel(format!("step {} logs a wrong cost", a.step)));
        }
    }
    Ok(())
}
