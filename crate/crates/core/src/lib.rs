//! Q-learning of soft-constrained temporal-logic controllers on probabilistic
//! labeled MDPs. Tasks are limit-deterministic generalized Büchi automata;
//! learning runs on a relaxed product where the automaton may read a label
//! other than the observed one at a Hamming-distance cost, and a tracking
//! frontier records which accepting sets are still owed in the current round.
//!
//! Numeric types are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for common use.

pub mod automaton;
pub mod cli;
pub mod eldgba;
pub mod error;
pub mod graph;
pub mod instances;
pub mod label;
pub mod learning;
pub mod mdp;
pub mod persist;
pub mod product;
pub mod rollout;
pub mod scalar;
pub mod scenario;
pub mod verification;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type LabeledMdp64 = mdp::LabeledMdp<f64>;
pub type LabeledMdp32 = mdp::LabeledMdp<f32>;
pub type QTable64 = learning::QTable<f64>;
pub type QTable32 = learning::QTable<f32>;
pub type Policy64 = learning::Policy<f64>;
pub type Policy32 = learning::Policy<f32>;
pub type RewardConfig64 = learning::RewardConfig<f64>;
pub type RewardConfig32 = learning::RewardConfig<f32>;
pub type TrainConfig64 = learning::TrainConfig<f64>;
pub type TrainConfig32 = learning::TrainConfig<f32>;
pub type ExplicitProduct64 = product::ExplicitProduct<f64>;
pub type ExplicitProduct32 = product::ExplicitProduct<f32>;
pub type InducedChain64 = verification::InducedChain<f64>;
pub type InducedChain32 = verification::InducedChain<f32>;
