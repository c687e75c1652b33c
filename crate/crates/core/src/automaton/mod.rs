//! Generalized Büchi automata: guards, HOA input/output and the
//! limit-deterministic partition.

pub mod gba;
pub mod guard;
pub mod hoa;

pub use gba::{infer_limit_deterministic, lasso_accepted, AutState, Edge, Gba, Ldgba};
pub use guard::Guard;
pub use hoa::{emit_hoa, parse_hoa, HoaAutomaton};
