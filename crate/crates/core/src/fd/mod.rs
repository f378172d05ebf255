//! Finite-domain constraints over latent integer labels and the solver that
//! finds their most probable assignment.

mod domain;
mod solve;
mod store;

pub use domain::Domain;
pub use solve::{score, solve_all, solve_best, AllSolutions, Labeling, SolveOutcome};
pub use store::{Constraint, ConstraintStore, FdError, FdVar, Infeasible, VarId};
