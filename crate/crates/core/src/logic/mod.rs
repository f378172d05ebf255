//! Definite-clause logic: terms, parsing, unification and deductive proof.

pub mod engine;
mod error;
pub mod kb;
pub mod parser;
pub mod subst;
pub mod symbol;
pub mod term;

pub use engine::{deduce, DeduceOutcome, HasMachine, Machine, DEFAULT_DEPTH_LIMIT};
pub use error::LogicError;
pub use kb::{Flow, KnowledgeBase, PredKey};
pub use parser::{parse_clauses, parse_term};
pub use subst::{apply, unify, Bindings, Substitution};
pub use symbol::Symbol;
pub use term::{Atom, Clause, Term, Var};

/// Parse a program text into a knowledge base.
pub fn parse_program(text: &str) -> Result<KnowledgeBase, LogicError> {
    KnowledgeBase::parse(text)
}

/// Fresh copy of `clause` sharing no variables with anything seen so far.
pub fn rename_apart(clause: &Clause) -> Clause {
    clause.rename_apart()
}
