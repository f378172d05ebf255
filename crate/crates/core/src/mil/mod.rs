//! Meta-interpretive induction of abductive programs.

pub mod induce;
pub mod metarule;
pub mod program;
pub mod prover;

pub use induce::{
    entails, induce, prove, run_program, score_program, score_query, AbductionResult, Budget,
    Entailment, ExampleScore, InduceOutcome, Induced, ProveOutcome, Query, SearchStats,
};
pub use metarule::{
    default_metarules, parse_metarules, select_metarules, Metarule, MetaruleError,
    DEFAULT_METARULES,
};
pub use program::{
    invent_symbol, log_prior, prior, MetaSub, Program, ProgramTextError, SymbolInventor,
};
pub use prover::{Abduced, Abducible, Background, Facts, ProveConfig, ProveError, Prover};
