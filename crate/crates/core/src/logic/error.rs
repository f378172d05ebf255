use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogicError {
    #[error("{line}:{col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("line {line}: {name}/{arity} is a builtin and cannot be redefined")]
    DefinesBuiltin {
        name: String,
        arity: usize,
        line: usize,
    },
    #[error("line {line}: clause head must have a symbol as its predicate")]
    NonGroundHead { line: usize },
}
