//! Second-order clause templates.

use rustc_hash::FxHashMap;

use crate::logic::{parse_clauses, Atom, LogicError, Term, Var};

/// The nine templates used for every task. Names follow the usual MIL
/// vocabulary; the `_m` suffix marks monadic-head variants.
pub const DEFAULT_METARULES: &str = "\
metarule(ident_m, [P,Q], [P,A], [[Q,A]]).
metarule(tailrec_m, [P,Q], [P,A], [[Q,A,B],[P,B]]).
metarule(chain_m, [P,Q,R], [P,A], [[Q,A,B],[R,B]]).
metarule(precon, [P,Q,R], [P,A,B], [[Q,A],[R,A,B]]).
metarule(ident, [P,Q], [P,A,B], [[Q,A,B]]).
metarule(conj, [P,Q,R], [P,A,B], [[Q,A,B],[R,A,B]]).
metarule(tri_chain, [P,Q,R], [P,A,B], [[Q,A,B,C],[R,C]]).
metarule(postcon, [P,Q,R], [P,A,B], [[Q,A,B],[R,B]]).
metarule(chain, [P,Q,R], [P,A,B], [[Q,A,C],[R,C,B]]).
";

#[derive(Clone, Debug, PartialEq)]
pub struct Metarule {
    pub name: String,
    /// Second-order variables; the first is the head predicate.
    pub existentials: Vec<Var>,
    pub head: Atom,
    pub body: Vec<Atom>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetaruleError {
    #[error(transparent)]
    Syntax(#[from] LogicError),
    #[error("line {line}: expected metarule(Name, Existentials, Head, Body)")]
    Shape { line: usize },
    #[error("metarule {name}: predicate variable {var} is not declared existential")]
    Undeclared { name: String, var: String },
    #[error("metarule {name}: head predicate must be an existential variable")]
    HeadPredicate { name: String },
    #[error("unknown metarule {0}")]
    Unknown(String),
}

fn as_atom(t: &Term) -> Option<Atom> {
    let items = t.as_list()?;
    let (pred, args) = items.split_first()?;
    pred.is_var().then(|| Atom {
        pred: pred.clone(),
        args: args.to_vec(),
    })
}

impl Metarule {
    /// Instantiate with the given predicate terms for the existentials and
    /// fresh first-order variables.
    pub fn instantiate(&self, preds: &[Term]) -> (Atom, Vec<Atom>) {
        let mut map: FxHashMap<Var, Term> = self
            .existentials
            .iter()
            .copied()
            .zip(preds.iter().cloned())
            .collect();
        let mut fo = Vec::new();
        for a in std::iter::once(&self.head).chain(&self.body) {
            a.args.iter().for_each(|t| t.collect_vars(&mut fo));
        }
        for v in fo {
            map.entry(v).or_insert_with(Term::var);
        }
        (
            self.head.rename(&map),
            self.body.iter().map(|a| a.rename(&map)).collect(),
        )
    }

    pub fn head_arity(&self) -> usize {
        self.head.args.len()
    }

    /// Index of the existential in predicate position of body atom `i`.
    pub fn body_pred_index(&self, i: usize) -> usize {
        let Term::Var(v) = self.body[i].pred else {
            unreachable!("validated on parse")
        };
        self.existentials.iter().position(|e| *e == v).unwrap()
    }
}

/// Read `metarule(Name, [P,..], [P,A,..], [[Q,A,..],..]).` entries.
pub fn parse_metarules(text: &str) -> Result<Vec<Metarule>, MetaruleError> {
    let mut out = Vec::new();
    for (clause, line) in parse_clauses(text)? {
        let shape = || MetaruleError::Shape { line };
        let h = &clause.head;
        if h.pred != Term::sym("metarule") || h.args.len() != 4 || !clause.body.is_empty() {
            return Err(shape());
        }
        let name = match &h.args[0] {
            Term::Sym(s) => s.as_str().to_owned(),
            _ => return Err(shape()),
        };
        let existentials: Vec<Var> = h.args[1]
            .as_list()
            .ok_or_else(shape)?
            .iter()
            .map(|t| match t {
                Term::Var(v) => Ok(*v),
                _ => Err(shape()),
            })
            .collect::<Result<_, _>>()?;
        let head = as_atom(&h.args[2]).ok_or_else(shape)?;
        let body: Vec<Atom> = h.args[3]
            .as_list()
            .ok_or_else(shape)?
            .iter()
            .map(|t| as_atom(t).ok_or_else(shape))
            .collect::<Result<_, _>>()?;
        if existentials.first().map(|v| Term::Var(*v)) != Some(head.pred.clone()) {
            return Err(MetaruleError::HeadPredicate { name });
        }
        for a in &body {
            let Term::Var(v) = a.pred else { unreachable!() };
            if !existentials.contains(&v) {
                return Err(MetaruleError::Undeclared {
                    name,
                    var: a.pred.to_string(),
                });
            }
        }
        out.push(Metarule {
            name,
            existentials,
            head,
            body,
        });
    }
    Ok(out)
}

pub fn default_metarules() -> Vec<Metarule> {
    parse_metarules(DEFAULT_METARULES).expect("built-in metarules parse")
}

/// Pick metarules by name from the default library, in library order.
pub fn select_metarules(names: &[&str]) -> Result<Vec<Metarule>, MetaruleError> {
    let all = default_metarules();
    if let Some(bad) = names.iter().find(|n| !all.iter().any(|m| m.name == **n)) {
        return Err(MetaruleError::Unknown(bad.to_string()));
    }
    Ok(all
        .into_iter()
        .filter(|m| names.contains(&m.name.as_str()))
        .collect())
}
