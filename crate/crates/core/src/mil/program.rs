//! Induced programs: metarule instantiations, their clauses, and the size
//! prior.

use std::f64::consts::PI;
use std::fmt;

use crate::logic::{Clause, KnowledgeBase, LogicError, Symbol, Term};

use super::metarule::Metarule;

/// A fully ground metarule instantiation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MetaSub {
    pub metarule: String,
    /// One symbol per existential, in the metarule's declared order.
    pub preds: Vec<Symbol>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    pub metasubs: Vec<MetaSub>,
    /// One clause per metasub, same order.
    pub clauses: Vec<Clause>,
    pub invented: Vec<Symbol>,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_metasubs(
        metasubs: Vec<MetaSub>,
        metarules: &[Metarule],
        invented: Vec<Symbol>,
    ) -> Program {
        let clauses = metasubs
            .iter()
            .map(|ms| {
                let rule = metarules
                    .iter()
                    .find(|m| m.name == ms.metarule)
                    .expect("metasub names a known metarule");
                let preds: Vec<Term> = ms.preds.iter().map(|s| Term::Sym(*s)).collect();
                let (head, body) = rule.instantiate(&preds);
                Clause { head, body }
            })
            .collect();
        Program {
            metasubs,
            clauses,
            invented,
        }
    }

    /// Clause count, `c(H)`.
    pub fn size(&self) -> usize {
        self.metasubs.len()
    }

    /// Body literals over all clauses.
    pub fn literal_count(&self) -> usize {
        self.clauses.iter().map(|c| c.body.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.metasubs.is_empty()
    }

    /// Clause texts sorted; equal for programs that differ only in clause order.
    pub fn canonical(&self) -> String {
        let mut lines: Vec<String> = self.clauses.iter().map(Clause::pretty).collect();
        lines.sort();
        lines.join("\n")
    }

    /// One clause per line, clauses of invented predicates last.
    pub fn pretty(&self) -> String {
        let invented = |c: &&Clause| {
            c.head
                .pred_symbol()
                .is_some_and(|s| self.invented.contains(&s))
        };
        let (late, early): (Vec<&Clause>, Vec<&Clause>) = self.clauses.iter().partition(invented);
        early
            .into_iter()
            .chain(late)
            .map(|c| c.pretty() + "\n")
            .collect()
    }

    /// Clauses defining `pred` with the given arity.
    pub fn defines(&self, pred: Symbol) -> bool {
        self.clauses
            .iter()
            .any(|c| c.head.pred_symbol() == Some(pred))
    }

    /// Read a program back from its printed form (metasub structure is not
    /// recovered).
    pub fn parse_clauses(text: &str) -> Result<Vec<Clause>, LogicError> {
        Ok(crate::logic::parse_clauses(text)?
            .into_iter()
            .map(|(c, _)| c)
            .collect())
    }

    /// Read a program printed by [`Program::pretty`], recovering the metarule
    /// behind each clause. Predicates defined here other than `target` are
    /// taken as invented.
    pub fn from_text(
        text: &str,
        metarules: &[Metarule],
        target: Symbol,
    ) -> Result<Program, ProgramTextError> {
        let mut metasubs = Vec::new();
        let mut invented = Vec::new();
        for clause in Self::parse_clauses(text)? {
            let want = clause.pretty();
            let ms = metarules
                .iter()
                .find_map(|rule| {
                    match_metarule(rule, &clause).filter(|ms| {
                        let preds: Vec<Term> = ms.preds.iter().map(|s| Term::Sym(*s)).collect();
                        let (head, body) = rule.instantiate(&preds);
                        Clause { head, body }.pretty() == want
                    })
                })
                .ok_or(ProgramTextError::NoMetarule(want))?;
            if ms.preds[0] != target && !invented.contains(&ms.preds[0]) {
                invented.push(ms.preds[0]);
            }
            metasubs.push(ms);
        }
        Ok(Program::from_metasubs(metasubs, metarules, invented))
    }

    /// Add the clauses to `kb` so later tasks can call them.
    pub fn install(&self, kb: &mut KnowledgeBase, interpreted: bool) -> Result<(), LogicError> {
        for c in &self.clauses {
            if interpreted {
                if let Some(key) = c.key() {
                    kb.mark_interpreted(key);
                }
            }
            kb.add_clause(c.clone())?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProgramTextError {
    #[error(transparent)]
    Syntax(#[from] LogicError),
    #[error("no metarule produces clause {0}")]
    NoMetarule(String),
}

/// Predicate symbols for `rule`'s existentials read off `clause`, if the
/// shapes agree.
fn match_metarule(rule: &Metarule, clause: &Clause) -> Option<MetaSub> {
    if rule.body.len() != clause.body.len() || rule.head_arity() != clause.head.args.len() {
        return None;
    }
    let mut preds: Vec<Option<Symbol>> = vec![None; rule.existentials.len()];
    preds[0] = Some(clause.head.pred_symbol()?);
    for (i, lit) in clause.body.iter().enumerate() {
        if lit.args.len() != rule.body[i].args.len() {
            return None;
        }
        let sym = lit.pred_symbol()?;
        let slot = &mut preds[rule.body_pred_index(i)];
        match slot {
            Some(s) if *s != sym => return None,
            _ => *slot = Some(sym),
        }
    }
    Some(MetaSub {
        metarule: rule.name.clone(),
        preds: preds.into_iter().collect::<Option<Vec<_>>>()?,
    })
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

/// Size prior `6 / (π c)²`. Sums to 1 over `c ≥ 1`.
pub fn prior(c: usize) -> f64 {
    assert!(
        c >= 1,
        "prior is defined for programs with at least one clause"
    );
    6.0 / (PI * c as f64).powi(2)
}

pub fn log_prior(c: usize) -> f64 {
    prior(c).ln()
}

/// Fresh predicate names `base_1`, `base_2`, ... that never clash with symbols
/// already used by the background knowledge.
#[derive(Clone, Debug)]
pub struct SymbolInventor {
    base: String,
    next: usize,
}

impl SymbolInventor {
    pub fn new(base: &str) -> Self {
        SymbolInventor {
            base: base.to_owned(),
            next: 1,
        }
    }

    pub fn invent(&mut self, kb: &KnowledgeBase) -> Symbol {
        loop {
            let sym = Symbol::intern(&format!("{}_{}", self.base, self.next));
            self.next += 1;
            if !kb.mentions_symbol(sym) {
                return sym;
            }
        }
    }

    pub fn checkpoint(&self) -> usize {
        self.next
    }

    pub fn restore(&mut self, checkpoint: usize) {
        self.next = checkpoint;
    }
}

pub fn invent_symbol(inventor: &mut SymbolInventor, kb: &KnowledgeBase) -> Symbol {
    inventor.invent(kb)
}
