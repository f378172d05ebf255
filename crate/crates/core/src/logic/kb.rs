//! Clause store indexed by predicate key, plus the native builtin table.

use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};

use super::error::LogicError;
use super::parser::parse_clauses;
use super::symbol::Symbol;
use super::term::{Clause, Term};

pub type PredKey = (Symbol, usize);

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// A builtin receives its arguments with bindings applied and emits argument
/// tuples; the engine unifies each tuple with the call and continues.
pub type Builtin = fn(&[Term], &mut dyn FnMut(Vec<Term>) -> Flow) -> Flow;

#[derive(Clone)]
pub struct KnowledgeBase {
    clauses: FxHashMap<PredKey, Vec<Arc<Clause>>>,
    order: Vec<PredKey>,
    builtins: FxHashMap<PredKey, Builtin>,
    /// Predicates whose clauses the abductive prover resolves itself instead of
    /// handing them to plain deduction, so abducibles inside them still fire.
    interpreted: FxHashSet<PredKey>,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        KnowledgeBase::new()
    }
}

impl std::fmt::Debug for KnowledgeBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnowledgeBase")
            .field("predicates", &self.order)
            .finish()
    }
}

impl KnowledgeBase {
    /// Empty program with the standard builtins installed.
    pub fn new() -> Self {
        let mut kb = KnowledgeBase {
            clauses: FxHashMap::default(),
            order: Vec::new(),
            builtins: FxHashMap::default(),
            interpreted: FxHashSet::default(),
        };
        kb.install_builtin("length", 2, builtin_length);
        kb.install_builtin("numlist", 3, builtin_numlist);
        kb.install_builtin("between", 3, builtin_between);
        kb.install_builtin("permutation", 2, builtin_permutation);
        kb.install_builtin("nth1", 3, builtin_nth1);
        kb.install_builtin("<", 2, |a, e| compare(a, e, |x, y| x < y));
        kb.install_builtin(">", 2, |a, e| compare(a, e, |x, y| x > y));
        kb.install_builtin("=<", 2, |a, e| compare(a, e, |x, y| x <= y));
        kb.install_builtin(">=", 2, |a, e| compare(a, e, |x, y| x >= y));
        kb.install_builtin("=", 2, |a, e| e(vec![a[0].clone(), a[0].clone()]));
        kb
    }

    pub fn install_builtin(&mut self, name: &str, arity: usize, f: Builtin) {
        self.builtins.insert((Symbol::intern(name), arity), f);
    }

    pub fn builtin(&self, key: PredKey) -> Option<Builtin> {
        self.builtins.get(&key).copied()
    }

    pub fn is_builtin(&self, key: PredKey) -> bool {
        self.builtins.contains_key(&key)
    }

    /// Append a clause. Redefining a builtin is rejected.
    pub fn add_clause(&mut self, clause: Clause) -> Result<(), LogicError> {
        self.add_clause_at(clause, 0)
    }

    fn add_clause_at(&mut self, clause: Clause, line: usize) -> Result<(), LogicError> {
        let key = clause.key().ok_or(LogicError::NonGroundHead { line })?;
        if self.builtins.contains_key(&key) {
            return Err(LogicError::DefinesBuiltin {
                name: key.0.as_str().to_owned(),
                arity: key.1,
                line,
            });
        }
        self.clauses
            .entry(key)
            .or_insert_with(|| {
                self.order.push(key);
                Vec::new()
            })
            .push(Arc::new(clause));
        Ok(())
    }

    pub fn parse(text: &str) -> Result<KnowledgeBase, LogicError> {
        let mut kb = KnowledgeBase::new();
        kb.consult(text)?;
        Ok(kb)
    }

    /// Add every clause in `text`.
    pub fn consult(&mut self, text: &str) -> Result<(), LogicError> {
        for (clause, line) in parse_clauses(text)? {
            self.add_clause_at(clause, line)?;
        }
        Ok(())
    }

    pub fn clauses(&self, key: PredKey) -> &[Arc<Clause>] {
        self.clauses.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn defines(&self, key: PredKey) -> bool {
        self.clauses.contains_key(&key) || self.builtins.contains_key(&key)
    }

    /// Predicate keys with clauses, in order of first definition.
    pub fn predicates(&self) -> &[PredKey] {
        &self.order
    }

    pub fn all_clauses(&self) -> impl Iterator<Item = &Clause> {
        self.order
            .iter()
            .flat_map(|k| self.clauses[k].iter().map(|c| c.as_ref()))
    }

    pub fn len(&self) -> usize {
        self.clauses.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mark_interpreted(&mut self, key: PredKey) {
        self.interpreted.insert(key);
    }

    pub fn is_interpreted(&self, key: PredKey) -> bool {
        self.interpreted.contains(&key)
    }

    /// Whether any clause or builtin uses `sym` as a predicate or functor.
    pub fn mentions_symbol(&self, sym: Symbol) -> bool {
        fn in_term(t: &Term, s: Symbol) -> bool {
            match t {
                Term::Sym(x) => *x == s,
                Term::Compound(f, args) => *f == s || args.iter().any(|a| in_term(a, s)),
                _ => false,
            }
        }
        self.builtins.keys().any(|k| k.0 == sym)
            || self.all_clauses().any(|c| {
                std::iter::once(&c.head)
                    .chain(c.body.iter())
                    .any(|a| in_term(&a.pred, sym) || a.args.iter().any(|t| in_term(t, sym)))
            })
    }
}

fn compare(
    args: &[Term],
    emit: &mut dyn FnMut(Vec<Term>) -> Flow,
    op: fn(i64, i64) -> bool,
) -> Flow {
    match (args[0].as_int(), args[1].as_int()) {
        (Some(x), Some(y)) if op(x, y) => emit(args.to_vec()),
        _ => Flow::Continue,
    }
}

/// Elements before the first unbound tail, and that tail (or `None` if the list
/// is proper). `None` overall if the term is not list-shaped.
fn list_prefix(t: &Term) -> Option<(Vec<Term>, Option<Term>)> {
    let mut items = Vec::new();
    let mut cur = t;
    loop {
        match cur {
            Term::Sym(Symbol::NIL) => return Some((items, None)),
            Term::Var(_) => return Some((items, Some(cur.clone()))),
            _ => {
                let (h, tl) = cur.as_cons()?;
                items.push(h.clone());
                cur = tl;
            }
        }
    }
}

fn builtin_length(args: &[Term], emit: &mut dyn FnMut(Vec<Term>) -> Flow) -> Flow {
    let Some((items, tail)) = list_prefix(&args[0]) else {
        return Flow::Continue;
    };
    match (tail, args[1].as_int()) {
        (None, _) => emit(vec![args[0].clone(), Term::Int(items.len() as i64)]),
        (Some(_), Some(n)) if n >= items.len() as i64 => {
            let extra = (n as usize) - items.len();
            let list = Term::list(items.into_iter().chain((0..extra).map(|_| Term::var())));
            emit(vec![list, Term::Int(n)])
        }
        // Open list with unknown length: unbounded enumeration is not supported.
        _ => Flow::Continue,
    }
}

/// `numlist(Lo, Hi, L)`: `L` is `[Lo, ..., Hi]`, or `[]` when `Hi < Lo`, matching
/// a `findall` over `between`.
fn builtin_numlist(args: &[Term], emit: &mut dyn FnMut(Vec<Term>) -> Flow) -> Flow {
    let (Some(lo), Some(hi)) = (args[0].as_int(), args[1].as_int()) else {
        return Flow::Continue;
    };
    let list = Term::list((lo..=hi).map(Term::Int).collect::<Vec<_>>());
    emit(vec![args[0].clone(), args[1].clone(), list])
}

fn builtin_between(args: &[Term], emit: &mut dyn FnMut(Vec<Term>) -> Flow) -> Flow {
    let (Some(lo), Some(hi)) = (args[0].as_int(), args[1].as_int()) else {
        return Flow::Continue;
    };
    if let Some(x) = args[2].as_int() {
        if lo <= x && x <= hi {
            return emit(args.to_vec());
        }
        return Flow::Continue;
    }
    for x in lo..=hi {
        if emit(vec![args[0].clone(), args[1].clone(), Term::Int(x)]) == Flow::Stop {
            return Flow::Stop;
        }
    }
    Flow::Continue
}

/// Permutations of a proper list in lexicographic order of positions. A ground
/// second argument is checked as a multiset instead of enumerated.
fn builtin_permutation(args: &[Term], emit: &mut dyn FnMut(Vec<Term>) -> Flow) -> Flow {
    let Some(items) = args[0].as_list() else {
        return Flow::Continue;
    };
    if args[1].is_ground() {
        let Some(mut other) = args[1].as_list() else {
            return Flow::Continue;
        };
        let mut mine = items;
        mine.sort();
        other.sort();
        if mine == other {
            return emit(args.to_vec());
        }
        return Flow::Continue;
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    loop {
        let perm = Term::list(idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>());
        if emit(vec![args[0].clone(), perm]) == Flow::Stop {
            return Flow::Stop;
        }
        if !next_permutation(&mut idx) {
            return Flow::Continue;
        }
    }
}

pub(crate) fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// `nth1(I, L, E)`. With `I` bound, an open list is extended with fresh cells as
/// needed; with `I` unbound, positions of the known prefix are enumerated.
fn builtin_nth1(args: &[Term], emit: &mut dyn FnMut(Vec<Term>) -> Flow) -> Flow {
    let Some((mut items, tail)) = list_prefix(&args[1]) else {
        return Flow::Continue;
    };
    match args[0].as_int() {
        Some(i) if i >= 1 => {
            let i = i as usize;
            if i <= items.len() {
                return emit(vec![args[0].clone(), args[1].clone(), items[i - 1].clone()]);
            }
            if tail.is_none() {
                return Flow::Continue;
            }
            let known = items.len();
            items.extend((known..i).map(|_| Term::var()));
            let elem = items[i - 1].clone();
            let whole = Term::list_with_tail(items, Term::var());
            emit(vec![args[0].clone(), whole, elem])
        }
        Some(_) => Flow::Continue,
        None if args[0].is_var() => {
            for (k, e) in items.iter().enumerate() {
                if emit(vec![Term::Int(k as i64 + 1), args[1].clone(), e.clone()]) == Flow::Stop {
                    return Flow::Stop;
                }
            }
            Flow::Continue
        }
        None => Flow::Continue,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_by_key() {
        let kb =
            KnowledgeBase::parse("head([H|_],H).\ntail([_|T],T).\nempty([]).\nhead(a,b).").unwrap();
        assert_eq!(kb.clauses((Symbol::intern("head"), 2)).len(), 2);
        assert_eq!(kb.clauses((Symbol::intern("empty"), 1)).len(), 1);
        assert!(kb.clauses((Symbol::intern("empty"), 2)).is_empty());
        assert_eq!(kb.len(), 4);
    }

    #[test]
    fn builtin_redefinition_is_an_error() {
        match KnowledgeBase::parse("p.\nlength(X, 0).") {
            Err(LogicError::DefinesBuiltin { line, arity, .. }) => {
                assert_eq!((line, arity), (2, 2))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn permutation_counts() {
        let mut n = 0;
        builtin_permutation(&[Term::int_list(&[1, 2, 3]), Term::var()], &mut |_| {
            n += 1;
            Flow::Continue
        });
        assert_eq!(n, 6);
    }

    #[test]
    fn next_permutation_is_lexicographic() {
        let mut v = vec![0, 1, 2];
        let mut seen = vec![v.clone()];
        while next_permutation(&mut v) {
            seen.push(v.clone());
        }
        assert_eq!(seen.len(), 6);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
    }
}
