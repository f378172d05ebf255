//! First-order terms, atoms and clauses, and their printed form.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rustc_hash::FxHashMap;

use super::symbol::Symbol;

static NEXT_VAR: AtomicU64 = AtomicU64::new(1);

/// A logic variable. Identity is the numeric id; ids are never reused within a
/// process.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Var(pub u64);

impl Var {
    pub fn fresh() -> Var {
        Var(NEXT_VAR.fetch_add(1, Ordering::Relaxed))
    }

    /// Reserve `n` consecutive fresh ids and return the first.
    pub fn fresh_block(n: u64) -> u64 {
        NEXT_VAR.fetch_add(n, Ordering::Relaxed)
    }

    /// Make sure later fresh variables never collide with `id`, which was
    /// read back from printed text.
    pub(crate) fn reserve(id: u64) -> Var {
        NEXT_VAR.fetch_max(id + 1, Ordering::Relaxed);
        Var(id)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    Int(i64),
    Sym(Symbol),
    Compound(Symbol, Arc<[Term]>),
}

impl Term {
    pub fn sym(name: &str) -> Term {
        Term::Sym(Symbol::intern(name))
    }

    pub fn var() -> Term {
        Term::Var(Var::fresh())
    }

    pub fn compound(functor: Symbol, args: Vec<Term>) -> Term {
        if args.is_empty() {
            Term::Sym(functor)
        } else {
            Term::Compound(functor, args.into())
        }
    }

    pub fn app(functor: &str, args: Vec<Term>) -> Term {
        Term::compound(Symbol::intern(functor), args)
    }

    pub fn nil() -> Term {
        Term::Sym(Symbol::NIL)
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::Compound(Symbol::CONS, Arc::from(vec![head, tail]))
    }

    /// Proper list of the given elements.
    pub fn list(items: impl IntoIterator<Item = Term, IntoIter: DoubleEndedIterator>) -> Term {
        Term::list_with_tail(items, Term::nil())
    }

    pub fn list_with_tail(
        items: impl IntoIterator<Item = Term, IntoIter: DoubleEndedIterator>,
        tail: Term,
    ) -> Term {
        items
            .into_iter()
            .rev()
            .fold(tail, |acc, t| Term::cons(t, acc))
    }

    pub fn int_list(values: &[i64]) -> Term {
        Term::list(values.iter().map(|&v| Term::Int(v)))
    }

    /// Reference to perceived item `j` of the current example.
    pub fn item(j: usize) -> Term {
        Term::Compound(Symbol::ITEM, Arc::from(vec![Term::Int(j as i64)]))
    }

    pub fn as_item(&self) -> Option<usize> {
        match self {
            Term::Compound(Symbol::ITEM, args) if args.len() == 1 => match args[0] {
                Term::Int(j) => Some(j as usize),
                _ => None,
            },
            _ => None,
        }
    }

    /// Reference to finite-domain variable `id` of the current constraint store.
    pub fn fd_ref(id: usize) -> Term {
        Term::Compound(Symbol::FD, Arc::from(vec![Term::Int(id as i64)]))
    }

    pub fn as_fd_ref(&self) -> Option<usize> {
        match self {
            Term::Compound(Symbol::FD, args) if args.len() == 1 => match args[0] {
                Term::Int(j) => Some(j as usize),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Functor and arity of a callable term.
    pub fn key(&self) -> Option<(Symbol, usize)> {
        match self {
            Term::Sym(s) => Some((*s, 0)),
            Term::Compound(f, args) => Some((*f, args.len())),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(_, args) => args,
            _ => &[],
        }
    }

    /// Split a cons cell into head and tail.
    pub fn as_cons(&self) -> Option<(&Term, &Term)> {
        match self {
            Term::Compound(Symbol::CONS, args) if args.len() == 2 => Some((&args[0], &args[1])),
            _ => None,
        }
    }

    /// Elements of a proper list, or `None` if `self` is not one.
    pub fn as_list(&self) -> Option<Vec<Term>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Term::Sym(Symbol::NIL) => return Some(out),
                _ => {
                    let (h, t) = cur.as_cons()?;
                    out.push(h.clone());
                    cur = t;
                }
            }
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub fn occurs(&self, v: Var) -> bool {
        match self {
            Term::Var(w) => *w == v,
            Term::Compound(_, args) => args.iter().any(|a| a.occurs(v)),
            _ => false,
        }
    }

    /// Variables in order of first occurrence, without duplicates.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }

    /// Replace variables according to `map`, leaving others untouched.
    pub fn rename(&self, map: &FxHashMap<Var, Term>) -> Term {
        match self {
            Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Compound(f, args) => {
                Term::Compound(*f, args.iter().map(|a| a.rename(map)).collect())
            }
            _ => self.clone(),
        }
    }
}

/// How variables are printed.
enum VarNames<'a> {
    /// `_G<id>`, which the parser maps back to the same variable.
    Raw,
    /// Clause-local names `A`, `B`, ... in order of first occurrence.
    Local(&'a FxHashMap<Var, String>),
}

fn needs_quotes(name: &str) -> bool {
    if name == "[]" {
        return false;
    }
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => !chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        _ => true,
    }
}

pub(crate) fn write_symbol(out: &mut impl fmt::Write, name: &str) -> fmt::Result {
    if !needs_quotes(name) {
        return out.write_str(name);
    }
    out.write_char('\'')?;
    for c in name.chars() {
        match c {
            '\'' => out.write_str("\\'")?,
            '\\' => out.write_str("\\\\")?,
            '\n' => out.write_str("\\n")?,
            _ => out.write_char(c)?,
        }
    }
    out.write_char('\'')
}

fn write_term(out: &mut impl fmt::Write, t: &Term, names: &VarNames) -> fmt::Result {
    match t {
        Term::Var(v) => match names {
            VarNames::Local(map) if map.contains_key(v) => out.write_str(&map[v]),
            _ => write!(out, "_G{}", v.0),
        },
        Term::Int(i) => write!(out, "{i}"),
        Term::Sym(s) => write_symbol(out, s.as_str()),
        Term::Compound(Symbol::CONS, args) if args.len() == 2 => {
            out.write_char('[')?;
            write_term(out, &args[0], names)?;
            let mut tail = &args[1];
            loop {
                match tail {
                    Term::Sym(Symbol::NIL) => break,
                    Term::Compound(Symbol::CONS, a) if a.len() == 2 => {
                        out.write_char(',')?;
                        write_term(out, &a[0], names)?;
                        tail = &a[1];
                    }
                    other => {
                        out.write_char('|')?;
                        write_term(out, other, names)?;
                        break;
                    }
                }
            }
            out.write_char(']')
        }
        Term::Compound(f, args) => {
            write_symbol(out, f.as_str())?;
            out.write_char('(')?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.write_char(',')?;
                }
                write_term(out, a, names)?;
            }
            out.write_char(')')
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(f, self, &VarNames::Raw)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// An atom whose predicate position may hold a variable (inside metarules).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Atom {
    pub pred: Term,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Atom {
        Atom {
            pred: Term::sym(pred),
            args,
        }
    }

    pub fn pred_symbol(&self) -> Option<Symbol> {
        match self.pred {
            Term::Sym(s) => Some(s),
            _ => None,
        }
    }

    /// The callable term form; `None` while the predicate is still a variable.
    pub fn to_term(&self) -> Option<Term> {
        self.pred_symbol()
            .map(|s| Term::compound(s, self.args.clone()))
    }

    pub fn from_term(t: &Term) -> Option<Atom> {
        match t {
            Term::Sym(s) => Some(Atom {
                pred: Term::Sym(*s),
                args: Vec::new(),
            }),
            Term::Compound(f, args) => Some(Atom {
                pred: Term::Sym(*f),
                args: args.to_vec(),
            }),
            _ => None,
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<Var>) {
        self.pred.collect_vars(out);
        self.args.iter().for_each(|a| a.collect_vars(out));
    }

    pub fn rename(&self, map: &FxHashMap<Var, Term>) -> Atom {
        Atom {
            pred: self.pred.rename(map),
            args: self.args.iter().map(|a| a.rename(map)).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_atom(f, self, &VarNames::Raw)
    }
}

fn write_atom(out: &mut impl fmt::Write, a: &Atom, names: &VarNames) -> fmt::Result {
    write_term(out, &a.pred, names)?;
    if !a.args.is_empty() {
        out.write_char('(')?;
        for (i, t) in a.args.iter().enumerate() {
            if i > 0 {
                out.write_char(',')?;
            }
            write_term(out, t, names)?;
        }
        out.write_char(')')?;
    }
    Ok(())
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Clause {
    pub fn fact(head: Atom) -> Clause {
        Clause {
            head,
            body: Vec::new(),
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.head.collect_vars(&mut out);
        self.body.iter().for_each(|a| a.collect_vars(&mut out));
        out
    }

    pub fn key(&self) -> Option<(Symbol, usize)> {
        self.head.pred_symbol().map(|s| (s, self.head.args.len()))
    }

    /// Copy with every variable replaced by a globally fresh one.
    pub fn rename_apart(&self) -> Clause {
        let vars = self.vars();
        if vars.is_empty() {
            return self.clone();
        }
        let base = Var::fresh_block(vars.len() as u64);
        let map: FxHashMap<Var, Term> = vars
            .iter()
            .enumerate()
            .map(|(i, v)| (*v, Term::Var(Var(base + i as u64))))
            .collect();
        self.rename(&map)
    }

    pub fn rename(&self, map: &FxHashMap<Var, Term>) -> Clause {
        Clause {
            head: self.head.rename(map),
            body: self.body.iter().map(|a| a.rename(map)).collect(),
        }
    }

    /// Variables named `A`, `B`, ... by first occurrence; the canonical printed
    /// form, identical for clauses that are variants of each other.
    pub fn pretty(&self) -> String {
        let names: FxHashMap<Var, String> = self
            .vars()
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, local_var_name(i)))
            .collect();
        let names = VarNames::Local(&names);
        let mut out = String::new();
        write_atom(&mut out, &self.head, &names).unwrap();
        if !self.body.is_empty() {
            out.push_str(":-");
            for (i, a) in self.body.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_atom(&mut out, a, &names).unwrap();
            }
        }
        out.push('.');
        out
    }
}

fn local_var_name(i: usize) -> String {
    let letter = (b'A' + (i % 26) as u8) as char;
    if i < 26 {
        letter.to_string()
    } else {
        format!("{letter}{}", i / 26)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_printing() {
        let t = Term::list_with_tail(vec![Term::sym("a"), Term::Int(-2)], Term::Var(Var(7)));
        assert_eq!(t.to_string(), "[a,-2|_G7]");
        assert_eq!(Term::nil().to_string(), "[]");
        assert_eq!(Term::int_list(&[1, 2]).as_list().unwrap().len(), 2);
    }

    #[test]
    fn quoting() {
        assert_eq!(Term::sym("Abc").to_string(), "'Abc'");
        assert_eq!(Term::sym("it's").to_string(), "'it\\'s'");
        assert_eq!(Term::item(3).to_string(), "'$x'(3)");
        assert_eq!(Term::item(3).as_item(), Some(3));
    }

    #[test]
    fn clause_pretty_names_by_first_occurrence() {
        let (a, b, c) = (Term::var(), Term::var(), Term::var());
        let cl = Clause {
            head: Atom::new("f", vec![a.clone(), b.clone()]),
            body: vec![
                Atom::new("add", vec![a, c.clone()]),
                Atom::new("f", vec![c, b]),
            ],
        };
        assert_eq!(cl.pretty(), "f(A,B):-add(A,C),f(C,B).");
    }

    #[test]
    fn rename_apart_is_fresh_and_preserves_ground() {
        let x = Term::var();
        let cl = Clause {
            head: Atom::new("p", vec![x.clone()]),
            body: vec![Atom::new("q", vec![x])],
        };
        let r1 = cl.rename_apart();
        let r2 = cl.rename_apart();
        assert_eq!(r1.pretty(), cl.pretty());
        assert!(r1.vars().iter().all(|v| !r2.vars().contains(v)));
        assert!(r1.vars().iter().all(|v| !cl.vars().contains(v)));
        let ground = Clause::fact(Atom::new("p", vec![Term::Int(1)]));
        assert_eq!(ground.rename_apart(), ground);
    }
}
