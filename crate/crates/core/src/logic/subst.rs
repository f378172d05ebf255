//! Substitutions, the mutable binding store used during proof search, and
//! unification.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;

use super::term::{Term, Var};

/// Variable bindings with a trail so a search can undo back to a mark.
#[derive(Clone, Debug)]
pub struct Bindings {
    map: FxHashMap<Var, Term>,
    trail: Vec<Var>,
    pub occurs_check: bool,
}

impl Default for Bindings {
    fn default() -> Self {
        Bindings {
            map: FxHashMap::default(),
            trail: Vec::new(),
            occurs_check: true,
        }
    }
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    pub fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().unwrap();
            self.map.remove(&v);
        }
    }

    pub fn bind(&mut self, v: Var, t: Term) {
        debug_assert!(!self.map.contains_key(&v));
        self.map.insert(v, t);
        self.trail.push(v);
    }

    pub fn lookup(&self, v: Var) -> Option<&Term> {
        self.map.get(&v)
    }

    /// Follow variable bindings at the top level only.
    pub fn deref(&self, t: &Term) -> Term {
        let mut cur = t;
        while let Term::Var(v) = cur {
            match self.map.get(v) {
                Some(next) => cur = next,
                None => break,
            }
        }
        cur.clone()
    }

    /// Apply the bindings everywhere inside `t`.
    pub fn resolve(&self, t: &Term) -> Term {
        match t {
            Term::Var(_) => {
                let d = self.deref(t);
                if d.is_var() {
                    d
                } else {
                    self.resolve(&d)
                }
            }
            Term::Compound(f, args) => {
                if args
                    .iter()
                    .all(|a| !matches!(a, Term::Var(_) | Term::Compound(..)))
                {
                    return t.clone();
                }
                Term::Compound(*f, args.iter().map(|a| self.resolve(a)).collect())
            }
            _ => t.clone(),
        }
    }

    fn occurs(&self, v: Var, t: &Term) -> bool {
        match self.deref(t) {
            Term::Var(w) => w == v,
            Term::Compound(_, args) => args.iter().any(|a| self.occurs(v, a)),
            _ => false,
        }
    }

    /// Unify two terms, extending the bindings. On failure the bindings are
    /// left exactly as they were.
    pub fn unify(&mut self, a: &Term, b: &Term) -> bool {
        let mark = self.mark();
        if self.unify_inner(a, b) {
            true
        } else {
            self.undo(mark);
            false
        }
    }

    fn unify_inner(&mut self, a: &Term, b: &Term) -> bool {
        let a = self.deref(a);
        let b = self.deref(b);
        match (&a, &b) {
            (Term::Var(x), Term::Var(y)) if x == y => true,
            (Term::Var(x), _) => {
                if self.occurs_check && self.occurs(*x, &b) {
                    return false;
                }
                self.bind(*x, b);
                true
            }
            (_, Term::Var(y)) => {
                if self.occurs_check && self.occurs(*y, &a) {
                    return false;
                }
                self.bind(*y, a);
                true
            }
            (Term::Int(x), Term::Int(y)) => x == y,
            (Term::Sym(x), Term::Sym(y)) => x == y,
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                f == g
                    && xs.len() == ys.len()
                    && xs
                        .iter()
                        .zip(ys.iter())
                        .all(|(x, y)| self.unify_inner(x, y))
            }
            _ => false,
        }
    }

    pub fn unify_all(&mut self, xs: &[Term], ys: &[Term]) -> bool {
        let mark = self.mark();
        if xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.unify_inner(x, y)) {
            true
        } else {
            self.undo(mark);
            false
        }
    }
}

/// An immutable, fully applied mapping from variables to terms. No bound
/// variable occurs in any binding's value, so application is idempotent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn get(&self, v: Var) -> Option<&Term> {
        self.map.get(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.map.iter()
    }

    /// Build from raw bindings (possibly chained, as in `{X↦Y, Y↦2}`),
    /// normalizing by full dereference.
    pub fn from_bindings(pairs: impl IntoIterator<Item = (Var, Term)>) -> Substitution {
        let mut b = Bindings::new();
        b.occurs_check = false;
        let mut vars = Vec::new();
        for (v, t) in pairs {
            b.bind(v, t);
            vars.push(v);
        }
        Substitution::capture(&b, &vars)
    }

    /// Snapshot the current value of each of `vars`, omitting unbound ones.
    pub fn capture(b: &Bindings, vars: &[Var]) -> Substitution {
        let mut map = BTreeMap::new();
        for &v in vars {
            let t = b.resolve(&Term::Var(v));
            if t != Term::Var(v) {
                map.insert(v, t);
            }
        }
        Substitution { map }
    }

    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.map.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Compound(f, args) => {
                Term::Compound(*f, args.iter().map(|a| self.apply(a)).collect())
            }
            _ => t.clone(),
        }
    }

    fn to_bindings(&self) -> Bindings {
        let mut b = Bindings::new();
        for (v, t) in &self.map {
            b.bind(*v, t.clone());
        }
        b
    }
}

/// Most general unifier of `t1` and `t2` extending `s`, with occurs check.
pub fn unify(t1: &Term, t2: &Term, s: &Substitution) -> Option<Substitution> {
    let mut b = s.to_bindings();
    if !b.unify(t1, t2) {
        return None;
    }
    let mut vars: Vec<Var> = s.map.keys().copied().collect();
    t1.collect_vars(&mut vars);
    t2.collect_vars(&mut vars);
    Some(Substitution::capture(&b, &vars))
}

pub fn apply(s: &Substitution, t: &Term) -> Term {
    s.apply(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parser::parse_term;

    #[test]
    fn binds_variable_to_constant() {
        let x = Term::var();
        let s = unify(&x, &Term::Int(3), &Substitution::new()).unwrap();
        assert_eq!(s.apply(&x), Term::Int(3));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn clash_through_shared_variable() {
        let t1 = parse_term("f(X,X)").unwrap();
        assert!(unify(&t1, &parse_term("f(1,2)").unwrap(), &Substitution::new()).is_none());
    }

    #[test]
    fn nested_unifier_makes_both_sides_equal() {
        let t1 = parse_term("f(X,g(Y))").unwrap();
        let t2 = parse_term("f(g(Z),g(2))").unwrap();
        let s = unify(&t1, &t2, &Substitution::new()).unwrap();
        assert_eq!(s.apply(&t1), s.apply(&t2));
        let xs = t1.vars();
        assert_eq!(s.apply(&Term::Var(xs[1])), Term::Int(2));
        assert_eq!(
            s.apply(&Term::Var(xs[0])).to_string(),
            format!("g({})", t2.vars()[0].to_string_raw())
        );
    }

    #[test]
    fn occurs_check_rejects_cyclic() {
        let t = parse_term("f(X)").unwrap();
        let x = Term::Var(t.vars()[0]);
        assert!(unify(&x, &t, &Substitution::new()).is_none());
    }

    #[test]
    fn chained_bindings_dereference_fully() {
        let (x, y) = (Var::fresh(), Var::fresh());
        let s = Substitution::from_bindings([(x, Term::Var(y)), (y, Term::Int(2))]);
        assert_eq!(s.apply(&Term::Var(x)), Term::Int(2));
    }

    #[test]
    fn apply_leaves_unbound() {
        let (x, y) = (Var::fresh(), Var::fresh());
        let s = Substitution::from_bindings([(x, Term::Int(1))]);
        let l = Term::list(vec![Term::Var(x), Term::Var(y)]);
        assert_eq!(s.apply(&l), Term::list(vec![Term::Int(1), Term::Var(y)]));
        assert_eq!(Substitution::new().apply(&l), l);
    }

    #[test]
    fn failed_unify_restores_bindings() {
        let mut b = Bindings::new();
        let t1 = parse_term("f(X,1)").unwrap();
        let t2 = parse_term("f(2,2)").unwrap();
        assert!(!b.unify(&t1, &t2));
        assert_eq!(b.mark(), 0);
    }

    trait RawName {
        fn to_string_raw(&self) -> String;
    }
    impl RawName for Var {
        fn to_string_raw(&self) -> String {
            Term::Var(*self).to_string()
        }
    }
}
