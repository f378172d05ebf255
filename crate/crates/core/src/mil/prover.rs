//! The abductive meta-interpreter.
//!
//! Goals are proved depth-first in the order: deduction through background
//! knowledge, abduction through abducible primitives, then resolution against
//! the program being induced, extending it with new metarule instances when
//! there is room. Abducibles either post finite-domain constraints over the
//! latent labels of perceived items or assume relational facts between pairs of
//! items, and the search is cut once the best achievable probability can no
//! longer beat the best completed proof.

use std::rc::Rc;
use std::time::Instant;

use rustc_hash::FxHashMap;

use crate::fd::{Constraint, ConstraintStore, VarId};
use crate::logic::engine::{self, HasMachine, Machine};
use crate::logic::{Atom, Flow, KnowledgeBase, PredKey, Symbol, Term};

use super::metarule::Metarule;
use super::program::{MetaSub, Program, SymbolInventor};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Abducible {
    /// `add([X,Y|T],[N|T])`: posts `X+Y#=N`.
    Add,
    /// `mult([X,Y|T],[N|T])`: posts `X*Y#=N`.
    Mult,
    /// `eq([X],N)`: posts `X#=N`.
    Eq,
    /// `nn_pred([X,Y|_])`: assumes the learned relation holds between items `X`
    /// and `Y`.
    Rel,
}

impl Abducible {
    pub const ALL: [Abducible; 4] = [
        Abducible::Add,
        Abducible::Mult,
        Abducible::Eq,
        Abducible::Rel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Abducible::Add => "add",
            Abducible::Mult => "mult",
            Abducible::Eq => "eq",
            Abducible::Rel => "nn_pred",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Abducible::Rel => 1,
            _ => 2,
        }
    }

    pub fn key(self) -> PredKey {
        (Symbol::intern(self.name()), self.arity())
    }
}

/// Everything fixed about a learning problem except the examples.
#[derive(Clone, Debug)]
pub struct Background {
    pub kb: KnowledgeBase,
    pub metarules: Vec<Metarule>,
    /// Background predicates that may appear in induced clause bodies, in the
    /// order they are tried.
    pub primitives: Vec<PredKey>,
    /// Abducibles that may appear in induced clause bodies.
    pub abducibles: Vec<Abducible>,
    /// Abducibles callable from background clauses only.
    pub hidden: Vec<Abducible>,
    pub depth_limit: usize,
}

impl Background {
    fn abducible(&self, key: PredKey) -> Option<Abducible> {
        self.abducibles
            .iter()
            .chain(&self.hidden)
            .copied()
            .find(|a| a.key() == key)
    }
}

/// Where abducible probabilities come from for one example.
#[derive(Clone, Debug)]
pub enum Facts {
    /// Log-probability of each class, per item.
    Monadic(Vec<Vec<f64>>),
    /// `p[i][j]`: probability that the relation holds from item `i` to item
    /// `j`; `p[j][i] = 1 - p[i][j]`.
    Dyadic(Vec<Vec<f64>>),
    /// Known labels: arithmetic on them directly, and the relation is `>`.
    Labels(Vec<i64>),
}

impl Facts {
    pub fn n_items(&self) -> usize {
        match self {
            Facts::Monadic(v) => v.len(),
            Facts::Dyadic(v) => v.len(),
            Facts::Labels(v) => v.len(),
        }
    }

    /// Log-score of the most probable labeling when nothing is constrained.
    pub fn unconstrained_max(&self) -> f64 {
        match self {
            Facts::Monadic(v) => v
                .iter()
                .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .sum(),
            Facts::Dyadic(p) => pair_base(p),
            Facts::Labels(_) => 0.0,
        }
    }
}

pub(crate) fn pair_base(p: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (i, row) in p.iter().enumerate() {
        for &q in &row[i + 1..] {
            s += q.max(1.0 - q).ln();
        }
    }
    s
}

/// One abduced item, in proof order.
#[derive(Clone, Debug, PartialEq)]
pub enum Abduced {
    Constraint(Constraint),
    /// The relation was assumed to hold from item `first` to item `second`.
    Fact {
        first: usize,
        second: usize,
        prob: f64,
    },
}

#[derive(Clone, Debug)]
pub struct ProveConfig {
    pub max_clauses: usize,
    pub max_invented: usize,
    /// Whether new metarule instances may be added; false proves with the
    /// initial program only.
    pub allow_new: bool,
    pub pruning: bool,
    pub step_limit: Option<u64>,
    pub deadline: Option<Instant>,
}

impl Default for ProveConfig {
    fn default() -> Self {
        ProveConfig {
            max_clauses: 3,
            max_invented: 1,
            allow_new: true,
            pruning: true,
            step_limit: None,
            deadline: None,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProveError {
    #[error("item {item}: {source}")]
    Weights {
        item: usize,
        source: crate::fd::FdError,
    },
    #[error("program uses metarule {0}, which is not in the background")]
    UnknownMetarule(String),
}

enum PGoal {
    Call {
        atom: Atom,
        depth: usize,
        anc: Anc,
    },
    /// All body literals of metasub `usize` are proved; it must now be ground
    /// and distinct from the others.
    Seal(usize),
}

struct PCell {
    goal: PGoal,
    next: PGoals,
}

type PGoals = Option<Rc<PCell>>;

struct AncCell {
    pred: Symbol,
    size: Option<usize>,
    next: Anc,
}

/// Calls to induced predicates above the current goal.
type Anc = Option<Rc<AncCell>>;

fn push_calls(atoms: Vec<Atom>, depth: usize, anc: &Anc, rest: PGoals) -> PGoals {
    atoms.into_iter().rev().fold(rest, |next, atom| {
        Some(Rc::new(PCell {
            goal: PGoal::Call {
                atom,
                depth,
                anc: anc.clone(),
            },
            next,
        }))
    })
}

struct SubState {
    rule: usize,
    preds: Vec<Term>,
    sealed: bool,
}

#[derive(Copy, Clone)]
enum Operand {
    Const(i64),
    Var(VarId),
}

pub type PCont<'k, 'a> = &'k mut dyn FnMut(&mut Prover<'a>) -> Flow;

pub struct Prover<'a> {
    m: Machine,
    bg: &'a Background,
    facts: &'a Facts,
    cfg: ProveConfig,
    subs: Vec<SubState>,
    induced: Vec<PredKey>,
    invented: Vec<Symbol>,
    inventor: SymbolInventor,
    stores: Vec<ConstraintStore>,
    fact_map: FxHashMap<(usize, usize), bool>,
    base: f64,
    regret: f64,
    raw_log_prob: f64,
    abduced: Vec<Abduced>,
    /// Score of the best completed proof; branches that cannot exceed it are
    /// cut.
    pub best_completed: f64,
    /// Branches whose bound falls strictly below this are cut.
    pub floor: f64,
    timed_out: bool,
}

impl HasMachine for Prover<'_> {
    fn machine(&mut self) -> &mut Machine {
        &mut self.m
    }
}

fn list_len(t: &Term) -> Option<usize> {
    let mut n = 0;
    let mut cur = t;
    loop {
        match cur {
            Term::Sym(Symbol::NIL) => return Some(n),
            _ => {
                let (_, tl) = cur.as_cons()?;
                n += 1;
                cur = tl;
            }
        }
    }
}

impl<'a> Prover<'a> {
    /// A prover for goals on `target`, starting from `initial`.
    pub fn new(
        bg: &'a Background,
        facts: &'a Facts,
        cfg: ProveConfig,
        target: PredKey,
        initial: &Program,
    ) -> Result<Prover<'a>, ProveError> {
        let mut store = ConstraintStore::new();
        if let Facts::Monadic(rows) = facts {
            for (item, row) in rows.iter().enumerate() {
                store
                    .new_weighted(row.clone())
                    .map_err(|source| ProveError::Weights { item, source })?;
            }
        }
        let mut induced = vec![target];
        let mut subs = Vec::new();
        for ms in &initial.metasubs {
            let rule = bg
                .metarules
                .iter()
                .position(|m| m.name == ms.metarule)
                .ok_or_else(|| ProveError::UnknownMetarule(ms.metarule.clone()))?;
            subs.push(SubState {
                rule,
                preds: ms.preds.iter().map(|s| Term::Sym(*s)).collect(),
                sealed: true,
            });
        }
        for c in &initial.clauses {
            if let Some(key) = c.key() {
                if !induced.contains(&key) {
                    induced.push(key);
                }
            }
        }
        let base = match facts {
            Facts::Dyadic(p) => pair_base(p),
            _ => 0.0,
        };
        let m = Machine {
            depth_limit: bg.depth_limit,
            step_limit: cfg.step_limit,
            ..Machine::default()
        };
        Ok(Prover {
            m,
            bg,
            facts,
            inventor: SymbolInventor::new(target.0.as_str()),
            cfg,
            subs,
            induced,
            invented: initial.invented.clone(),
            stores: vec![store],
            fact_map: FxHashMap::default(),
            base,
            regret: 0.0,
            raw_log_prob: 0.0,
            abduced: Vec::new(),
            best_completed: f64::NEG_INFINITY,
            floor: f64::NEG_INFINITY,
            timed_out: false,
        })
    }

    /// Prove the conjunction `goals`, calling `k` at every completed proof.
    pub fn run(&mut self, goals: &[Atom], k: PCont<'_, 'a>) -> Flow {
        let goals = push_calls(goals.to_vec(), 0, &None, None);
        self.prove(goals, k)
    }

    /// Resolution steps plus prover nodes so far.
    pub fn steps(&self) -> u64 {
        self.m.steps
    }

    /// The step budget or deadline ran out.
    pub fn exhausted(&self) -> bool {
        self.m.steps_exceeded
    }

    pub fn timed_out(&self) -> bool {
        self.timed_out
    }

    pub fn depth_exceeded(&self) -> bool {
        self.m.depth_exceeded
    }

    pub fn store(&self) -> &ConstraintStore {
        self.stores.last().unwrap()
    }

    pub fn abduced(&self) -> &[Abduced] {
        &self.abduced
    }

    /// Sum of the log-probabilities of the facts assumed so far.
    pub fn raw_log_prob(&self) -> f64 {
        self.raw_log_prob
    }

    /// Log-score over all item pairs of the relational labeling implied by
    /// the current proof: every pair not mentioned takes its likelier value.
    pub fn pair_score(&self) -> f64 {
        self.base - self.regret
    }

    /// Relational facts fixed by the current proof, as `(i, j, holds)` with
    /// `i < j`, sorted.
    pub fn facts_fixed(&self) -> Vec<(usize, usize, bool)> {
        let mut v: Vec<(usize, usize, bool)> = self
            .fact_map
            .iter()
            .map(|(&(i, j), &t)| (i, j, t))
            .collect();
        v.sort_unstable();
        v
    }

    pub fn resolve(&self, t: &Term) -> Term {
        self.m.bindings.resolve(t)
    }

    /// The program as it stands at a completed proof.
    pub fn program(&self) -> Program {
        let metasubs = self
            .subs
            .iter()
            .map(|s| MetaSub {
                metarule: self.bg.metarules[s.rule].name.clone(),
                preds: s
                    .preds
                    .iter()
                    .map(|p| match self.m.bindings.deref(p) {
                        Term::Sym(sym) => sym,
                        other => panic!("metasub not ground at a completed proof: {other}"),
                    })
                    .collect(),
            })
            .collect();
        Program::from_metasubs(metasubs, &self.bg.metarules, self.invented.clone())
    }

    pub fn program_size(&self) -> usize {
        self.subs.len()
    }

    fn tick(&mut self) -> bool {
        if !self.m.tick() {
            return false;
        }
        if let Some(deadline) = self.cfg.deadline {
            if self.m.steps.is_multiple_of(1024) && Instant::now() >= deadline {
                self.m.steps_exceeded = true;
                self.timed_out = true;
                return false;
            }
        }
        true
    }

    fn bound_ok(&self, bound: f64) -> bool {
        !self.cfg.pruning || (bound > self.best_completed && bound >= self.floor)
    }

    fn prove(&mut self, goals: PGoals, k: PCont<'_, 'a>) -> Flow {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.prove_inner(goals, k))
    }

    fn prove_inner(&mut self, goals: PGoals, k: PCont<'_, 'a>) -> Flow {
        if !self.tick() {
            return Flow::Stop;
        }
        let Some(cell) = goals else {
            return k(self);
        };
        let rest = cell.next.clone();
        match &cell.goal {
            PGoal::Seal(i) => self.seal(*i, rest, k),
            PGoal::Call { atom, depth, anc } => {
                if *depth >= self.m.depth_limit {
                    self.m.depth_exceeded = true;
                    return Flow::Continue;
                }
                match self.m.bindings.deref(&atom.pred) {
                    Term::Sym(s) => self.call(s, &atom.args, *depth, anc, rest, k),
                    Term::Var(v) => {
                        self.choose_pred(Term::Var(v), &atom.args, *depth, anc, rest, k)
                    }
                    _ => Flow::Continue,
                }
            }
        }
    }

    fn seal(&mut self, i: usize, rest: PGoals, k: PCont<'_, 'a>) -> Flow {
        let preds: Vec<Term> = self.subs[i]
            .preds
            .iter()
            .map(|p| self.m.bindings.deref(p))
            .collect();
        if preds.iter().any(Term::is_var) {
            return Flow::Continue;
        }
        let rule = self.subs[i].rule;
        let duplicate = self.subs.iter().enumerate().any(|(j, s)| {
            j != i
                && s.sealed
                && s.rule == rule
                && s.preds
                    .iter()
                    .map(|p| self.m.bindings.deref(p))
                    .eq(preds.iter().cloned())
        });
        if duplicate {
            return Flow::Continue;
        }
        self.subs[i].sealed = true;
        let flow = self.prove(rest, k);
        self.subs[i].sealed = false;
        flow
    }

    /// Bind an unknown body predicate to each admissible symbol in turn.
    fn choose_pred(
        &mut self,
        pvar: Term,
        args: &[Term],
        depth: usize,
        anc: &Anc,
        rest: PGoals,
        k: PCont<'_, 'a>,
    ) -> Flow {
        let arity = args.len();
        let mut options: Vec<Symbol> = self
            .bg
            .primitives
            .iter()
            .filter(|p| p.1 == arity)
            .map(|p| p.0)
            .collect();
        options.extend(
            self.bg
                .abducibles
                .iter()
                .filter(|a| a.arity() == arity)
                .map(|a| a.key().0),
        );
        options.extend(self.induced.iter().filter(|p| p.1 == arity).map(|p| p.0));
        for sym in options {
            let mark = self.m.bindings.mark();
            if self.m.bindings.unify(&pvar, &Term::Sym(sym)) {
                let flow = self.call(sym, args, depth, anc, rest.clone(), k);
                if flow == Flow::Stop {
                    self.m.bindings.undo(mark);
                    return Flow::Stop;
                }
            }
            self.m.bindings.undo(mark);
        }
        if self.cfg.allow_new
            && self.subs.len() < self.cfg.max_clauses
            && self.invented.len() < self.cfg.max_invented
        {
            let checkpoint = self.inventor.checkpoint();
            let sym = self.inventor.invent(&self.bg.kb);
            self.invented.push(sym);
            self.induced.push((sym, arity));
            let mark = self.m.bindings.mark();
            let mut flow = Flow::Continue;
            if self.m.bindings.unify(&pvar, &Term::Sym(sym)) {
                flow = self.call(sym, args, depth, anc, rest, k);
            }
            self.m.bindings.undo(mark);
            self.induced.pop();
            self.invented.pop();
            self.inventor.restore(checkpoint);
            return flow;
        }
        Flow::Continue
    }

    fn call(
        &mut self,
        sym: Symbol,
        args: &[Term],
        depth: usize,
        anc: &Anc,
        rest: PGoals,
        k: PCont<'_, 'a>,
    ) -> Flow {
        let key = (sym, args.len());
        if let Some(ab) = self.bg.abducible(key) {
            return self.abduce(ab, args, rest, k);
        }
        if self.induced.contains(&key) {
            return self.call_induced(sym, args, depth, anc, rest, k);
        }
        let kb: &'a KnowledgeBase = &self.bg.kb;
        if kb.is_interpreted(key) {
            for clause in kb.clauses(key) {
                let clause = clause.rename_apart();
                let mark = self.m.bindings.mark();
                if self.m.bindings.unify_all(args, &clause.head.args) {
                    let goals = push_calls(clause.body, depth + 1, anc, rest.clone());
                    if self.prove(goals, k) == Flow::Stop {
                        self.m.bindings.undo(mark);
                        return Flow::Stop;
                    }
                }
                self.m.bindings.undo(mark);
            }
            return Flow::Continue;
        }
        if kb.defines(key) {
            let term = Term::compound(sym, args.to_vec());
            return engine::solve_goal(self, kb, &term, depth, &mut |p: &mut Prover<'a>| {
                p.prove(rest.clone(), k)
            });
        }
        Flow::Continue
    }

    fn call_induced(
        &mut self,
        sym: Symbol,
        args: &[Term],
        depth: usize,
        anc: &Anc,
        rest: PGoals,
        k: PCont<'_, 'a>,
    ) -> Flow {
        // Termination guard: a recursive call must be on a strictly shorter
        // list than the nearest enclosing call of the same predicate.
        let size = args
            .first()
            .and_then(|a| list_len(&self.m.bindings.resolve(a)));
        let mut cur = anc.as_ref();
        while let Some(cell) = cur {
            if cell.pred == sym {
                match (size, cell.size) {
                    (Some(s), Some(p)) if s < p => break,
                    _ => return Flow::Continue,
                }
            }
            cur = cell.next.as_ref();
        }
        let anc = Some(Rc::new(AncCell {
            pred: sym,
            size,
            next: anc.clone(),
        }));
        let metarules: &'a [Metarule] = &self.bg.metarules;

        for i in 0..self.subs.len() {
            let rule = &metarules[self.subs[i].rule];
            if rule.head_arity() != args.len()
                || self.m.bindings.deref(&self.subs[i].preds[0]) != Term::Sym(sym)
            {
                continue;
            }
            let (head, body) = rule.instantiate(&self.subs[i].preds);
            let mark = self.m.bindings.mark();
            if self.m.bindings.unify_all(args, &head.args) {
                let goals = push_calls(body, depth + 1, &anc, rest.clone());
                if self.prove(goals, k) == Flow::Stop {
                    self.m.bindings.undo(mark);
                    return Flow::Stop;
                }
            }
            self.m.bindings.undo(mark);
        }

        if !self.cfg.allow_new || self.subs.len() >= self.cfg.max_clauses {
            return Flow::Continue;
        }
        for (r, rule) in metarules.iter().enumerate() {
            if rule.head_arity() != args.len() {
                continue;
            }
            let mut preds: Vec<Term> = rule.existentials.iter().map(|_| Term::var()).collect();
            preds[0] = Term::Sym(sym);
            let (head, body) = rule.instantiate(&preds);
            let mark = self.m.bindings.mark();
            if self.m.bindings.unify_all(args, &head.args) {
                self.subs.push(SubState {
                    rule: r,
                    preds,
                    sealed: false,
                });
                let idx = self.subs.len() - 1;
                let sealed = Some(Rc::new(PCell {
                    goal: PGoal::Seal(idx),
                    next: rest.clone(),
                }));
                let goals = push_calls(body, depth + 1, &anc, sealed);
                let flow = self.prove(goals, k);
                self.subs.pop();
                if flow == Flow::Stop {
                    self.m.bindings.undo(mark);
                    return Flow::Stop;
                }
            }
            self.m.bindings.undo(mark);
        }
        Flow::Continue
    }

    fn operand(&self, t: &Term) -> Option<Operand> {
        match t {
            Term::Int(v) => Some(Operand::Const(*v)),
            _ => {
                if let Some(j) = t.as_item() {
                    match self.facts {
                        Facts::Labels(l) => l.get(j).map(|v| Operand::Const(*v)),
                        Facts::Monadic(rows) if j < rows.len() => Some(Operand::Var(j)),
                        _ => None,
                    }
                } else {
                    t.as_fd_ref()
                        .filter(|&id| id < self.store().len())
                        .map(Operand::Var)
                }
            }
        }
    }

    fn store_var(store: &mut ConstraintStore, op: Operand) -> Option<VarId> {
        match op {
            Operand::Var(v) => Some(v),
            Operand::Const(c) => store.constant(c).ok(),
        }
    }

    /// Continue with `store` as the current constraint store and `abd`
    /// recorded, after unifying `lhs` with `rhs`.
    fn with_store(
        &mut self,
        store: ConstraintStore,
        abd: Abduced,
        lhs: &Term,
        rhs: &Term,
        rest: PGoals,
        k: PCont<'_, 'a>,
    ) -> Flow {
        if !self.bound_ok(store.upper_bound()) {
            return Flow::Continue;
        }
        let mark = self.m.bindings.mark();
        let mut flow = Flow::Continue;
        if self.m.bindings.unify(lhs, rhs) {
            self.stores.push(store);
            self.abduced.push(abd);
            flow = self.prove(rest, k);
            self.abduced.pop();
            self.stores.pop();
        }
        self.m.bindings.undo(mark);
        flow
    }

    fn continue_after(&mut self, lhs: &Term, rhs: &Term, rest: PGoals, k: PCont<'_, 'a>) -> Flow {
        let mark = self.m.bindings.mark();
        let mut flow = Flow::Continue;
        if self.m.bindings.unify(lhs, rhs) {
            flow = self.prove(rest, k);
        }
        self.m.bindings.undo(mark);
        flow
    }

    fn abduce(&mut self, ab: Abducible, args: &[Term], rest: PGoals, k: PCont<'_, 'a>) -> Flow {
        match ab {
            Abducible::Add | Abducible::Mult => self.abduce_arith(ab, args, rest, k),
            Abducible::Eq => self.abduce_eq(args, rest, k),
            Abducible::Rel => self.abduce_rel(args, rest, k),
        }
    }

    fn abduce_arith(
        &mut self,
        ab: Abducible,
        args: &[Term],
        rest: PGoals,
        k: PCont<'_, 'a>,
    ) -> Flow {
        let list = self.m.bindings.resolve(&args[0]);
        let Some((x, t1)) = list.as_cons() else {
            return Flow::Continue;
        };
        let Some((y, tail)) = t1.as_cons() else {
            return Flow::Continue;
        };
        let (Some(ox), Some(oy)) = (self.operand(x), self.operand(y)) else {
            return Flow::Continue;
        };
        let apply = |a: i64, b: i64| {
            if ab == Abducible::Add {
                a.checked_add(b)
            } else {
                a.checked_mul(b)
            }
        };
        if let (Operand::Const(a), Operand::Const(b)) = (ox, oy) {
            let Some(r) = apply(a, b) else {
                return Flow::Continue;
            };
            let out = Term::cons(Term::Int(r), tail.clone());
            return self.continue_after(&args[1], &out, rest, k);
        }
        let target = self.m.bindings.resolve(&args[1]);
        let mut store = self.store().clone();
        let (Some(xv), Some(yv)) = (
            Self::store_var(&mut store, ox),
            Self::store_var(&mut store, oy),
        ) else {
            return Flow::Continue;
        };
        let head = target.as_cons().map(|(h, _)| h.clone());
        let existing = head.as_ref().and_then(|h| self.operand(h));
        let (zv, zterm) = match existing {
            Some(Operand::Const(c)) => match store.constant(c) {
                Ok(v) => (v, Term::Int(c)),
                Err(_) => return Flow::Continue,
            },
            Some(Operand::Var(v)) => (v, head.clone().unwrap()),
            None => {
                let (dx, dy) = (store.domain(xv), store.domain(yv));
                let (lo, hi) = if ab == Abducible::Add {
                    (
                        dx.min().saturating_add(dy.min()),
                        dx.max().saturating_add(dy.max()),
                    )
                } else {
                    (
                        dx.min().saturating_mul(dy.min()),
                        dx.max().saturating_mul(dy.max()),
                    )
                };
                let Ok(v) = store.new_var(lo, hi) else {
                    return Flow::Continue;
                };
                (v, Term::fd_ref(v))
            }
        };
        let c = if ab == Abducible::Add {
            Constraint::Add(xv, yv, zv)
        } else {
            Constraint::Mul(xv, yv, zv)
        };
        if !matches!(store.post(c), Ok(Ok(()))) {
            return Flow::Continue;
        }
        let out = Term::cons(zterm, tail.clone());
        self.with_store(store, Abduced::Constraint(c), &args[1], &out, rest, k)
    }

    fn abduce_eq(&mut self, args: &[Term], rest: PGoals, k: PCont<'_, 'a>) -> Flow {
        let list = self.m.bindings.resolve(&args[0]);
        let Some((x, tail)) = list.as_cons() else {
            return Flow::Continue;
        };
        if *tail != Term::nil() {
            return Flow::Continue;
        }
        let Some(ox) = self.operand(x) else {
            return Flow::Continue;
        };
        let target = self.m.bindings.resolve(&args[1]);
        let ot = self.operand(&target);
        match (ox, ot) {
            (Operand::Const(a), Some(Operand::Const(b))) => {
                if a == b {
                    self.prove(rest, k)
                } else {
                    Flow::Continue
                }
            }
            (Operand::Const(a), None) => self.continue_after(&target, &Term::Int(a), rest, k),
            (Operand::Var(v), None) => self.continue_after(&target, &Term::fd_ref(v), rest, k),
            (op, Some(ot)) => {
                let mut store = self.store().clone();
                let (c, ok) = match (op, ot) {
                    (Operand::Var(v), Operand::Const(n)) | (Operand::Const(n), Operand::Var(v)) => {
                        let c = Constraint::EqConst(v, n);
                        (c, n >= 0 && matches!(store.post(c), Ok(Ok(()))))
                    }
                    (Operand::Var(a), Operand::Var(b)) => {
                        let Ok(zero) = store.constant(0) else {
                            return Flow::Continue;
                        };
                        let c = Constraint::Add(a, zero, b);
                        (c, matches!(store.post(c), Ok(Ok(()))))
                    }
                    (Operand::Const(_), Operand::Const(_)) => unreachable!(),
                };
                if !ok {
                    return Flow::Continue;
                }
                self.with_store(store, Abduced::Constraint(c), &target, &target, rest, k)
            }
        }
    }

    fn abduce_rel(&mut self, args: &[Term], rest: PGoals, k: PCont<'_, 'a>) -> Flow {
        let list = self.m.bindings.resolve(&args[0]);
        let Some((x, t1)) = list.as_cons() else {
            return Flow::Continue;
        };
        let Some((y, _)) = t1.as_cons() else {
            return Flow::Continue;
        };
        let (Some(i), Some(j)) = (x.as_item(), y.as_item()) else {
            return Flow::Continue;
        };
        if i == j || i >= self.facts.n_items() || j >= self.facts.n_items() {
            return Flow::Continue;
        }
        let p = match self.facts {
            Facts::Labels(l) => {
                return if l[i] > l[j] {
                    self.prove(rest, k)
                } else {
                    Flow::Continue
                };
            }
            Facts::Dyadic(p) => p[i][j],
            Facts::Monadic(_) => return Flow::Continue,
        };
        let key = (i.min(j), i.max(j));
        let holds = i < j;
        if let Some(&t) = self.fact_map.get(&key) {
            return if t == holds {
                self.prove(rest, k)
            } else {
                Flow::Continue
            };
        }
        let step_regret = p.max(1.0 - p).ln() - p.ln();
        if !self.bound_ok(self.base - (self.regret + step_regret)) {
            return Flow::Continue;
        }
        let (regret, raw) = (self.regret, self.raw_log_prob);
        self.regret += step_regret;
        self.raw_log_prob += p.ln();
        self.fact_map.insert(key, holds);
        self.abduced.push(Abduced::Fact {
            first: i,
            second: j,
            prob: p,
        });
        let flow = self.prove(rest, k);
        self.abduced.pop();
        self.fact_map.remove(&key);
        self.regret = regret;
        self.raw_log_prob = raw;
        flow
    }
}
