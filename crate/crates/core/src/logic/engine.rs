//! Depth-first SLD resolution with trail-based backtracking.
//!
//! The solver is written in continuation-passing style and is generic over the
//! caller's state, so the abductive prover can hand a first-order subgoal to it
//! and resume its own search from inside the continuation.

use std::rc::Rc;

use super::kb::{Flow, KnowledgeBase};
use super::subst::{Bindings, Substitution};
use super::term::{Atom, Term, Var};

pub const DEFAULT_DEPTH_LIMIT: usize = 512;

/// Mutable search state shared by deduction and abduction.
#[derive(Clone, Debug)]
pub struct Machine {
    pub bindings: Bindings,
    pub depth_limit: usize,
    /// Resolution steps taken so far.
    pub steps: u64,
    pub step_limit: Option<u64>,
    /// Set when some branch was cut by the depth limit.
    pub depth_exceeded: bool,
    /// Set when the step budget ran out; search stops.
    pub steps_exceeded: bool,
}

impl Default for Machine {
    fn default() -> Self {
        Machine {
            bindings: Bindings::new(),
            depth_limit: DEFAULT_DEPTH_LIMIT,
            steps: 0,
            step_limit: None,
            depth_exceeded: false,
            steps_exceeded: false,
        }
    }
}

impl Machine {
    pub fn resource_exceeded(&self) -> bool {
        self.depth_exceeded || self.steps_exceeded
    }

    /// Count one step; false once the budget is exhausted.
    pub fn tick(&mut self) -> bool {
        self.steps += 1;
        if let Some(limit) = self.step_limit {
            if self.steps > limit {
                self.steps_exceeded = true;
                return false;
            }
        }
        true
    }
}

pub trait HasMachine {
    fn machine(&mut self) -> &mut Machine;
}

impl HasMachine for Machine {
    fn machine(&mut self) -> &mut Machine {
        self
    }
}

pub struct GoalCell {
    pub goal: Term,
    pub depth: usize,
    pub next: Goals,
}

/// Persistent goal list; sharing tails keeps backtracking allocation-free.
pub type Goals = Option<Rc<GoalCell>>;

pub fn push_goals(goals: &[Term], depth: usize, rest: Goals) -> Goals {
    goals.iter().rev().fold(rest, |next, g| {
        Some(Rc::new(GoalCell {
            goal: g.clone(),
            depth,
            next,
        }))
    })
}

pub type Cont<'a, S> = &'a mut dyn FnMut(&mut S) -> Flow;

/// Prove every goal in `goals`, calling `k` once per solution with the
/// bindings in place.
pub fn solve<S: HasMachine>(s: &mut S, kb: &KnowledgeBase, goals: Goals, k: Cont<'_, S>) -> Flow {
    match goals {
        None => k(s),
        Some(cell) => {
            let rest = cell.next.clone();
            solve_goal(s, kb, &cell.goal, cell.depth, &mut |s: &mut S| {
                solve(s, kb, rest.clone(), k)
            })
        }
    }
}

/// Prove one goal at the given depth, calling `k` per solution.
pub fn solve_goal<S: HasMachine>(
    s: &mut S,
    kb: &KnowledgeBase,
    goal: &Term,
    depth: usize,
    k: Cont<'_, S>,
) -> Flow {
    stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || {
        solve_goal_inner(s, kb, goal, depth, k)
    })
}

fn solve_goal_inner<S: HasMachine>(
    s: &mut S,
    kb: &KnowledgeBase,
    goal: &Term,
    depth: usize,
    k: Cont<'_, S>,
) -> Flow {
    let m = s.machine();
    if !m.tick() {
        return Flow::Stop;
    }
    let goal = m.bindings.deref(goal);
    let Some(key) = goal.key() else {
        return Flow::Continue;
    };
    if let Some(builtin) = kb.builtin(key) {
        let args: Vec<Term> = goal
            .args()
            .iter()
            .map(|a| s.machine().bindings.resolve(a))
            .collect();
        return builtin(&args, &mut |sol: Vec<Term>| {
            let mark = s.machine().bindings.mark();
            let flow = if s.machine().bindings.unify_all(&args, &sol) {
                k(s)
            } else {
                Flow::Continue
            };
            s.machine().bindings.undo(mark);
            flow
        });
    }
    if depth >= s.machine().depth_limit {
        s.machine().depth_exceeded = true;
        return Flow::Continue;
    }
    for clause in kb.clauses(key) {
        let clause = clause.rename_apart();
        let mark = s.machine().bindings.mark();
        if s.machine()
            .bindings
            .unify_all(goal.args(), &clause.head.args)
        {
            let body: Vec<Term> = clause.body.iter().filter_map(Atom::to_term).collect();
            let flow = solve(s, kb, push_goals(&body, depth + 1, None), k);
            if flow == Flow::Stop {
                s.machine().bindings.undo(mark);
                return Flow::Stop;
            }
        }
        s.machine().bindings.undo(mark);
    }
    Flow::Continue
}

#[derive(Clone, Debug, Default)]
pub struct DeduceOutcome {
    pub solutions: Vec<Substitution>,
    /// Some branch hit the depth or step limit, so the solution list may be
    /// incomplete. Distinct from finite failure.
    pub resource_exceeded: bool,
}

/// All answers to `goal`, depth-first in clause order, each projected onto the
/// goal's own variables.
pub fn deduce(goal: &Atom, kb: &KnowledgeBase, depth_limit: usize) -> DeduceOutcome {
    deduce_limited(goal, kb, depth_limit, None, usize::MAX)
}

pub fn deduce_limited(
    goal: &Atom,
    kb: &KnowledgeBase,
    depth_limit: usize,
    step_limit: Option<u64>,
    max_solutions: usize,
) -> DeduceOutcome {
    let mut m = Machine {
        depth_limit,
        step_limit,
        ..Machine::default()
    };
    let mut vars: Vec<Var> = Vec::new();
    goal.collect_vars(&mut vars);
    let mut out = Vec::new();
    if let Some(term) = goal.to_term() {
        solve_goal(&mut m, kb, &term, 0, &mut |m: &mut Machine| {
            out.push(Substitution::capture(&m.bindings, &vars));
            if out.len() >= max_solutions {
                Flow::Stop
            } else {
                Flow::Continue
            }
        });
    }
    DeduceOutcome {
        solutions: out,
        resource_exceeded: m.resource_exceeded(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parser::parse_term;

    fn list_kb() -> KnowledgeBase {
        KnowledgeBase::parse("head([H|_],H).\ntail([_|T],T).\nempty([]).\nloop(X) :- loop(X).")
            .unwrap()
    }

    fn atom(text: &str) -> Atom {
        Atom::from_term(&parse_term(text).unwrap()).unwrap()
    }

    #[test]
    fn head_of_list() {
        let g = atom("head([1,2],H)");
        let out = deduce(&g, &list_kb(), DEFAULT_DEPTH_LIMIT);
        assert_eq!(out.solutions.len(), 1);
        let h = g.args[1].clone();
        assert_eq!(out.solutions[0].apply(&h), Term::Int(1));
    }

    #[test]
    fn empty_fails_on_nonempty() {
        let out = deduce(&atom("empty([1])"), &list_kb(), DEFAULT_DEPTH_LIMIT);
        assert!(out.solutions.is_empty());
        assert!(!out.resource_exceeded);
    }

    #[test]
    fn permutation_builtin_yields_all() {
        let out = deduce(
            &atom("permutation([1,2,3],P)"),
            &list_kb(),
            DEFAULT_DEPTH_LIMIT,
        );
        assert_eq!(out.solutions.len(), 6);
    }

    #[test]
    fn depth_limit_is_distinct_from_failure() {
        let out = deduce(&atom("loop(a)"), &list_kb(), 50);
        assert!(out.solutions.is_empty());
        assert!(out.resource_exceeded);
    }

    #[test]
    fn nth1_extends_open_list() {
        let kb = KnowledgeBase::new();
        let g = atom("nth1(3, L, x)");
        let out = deduce(&g, &kb, 10);
        assert_eq!(out.solutions.len(), 1);
        let l = out.solutions[0].apply(&g.args[1]);
        let (h1, t1) = l.as_cons().unwrap();
        assert!(h1.is_var());
        let (_, t2) = t1.as_cons().unwrap();
        assert_eq!(t2.as_cons().unwrap().0, &Term::sym("x"));
    }
}
