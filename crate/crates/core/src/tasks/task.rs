//! Task definitions: background knowledge, abducibles and targets.

use std::fmt;
use std::str::FromStr;

use crate::logic::{Atom, KnowledgeBase, PredKey, Symbol, Term};
use crate::mil::{default_metarules, Abducible, Background, Program};

/// List primitives shared by every task.
pub const LIST_BK: &str = "\
head([H|_],H).
tail([_|T],T).
empty([]).
";

/// `permute(Items, Order, Sorted)`: `Sorted` places each item of `Items` at
/// the position given by the matching entry of `Order`.
pub const PERMUTE_BK: &str = "\
permute(L1,O,L2):-length(L1,N),length(L2,N),numlist(1,N,O1),permutation(O1,O),permute1(L1,O,L2).
permute1([],[],_).
permute1([S|List],[O|Os],List2):-nth1(O,List2,S),permute1(List,Os,List2).
";

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    Sum,
    Product,
    SortedConcept,
    Bogosort,
}

impl TaskId {
    pub const ALL: [TaskId; 4] = [
        TaskId::Sum,
        TaskId::Product,
        TaskId::SortedConcept,
        TaskId::Bogosort,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::Sum => "sum",
            TaskId::Product => "product",
            TaskId::SortedConcept => "sorted_concept",
            TaskId::Bogosort => "bogosort",
        }
    }

    pub fn label_kind(self) -> LabelKind {
        match self {
            TaskId::Sum | TaskId::Product => LabelKind::Monadic,
            TaskId::SortedConcept | TaskId::Bogosort => LabelKind::Dyadic,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("unknown task {0:?}; expected sum, product, sorted_concept or bogosort")]
pub struct UnknownTask(pub String);

impl FromStr for TaskId {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| UnknownTask(s.to_string()))
    }
}

/// Whether perception labels single items or ordered pairs of items.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum LabelKind {
    Monadic,
    Dyadic,
}

#[derive(Clone, Debug)]
pub struct TaskSpec {
    pub id: TaskId,
    pub background: Background,
    pub target: PredKey,
    pub max_clauses: usize,
    pub max_invented: usize,
}

impl TaskSpec {
    pub fn label_kind(&self) -> LabelKind {
        self.id.label_kind()
    }

    /// The goal for an example over `n` items with output `y`; the sorted
    /// concept has no output argument.
    pub fn goal(&self, n: usize, y: Option<Term>) -> Atom {
        let items = Term::list((0..n).map(Term::item).collect::<Vec<_>>());
        let mut args = vec![items];
        args.extend(y);
        Atom {
            pred: Term::Sym(self.target.0),
            args,
        }
    }

    /// Install a previously learned program as interpreted background, making
    /// its head predicates available to induced clause bodies.
    pub fn reuse(&mut self, program: &Program) -> Result<(), crate::logic::LogicError> {
        program.install(&mut self.background.kb, true)?;
        for c in &program.clauses {
            if let Some(key) = c.key() {
                if !program.invented.contains(&key.0) && !self.background.primitives.contains(&key)
                {
                    self.background.primitives.push(key);
                }
            }
        }
        Ok(())
    }
}

fn key(name: &str, arity: usize) -> PredKey {
    (Symbol::intern(name), arity)
}

pub fn make_task(id: TaskId) -> TaskSpec {
    let list_prims = vec![key("head", 2), key("tail", 2), key("empty", 1)];
    let (text, primitives, abducibles, hidden, target, max_clauses) = match id {
        TaskId::Sum | TaskId::Product => (
            LIST_BK.to_string(),
            list_prims,
            vec![Abducible::Add, Abducible::Mult, Abducible::Eq],
            vec![],
            key("f", 2),
            2,
        ),
        TaskId::SortedConcept => (
            LIST_BK.to_string(),
            list_prims,
            vec![Abducible::Rel],
            vec![],
            key("s", 1),
            3,
        ),
        TaskId::Bogosort => {
            let mut prims = list_prims;
            prims.push(key("permute", 3));
            (
                format!("{LIST_BK}{PERMUTE_BK}"),
                prims,
                vec![],
                vec![Abducible::Rel],
                key("f", 2),
                1,
            )
        }
    };
    let kb = KnowledgeBase::parse(&text).expect("task background parses");
    TaskSpec {
        id,
        background: Background {
            kb,
            metarules: default_metarules(),
            primitives,
            abducibles,
            hidden,
            depth_limit: 512,
        },
        target,
        max_clauses,
        max_invented: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mil::{induce, Budget, Facts, Query};

    fn symbolic_batch(
        task: &TaskSpec,
        seqs: &[Vec<i64>],
        product: bool,
    ) -> (Vec<Query>, Vec<Facts>) {
        seqs.iter()
            .map(|s| {
                let y = if product {
                    s.iter().product()
                } else {
                    s.iter().sum()
                };
                (
                    Query::positive(task.goal(s.len(), Some(Term::Int(y)))),
                    Facts::Labels(s.clone()),
                )
            })
            .unzip()
    }

    #[test]
    fn symbolic_sum_and_product() {
        let task = make_task(TaskId::Sum);
        let seqs = vec![vec![1, 2, 3], vec![4, 0], vec![2, 2, 5, 1]];
        let budget = Budget {
            max_clauses: 3,
            ..Budget::default()
        };
        let (q, f) = symbolic_batch(&task, &seqs, false);
        let out = induce(&task.background, task.target, &q, &f, &budget).unwrap();
        let best = out.best.expect("sum program");
        assert_eq!(
            best.program.pretty(),
            "f(A,B):-add(A,C),f(C,B).\nf(A,B):-eq(A,B).\n"
        );
        let (q, f) = symbolic_batch(&task, &seqs, true);
        let out = induce(&task.background, task.target, &q, &f, &budget).unwrap();
        assert_eq!(
            out.best.unwrap().program.pretty(),
            "f(A,B):-mult(A,C),f(C,B).\nf(A,B):-eq(A,B).\n"
        );
    }

    #[test]
    fn task_names_round_trip() {
        for t in TaskId::ALL {
            assert_eq!(t.name().parse::<TaskId>().unwrap(), t);
        }
        assert!("nope".parse::<TaskId>().is_err());
    }

    fn dyadic(labels: &[i64], conf: f64) -> Facts {
        let n = labels.len();
        let p = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            0.5
                        } else if labels[i] > labels[j] {
                            conf
                        } else {
                            1.0 - conf
                        }
                    })
                    .collect()
            })
            .collect();
        Facts::Dyadic(p)
    }

    #[test]
    fn sorted_concept_invents_a_predicate() {
        let task = make_task(TaskId::SortedConcept);
        let pos = [vec![9, 5, 2], vec![7, 3], vec![8, 6, 4, 1]];
        let neg = [vec![9, 2, 5], vec![7, 3, 8], vec![3, 7], vec![6, 5, 1, 2]];
        for conf in [None, Some(0.8)] {
            let mut q = Vec::new();
            let mut f = Vec::new();
            for s in &pos {
                q.push(Query::positive(task.goal(s.len(), None)));
                f.push(conf.map_or(Facts::Labels(s.clone()), |c| dyadic(s, c)));
            }
            for s in &neg {
                q.push(Query::negative(task.goal(s.len(), None)));
                f.push(conf.map_or(Facts::Labels(s.clone()), |c| dyadic(s, c)));
            }
            let budget = Budget {
                max_clauses: task.max_clauses,
                ..Budget::default()
            };
            let out = induce(&task.background, task.target, &q, &f, &budget).unwrap();
            let best = out.best.expect("sorted program");
            assert_eq!(
                best.program.pretty(),
                "s(A):-s_1(A,B),s(B).\ns(A):-tail(A,B),empty(B).\ns_1(A,B):-nn_pred(A),tail(A,B).\n",
                "{conf:?}"
            );
        }
    }

    #[test]
    fn bogosort_reuses_sorted() {
        let sorted = make_task(TaskId::SortedConcept);
        let text =
            "s(A):-s_1(A,B),s(B).\ns(A):-tail(A,B),empty(B).\ns_1(A,B):-nn_pred(A),tail(A,B).\n";
        let clauses = Program::parse_clauses(text).unwrap();
        let _ = sorted;
        let mut task = make_task(TaskId::Bogosort);
        let program = Program {
            metasubs: Vec::new(),
            clauses,
            invented: vec![Symbol::intern("s_1")],
        };
        task.reuse(&program).unwrap();
        let seqs = [vec![5, 9, 4, 3, 8], vec![2, 7, 1]];
        let (q, f): (Vec<Query>, Vec<Facts>) = seqs
            .iter()
            .map(|s| {
                let ranks = crate::tasks::task::tests::ranks(s);
                (
                    Query::positive(task.goal(s.len(), Some(Term::int_list(&ranks)))),
                    dyadic(s, 0.9),
                )
            })
            .unzip();
        let budget = Budget {
            max_clauses: task.max_clauses,
            ..Budget::default()
        };
        let out = induce(&task.background, task.target, &q, &f, &budget).unwrap();
        assert_eq!(
            out.best.expect("bogosort").program.pretty(),
            "f(A,B):-permute(A,B,C),s(C).\n"
        );
    }

    pub(super) fn ranks(s: &[i64]) -> Vec<i64> {
        s.iter()
            .map(|x| 1 + s.iter().filter(|y| *y > x).count() as i64)
            .collect()
    }
}
