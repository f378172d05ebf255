//! Maximum-probability labeling by branch and bound, and exhaustive
//! enumeration.

use std::cmp::Ordering;

use super::store::{ConstraintStore, VarId};

/// Slack for comparing bounds computed in a different summation order from the
/// canonical score.
const BOUND_SLACK: f64 = 1e-9;

/// Values chosen for the weighted variables, in variable-id order.
#[derive(Clone, Debug, PartialEq)]
pub struct Labeling {
    pub assignment: Vec<(VarId, i64)>,
    /// Sum of the chosen log-weights, added in variable-id order.
    pub log_prob: f64,
}

impl Labeling {
    pub fn value(&self, v: VarId) -> Option<i64> {
        self.assignment
            .iter()
            .find(|(id, _)| *id == v)
            .map(|(_, x)| *x)
    }

    pub fn values(&self) -> Vec<i64> {
        self.assignment.iter().map(|(_, x)| *x).collect()
    }
}

/// Canonical score of a complete assignment to the weighted variables.
pub fn score(store: &ConstraintStore, assignment: &[(VarId, i64)]) -> f64 {
    assignment
        .iter()
        .fold(0.0, |acc, &(v, x)| acc + store.var(v).weight(x))
}

/// Higher score first, then lexicographically smaller assignment.
fn better(a: &Labeling, b: &Labeling) -> bool {
    match a.log_prob.partial_cmp(&b.log_prob) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Less) => false,
        _ => a.values() < b.values(),
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveOutcome {
    pub best: Option<Labeling>,
    /// The node budget ran out; `best` is the best found so far.
    pub truncated: bool,
    /// Branch nodes visited.
    pub nodes: u64,
    /// Complete feasible labelings evaluated.
    pub leaves: u64,
}

/// Whether the unweighted variables can be completed once every weighted one
/// is fixed.
fn completable(store: &ConstraintStore, nodes: &mut u64, budget: u64) -> Option<bool> {
    let open = (0..store.len())
        .filter(|&v| !store.domain(v).is_singleton())
        .min_by_key(|&v| store.domain(v).size());
    let Some(v) = open else {
        return Some(true);
    };
    for x in store.domain(v).values() {
        *nodes += 1;
        if *nodes > budget {
            return None;
        }
        let mut next = store.clone();
        if next.assign(v, x).is_ok() {
            match completable(&next, nodes, budget) {
                Some(true) => return Some(true),
                None => return None,
                Some(false) => {}
            }
        }
    }
    Some(false)
}

struct Search {
    order: Vec<VarId>,
    best: Option<Labeling>,
    nodes: u64,
    leaves: u64,
    budget: u64,
    truncated: bool,
}

impl Search {
    fn run(&mut self, store: &ConstraintStore, depth: usize, partial: f64) {
        if self.truncated {
            return;
        }
        if depth == self.order.len() {
            match completable(store, &mut self.nodes, self.budget) {
                None => self.truncated = true,
                Some(false) => {}
                Some(true) => {
                    self.leaves += 1;
                    let assignment: Vec<(VarId, i64)> = {
                        let mut a: Vec<(VarId, i64)> = self
                            .order
                            .iter()
                            .map(|&v| (v, store.domain(v).min()))
                            .collect();
                        a.sort_unstable();
                        a
                    };
                    let cand = Labeling {
                        log_prob: score(store, &assignment),
                        assignment,
                    };
                    if self.best.as_ref().is_none_or(|b| better(&cand, b)) {
                        self.best = Some(cand);
                    }
                }
            }
            return;
        }
        let rest: f64 = self.order[depth..]
            .iter()
            .map(|&v| store.var(v).max_weight())
            .sum();
        if let Some(b) = &self.best {
            if partial + rest < b.log_prob - BOUND_SLACK {
                return;
            }
        }
        let v = self.order[depth];
        let var = store.var(v);
        let mut values: Vec<i64> = var.domain.values().collect();
        values.sort_by(|a, b| var.weight(*b).total_cmp(&var.weight(*a)).then(a.cmp(b)));
        for x in values {
            self.nodes += 1;
            if self.nodes > self.budget {
                self.truncated = true;
                return;
            }
            let w = store.var(v).weight(x);
            if let Some(b) = &self.best {
                let rest_after: f64 = self.order[depth + 1..]
                    .iter()
                    .map(|&u| store.var(u).max_weight())
                    .sum();
                if partial + w + rest_after < b.log_prob - BOUND_SLACK {
                    // Values are in descending weight order.
                    break;
                }
            }
            let mut next = store.clone();
            if next.assign(v, x).is_ok() {
                self.run(&next, depth + 1, partial + w);
            }
        }
    }
}

/// Feasible assignment of the weighted variables maximizing the summed
/// log-weights; ties go to the lexicographically smallest assignment.
pub fn solve_best(store: &ConstraintStore, node_budget: u64) -> SolveOutcome {
    let mut root = store.clone();
    if root.propagate().is_err() {
        return SolveOutcome::default();
    }
    let mut order: Vec<VarId> = root.weighted_vars().collect();
    order.sort_by(|&a, &b| {
        root.var(b)
            .max_weight()
            .total_cmp(&root.var(a).max_weight())
            .then(a.cmp(&b))
    });
    let mut search = Search {
        order,
        best: None,
        nodes: 0,
        leaves: 0,
        budget: node_budget,
        truncated: false,
    };
    search.run(&root, 0, 0.0);
    SolveOutcome {
        best: search.best,
        truncated: search.truncated,
        nodes: search.nodes,
        leaves: search.leaves,
    }
}

#[derive(Clone, Debug, Default)]
pub struct AllSolutions {
    pub labelings: Vec<Labeling>,
    pub truncated: bool,
}

/// Every feasible labeling of the weighted variables, best first (same order
/// as [`solve_best`]'s tie-break), up to `cap` of them.
pub fn solve_all(store: &ConstraintStore, cap: usize) -> AllSolutions {
    let mut root = store.clone();
    let mut out = AllSolutions::default();
    if root.propagate().is_err() {
        return out;
    }
    let order: Vec<VarId> = root.weighted_vars().collect();
    fn rec(
        store: &ConstraintStore,
        order: &[VarId],
        depth: usize,
        cap: usize,
        out: &mut AllSolutions,
    ) {
        if out.truncated {
            return;
        }
        if depth == order.len() {
            let mut nodes = 0;
            if completable(store, &mut nodes, u64::MAX) == Some(true) {
                if out.labelings.len() == cap {
                    out.truncated = true;
                    return;
                }
                let assignment: Vec<(VarId, i64)> =
                    order.iter().map(|&v| (v, store.domain(v).min())).collect();
                out.labelings.push(Labeling {
                    log_prob: score(store, &assignment),
                    assignment,
                });
            }
            return;
        }
        for x in store.domain(order[depth]).values().collect::<Vec<_>>() {
            let mut next = store.clone();
            if next.assign(order[depth], x).is_ok() {
                rec(&next, order, depth + 1, cap, out);
            }
        }
    }
    rec(&root, &order, 0, cap, &mut out);
    out.labelings.sort_by(|a, b| {
        if better(a, b) {
            Ordering::Less
        } else if better(b, a) {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::super::store::Constraint;
    use super::*;

    fn table(k: usize, hot: &[(usize, f64)]) -> Vec<f64> {
        let used: f64 = hot.iter().map(|(_, p)| p).sum();
        let rest = (1.0 - used) / (k - hot.len()) as f64;
        (0..k)
            .map(|i| {
                hot.iter()
                    .find(|(j, _)| *j == i)
                    .map_or(rest, |(_, p)| *p)
                    .ln()
            })
            .collect()
    }

    #[test]
    fn sum_to_three_picks_confident_pair() {
        let mut s = ConstraintStore::new();
        let a = s.new_weighted(table(10, &[(1, 0.8)])).unwrap();
        let b = s.new_weighted(table(10, &[(2, 0.7)])).unwrap();
        let n = s.new_var(0, 18).unwrap();
        s.post(Constraint::Add(a, b, n)).unwrap().unwrap();
        s.post(Constraint::EqConst(n, 3)).unwrap().unwrap();
        let best = solve_best(&s, u64::MAX).best.unwrap();
        assert_eq!(best.values(), vec![1, 2]);
        assert!((best.log_prob - 0.56f64.ln()).abs() < 1e-12);
        let all = solve_all(&s, 100);
        assert_eq!(all.labelings.len(), 4);
        assert_eq!(all.labelings[0], best);
    }

    #[test]
    fn forced_value() {
        let mut s = ConstraintStore::new();
        let v = s.new_weighted(table(10, &[(2, 0.9)])).unwrap();
        s.post(Constraint::EqConst(v, 7)).unwrap().unwrap();
        assert_eq!(solve_best(&s, u64::MAX).best.unwrap().values(), vec![7]);
        assert_eq!(solve_all(&s, 10).labelings.len(), 1);
    }

    #[test]
    fn infeasible_store_has_no_labeling() {
        let mut s = ConstraintStore::new();
        let a = s.new_weighted(table(10, &[])).unwrap();
        let b = s.new_weighted(table(10, &[])).unwrap();
        let n = s.new_var(0, 18).unwrap();
        s.post(Constraint::Add(a, b, n)).unwrap().unwrap();
        let _ = s.post(Constraint::EqConst(n, 19)).unwrap();
        assert!(solve_best(&s, u64::MAX).best.is_none());
        assert!(solve_all(&s, 10).labelings.is_empty());
    }

    #[test]
    fn uniform_ties_pick_smallest() {
        let mut s = ConstraintStore::new();
        let a = s.new_weighted(table(10, &[])).unwrap();
        let b = s.new_weighted(table(10, &[])).unwrap();
        let n = s.new_var(0, 18).unwrap();
        s.post(Constraint::Add(a, b, n)).unwrap().unwrap();
        s.post(Constraint::EqConst(n, 3)).unwrap().unwrap();
        assert_eq!(solve_best(&s, u64::MAX).best.unwrap().values(), vec![0, 3]);
    }

    #[test]
    fn budget_truncates() {
        let mut s = ConstraintStore::new();
        for _ in 0..4 {
            s.new_weighted(table(10, &[])).unwrap();
        }
        let out = solve_best(&s, 2);
        assert!(out.truncated);
    }
}
