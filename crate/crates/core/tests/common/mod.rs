//! Shared test support: random constraint stores with a brute-force oracle,
//! and small program helpers.
#![allow(dead_code)]

use abil_core::fd::{Constraint, ConstraintStore, VarId};
use abil_core::logic::Term;
use abil_core::mil::{Facts, Query};
use abil_core::tasks::TaskSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How a variable's value is determined during brute force.
#[derive(Clone, Debug)]
pub enum Def {
    /// A weighted digit, enumerated by the oracle.
    Weighted(Vec<f64>),
    Const(i64),
    Sum(usize, usize, i64, i64),
    Product(usize, usize, i64, i64),
}

/// Constraints the oracle checks in addition to the definitions.
#[derive(Clone, Debug)]
pub enum Check {
    Add(usize, usize, usize),
    Mul(usize, usize, usize),
    Eq(usize, i64),
}

#[derive(Clone, Debug, Default)]
pub struct StoreModel {
    pub defs: Vec<Def>,
    pub checks: Vec<Check>,
}

/// A random store of up to `max_weighted` digit variables over `k` values
/// and up to `max_constraints` add/mul/eq constraints, mirrored by a model
/// the oracle can enumerate. Intermediate results get their own bounded
/// variables, so the weighted digits determine every other value.
pub fn random_store(
    seed: u64,
    max_weighted: usize,
    max_constraints: usize,
    k: usize,
) -> (ConstraintStore, StoreModel, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ConstraintStore::new();
    let mut model = StoreModel::default();
    let mut infeasible = false;
    let n = rng.random_range(1..=max_weighted);
    for _ in 0..n {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let lp: Vec<f64> = raw.iter().map(|p| (p / total).ln()).collect();
        store.new_weighted(lp.clone()).unwrap();
        model.defs.push(Def::Weighted(lp));
    }
    let m = rng.random_range(1..=max_constraints);
    for _ in 0..m {
        let vars = model.defs.len();
        let kind = rng.random_range(0..5);
        let res = match kind {
            0..=3 => {
                let a = rng.random_range(0..vars);
                let b = rng.random_range(0..vars);
                let add = kind % 2 == 0;
                // Kinds 2 and 3 relate existing variables directly.
                let relate = kind >= 2 && vars > 2;
                if relate {
                    let c = rng.random_range(0..vars);
                    model.checks.push(if add {
                        Check::Add(a, b, c)
                    } else {
                        Check::Mul(a, b, c)
                    });
                    let con = if add {
                        Constraint::Add(a as VarId, b as VarId, c as VarId)
                    } else {
                        Constraint::Mul(a as VarId, b as VarId, c as VarId)
                    };
                    store.post(con).unwrap()
                } else {
                    let hi = rng.random_range(0..200);
                    let c = store.new_var(0, hi).unwrap();
                    model.defs.push(if add {
                        Def::Sum(a, b, 0, hi)
                    } else {
                        Def::Product(a, b, 0, hi)
                    });
                    let con = if add {
                        Constraint::Add(a as VarId, b as VarId, c)
                    } else {
                        Constraint::Mul(a as VarId, b as VarId, c)
                    };
                    store.post(con).unwrap()
                }
            }
            _ => {
                let v = rng.random_range(0..vars);
                let c = rng.random_range(0..30);
                if rng.random_bool(0.5) {
                    model.checks.push(Check::Eq(v, c));
                    store.post(Constraint::EqConst(v as VarId, c)).unwrap()
                } else {
                    let cv = store.constant(c).unwrap();
                    model.defs.push(Def::Const(c));
                    let hi = rng.random_range(0..60);
                    let r = store.new_var(0, hi).unwrap();
                    model.defs.push(Def::Sum(v, model.defs.len() - 1, 0, hi));
                    store.post(Constraint::Add(v as VarId, cv, r)).unwrap()
                }
            }
        };
        infeasible |= res.is_err();
    }
    (store, model, infeasible)
}

/// Value of every variable under a weighted assignment, or `None` if a
/// definition leaves its bounds.
fn values(model: &StoreModel, digits: &[i64]) -> Option<Vec<i64>> {
    let mut vals = Vec::with_capacity(model.defs.len());
    let mut d = digits.iter();
    for def in &model.defs {
        let v = match def {
            Def::Weighted(_) => *d.next().unwrap(),
            Def::Const(c) => *c,
            Def::Sum(a, b, lo, hi) | Def::Product(a, b, lo, hi) => {
                let v = if matches!(def, Def::Sum(..)) {
                    vals[*a] + vals[*b]
                } else {
                    vals[*a] * vals[*b]
                };
                if v < *lo || v > *hi {
                    return None;
                }
                v
            }
        };
        vals.push(v);
    }
    let ok = model.checks.iter().all(|c| match *c {
        Check::Add(a, b, r) => vals[a] + vals[b] == vals[r],
        Check::Mul(a, b, r) => vals[a] * vals[b] == vals[r],
        Check::Eq(v, c) => vals[v] == c,
    });
    ok.then_some(vals)
}

/// Every feasible assignment: `(digits, all variable values, score)` with the
/// score summed in variable order.
pub fn enumerate(model: &StoreModel) -> Vec<(Vec<i64>, Vec<i64>, f64)> {
    let tables: Vec<&Vec<f64>> = model
        .defs
        .iter()
        .filter_map(|d| {
            if let Def::Weighted(t) = d {
                Some(t)
            } else {
                None
            }
        })
        .collect();
    let mut out = Vec::new();
    let mut digits = vec![0i64; tables.len()];
    loop {
        if let Some(vals) = values(model, &digits) {
            let score = digits
                .iter()
                .zip(&tables)
                .fold(0.0, |acc, (&x, t)| acc + t[x as usize]);
            out.push((digits.clone(), vals, score));
        }
        let mut i = digits.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            digits[i] += 1;
            if (digits[i] as usize) < tables[i].len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Highest-scoring feasible digits; ties go to the lexicographically
/// smallest.
pub fn brute_best(model: &StoreModel) -> Option<(Vec<i64>, f64)> {
    let mut best: Option<(Vec<i64>, f64)> = None;
    for (digits, _, score) in enumerate(model) {
        let better = match &best {
            None => true,
            Some((bd, bs)) => score > *bs || (score == *bs && digits < *bd),
        };
        if better {
            best = Some((digits, score));
        }
    }
    best
}

/// Positive queries with exact labels for a monadic arithmetic task.
pub fn symbolic_batch(
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

/// Program text with invented predicate names replaced by their order of
/// first appearance, and clauses sorted.
pub fn normalized(text: &str, target: &str) -> String {
    let mut names: Vec<String> = Vec::new();
    let mut out = String::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String, names: &mut Vec<String>| {
        if word.starts_with(&format!("{target}_")) {
            let i = names.iter().position(|n| n == word).unwrap_or_else(|| {
                names.push(word.clone());
                names.len() - 1
            });
            out.push_str(&format!("inv{i}"));
        } else {
            out.push_str(word);
        }
        word.clear();
    };
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            word.push(ch);
        } else {
            flush(&mut word, &mut out, &mut names);
            out.push(ch);
        }
    }
    flush(&mut word, &mut out, &mut names);
    let mut lines: Vec<&str> = out.lines().filter(|l| !l.trim().is_empty()).collect();
    lines.sort_unstable();
    lines.join("\n")
}
