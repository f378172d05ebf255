//! Evaluation of a learned program with a perception model.

use crate::logic::Term;
use crate::mil::{
    run_program, score_query, Budget, Facts, Program, ProveError, Query, SearchStats,
};
use crate::perception::{PerceptionError, PerceptionModel};

use super::data::{Example, Output};
use super::task::{TaskId, TaskSpec};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Prove(#[from] ProveError),
    #[error("model kind does not match task {0}")]
    ModelKind(TaskId),
    #[error("example {0} has no ground-truth digits")]
    NoTruth(usize),
}

/// Where item labels come from during evaluation.
#[derive(Clone, Copy, Debug)]
pub enum LabelSource<'a> {
    Model(&'a PerceptionModel),
    /// The generating digits stored with each example.
    GroundTruth {
        classes: usize,
    },
}

/// Aggregates over an evaluation set. Fields that do not apply to the task
/// are `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub n: usize,
    /// Exact-output rate on length-1 examples.
    pub acc: Option<f64>,
    /// Exact-output rate over all examples.
    pub exact: f64,
    pub mae: Option<f64>,
    /// Mean of `|ln(1+ŷ) − ln(1+y)|`.
    pub log_mae: Option<f64>,
    /// Rate of fully correct rank vectors.
    pub perm_acc: Option<f64>,
    /// Rate of correct individual ranks.
    pub elem_acc: Option<f64>,
    /// Per-item classification accuracy (monadic) or pairwise order
    /// accuracy (dyadic) against the generating digits.
    pub label_acc: Option<f64>,
    /// Examples on which the program produced no output.
    pub failures: usize,
}

fn mean(sum: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| sum / n as f64)
}

/// Largest possible error for an output of `len` digits drawn from
/// `classes` classes.
fn max_error(task: TaskId, y: i64, len: usize, classes: usize) -> f64 {
    let top = (classes - 1) as f64;
    let (lo, hi) = match task {
        TaskId::Product => (1.0, top.powi(len as i32)),
        _ => (0.0, top * len as f64),
    };
    (y as f64 - lo).max(hi - y as f64)
}

pub fn evaluate(
    task: &TaskSpec,
    program: &Program,
    model: &PerceptionModel,
    examples: &[Example],
    budget: &Budget,
) -> Result<Metrics, EvalError> {
    evaluate_with(task, program, LabelSource::Model(model), examples, budget)
}

/// Evaluate with labels from `source`; ground truth bypasses perception.
pub fn evaluate_with(
    task: &TaskSpec,
    program: &Program,
    source: LabelSource<'_>,
    examples: &[Example],
    budget: &Budget,
) -> Result<Metrics, EvalError> {
    let bg = &task.background;
    let mut m = Metrics {
        n: examples.len(),
        ..Metrics::default()
    };
    let (mut exact, mut len1, mut len1_ok) = (0usize, 0usize, 0usize);
    let (mut abs_err, mut log_err) = (0.0, 0.0);
    let (mut perm_ok, mut elem_ok, mut elems) = (0usize, 0usize, 0usize);
    let (mut label_ok, mut labels) = (0usize, 0usize);
    let mut stats = SearchStats::default();

    for (idx, ex) in examples.iter().enumerate() {
        let n = ex.input.len();
        let truth = || ex.truth.clone().ok_or(EvalError::NoTruth(idx));
        let correct = match task.id {
            TaskId::Sum | TaskId::Product => {
                let (pred, classes) = match source {
                    LabelSource::Model(model) => {
                        let net = model.classifier().ok_or(EvalError::ModelKind(task.id))?;
                        let pred: Vec<i64> = ex
                            .input
                            .iter()
                            .map(|x| net.argmax(x).map(|c| c as i64))
                            .collect::<Result<_, _>>()?;
                        (pred, net.classes())
                    }
                    LabelSource::GroundTruth { classes } => (truth()?, classes),
                };
                if let Some(t) = &ex.truth {
                    label_ok += pred.iter().zip(t).filter(|(a, b)| a == b).count();
                    labels += n;
                }
                let Output::Int(y) = ex.output else {
                    return Err(EvalError::ModelKind(task.id));
                };
                let goal = task.goal(n, Some(Term::var()));
                let out = run_program(bg, task.target, program, &goal, &pred, budget.proof_steps)?
                    .and_then(|a| a.args[1].as_int());
                match out {
                    Some(yhat) => {
                        abs_err += (yhat - y).abs() as f64;
                        log_err +=
                            ((1.0 + yhat.max(0) as f64).ln() - (1.0 + y.max(0) as f64).ln()).abs();
                        yhat == y
                    }
                    None => {
                        m.failures += 1;
                        let e = max_error(task.id, y, n, classes);
                        abs_err += e;
                        log_err += (1.0 + e).ln();
                        false
                    }
                }
            }
            TaskId::SortedConcept | TaskId::Bogosort => {
                let facts = match source {
                    LabelSource::Model(model) => model.facts(&ex.input)?,
                    LabelSource::GroundTruth { .. } => Facts::Labels(truth()?),
                };
                if let (Some(t), Facts::Dyadic(p)) = (&ex.truth, &facts) {
                    for i in 0..n {
                        for j in i + 1..n {
                            label_ok += ((p[i][j] > 0.5) == (t[i] > t[j])) as usize;
                            labels += 1;
                        }
                    }
                } else if let (Some(_), Facts::Labels(_)) = (&ex.truth, &facts) {
                    labels += n * n.saturating_sub(1) / 2;
                    label_ok += n * n.saturating_sub(1) / 2;
                } else if !matches!(facts, Facts::Dyadic(_) | Facts::Labels(_)) {
                    return Err(EvalError::ModelKind(task.id));
                }
                if task.id == TaskId::Bogosort {
                    let Output::Ranks(y) = &ex.output else {
                        return Err(EvalError::ModelKind(task.id));
                    };
                    let query = Query::positive(task.goal(n, Some(Term::var())));
                    let best = score_query(
                        bg,
                        task.target,
                        program,
                        &query,
                        &facts,
                        budget,
                        f64::NEG_INFINITY,
                        &mut stats,
                    )?;
                    let pred = best
                        .and_then(|b| b.answer.args[1].as_list())
                        .map(|l| l.iter().filter_map(Term::as_int).collect::<Vec<_>>());
                    elems += n;
                    match pred {
                        Some(r) if r.len() == n => {
                            let ok = r.iter().zip(y).filter(|(a, b)| a == b).count();
                            elem_ok += ok;
                            perm_ok += (ok == n) as usize;
                            ok == n
                        }
                        _ => {
                            m.failures += 1;
                            false
                        }
                    }
                } else {
                    let Output::Bool(y) = ex.output else {
                        return Err(EvalError::ModelKind(task.id));
                    };
                    let pos = score_query(
                        bg,
                        task.target,
                        program,
                        &Query::positive(task.goal(n, None)),
                        &facts,
                        budget,
                        f64::NEG_INFINITY,
                        &mut stats,
                    )?;
                    let neg = score_query(
                        bg,
                        task.target,
                        program,
                        &Query::negative(task.goal(n, None)),
                        &facts,
                        budget,
                        f64::NEG_INFINITY,
                        &mut stats,
                    )?;
                    let sp = pos.map_or(f64::NEG_INFINITY, |e| e.log_score);
                    let sn = neg.map_or(f64::NEG_INFINITY, |e| e.log_score);
                    if sp == f64::NEG_INFINITY && sn == f64::NEG_INFINITY {
                        m.failures += 1;
                    }
                    (sp >= sn && sp > f64::NEG_INFINITY) == y
                }
            }
        };
        exact += correct as usize;
        if n == 1 {
            len1 += 1;
            len1_ok += correct as usize;
        }
    }

    m.exact = mean(exact as f64, examples.len()).unwrap_or(0.0);
    m.acc = mean(len1_ok as f64, len1);
    m.label_acc = mean(label_ok as f64, labels);
    match task.id {
        TaskId::Sum | TaskId::Product => {
            m.mae = mean(abs_err, examples.len());
            m.log_mae = mean(log_err, examples.len());
        }
        TaskId::Bogosort => {
            m.perm_acc = mean(perm_ok as f64, examples.len());
            m.elem_acc = mean(elem_ok as f64, elems);
        }
        TaskId::SortedConcept => {}
    }
    Ok(m)
}
