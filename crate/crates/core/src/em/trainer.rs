//! The E-step / M-step loop.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mil::{
    induce, score_program, select_metarules, Budget, Induced, MetaruleError, Program, ProveError,
    Query, SearchStats,
};
use crate::perception::{
    pretrain_few_shot, FitConfig, Instance, Mlp, PairModel, PerceptionError, PerceptionModel,
    TrainBatch,
};
use crate::tasks::{Example, LabelKind, SequenceDataset, TaskSpec};

use super::EmConfig;

#[derive(Debug, thiserror::Error)]
pub enum EmError {
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Prove(#[from] ProveError),
    #[error(transparent)]
    Metarules(#[from] MetaruleError),
    #[error("epoch {epoch}: no batch produced a program ({batches} batches, {exhausted} hit a search budget)")]
    AllBatchesFailed {
        epoch: usize,
        batches: usize,
        exhausted: usize,
    },
    #[error("cannot reuse program: {0}")]
    Reuse(#[from] crate::logic::LogicError),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("perception model does not match the task's label kind")]
    ModelKind,
    #[error("metrics output: {0}")]
    Io(#[from] std::io::Error),
}

/// One metrics line; per-batch rows leave `perception_acc` empty unless it
/// was measured.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub batch: usize,
    /// Log-score of the batch's best program and labels.
    pub score: Option<f64>,
    pub pseudo_label_acc: Option<f64>,
    pub perception_acc: Option<f64>,
    pub loss: Option<f64>,
    pub nodes_explored: u64,
}

pub const METRICS_HEADER: &str =
    "epoch,batch,score,pseudo_label_acc,perception_acc,loss,nodes_explored";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

impl MetricsRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.epoch,
            self.batch,
            opt(self.score),
            opt(self.pseudo_label_acc),
            opt(self.perception_acc),
            opt(self.loss),
            self.nodes_explored
        )
    }
}

#[derive(Clone, Debug)]
pub struct EmState {
    pub model: PerceptionModel,
    /// Program selected at the end of the last epoch and its log-score over
    /// the training set.
    pub best: Option<(Program, f64)>,
    pub rows: Vec<MetricsRow>,
    /// Batches seen so far, across epochs.
    pub batches_done: usize,
    pub batches_per_epoch: usize,
    pub lr: f64,
}

impl EmState {
    pub fn new(model: PerceptionModel, lr: f64) -> EmState {
        EmState {
            model,
            best: None,
            rows: Vec::new(),
            batches_done: 0,
            batches_per_epoch: 0,
            lr,
        }
    }

    pub fn program(&self) -> Option<&Program> {
        self.best.as_ref().map(|b| &b.0)
    }
}

/// A freshly initialized model of the kind `task` needs.
pub fn new_model(task: &TaskSpec, dim: usize, cfg: &EmConfig) -> PerceptionModel {
    match task.label_kind() {
        LabelKind::Monadic => {
            let mut dims = vec![dim];
            dims.extend(&cfg.hidden);
            dims.push(cfg.classes);
            PerceptionModel::Classifier(Mlp::new(&dims, cfg.seed))
        }
        LabelKind::Dyadic => PerceptionModel::Pair(PairModel::new(dim, &cfg.hidden, cfg.seed)),
    }
}

/// The result of abduction-induction on one batch.
#[derive(Clone, Debug)]
pub struct EStep {
    pub induced: Induced,
    pub stats: SearchStats,
}

fn budget(task: &TaskSpec, cfg: &EmConfig) -> Budget {
    Budget {
        max_clauses: cfg.max_clauses.unwrap_or(task.max_clauses),
        max_invented: cfg.max_invented,
        pruning: cfg.pruning,
        proof_steps: cfg.proof_steps,
        solver_nodes: cfg.solver_nodes,
        deadline: cfg
            .batch_seconds
            .map(|s| Instant::now() + Duration::from_secs_f64(s)),
        workers: cfg.workers,
    }
}

/// Best program and labels for `batch` under the current model. `Err` in the
/// second position reports search effort when no program was found.
pub fn e_step(
    state: &EmState,
    task: &TaskSpec,
    batch: &[&Example],
    cfg: &EmConfig,
) -> Result<Result<EStep, SearchStats>, EmError> {
    let mut queries = Vec::with_capacity(batch.len());
    let mut facts = Vec::with_capacity(batch.len());
    for ex in batch {
        queries.push(Query {
            goal: task.goal(ex.input.len(), ex.output.goal_term()),
            positive: ex.output.is_positive(),
        });
        facts.push(state.model.facts(&ex.input)?);
    }
    let out = induce(
        &task.background,
        task.target,
        &queries,
        &facts,
        &budget(task, cfg),
    )?;
    Ok(match out.best {
        Some(induced) => Ok(EStep {
            induced,
            stats: out.stats,
        }),
        None => Err(out.stats),
    })
}

/// Pseudo-labeled training rows for the model: item labels for a
/// classifier, and the relational facts of positive examples for a pair
/// model. Returns the rows and, when ground truth is known, the fraction of
/// pseudo-labels that match it.
fn pseudo_labels(
    model: &PerceptionModel,
    batch: &[&Example],
    estep: &EStep,
) -> (TrainBatch, Option<f64>) {
    let mut tb = TrainBatch::default();
    let (mut ok, mut total) = (0usize, 0usize);
    for (ex, score) in batch.iter().zip(&estep.induced.examples) {
        match model {
            PerceptionModel::Classifier(_) => {
                let Some(lab) = &score.labeling else { continue };
                for (j, x) in ex.input.iter().enumerate() {
                    let Some(v) = lab.value(j) else { continue };
                    tb.instances.push(x.clone());
                    tb.labels.push(v as usize);
                    if let Some(t) = &ex.truth {
                        ok += (t[j] == v) as usize;
                        total += 1;
                    }
                }
            }
            PerceptionModel::Pair(_) => {
                if !ex.output.is_positive() {
                    continue;
                }
                let pairs: Vec<(&[f64], &[f64], bool)> = score
                    .pairs
                    .iter()
                    .map(|&(i, j, h)| (ex.input[i].as_slice(), ex.input[j].as_slice(), h))
                    .collect();
                let rows = PairModel::batch(&pairs);
                tb.instances.extend(rows.instances);
                tb.labels.extend(rows.labels);
                if let Some(t) = &ex.truth {
                    for &(i, j, h) in &score.pairs {
                        ok += ((t[i] > t[j]) == h) as usize;
                        total += 1;
                    }
                }
            }
        }
    }
    (tb, (total > 0).then(|| ok as f64 / total as f64))
}

/// Fit the model on the pseudo-labels of one E-step; returns the mean loss,
/// or `None` if there was nothing to fit.
pub fn m_step(
    state: &mut EmState,
    batch: &[&Example],
    estep: &EStep,
    cfg: &EmConfig,
) -> Result<Option<f64>, EmError> {
    let (tb, _) = pseudo_labels(&state.model, batch, estep);
    if tb.is_empty() {
        return Ok(None);
    }
    let fit = FitConfig {
        epochs: cfg.m_epochs,
        lr: state.lr,
        momentum: cfg.momentum,
        minibatch: 16,
        weight_decay: 0.0,
    };
    let net = match &mut state.model {
        PerceptionModel::Classifier(m) => m,
        PerceptionModel::Pair(p) => &mut p.net,
    };
    Ok(Some(net.fit_with(&tb, &fit)?))
}

/// Item classification accuracy (classifier) or pairwise order accuracy (pair
/// model) against the generating digits of `examples`.
pub fn perception_accuracy(
    model: &PerceptionModel,
    examples: &[Example],
) -> Result<Option<f64>, PerceptionError> {
    let (mut ok, mut total) = (0usize, 0usize);
    for ex in examples {
        let Some(t) = &ex.truth else { continue };
        match model {
            PerceptionModel::Classifier(m) => {
                for (x, &d) in ex.input.iter().zip(t) {
                    ok += (m.argmax(x)? as i64 == d) as usize;
                    total += 1;
                }
            }
            PerceptionModel::Pair(p) => {
                for i in 0..t.len() {
                    for j in i + 1..t.len() {
                        ok += ((p.predict_pair(&ex.input[i], &ex.input[j])? > 0.5) == (t[i] > t[j]))
                            as usize;
                        total += 1;
                    }
                }
            }
        }
    }
    Ok((total > 0).then(|| ok as f64 / total as f64))
}

fn with_metarules(task: &TaskSpec, cfg: &EmConfig) -> Result<TaskSpec, EmError> {
    let mut task = task.clone();
    if !cfg.metarules.is_empty() {
        let names: Vec<&str> = cfg.metarules.iter().map(String::as_str).collect();
        task.background.metarules = select_metarules(&names)?;
    }
    Ok(task)
}

/// Run `cfg.epochs` epochs of E-steps and M-steps over `data.train`,
/// continuing from `state`. Metrics rows are appended to `state.rows` and
/// written to `csv` if given.
pub fn train(
    cfg: &EmConfig,
    task: &TaskSpec,
    data: &SequenceDataset,
    mut state: EmState,
    pretrain_shots: Option<&[(Instance, usize)]>,
    mut csv: Option<&mut dyn Write>,
) -> Result<EmState, EmError> {
    if data.train.is_empty() {
        return Err(EmError::EmptyDataset);
    }
    let task = with_metarules(task, cfg)?;
    if cfg.pretrain {
        if let (Some(shots), PerceptionModel::Classifier(m)) = (pretrain_shots, &mut state.model) {
            pretrain_few_shot(m, shots, cfg.pretrain_epochs, cfg.lr)?;
        }
    }
    if let PerceptionModel::Classifier(m) = &mut state.model {
        m.reseed(cfg.seed);
    } else if let PerceptionModel::Pair(p) = &mut state.model {
        p.net.reseed(cfg.seed);
    }
    if let Some(w) = csv.as_deref_mut() {
        writeln!(w, "{METRICS_HEADER}")?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let batch_size = cfg.batch_size.max(1);
    state.batches_per_epoch = order.len().div_ceil(batch_size);
    let first_epoch = state.rows.iter().map(|r| r.epoch + 1).max().unwrap_or(0);
    let emit = |state: &mut EmState,
                row: MetricsRow,
                csv: &mut Option<&mut dyn Write>|
     -> Result<(), EmError> {
        if let Some(w) = csv.as_deref_mut() {
            writeln!(w, "{}", row.csv())?;
        }
        state.rows.push(row);
        Ok(())
    };
    let initial = perception_accuracy(&state.model, &data.val)?;
    if first_epoch == 0 {
        emit(
            &mut state,
            MetricsRow {
                epoch: 0,
                batch: 0,
                score: None,
                pseudo_label_acc: None,
                perception_acc: initial,
                loss: None,
                nodes_explored: 0,
            },
            &mut csv,
        )?;
    }

    for epoch in first_epoch.max(1)..first_epoch.max(1) + cfg.epochs {
        order.shuffle(&mut rng);
        let (mut found, mut exhausted) = (0usize, 0usize);
        let mut seen: Vec<Program> = Vec::new();
        for (b, chunk) in order.chunks(batch_size).enumerate() {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &data.train[i]).collect();
            let mut row = MetricsRow {
                epoch,
                batch: b + 1,
                score: None,
                pseudo_label_acc: None,
                perception_acc: None,
                loss: None,
                nodes_explored: 0,
            };
            match e_step(&state, &task, &batch, cfg)? {
                Ok(estep) => {
                    found += 1;
                    exhausted += estep.stats.exhausted as usize;
                    row.nodes_explored = estep.stats.nodes();
                    row.score = Some(estep.induced.log_score);
                    row.pseudo_label_acc = pseudo_labels(&state.model, &batch, &estep).1;
                    let canon = estep.induced.program.canonical();
                    if !seen.iter().any(|p: &Program| p.canonical() == canon) {
                        seen.push(estep.induced.program.clone());
                    }
                    row.loss = m_step(&mut state, &batch, &estep, cfg)?;
                }
                Err(stats) => {
                    exhausted += stats.exhausted as usize;
                    row.nodes_explored = stats.nodes();
                }
            }
            state.batches_done += 1;
            row.perception_acc = perception_accuracy(&state.model, &data.val)?;
            emit(&mut state, row, &mut csv)?;
        }
        if found == 0 {
            return Err(EmError::AllBatchesFailed {
                epoch,
                batches: state.batches_per_epoch,
                exhausted,
            });
        }
        if let Some(best) = select_program(&state.model, &task, &data.train, &seen, cfg)? {
            state.best = Some((best.program, best.log_score));
        }
        if epoch >= cfg.decay_from {
            state.lr *= cfg.lr_decay;
        }
    }
    Ok(state)
}

/// The candidate with the best score over all of `examples` under `model`.
/// Candidates that fail on some example are dropped.
fn select_program(
    model: &PerceptionModel,
    task: &TaskSpec,
    examples: &[Example],
    candidates: &[Program],
    cfg: &EmConfig,
) -> Result<Option<Induced>, EmError> {
    let mut queries = Vec::with_capacity(examples.len());
    let mut facts = Vec::with_capacity(examples.len());
    for ex in examples {
        queries.push(Query {
            goal: task.goal(ex.input.len(), ex.output.goal_term()),
            positive: ex.output.is_positive(),
        });
        facts.push(model.facts(&ex.input)?);
    }
    let budget = Budget {
        deadline: None,
        ..budget(task, cfg)
    };
    let mut best: Option<Induced> = None;
    let mut stats = SearchStats::default();
    for program in candidates {
        let scored = score_program(
            &task.background,
            task.target,
            program,
            &queries,
            &facts,
            &budget,
            None,
            &mut stats,
        )?;
        if let Some(cand) = scored {
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
        }
    }
    Ok(best)
}

/// Fractional epochs until validation accuracy first comes within `tol` of
/// its plateau, taken as the mean of the last `tail` recorded values.
pub fn epochs_to_plateau(state: &EmState, tail: usize, tol: f64) -> Option<f64> {
    let accs: Vec<(usize, f64)> = state
        .rows
        .iter()
        .filter_map(|r| {
            r.perception_acc.map(|a| {
                (
                    r.epoch.saturating_sub(1) * state.batches_per_epoch + r.batch,
                    a,
                )
            })
        })
        .collect();
    if accs.len() < tail || tail == 0 || state.batches_per_epoch == 0 {
        return None;
    }
    let plateau = accs[accs.len() - tail..].iter().map(|a| a.1).sum::<f64>() / tail as f64;
    let (batches, _) = accs.iter().find(|(_, a)| *a >= plateau - tol)?;
    Some(*batches as f64 / state.batches_per_epoch as f64)
}
