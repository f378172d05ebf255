//! Batch induction: candidate generation from a seed example, per-example
//! abduction under each candidate, and scoring by prior times likelihood.

use std::time::Instant;

use rayon::prelude::*;
use rustc_hash::FxHashSet;

use crate::fd::{solve_best, Labeling};
use crate::logic::{Atom, Flow, PredKey};

use super::program::{log_prior, Program};
use super::prover::{Abduced, Background, Facts, ProveConfig, ProveError, Prover};

const SLACK: f64 = 1e-9;
/// Proofs enumerated per negative example before giving up on it.
const MAX_NEGATIVE_PROOFS: usize = 4096;

/// A goal to be entailed (positive) or not entailed (negative).
#[derive(Clone, Debug)]
pub struct Query {
    pub goal: Atom,
    pub positive: bool,
}

impl Query {
    pub fn positive(goal: Atom) -> Query {
        Query {
            goal,
            positive: true,
        }
    }

    pub fn negative(goal: Atom) -> Query {
        Query {
            goal,
            positive: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Budget {
    pub max_clauses: usize,
    pub max_invented: usize,
    pub pruning: bool,
    /// Resolution steps per prover run.
    pub proof_steps: u64,
    /// Branch nodes per constraint solve.
    pub solver_nodes: u64,
    pub deadline: Option<Instant>,
    /// Per-example scoring threads; 1 scores sequentially.
    pub workers: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_clauses: 3,
            max_invented: 1,
            pruning: true,
            proof_steps: 2_000_000,
            solver_nodes: 1_000_000,
            deadline: None,
            workers: 1,
        }
    }
}

impl Budget {
    fn prove_config(&self, allow_new: bool, max_clauses: usize) -> ProveConfig {
        ProveConfig {
            max_clauses,
            max_invented: self.max_invented,
            allow_new,
            pruning: self.pruning,
            step_limit: Some(self.proof_steps),
            deadline: self.deadline,
        }
    }
}

/// Search effort counters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub prover_steps: u64,
    pub solver_nodes: u64,
    /// Complete labelings evaluated by the constraint solver.
    pub labelings: u64,
    pub candidates: usize,
    /// Some step, node or time budget ran out.
    pub exhausted: bool,
}

impl SearchStats {
    pub fn nodes(&self) -> u64 {
        self.prover_steps + self.solver_nodes
    }

    pub fn merge(&mut self, other: &SearchStats) {
        self.prover_steps += other.prover_steps;
        self.solver_nodes += other.solver_nodes;
        self.labelings += other.labelings;
        self.candidates += other.candidates;
        self.exhausted |= other.exhausted;
    }
}

/// The best explanation of one example under a fixed program.
#[derive(Clone, Debug)]
pub struct ExampleScore {
    /// Log-probability of the full latent labeling of the example.
    pub log_score: f64,
    /// Item labels, for monadic facts.
    pub labeling: Option<Labeling>,
    /// Relational labels fixed by the explanation, as `(i, j, holds from i
    /// to j)` with `i < j`; every other pair takes its likelier value.
    pub pairs: Vec<(usize, usize, bool)>,
    /// The goal with the proof's bindings applied.
    pub answer: Atom,
    pub abduced: Vec<Abduced>,
}

/// One completed proof.
#[derive(Clone, Debug)]
pub struct AbductionResult {
    pub program: Program,
    pub abduced: Vec<Abduced>,
    /// Sum of log-probabilities of the abduced labels along the proof.
    pub log_prob: f64,
    pub labeling: Option<Labeling>,
}

#[derive(Clone, Debug)]
pub struct ProveOutcome {
    pub results: Vec<AbductionResult>,
    pub exhausted: bool,
}

/// Prove `goals` starting from `program`, returning every completed proof
/// that improves on the previous best (all of them when pruning is off).
pub fn prove(
    bg: &Background,
    target: PredKey,
    goals: &[Atom],
    program: &Program,
    facts: &Facts,
    cfg: ProveConfig,
    solver_nodes: u64,
) -> Result<ProveOutcome, ProveError> {
    let mut prover = Prover::new(bg, facts, cfg, target, program)?;
    let mut results = Vec::new();
    let mut exhausted = false;
    prover.run(goals, &mut |p| {
        let (log_prob, labeling) = match facts {
            Facts::Monadic(_) => {
                let out = solve_best(p.store(), solver_nodes);
                exhausted |= out.truncated;
                let Some(lab) = out.best else {
                    return Flow::Continue;
                };
                p.best_completed = p.best_completed.max(lab.log_prob);
                (lab.log_prob, Some(lab))
            }
            Facts::Dyadic(_) => {
                p.best_completed = p.best_completed.max(p.pair_score());
                (p.raw_log_prob(), None)
            }
            Facts::Labels(_) => (0.0, None),
        };
        results.push(AbductionResult {
            program: p.program(),
            abduced: p.abduced().to_vec(),
            log_prob,
            labeling,
        });
        Flow::Continue
    });
    Ok(ProveOutcome {
        results,
        exhausted: exhausted || prover.exhausted(),
    })
}

fn resolved_goal(p: &Prover<'_>, goal: &Atom) -> Atom {
    Atom {
        pred: goal.pred.clone(),
        args: goal.args.iter().map(|a| p.resolve(a)).collect(),
    }
}

/// Best-scoring explanation of `query` under the fixed `program`, or `None` if
/// it has none scoring at least `floor`.
#[allow(clippy::too_many_arguments)]
pub fn score_query(
    bg: &Background,
    target: PredKey,
    program: &Program,
    query: &Query,
    facts: &Facts,
    budget: &Budget,
    floor: f64,
    stats: &mut SearchStats,
) -> Result<Option<ExampleScore>, ProveError> {
    if !query.positive {
        return score_negative(bg, target, program, query, facts, budget, stats);
    }
    let mut prover = Prover::new(
        bg,
        facts,
        budget.prove_config(false, program.size()),
        target,
        program,
    )?;
    if budget.pruning {
        prover.floor = floor - SLACK;
    }
    let mut best: Option<ExampleScore> = None;
    let goal = &query.goal;
    prover.run(std::slice::from_ref(goal), &mut |p| {
        let (score, labeling, pairs) = match facts {
            Facts::Monadic(_) => {
                let out = solve_best(p.store(), budget.solver_nodes);
                stats.solver_nodes += out.nodes;
                stats.labelings += out.leaves;
                stats.exhausted |= out.truncated;
                let Some(lab) = out.best else {
                    return Flow::Continue;
                };
                (lab.log_prob, Some(lab), Vec::new())
            }
            Facts::Dyadic(_) => (p.pair_score(), None, p.facts_fixed()),
            Facts::Labels(_) => (0.0, None, Vec::new()),
        };
        if best.as_ref().is_none_or(|b| score > b.log_score) {
            p.best_completed = p.best_completed.max(score);
            best = Some(ExampleScore {
                log_score: score,
                labeling,
                pairs,
                answer: resolved_goal(p, goal),
                abduced: p.abduced().to_vec(),
            });
        }
        if matches!(facts, Facts::Labels(_)) {
            Flow::Stop
        } else {
            Flow::Continue
        }
    });
    stats.prover_steps += prover.steps();
    stats.exhausted |= prover.exhausted();
    Ok(best)
}

/// A negative example is explained by the cheapest change to the likeliest
/// relational labeling that falsifies every proof of the goal.
fn score_negative(
    bg: &Background,
    target: PredKey,
    program: &Program,
    query: &Query,
    facts: &Facts,
    budget: &Budget,
    stats: &mut SearchStats,
) -> Result<Option<ExampleScore>, ProveError> {
    let mut cfg = budget.prove_config(false, program.size());
    cfg.pruning = false;
    let mut prover = Prover::new(bg, facts, cfg, target, program)?;
    let mut proofs: Vec<Vec<(usize, usize, bool)>> = Vec::new();
    let mut unconditional = false;
    prover.run(std::slice::from_ref(&query.goal), &mut |p| {
        let fixed = p.facts_fixed();
        if fixed.is_empty() {
            unconditional = true;
            return Flow::Stop;
        }
        proofs.push(fixed);
        if proofs.len() >= MAX_NEGATIVE_PROOFS {
            return Flow::Stop;
        }
        Flow::Continue
    });
    stats.prover_steps += prover.steps();
    stats.exhausted |= prover.exhausted();
    if unconditional {
        return Ok(None);
    }
    if proofs.len() >= MAX_NEGATIVE_PROOFS {
        stats.exhausted = true;
        return Ok(None);
    }
    let answer = query.goal.clone();
    match facts {
        Facts::Dyadic(p) => {
            let base = super::prover::pair_base(p);
            Ok(
                min_hitting_set(&proofs, p).map(|(cost, pairs)| ExampleScore {
                    log_score: base - cost,
                    labeling: None,
                    pairs,
                    answer,
                    abduced: Vec::new(),
                }),
            )
        }
        // A goal that relies on no facts is unconditionally entailed, and
        // without relational facts nothing can be flipped.
        _ => Ok(if proofs.is_empty() {
            Some(ExampleScore {
                log_score: 0.0,
                labeling: None,
                pairs: Vec::new(),
                answer,
                abduced: Vec::new(),
            })
        } else {
            None
        }),
    }
}

/// Probability that the fact `(i, j, holds)` is true under `p`.
fn fact_prob(p: &[Vec<f64>], (i, j, holds): (usize, usize, bool)) -> f64 {
    if holds {
        p[i][j]
    } else {
        1.0 - p[i][j]
    }
}

/// Relation facts `(i, j, holds)` over item indices.
type PairFacts = Vec<(usize, usize, bool)>;

/// Cheapest set of pair assignments falsifying at least one fact in every
/// proof. Cost is the log-probability lost against the likeliest labeling.
pub(crate) fn min_hitting_set(
    proofs: &[Vec<(usize, usize, bool)>],
    p: &[Vec<f64>],
) -> Option<(f64, PairFacts)> {
    fn flip_cost(p: &[Vec<f64>], f: (usize, usize, bool)) -> f64 {
        let q = fact_prob(p, f);
        q.max(1.0 - q).ln() - (1.0 - q).ln()
    }
    fn search(
        proofs: &[Vec<(usize, usize, bool)>],
        p: &[Vec<f64>],
        chosen: &mut Vec<(usize, usize, bool)>,
        cost: f64,
        best: &mut Option<(f64, PairFacts)>,
    ) {
        if best.as_ref().is_some_and(|b| cost >= b.0) {
            return;
        }
        let blocked = |proof: &Vec<(usize, usize, bool)>| {
            proof
                .iter()
                .any(|&(i, j, t)| chosen.iter().any(|&(a, b, u)| a == i && b == j && u != t))
        };
        let Some(open) = proofs.iter().find(|pr| !blocked(pr)) else {
            let mut set = chosen.clone();
            set.sort_unstable();
            *best = Some((cost, set));
            return;
        };
        let mut options: Vec<(f64, (usize, usize, bool))> = open
            .iter()
            .filter(|&&(i, j, _)| !chosen.iter().any(|&(a, b, _)| a == i && b == j))
            .map(|&(i, j, t)| (flip_cost(p, (i, j, t)), (i, j, !t)))
            .collect();
        options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (c, f) in options {
            chosen.push(f);
            search(proofs, p, chosen, cost + c, best);
            chosen.pop();
        }
    }
    let mut best = None;
    search(proofs, p, &mut Vec::new(), 0.0, &mut best);
    best
}

/// A program with its per-example explanations and batch log-score.
#[derive(Clone, Debug)]
pub struct Induced {
    pub program: Program,
    pub examples: Vec<ExampleScore>,
    /// `ln prior(c) + Σ ln P(z_i|x_i)`.
    pub log_score: f64,
}

impl Induced {
    pub fn score(&self) -> f64 {
        self.log_score.exp()
    }

    /// Higher score first, then fewer clauses, fewer body literals, and the
    /// canonical text.
    pub fn beats(&self, other: &Induced) -> bool {
        if self.log_score != other.log_score {
            return self.log_score > other.log_score;
        }
        if self.program.size() != other.program.size() {
            return self.program.size() < other.program.size();
        }
        if self.program.literal_count() != other.program.literal_count() {
            return self.program.literal_count() < other.program.literal_count();
        }
        self.program.canonical() < other.program.canonical()
    }
}

#[derive(Clone, Debug)]
pub struct InduceOutcome {
    pub best: Option<Induced>,
    pub stats: SearchStats,
}

/// Candidate programs of exactly `c` clauses under which the seed has a proof.
#[allow(clippy::too_many_arguments)]
fn generate(
    bg: &Background,
    target: PredKey,
    seed: &Query,
    facts: &Facts,
    c: usize,
    budget: &Budget,
    floor: f64,
    stats: &mut SearchStats,
) -> Result<Vec<Program>, ProveError> {
    let mut prover = Prover::new(
        bg,
        facts,
        budget.prove_config(true, c),
        target,
        &Program::new(),
    )?;
    if budget.pruning {
        prover.floor = floor - SLACK;
    }
    let mut seen: FxHashSet<String> = FxHashSet::default();
    let mut out = Vec::new();
    prover.run(std::slice::from_ref(&seed.goal), &mut |p| {
        if p.program_size() != c {
            return Flow::Continue;
        }
        if let Facts::Monadic(_) = facts {
            let sol = solve_best(p.store(), budget.solver_nodes);
            stats.solver_nodes += sol.nodes;
            stats.labelings += sol.leaves;
            stats.exhausted |= sol.truncated;
            match sol.best {
                Some(lab) if !budget.pruning || lab.log_prob >= floor - SLACK => {}
                _ => return Flow::Continue,
            }
        }
        let program = p.program();
        if seen.insert(program.canonical()) {
            out.push(program);
        }
        Flow::Continue
    });
    stats.prover_steps += prover.steps();
    stats.exhausted |= prover.exhausted();
    Ok(out)
}

/// Score `program` over the whole batch; `None` if some example has no
/// explanation or the candidate cannot beat `incumbent`.
#[allow(clippy::too_many_arguments)]
pub fn score_program(
    bg: &Background,
    target: PredKey,
    program: &Program,
    queries: &[Query],
    facts: &[Facts],
    budget: &Budget,
    incumbent: Option<f64>,
    stats: &mut SearchStats,
) -> Result<Option<Induced>, ProveError> {
    let lp = log_prior(program.size());
    let uppers: Vec<f64> = facts.iter().map(Facts::unconstrained_max).collect();
    let bounded = budget.pruning && incumbent.is_some();
    let inc = incumbent.unwrap_or(f64::NEG_INFINITY);

    if budget.workers > 1 && queries.len() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(budget.workers)
            .stack_size(64 * 1024 * 1024)
            .build()
            .expect("thread pool");
        let scored: Vec<(Result<Option<ExampleScore>, ProveError>, SearchStats)> =
            pool.install(|| {
                queries
                    .par_iter()
                    .zip(facts.par_iter())
                    .map(|(q, f)| {
                        let mut s = SearchStats::default();
                        let r = score_query(
                            bg,
                            target,
                            program,
                            q,
                            f,
                            budget,
                            f64::NEG_INFINITY,
                            &mut s,
                        );
                        (r, s)
                    })
                    .collect()
            });
        let mut examples = Vec::with_capacity(queries.len());
        let mut total = lp;
        for (r, s) in scored {
            stats.merge(&s);
            let Some(e) = r? else { return Ok(None) };
            total += e.log_score;
            examples.push(e);
        }
        if bounded && total < inc - SLACK {
            return Ok(None);
        }
        return Ok(Some(Induced {
            program: program.clone(),
            examples,
            log_score: total,
        }));
    }

    let mut examples = Vec::with_capacity(queries.len());
    let mut partial = 0.0;
    for (i, (q, f)) in queries.iter().zip(facts).enumerate() {
        let rest: f64 = uppers[i + 1..].iter().sum();
        let floor = if bounded {
            inc - lp - partial - rest
        } else {
            f64::NEG_INFINITY
        };
        let Some(e) = score_query(bg, target, program, q, f, budget, floor, stats)? else {
            return Ok(None);
        };
        partial += e.log_score;
        examples.push(e);
        if bounded && lp + partial + rest < inc - SLACK {
            return Ok(None);
        }
    }
    Ok(Some(Induced {
        program: program.clone(),
        examples,
        log_score: lp + partial,
    }))
}

/// The highest-scoring program of at most `budget.max_clauses` clauses that
/// entails every positive query and no negative one, with the best
/// explanation of each query under it.
pub fn induce(
    bg: &Background,
    target: PredKey,
    queries: &[Query],
    facts: &[Facts],
    budget: &Budget,
) -> Result<InduceOutcome, ProveError> {
    assert_eq!(queries.len(), facts.len(), "one fact source per query");
    let mut stats = SearchStats::default();
    let seed = queries
        .iter()
        .enumerate()
        .filter(|(_, q)| q.positive)
        .max_by_key(|(i, q)| {
            (
                facts[*i].n_items(),
                q.goal
                    .args
                    .first()
                    .and_then(|a| a.as_list())
                    .map_or(0, |l| l.len()),
                std::cmp::Reverse(*i),
            )
        })
        .map(|(i, _)| i);
    let Some(seed) = seed else {
        return Ok(InduceOutcome { best: None, stats });
    };
    let uppers: Vec<f64> = facts.iter().map(Facts::unconstrained_max).collect();
    let upper_total: f64 = uppers.iter().sum();
    let mut best: Option<Induced> = None;

    for c in 1..=budget.max_clauses {
        if budget.pruning {
            if let Some(b) = &best {
                if b.log_score >= log_prior(c) + upper_total {
                    break;
                }
            }
        }
        if budget.deadline.is_some_and(|d| Instant::now() >= d) {
            stats.exhausted = true;
            break;
        }
        let seed_floor = match &best {
            Some(b) => b.log_score - log_prior(c) - (upper_total - uppers[seed]),
            None => f64::NEG_INFINITY,
        };
        let candidates = generate(
            bg,
            target,
            &queries[seed],
            &facts[seed],
            c,
            budget,
            seed_floor,
            &mut stats,
        )?;
        stats.candidates += candidates.len();
        for program in candidates {
            let inc = best.as_ref().map(|b| b.log_score);
            if let Some(cand) = score_program(
                bg, target, &program, queries, facts, budget, inc, &mut stats,
            )? {
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand);
                }
            }
            if budget.deadline.is_some_and(|d| Instant::now() >= d) {
                stats.exhausted = true;
                break;
            }
        }
    }
    Ok(InduceOutcome { best, stats })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entailment {
    pub entailed: bool,
    /// The depth or step limit was hit, so `false` may be wrong.
    pub resource_exceeded: bool,
}

/// Whether `program` entails `goal` when abducibles are evaluated on the
/// given ground labels.
pub fn entails(
    bg: &Background,
    target: PredKey,
    program: &Program,
    goal: &Atom,
    labels: &[i64],
    step_limit: u64,
) -> Result<Entailment, ProveError> {
    let facts = Facts::Labels(labels.to_vec());
    let cfg = ProveConfig {
        max_clauses: program.size(),
        max_invented: program.invented.len(),
        allow_new: false,
        pruning: false,
        step_limit: Some(step_limit),
        deadline: None,
    };
    let mut prover = Prover::new(bg, &facts, cfg, target, program)?;
    let mut entailed = false;
    prover.run(std::slice::from_ref(goal), &mut |_| {
        entailed = true;
        Flow::Stop
    });
    let resource_exceeded = !entailed && (prover.exhausted() || prover.depth_exceeded());
    Ok(Entailment {
        entailed,
        resource_exceeded,
    })
}

/// `goal` with the bindings of its first proof under ground labels.
pub fn run_program(
    bg: &Background,
    target: PredKey,
    program: &Program,
    goal: &Atom,
    labels: &[i64],
    step_limit: u64,
) -> Result<Option<Atom>, ProveError> {
    let facts = Facts::Labels(labels.to_vec());
    let cfg = ProveConfig {
        max_clauses: program.size(),
        max_invented: program.invented.len(),
        allow_new: false,
        pruning: false,
        step_limit: Some(step_limit),
        deadline: None,
    };
    let mut prover = Prover::new(bg, &facts, cfg, target, program)?;
    let mut answer = None;
    prover.run(std::slice::from_ref(goal), &mut |p| {
        answer = Some(resolved_goal(p, goal));
        Flow::Stop
    });
    Ok(answer)
}
