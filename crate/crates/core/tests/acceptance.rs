//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use abil_core::bench::{bench_abduction, bench_metarules, subsets_with};
use abil_core::em::{
    epochs_to_plateau, new_model, run_curriculum, train, EmConfig, EmState, Stage,
};
use abil_core::fd::solve_best;
use abil_core::logic::Term;
use abil_core::mil::{default_metarules, entails, induce, Budget, Facts, Program, Query};
use abil_core::perception::{Mlp, PerceptionModel};
use abil_core::tasks::{
    evaluate, evaluate_with, gen_examples, gen_sequences, make_task, Counts, DigitSource,
    LabelSource, SyntheticDigitGen, TaskId,
};
use common::{brute_best, normalized, random_store, symbolic_batch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const SUM_PROGRAM: &str = "f(A,B):-add(A,C),f(C,B).\nf(A,B):-eq(A,B).";
const PRODUCT_PROGRAM: &str = "f(A,B):-mult(A,C),f(C,B).\nf(A,B):-eq(A,B).";

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, started: Instant, out: Outcome) -> bool {
    let verdict = if out.pass { "PASS" } else { "FAIL" };
    println!(
        "{verdict} {id:>2} {name}: {} [{:.1}s]",
        out.detail,
        started.elapsed().as_secs_f64()
    );
    out.pass
}

fn digit_source(sigma: f64, seed: u64) -> DigitSource {
    DigitSource::Synthetic(SyntheticDigitGen::new(10, 16, sigma, seed))
}

fn solver_oracle() -> Outcome {
    let t = Instant::now();
    let (mut mismatches, mut feasible) = (0, 0);
    for seed in 0..1000u64 {
        let (store, model, _) = random_store(seed, 5, 6, 10);
        let got = solve_best(&store, u64::MAX);
        let ok = match (got.best, brute_best(&model)) {
            (None, None) => true,
            (Some(lab), Some((digits, score))) => {
                feasible += 1;
                lab.values() == digits && (lab.log_prob - score).abs() <= 1e-12
            }
            _ => false,
        };
        mismatches += usize::from(!ok || got.truncated);
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        pass: mismatches == 0 && secs < 30.0,
        detail: format!("1000 stores ({feasible} feasible), {mismatches} mismatches, {secs:.2}s"),
    }
}

fn entailment_table() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut correct, mut total) = (0, 0);
    for (id, text) in [
        (TaskId::Sum, SUM_PROGRAM),
        (TaskId::Product, PRODUCT_PROGRAM),
    ] {
        let task = make_task(id);
        let program =
            Program::from_text(text, &default_metarules(), task.target.0).expect("program parses");
        let mut cases: Vec<(Vec<i64>, i64, bool)> =
            vec![(vec![1, 2, 3], 6, true), (vec![1, 2, 3], 7, false)];
        while cases.len() < 25 {
            let len = rng.random_range(1..=5);
            let digits: Vec<i64> = (0..len).map(|_| rng.random_range(0..10)).collect();
            let y: i64 = if id == TaskId::Sum {
                digits.iter().sum()
            } else {
                digits.iter().product()
            };
            let holds = cases.len().is_multiple_of(2);
            let claimed = if holds { y } else { y + rng.random_range(1..5) };
            cases.push((digits, claimed, holds));
        }
        for (digits, y, holds) in cases {
            let goal = task.goal(digits.len(), Some(Term::Int(y)));
            let e = entails(
                &task.background,
                task.target,
                &program,
                &goal,
                &digits,
                100_000,
            )
            .expect("entailment runs");
            correct += usize::from(e.entailed == holds && !e.resource_exceeded);
            total += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        pass: correct == total && total == 50 && secs < 1.0,
        detail: format!("{correct}/{total} cases, {secs:.3}s"),
    }
}

/// Programs induced from 20 exact-label examples, for reuse by later checks.
fn symbolic_induction() -> (Outcome, Vec<(TaskId, Program)>) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut learned = Vec::new();
    let mut parts = Vec::new();
    let mut pass = true;
    for (id, want, lo) in [
        (TaskId::Sum, SUM_PROGRAM, 0),
        (TaskId::Product, PRODUCT_PROGRAM, 1),
    ] {
        let task = make_task(id);
        let seqs: Vec<Vec<i64>> = (0..20)
            .map(|_| {
                (0..rng.random_range(1..=5))
                    .map(|_| rng.random_range(lo..10))
                    .collect()
            })
            .collect();
        let (q, f) = symbolic_batch(&task, &seqs, id == TaskId::Product);
        let budget = Budget {
            max_clauses: task.max_clauses,
            ..Budget::default()
        };
        let out = induce(&task.background, task.target, &q, &f, &budget).expect("induction runs");
        match out.best {
            Some(b) => {
                let ok = b.program.size() <= 2
                    && normalized(&b.program.pretty(), "f") == normalized(want, "f");
                pass &= ok;
                parts.push(format!(
                    "{id}: {} clauses{}",
                    b.program.size(),
                    if ok { "" } else { " (unexpected structure)" }
                ));
                learned.push((id, b.program));
            }
            None => {
                pass = false;
                parts.push(format!("{id}: no program"));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    (
        Outcome {
            pass: pass && secs < 60.0,
            detail: format!("{}, {secs:.1}s", parts.join(", ")),
        },
        learned,
    )
}

fn sum_config(seed: u64, pretrain: bool) -> EmConfig {
    EmConfig {
        epochs: 30,
        batch_size: 32,
        lr: 0.05,
        momentum: 0.9,
        m_epochs: 1,
        lr_decay: 0.8,
        decay_from: 20,
        seed,
        pretrain,
        ..EmConfig::default()
    }
}

/// Train the sum task on 300 sequences of length 2 to 5.
fn train_sum(seed: u64, pretrain: bool) -> (EmState, DigitSource) {
    let src = digit_source(0.25, seed);
    let task = make_task(TaskId::Sum);
    let data = gen_sequences(
        &src,
        TaskId::Sum,
        Counts {
            train: 300,
            val: 100,
            test: 0,
        },
        2..=5,
        seed,
    )
    .expect("data");
    let cfg = sum_config(seed, pretrain);
    let state = EmState::new(new_model(&task, 16, &cfg), cfg.lr);
    let shots = src.one_per_class(seed + 7).expect("one instance per class");
    (
        train(&cfg, &task, &data, state, Some(&shots), None).expect("training runs"),
        src,
    )
}

fn end_to_end(runs: &[(EmState, DigitSource, f64)]) -> Outcome {
    let task = make_task(TaskId::Sum);
    let mut good = 0;
    let mut parts = Vec::new();
    for (seed, (state, src, secs)) in SEEDS.iter().zip(runs) {
        let acc = state
            .rows
            .last()
            .and_then(|r| r.perception_acc)
            .unwrap_or(0.0);
        let test = gen_examples(src, TaskId::Sum, 200, 10, seed + 100).expect("test data");
        let mae = state
            .program()
            .and_then(|p| evaluate(&task, p, &state.model, &test, &Budget::default()).ok())
            .and_then(|m| m.mae)
            .unwrap_or(f64::INFINITY);
        let ok = acc >= 0.9 && mae <= 1.0 && *secs < 600.0;
        good += usize::from(ok);
        parts.push(format!("seed {seed}: acc {acc:.3} mae {mae:.3}"));
    }
    Outcome {
        pass: good >= 4,
        detail: format!("{good}/5 seeds pass ({})", parts.join("; ")),
    }
}

fn extrapolation(sum: Option<&Program>, symbolic: &[(TaskId, Program)]) -> Outcome {
    let src = digit_source(0.25, 1);
    let mut parts = Vec::new();
    let mut pass = true;
    let product = symbolic
        .iter()
        .find(|p| p.0 == TaskId::Product)
        .map(|p| &p.1);
    let checks = [
        (TaskId::Sum, sum, 5),
        (TaskId::Sum, sum, 10),
        (TaskId::Sum, sum, 100),
        (TaskId::Product, product, 15),
    ];
    for (id, program, len) in checks {
        let Some(program) = program else {
            pass = false;
            parts.push(format!("{id} length {len}: no program"));
            continue;
        };
        let task = make_task(id);
        let examples = gen_examples(&src, id, 50, len, 500 + len as u64).expect("test data");
        let m = evaluate_with(
            &task,
            program,
            LabelSource::GroundTruth { classes: 10 },
            &examples,
            &Budget::default(),
        )
        .expect("evaluation");
        let ok = m.failures == 0 && m.exact == 1.0 && m.mae == Some(0.0);
        pass &= ok;
        parts.push(format!(
            "{id} length {len}: mae {:?} failures {}",
            m.mae.unwrap_or(f64::NAN),
            m.failures
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn warm_start(cold: &[(EmState, DigitSource, f64)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (seed, (cold_state, _, _)) in SEEDS.iter().zip(cold) {
        let (warm_state, _) = train_sum(*seed, true);
        let w = epochs_to_plateau(&warm_state, 30, 0.02);
        let c = epochs_to_plateau(cold_state, 30, 0.02);
        let ok = matches!((w, c), (Some(w), Some(c)) if w < c);
        pass &= ok;
        parts.push(format!(
            "seed {seed}: warm {:.1} cold {:.1}",
            w.unwrap_or(f64::NAN),
            c.unwrap_or(f64::NAN)
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

/// Both curriculum stages on one seed: whether every check passed, and a
/// summary.
fn curriculum_seed(seed: u64) -> (bool, String) {
    let src = digit_source(0.1, seed);
    let d1 = gen_sequences(
        &src,
        TaskId::SortedConcept,
        Counts {
            train: 18,
            val: 50,
            test: 0,
        },
        1..=4,
        seed,
    )
    .expect("data");
    let d2 = gen_sequences(
        &src,
        TaskId::Bogosort,
        Counts {
            train: 200,
            val: 50,
            test: 0,
        },
        3..=3,
        seed + 1,
    )
    .expect("data");
    let stages = [
        Stage {
            task: make_task(TaskId::SortedConcept),
            config: EmConfig {
                epochs: 10,
                seed,
                batch_size: 6,
                ..EmConfig::default()
            },
            reuse_previous: false,
        },
        Stage {
            task: make_task(TaskId::Bogosort),
            config: EmConfig {
                epochs: 10,
                seed,
                batch_size: 16,
                ..EmConfig::default()
            },
            reuse_previous: true,
        },
    ];
    let out = match run_curriculum(&stages, &[d1, d2]) {
        Ok(out) => out,
        Err(e) => return (false, format!("seed {seed}: training failed: {e}")),
    };
    let (Some(concept), Some(sorter)) = (out[0].program(), out[1].program()) else {
        return (false, format!("seed {seed}: a stage learned no program"));
    };
    let invents = concept.invented.len() == 1;
    let calls_s = sorter.pretty().contains("s(");
    let mut task = make_task(TaskId::Bogosort);
    task.reuse(concept).expect("reuse");
    let metric = |len: usize| {
        let test = gen_examples(&src, TaskId::Bogosort, 100, len, seed + 50).expect("test data");
        evaluate(&task, sorter, &out[1].model, &test, &Budget::default()).expect("evaluation")
    };
    let perm3 = metric(3).perm_acc.unwrap_or(0.0);
    let elem5 = metric(5).elem_acc.unwrap_or(0.0);
    let ok = invents && calls_s && perm3 >= 0.9 && elem5 >= 0.9;
    let shape = if invents && calls_s {
        ""
    } else {
        " (unexpected programs)"
    };
    (
        ok,
        format!("seed {seed}: perm_acc@3 {perm3:.3} elem_acc@5 {elem5:.3}{shape}"),
    )
}

fn curriculum() -> Outcome {
    let t = Instant::now();
    let (mut good, mut parts) = (0, Vec::new());
    for seed in SEEDS {
        let (ok, detail) = curriculum_seed(seed);
        good += usize::from(ok);
        parts.push(detail);
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        pass: good == SEEDS.len() && secs < 900.0,
        detail: format!("{good}/5 seeds pass ({})", parts.join("; ")),
    }
}

fn abduction_order() -> Outcome {
    let src = digit_source(0.25, 1);
    let task = make_task(TaskId::Sum);
    let model = PerceptionModel::Classifier(Mlp::new(&[16, 64, 10], 3));
    let examples = gen_examples(&src, TaskId::Sum, 80, 4, 9).expect("data");
    let (mut wins, mut batches) = (0, 0);
    let (mut hz, mut zh) = (0u64, 0u64);
    for batch in examples.chunks(4) {
        let c =
            bench_abduction(&task, &model, batch, &Budget::default(), 20_000).expect("bench runs");
        batches += 1;
        wins += usize::from(c.h_to_z_labelings < c.z_to_h_labelings);
        hz += c.h_to_z_labelings;
        zh += c.z_to_h_labelings;
    }
    Outcome {
        pass: batches >= 20 && wins == batches,
        detail: format!(
            "{wins}/{batches} batches with H->z < z->H (mean {} vs {})",
            hz / batches as u64,
            zh / batches as u64
        ),
    }
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for dims in [vec![16, 64, 10], vec![32, 64, 2], vec![784, 64, 10]] {
        let net = Mlp::new(&dims, 17);
        let mut shape_worst: f64 = 0.0;
        for trial in 0..5 {
            let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let label = rng.random_range(0..*dims.last().unwrap());
            shape_worst = shape_worst.max(net.grad_check(&x, label, 200, trial));
        }
        parts.push(format!("{dims:?} {shape_worst:.2e}"));
        worst = worst.max(shape_worst);
    }
    Outcome {
        pass: worst < 1e-4,
        detail: parts.join(", "),
    }
}

fn pruning_soundness() -> Outcome {
    let src = digit_source(0.6, 2);
    let (mut cases, mut mismatches) = (0, 0);
    for id in [TaskId::Sum, TaskId::Product] {
        let task = make_task(id);
        let model = PerceptionModel::Classifier(Mlp::new(&[16, 64, 10], 4));
        for len in 1..=3 {
            for size in 1..=3 {
                for rep in 0..6u64 {
                    let ex = gen_examples(
                        &src,
                        id,
                        size,
                        len,
                        1000 * len as u64 + 10 * size as u64 + rep,
                    )
                    .expect("data");
                    let q: Vec<Query> = ex
                        .iter()
                        .map(|e| Query::positive(task.goal(len, e.output.goal_term())))
                        .collect();
                    let f: Vec<Facts> = ex
                        .iter()
                        .map(|e| model.facts(&e.input).expect("facts"))
                        .collect();
                    let score = |pruning: bool| {
                        let budget = Budget {
                            pruning,
                            max_clauses: task.max_clauses,
                            ..Budget::default()
                        };
                        induce(&task.background, task.target, &q, &f, &budget)
                            .expect("induction")
                            .best
                            .map(|b| b.log_score)
                    };
                    let (on, off) = (score(true), score(false));
                    let same = match (on, off) {
                        (Some(a), Some(b)) => (a - b).abs() <= 1e-9,
                        (None, None) => true,
                        _ => false,
                    };
                    cases += 1;
                    mismatches += usize::from(!same);
                }
            }
        }
    }
    Outcome {
        pass: mismatches == 0,
        detail: format!("{cases} instances, {mismatches} score mismatches"),
    }
}

fn metarule_counts() -> Outcome {
    let src = digit_source(0.25, 1);
    let task = make_task(TaskId::Sum);
    let ex = gen_sequences(
        &src,
        TaskId::Sum,
        Counts {
            train: 20,
            val: 0,
            test: 0,
        },
        1..=5,
        4,
    )
    .expect("data")
    .train;
    let q: Vec<Query> = ex
        .iter()
        .map(|e| Query::positive(task.goal(e.input.len(), e.output.goal_term())))
        .collect();
    let f: Vec<Facts> = ex
        .iter()
        .map(|e| Facts::Labels(e.truth.clone().expect("truth")))
        .collect();
    let nodes = |k: usize, required: &[&str]| {
        let costs = bench_metarules(
            &task,
            &q,
            &f,
            &subsets_with(k, required),
            &Budget::default(),
        )
        .expect("bench runs");
        costs
            .iter()
            .filter(|c| c.program.is_some())
            .map(|c| c.nodes)
            .max()
    };
    let required = ["chain", "ident"];
    let (two, three, nine) = (nodes(2, &required), nodes(3, &required), nodes(9, &[]));
    let pass = matches!((two, three, nine), (Some(a), Some(b), Some(c)) if a < b && b <= c);
    Outcome {
        pass,
        detail: format!("nodes: 2 rules {two:?}, 3 rules (worst) {three:?}, 9 rules {nine:?}"),
    }
}

fn main() -> ExitCode {
    let mut all = true;
    let t = Instant::now();
    all &= report(1, "solver matches brute force", t, solver_oracle());
    let t = Instant::now();
    all &= report(2, "entailment golden table", t, entailment_table());
    let t = Instant::now();
    let (out, symbolic) = symbolic_induction();
    all &= report(3, "symbolic induction", t, out);

    let t = Instant::now();
    let runs: Vec<(EmState, DigitSource, f64)> = SEEDS
        .iter()
        .map(|&s| {
            let t = Instant::now();
            let (state, src) = train_sum(s, false);
            (state, src, t.elapsed().as_secs_f64())
        })
        .collect();
    all &= report(4, "end-to-end training", t, end_to_end(&runs));
    let t = Instant::now();
    let sum_program = runs.iter().filter_map(|r| r.0.program()).next();
    all &= report(
        5,
        "extrapolation on ground truth",
        t,
        extrapolation(sum_program, &symbolic),
    );
    let t = Instant::now();
    all &= report(6, "few-shot warm start", t, warm_start(&runs));
    let t = Instant::now();
    all &= report(7, "curriculum sorting", t, curriculum());
    let t = Instant::now();
    all &= report(8, "abduction order", t, abduction_order());
    let t = Instant::now();
    all &= report(9, "gradient check", t, gradient_check());
    let t = Instant::now();
    all &= report(10, "pruning soundness", t, pruning_soundness());
    let t = Instant::now();
    all &= report(11, "metarule count", t, metarule_counts());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
