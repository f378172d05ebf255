//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::Path;

use abil_core::bench::{bench_abduction, bench_metarules, subsets_with, BenchError};
use abil_core::em::{prepare_stage, train, EmError, EmState, Stage};
use abil_core::mil::{Budget, Facts, Program, Query};
use abil_core::perception::{Mlp, PerceptionModel};
use abil_core::tasks::{
    evaluate_with, gen_examples, gen_sequences, load_idx, make_task, read_examples,
    shots_from_examples, write_dataset, Counts, DataError, DigitSource, Example, LabelSource,
    Metrics, SequenceDataset, SyntheticDigitGen, TaskId,
};

use crate::artifacts::{load_stage, save_stage, stage_dir};
use crate::config::RunConfig;
use crate::{BenchAbductionArgs, BenchMetarulesArgs, CliError, EvalArgs, GenDataArgs, SourceArgs};

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::TooLongForDistinct { .. } => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EmError> for CliError {
    fn from(e: EmError) -> Self {
        match e {
            EmError::AllBatchesFailed { .. } => CliError::Budget(e.to_string()),
            EmError::Metarules(_) => CliError::Config(e.to_string()),
            EmError::Io(e) => CliError::Io(e),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Metarules(_) => CliError::Config(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

/// Parse `"4"` or `"2-5"` into an inclusive range.
pub fn parse_lengths(s: &str) -> Result<std::ops::RangeInclusive<usize>, String> {
    let (lo, hi) = s.split_once('-').unwrap_or((s, s));
    let lo: usize = lo
        .trim()
        .parse()
        .map_err(|_| format!("bad length range {s:?}"))?;
    let hi: usize = hi
        .trim()
        .parse()
        .map_err(|_| format!("bad length range {s:?}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("bad length range {s:?}"));
    }
    Ok(lo..=hi)
}

fn source(args: &SourceArgs) -> Result<DigitSource, CliError> {
    match (&args.idx_images, &args.idx_labels) {
        (Some(images), Some(labels)) => {
            Ok(DigitSource::from_labeled(load_idx(images, labels)?, 10))
        }
        (None, None) => {
            if !(args.noise.is_finite() && args.noise >= 0.0) {
                return Err(CliError::Config(format!(
                    "noise must be a non-negative number, got {}",
                    args.noise
                )));
            }
            if args.classes < 2 || args.dim == 0 {
                return Err(CliError::Config(
                    "need at least 2 classes and 1 feature".into(),
                ));
            }
            Ok(DigitSource::Synthetic(SyntheticDigitGen::new(
                args.classes,
                args.dim,
                args.noise,
                args.prototype_seed,
            )))
        }
        _ => Err(CliError::Config(
            "--idx-images and --idx-labels go together".into(),
        )),
    }
}

pub fn gen_data(args: &GenDataArgs) -> Result<(), CliError> {
    if args.train == 0 {
        return Err(CliError::Config("--train must be positive".into()));
    }
    let lengths = parse_lengths(&args.lengths).map_err(CliError::Config)?;
    let src = source(&args.source)?;
    let counts = Counts {
        train: args.train,
        val: args.val,
        test: args.test,
    };
    let ds = gen_sequences(&src, args.task, counts, lengths.clone(), args.seed)?;
    write_dataset(&args.out, &ds)?;
    println!(
        "wrote {} train, {} val, {} test {} examples of length {}-{} to {}",
        ds.train.len(),
        ds.val.len(),
        ds.test.len(),
        args.task,
        lengths.start(),
        lengths.end(),
        args.out.display()
    );
    Ok(())
}

fn read_split(path: &Path, task: TaskId, required: bool) -> Result<Vec<Example>, CliError> {
    if !path.exists() && !required {
        return Ok(Vec::new());
    }
    let (found, examples) = read_examples(path)?;
    if found != task {
        return Err(CliError::Data(format!(
            "{} holds {found} examples, expected {task}",
            path.display()
        )));
    }
    Ok(examples)
}

fn load_dataset(dir: &Path, task: TaskId) -> Result<SequenceDataset, CliError> {
    let train = read_split(&dir.join("train.tsv"), task, true)?;
    let val = read_split(&dir.join("val.tsv"), task, false)?;
    let test = read_split(&dir.join("test.tsv"), task, false)?;
    let lens = train.iter().map(|e| e.input.len());
    let lengths = lens.clone().min().unwrap_or(1)..=lens.max().unwrap_or(1);
    Ok(SequenceDataset {
        task,
        lengths,
        train,
        val,
        test,
    })
}

pub fn train_run(config: &Path, workers: Option<usize>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config)?;
    cfg.resolve(workers);
    // Read every dataset before writing anything.
    let datasets: Vec<SequenceDataset> = cfg
        .stages
        .iter()
        .map(|s| load_dataset(&s.data, s.task))
        .collect::<Result<_, _>>()?;
    fs::create_dir_all(&cfg.out)?;
    fs::write(
        cfg.out.join("config.toml"),
        toml::to_string(&cfg).map_err(|e| CliError::Other(e.to_string()))?,
    )?;

    let mut prev: Option<EmState> = None;
    let mut reused: Vec<(TaskId, Program)> = Vec::new();
    for (i, (sc, data)) in cfg.stages.iter().zip(&datasets).enumerate() {
        let stage = Stage {
            task: make_task(sc.task),
            config: sc.em.clone(),
            reuse_previous: sc.reuse_previous,
        };
        if !sc.reuse_previous {
            reused.clear();
        }
        let (task, state) = prepare_stage(&stage, prev.as_ref(), data.dim().unwrap_or(0))?;
        let shots = match (sc.em.pretrain, &state.model) {
            (true, PerceptionModel::Classifier(_)) => {
                Some(shots_from_examples(&data.train, sc.em.classes)?)
            }
            _ => None,
        };
        let dir = stage_dir(&cfg.out, i, sc.task);
        fs::create_dir_all(&dir)?;
        let mut csv = std::io::BufWriter::new(fs::File::create(dir.join("metrics.csv"))?);
        let state = train(&sc.em, &task, data, state, shots.as_deref(), Some(&mut csv))?;
        csv.flush()?;
        let program = state.program().cloned().unwrap_or_default();
        save_stage(&dir, sc.task, &reused, &program, &state.model)?;
        println!("stage {} ({}): {}", i + 1, sc.task, dir.display());
        print!("{}", program.pretty());
        if let Some(m) = state.rows.last().and_then(|r| r.perception_acc) {
            println!("validation perception accuracy {m:.4}");
        }
        reused.push((sc.task, program));
        prev = Some(state);
    }
    Ok(())
}

fn metrics_line(len: &str, m: &Metrics) -> String {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    format!(
        "{len},{},{},{:.4},{},{},{},{},{},{}",
        m.n,
        opt(m.acc),
        m.exact,
        opt(m.mae),
        opt(m.log_mae),
        opt(m.perm_acc),
        opt(m.elem_acc),
        opt(m.label_acc),
        m.failures
    )
}

const METRICS_COLUMNS: &str = "length,n,acc,exact,mae,log_mae,perm_acc,elem_acc,label_acc,failures";

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let stage = load_stage(&args.run)?;
    let mut examples = Vec::new();
    for path in &args.data {
        examples.extend(read_split(path, stage.meta.task, true)?);
    }
    if examples.is_empty() {
        return Err(CliError::Data("no test examples".into()));
    }
    let classes = match &stage.model {
        PerceptionModel::Classifier(m) => m.classes(),
        PerceptionModel::Pair(_) => 2,
    };
    let source = if args.ground_truth {
        LabelSource::GroundTruth { classes }
    } else {
        LabelSource::Model(&stage.model)
    };
    let budget = Budget::default();
    let mut lengths: Vec<usize> = examples.iter().map(|e| e.input.len()).collect();
    lengths.sort_unstable();
    lengths.dedup();
    let mut lines = vec![METRICS_COLUMNS.to_string()];
    for len in &lengths {
        let group: Vec<Example> = examples
            .iter()
            .filter(|e| e.input.len() == *len)
            .cloned()
            .collect();
        let m = evaluate_with(&stage.task, &stage.program, source, &group, &budget)
            .map_err(|e| CliError::Data(e.to_string()))?;
        lines.push(metrics_line(&len.to_string(), &m));
    }
    if lengths.len() > 1 {
        let m = evaluate_with(&stage.task, &stage.program, source, &examples, &budget)
            .map_err(|e| CliError::Data(e.to_string()))?;
        lines.push(metrics_line("all", &m));
    }
    let text = lines.join("\n") + "\n";
    print!("{text}");
    if let Some(out) = &args.out {
        fs::write(out, text)?;
    }
    Ok(())
}

pub fn show_program(run: &Path) -> Result<(), CliError> {
    let stage = load_stage(run)?;
    let background = fs::read_to_string(run.join("background.pl"))?;
    if !background.trim().is_empty() {
        println!("% reused background");
        print!("{}", background.trim_end().to_string() + "\n");
        println!("% learned");
    }
    print!("{}", stage.program.pretty());
    Ok(())
}

fn sum_batches(args: &BenchAbductionArgs) -> Result<(Vec<Vec<Example>>, usize), CliError> {
    let examples = match &args.data {
        Some(path) => read_split(path, TaskId::Sum, true)?
            .into_iter()
            .filter(|e| e.input.len() == args.length)
            .collect(),
        None => {
            let src = source(&args.source)?;
            gen_examples(
                &src,
                TaskId::Sum,
                args.batches * args.batch_size,
                args.length,
                args.seed,
            )?
        }
    };
    let dim = examples
        .first()
        .and_then(|e| e.input.first())
        .map(Vec::len)
        .ok_or_else(|| CliError::Data("no examples of the requested length".into()))?;
    let batches: Vec<Vec<Example>> = examples
        .chunks(args.batch_size)
        .take(args.batches)
        .map(<[Example]>::to_vec)
        .collect();
    Ok((batches, dim))
}

pub fn bench_abduction_cmd(args: &BenchAbductionArgs) -> Result<(), CliError> {
    if args.batch_size == 0 || args.batches == 0 {
        return Err(CliError::Config(
            "--batches and --batch-size must be positive".into(),
        ));
    }
    let (batches, dim) = sum_batches(args)?;
    let model = match &args.model {
        Some(run) => load_stage(run)?.model,
        None => PerceptionModel::Classifier(Mlp::new(&[dim, 64, args.source.classes], args.seed)),
    };
    let task = make_task(TaskId::Sum);
    let budget = Budget {
        workers: 1,
        ..Budget::default()
    };
    println!(
        "batch,h_to_z_labelings,h_to_z_nodes,h_to_z_secs,z_to_h_labelings,z_to_h_nodes,z_to_h_secs"
    );
    let mut fewer = 0;
    for (i, b) in batches.iter().enumerate() {
        let c = bench_abduction(&task, &model, b, &budget, args.cap)?;
        let zh = if c.z_to_h_capped {
            format!(">={}", c.z_to_h_labelings)
        } else {
            c.z_to_h_labelings.to_string()
        };
        println!(
            "{},{},{},{:.3},{},{},{:.3}",
            i + 1,
            c.h_to_z_labelings,
            c.h_to_z_nodes,
            c.h_to_z_secs,
            zh,
            c.z_to_h_nodes,
            c.z_to_h_secs
        );
        fewer += (c.h_to_z_labelings < c.z_to_h_labelings) as usize;
    }
    println!(
        "induce-first explored fewer labelings on {fewer} of {} batches",
        batches.len()
    );
    Ok(())
}

pub fn bench_metarules_cmd(args: &BenchMetarulesArgs) -> Result<(), CliError> {
    let task = make_task(args.task);
    if !matches!(args.task, TaskId::Sum | TaskId::Product) {
        return Err(CliError::Config(
            "the metarule bench runs on sum or product".into(),
        ));
    }
    let src = source(&args.source)?;
    let lengths = parse_lengths(&args.lengths).map_err(CliError::Config)?;
    let ds = gen_sequences(
        &src,
        args.task,
        Counts {
            train: args.examples,
            val: 0,
            test: 0,
        },
        lengths,
        args.seed,
    )?;
    let queries: Vec<Query> = ds
        .train
        .iter()
        .map(|e| Query::positive(task.goal(e.input.len(), e.output.goal_term())))
        .collect();
    let facts: Vec<Facts> = ds
        .train
        .iter()
        .map(|e| Facts::Labels(e.truth.clone().unwrap_or_default()))
        .collect();
    let required: Vec<&str> = args
        .require
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let mut groups: Vec<(String, Vec<Vec<String>>)> = args
        .sizes
        .iter()
        .map(|&k| (k.to_string(), subsets_with(k, &required)))
        .collect();
    for s in &args.subset {
        groups.push((
            s.clone(),
            vec![s.split(',').map(|n| n.trim().to_string()).collect()],
        ));
    }
    let budget = Budget {
        workers: 1,
        ..Budget::default()
    };
    println!("group,metarules,nodes,secs,result");
    let mut summary = Vec::new();
    for (name, subsets) in &groups {
        let rows = bench_metarules(&task, &queries, &facts, subsets, &budget)?;
        for r in &rows {
            let result = r
                .program
                .as_deref()
                .map_or("failed".to_string(), |p| p.trim_end().replace('\n', " "));
            println!(
                "{name},{},{},{:.4},{result}",
                r.metarules.join("+"),
                r.nodes,
                r.secs
            );
        }
        let ok: Vec<_> = rows.iter().filter(|r| r.program.is_some()).collect();
        let worst = ok.iter().map(|r| r.nodes).max();
        summary.push(format!(
            "{name}: {} subsets, {} failed, worst nodes {}",
            rows.len(),
            rows.len() - ok.len(),
            worst.map_or("-".into(), |w| w.to_string())
        ));
    }
    for line in summary {
        println!("{line}");
    }
    Ok(())
}
