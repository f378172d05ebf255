//! Synthetic digit features, sequence datasets and their text format.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::ops::RangeInclusive;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::logic::Term;
use crate::perception::Instance;

use super::task::TaskId;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error(
        "sorting sequences of length {len} need distinct digits, but only {classes} classes exist"
    )]
    TooLongForDistinct { len: usize, classes: usize },
    #[error("invalid length range {0:?}")]
    Lengths(RangeInclusive<usize>),
    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("idx: {0}")]
    Idx(String),
    #[error("class {0} has no instances to sample from")]
    EmptyClass(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Class prototypes plus Gaussian noise, clipped to `[0, 1]`.
#[derive(Clone, Debug)]
pub struct SyntheticDigitGen {
    pub classes: usize,
    pub dim: usize,
    pub sigma: f64,
    pub seed: u64,
    pub prototypes: Vec<Vec<f64>>,
}

impl SyntheticDigitGen {
    pub fn new(classes: usize, dim: usize, sigma: f64, seed: u64) -> SyntheticDigitGen {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_d161);
        let prototypes = (0..classes)
            .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
            .collect();
        SyntheticDigitGen {
            classes,
            dim,
            sigma,
            seed,
            prototypes,
        }
    }

    pub fn sample(&self, class: usize, rng: &mut impl Rng) -> Instance {
        let noise = Normal::new(0.0, self.sigma.max(0.0)).expect("finite sigma");
        self.prototypes[class]
            .iter()
            .map(|p| (p + noise.sample(rng)).clamp(0.0, 1.0))
            .collect()
    }
}

/// Where digit instances come from: the synthetic generator or pools of real
/// labeled instances (for example loaded from IDX files).
#[derive(Clone, Debug)]
pub enum DigitSource {
    Synthetic(SyntheticDigitGen),
    Pool(Vec<Vec<Instance>>),
}

impl DigitSource {
    pub fn classes(&self) -> usize {
        match self {
            DigitSource::Synthetic(g) => g.classes,
            DigitSource::Pool(p) => p.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DigitSource::Synthetic(g) => g.dim,
            DigitSource::Pool(p) => p.iter().flatten().next().map_or(0, |x| x.len()),
        }
    }

    pub fn from_labeled(items: Vec<(Instance, usize)>, classes: usize) -> DigitSource {
        let mut pools = vec![Vec::new(); classes];
        for (x, l) in items {
            if l < classes {
                pools[l].push(x);
            }
        }
        DigitSource::Pool(pools)
    }

    pub fn sample(&self, class: usize, rng: &mut impl Rng) -> Result<Instance, DataError> {
        match self {
            DigitSource::Synthetic(g) => Ok(g.sample(class, rng)),
            DigitSource::Pool(p) => p[class]
                .choose(rng)
                .cloned()
                .ok_or(DataError::EmptyClass(class)),
        }
    }

    /// `n` labeled instances with uniformly drawn classes.
    pub fn labeled(&self, n: usize, seed: u64) -> Result<Vec<(Instance, usize)>, DataError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let c = rng.random_range(0..self.classes());
                Ok((self.sample(c, &mut rng)?, c))
            })
            .collect()
    }

    /// One instance of each class.
    pub fn one_per_class(&self, seed: u64) -> Result<Vec<(Instance, usize)>, DataError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.classes())
            .map(|c| Ok((self.sample(c, &mut rng)?, c)))
            .collect()
    }
}

/// The observed output of an example.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Output {
    Int(i64),
    Ranks(Vec<i64>),
    Bool(bool),
}

impl Output {
    /// The output argument of the task goal; `None` for the sorted concept.
    pub fn goal_term(&self) -> Option<Term> {
        match self {
            Output::Int(v) => Some(Term::Int(*v)),
            Output::Ranks(r) => Some(Term::int_list(r)),
            Output::Bool(_) => None,
        }
    }

    pub fn is_positive(&self) -> bool {
        !matches!(self, Output::Bool(false))
    }
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Output::Int(v) => write!(f, "{v}"),
            Output::Ranks(r) => {
                let parts: Vec<String> = r.iter().map(i64::to_string).collect();
                write!(f, "[{}]", parts.join(","))
            }
            Output::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for Output {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "true" => return Ok(Output::Bool(true)),
            "false" => return Ok(Output::Bool(false)),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            if inner.is_empty() {
                return Ok(Output::Ranks(Vec::new()));
            }
            return inner
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<i64>()
                        .map_err(|e| format!("rank {p:?}: {e}"))
                })
                .collect::<Result<_, _>>()
                .map(Output::Ranks);
        }
        s.parse::<i64>()
            .map(Output::Int)
            .map_err(|e| format!("output {s:?}: {e}"))
    }
}

/// An input sequence with its output; `truth` holds the generating digits and
/// is used only for metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub input: Vec<Instance>,
    pub output: Output,
    pub truth: Option<Vec<i64>>,
}

#[derive(Clone, Debug)]
pub struct SequenceDataset {
    pub task: TaskId,
    pub lengths: RangeInclusive<usize>,
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

impl SequenceDataset {
    /// Feature width of the items, if there are any.
    pub fn dim(&self) -> Option<usize> {
        [&self.train, &self.val, &self.test]
            .into_iter()
            .flatten()
            .flat_map(|e| e.input.first())
            .map(Vec::len)
            .next()
    }
}

/// The first instance of each class among the items of `examples`, read off
/// their generating digits.
pub fn shots_from_examples(
    examples: &[Example],
    classes: usize,
) -> Result<Vec<(Instance, usize)>, DataError> {
    let mut shots: Vec<Option<Instance>> = vec![None; classes];
    for ex in examples {
        let Some(t) = &ex.truth else { continue };
        for (x, &d) in ex.input.iter().zip(t) {
            if let Some(slot) = usize::try_from(d).ok().and_then(|d| shots.get_mut(d)) {
                slot.get_or_insert_with(|| x.clone());
            }
        }
    }
    shots
        .into_iter()
        .enumerate()
        .map(|(c, x)| x.map(|x| (x, c)).ok_or(DataError::EmptyClass(c)))
        .collect()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Counts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Ranks from largest (1) to smallest.
pub fn ranks_descending(digits: &[i64]) -> Vec<i64> {
    digits
        .iter()
        .map(|x| 1 + digits.iter().filter(|y| *y > x).count() as i64)
        .collect()
}

fn is_sorted_descending(d: &[i64]) -> bool {
    d.windows(2).all(|w| w[0] > w[1])
}

/// Output of `task` on the digit sequence.
pub fn task_output(task: TaskId, digits: &[i64]) -> Output {
    match task {
        TaskId::Sum => Output::Int(digits.iter().sum()),
        TaskId::Product => Output::Int(digits.iter().product()),
        TaskId::SortedConcept => Output::Bool(is_sorted_descending(digits)),
        TaskId::Bogosort => Output::Ranks(ranks_descending(digits)),
    }
}

/// Digits for one example. Products avoid zero; sorting tasks use distinct
/// digits. The sorted concept yields sorted and unsorted sequences in equal
/// proportion, half of the unsorted ones starting with an ordered pair.
fn draw_digits(task: TaskId, k: usize, len: usize, idx: usize, rng: &mut impl Rng) -> Vec<i64> {
    match task {
        TaskId::Sum => (0..len).map(|_| rng.random_range(0..k as i64)).collect(),
        TaskId::Product => (0..len).map(|_| rng.random_range(1..k as i64)).collect(),
        TaskId::Bogosort => {
            let mut all: Vec<i64> = (0..k as i64).collect();
            all.shuffle(rng);
            all.truncate(len);
            all
        }
        TaskId::SortedConcept => {
            let mut all: Vec<i64> = (0..k as i64).collect();
            all.shuffle(rng);
            all.truncate(len);
            if idx.is_multiple_of(2) || len < 2 {
                all.sort_unstable_by(|a, b| b.cmp(a));
                return all;
            }
            let ordered_start = idx % 4 == 1 && len >= 3;
            loop {
                all.shuffle(rng);
                let good_start = all[0] > all[1];
                if !is_sorted_descending(&all) && (!ordered_start || good_start) {
                    return all;
                }
            }
        }
    }
}

fn gen_split(
    source: &DigitSource,
    task: TaskId,
    n: usize,
    lengths: &RangeInclusive<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Example>, DataError> {
    let k = source.classes();
    (0..n)
        .map(|i| {
            let len = rng.random_range(lengths.clone());
            let digits = draw_digits(task, k, len, i, rng);
            let input = digits
                .iter()
                .map(|&d| source.sample(d as usize, rng))
                .collect::<Result<_, _>>()?;
            Ok(Example {
                input,
                output: task_output(task, &digits),
                truth: Some(digits),
            })
        })
        .collect()
}

/// Seeded train/val/test splits of `task` sequences with lengths in
/// `lengths`.
pub fn gen_sequences(
    source: &DigitSource,
    task: TaskId,
    counts: Counts,
    lengths: RangeInclusive<usize>,
    seed: u64,
) -> Result<SequenceDataset, DataError> {
    if lengths.is_empty() || *lengths.start() == 0 {
        return Err(DataError::Lengths(lengths));
    }
    let k = source.classes();
    if matches!(task, TaskId::SortedConcept | TaskId::Bogosort) && *lengths.end() > k {
        return Err(DataError::TooLongForDistinct {
            len: *lengths.end(),
            classes: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = gen_split(source, task, counts.train, &lengths, &mut rng)?;
    let val = gen_split(source, task, counts.val, &lengths, &mut rng)?;
    let test = gen_split(source, task, counts.test, &lengths, &mut rng)?;
    Ok(SequenceDataset {
        task,
        lengths,
        train,
        val,
        test,
    })
}

/// Examples of one fixed length, e.g. for extrapolation tests.
pub fn gen_examples(
    source: &DigitSource,
    task: TaskId,
    n: usize,
    len: usize,
    seed: u64,
) -> Result<Vec<Example>, DataError> {
    if matches!(task, TaskId::SortedConcept | TaskId::Bogosort) && len > source.classes() {
        return Err(DataError::TooLongForDistinct {
            len,
            classes: source.classes(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_split(source, task, n, &(len..=len), &mut rng)
}

fn csv<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Write examples one per line:
/// `task<TAB>len<TAB>features;features;...<TAB>output<TAB>digits`, where the
/// last column holds the generating digits (or `-` if unknown).
pub fn write_examples(path: &Path, task: TaskId, examples: &[Example]) -> Result<(), DataError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for e in examples {
        let feats: Vec<String> = e.input.iter().map(|x| csv(x)).collect();
        let truth = e.truth.as_ref().map_or("-".to_string(), |t| csv(t));
        writeln!(
            out,
            "{task}\t{}\t{}\t{}\t{truth}",
            e.input.len(),
            feats.join(";"),
            e.output
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_examples(path: &Path) -> Result<(TaskId, Vec<Example>), DataError> {
    let name = path.display().to_string();
    let file = fs::File::open(path)?;
    let mut task = None;
    let mut examples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| DataError::Format {
            path: name.clone(),
            line: i + 1,
            msg,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 && cols.len() != 5 {
            return Err(err(format!(
                "expected 4 or 5 tab-separated columns, found {}",
                cols.len()
            )));
        }
        let t: TaskId = cols[0]
            .parse()
            .map_err(|e: super::task::UnknownTask| err(e.to_string()))?;
        if task.is_some_and(|prev| prev != t) {
            return Err(err("mixed tasks in one file".into()));
        }
        task = Some(t);
        let len: usize = cols[1].parse().map_err(|e| err(format!("length: {e}")))?;
        let input: Vec<Instance> = cols[2]
            .split(';')
            .map(|item| {
                item.split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<_, _>>()
            .map_err(|e| err(format!("features: {e}")))?;
        if input.len() != len {
            return Err(err(format!(
                "declared length {len}, found {} items",
                input.len()
            )));
        }
        let output: Output = cols[3].parse().map_err(err)?;
        let truth = match cols.get(4) {
            None | Some(&"-") => None,
            Some(s) => Some(
                s.split(',')
                    .map(|v| v.trim().parse::<i64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| err(format!("digits: {e}")))?,
            ),
        };
        examples.push(Example {
            input,
            output,
            truth,
        });
    }
    let task = task.ok_or_else(|| DataError::Format {
        path: name,
        line: 0,
        msg: "no examples".into(),
    })?;
    Ok((task, examples))
}

/// Write the non-empty splits as `train.tsv`, `val.tsv` and `test.tsv`.
pub fn write_dataset(dir: &Path, ds: &SequenceDataset) -> Result<(), DataError> {
    fs::create_dir_all(dir)?;
    for (name, split) in [
        ("train.tsv", &ds.train),
        ("val.tsv", &ds.val),
        ("test.tsv", &ds.test),
    ] {
        if !split.is_empty() {
            write_examples(&dir.join(name), ds.task, split)?;
        }
    }
    Ok(())
}
