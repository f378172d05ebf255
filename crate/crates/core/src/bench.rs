//! Search-cost instrumentation: abduction order and metarule-set size.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rustc_hash::FxHashMap;

use crate::mil::{
    induce, select_metarules, Budget, Facts, MetaruleError, ProveError, Query, DEFAULT_METARULES,
};
use crate::perception::{PerceptionError, PerceptionModel};
use crate::tasks::{Example, TaskSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Prove(#[from] ProveError),
    #[error(transparent)]
    Metarules(#[from] MetaruleError),
    #[error("abduction bench needs a classifier model")]
    ModelKind,
}

/// Cost of explaining one batch in both orders.
#[derive(Clone, Debug, PartialEq)]
pub struct AbductionCost {
    /// Complete labelings evaluated when programs are induced first and
    /// labels abduced under them.
    pub h_to_z_labelings: u64,
    pub h_to_z_nodes: u64,
    pub h_to_z_secs: f64,
    /// Joint labelings tried, most probable first, before one admits a
    /// program. A lower bound when `z_to_h_capped` is set.
    pub z_to_h_labelings: u64,
    pub z_to_h_capped: bool,
    pub z_to_h_nodes: u64,
    pub z_to_h_secs: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct Ranked {
    log_prob: f64,
    ranks: Vec<usize>,
}

impl Eq for Ranked {}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_prob
            .total_cmp(&other.log_prob)
            .then_with(|| other.ranks.cmp(&self.ranks))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Joint assignments of independent categorical items in non-increasing
/// probability. Each rank vector's parent decrements its last nonzero
/// coordinate, so every vector is produced exactly once.
pub struct BestFirst {
    /// Per item: `(log_prob, value)` sorted by decreasing probability.
    sorted: Vec<Vec<(f64, i64)>>,
    heap: BinaryHeap<Ranked>,
}

impl BestFirst {
    pub fn new(log_probs: &[Vec<f64>]) -> BestFirst {
        let sorted: Vec<Vec<(f64, i64)>> = log_probs
            .iter()
            .map(|row| {
                let mut r: Vec<(f64, i64)> = row
                    .iter()
                    .enumerate()
                    .map(|(v, &lp)| (lp, v as i64))
                    .collect();
                r.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                r
            })
            .collect();
        let mut heap = BinaryHeap::new();
        if sorted.iter().all(|r| !r.is_empty()) {
            let ranks = vec![0; sorted.len()];
            heap.push(Ranked {
                log_prob: sorted.iter().map(|r| r[0].0).sum(),
                ranks,
            });
        }
        BestFirst { sorted, heap }
    }
}

impl Iterator for BestFirst {
    /// Values and joint log-probability.
    type Item = (Vec<i64>, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let top = self.heap.pop()?;
        let last = top.ranks.iter().rposition(|&r| r > 0).unwrap_or(0);
        for i in last..top.ranks.len() {
            let r = top.ranks[i];
            if r + 1 < self.sorted[i].len() {
                let mut ranks = top.ranks.clone();
                ranks[i] = r + 1;
                let log_prob = top.log_prob - self.sorted[i][r].0 + self.sorted[i][r + 1].0;
                self.heap.push(Ranked { log_prob, ranks });
            }
        }
        let values = top
            .ranks
            .iter()
            .zip(&self.sorted)
            .map(|(&r, s)| s[r].1)
            .collect();
        Some((values, top.log_prob))
    }
}

fn queries(task: &TaskSpec, batch: &[Example]) -> Vec<Query> {
    batch
        .iter()
        .map(|ex| Query {
            goal: task.goal(ex.input.len(), ex.output.goal_term()),
            positive: ex.output.is_positive(),
        })
        .collect()
}

/// Explain `batch` under `model` by inducing first and by labeling first.
/// The labeling-first search stops at the first joint labeling that admits
/// a program, or after `cap` labelings. A joint labeling is rejected early
/// if one example's labels admit no program on their own; these per-example
/// verdicts are memoized.
pub fn bench_abduction(
    task: &TaskSpec,
    model: &PerceptionModel,
    batch: &[Example],
    budget: &Budget,
    cap: u64,
) -> Result<AbductionCost, BenchError> {
    let classifier = model.classifier().ok_or(BenchError::ModelKind)?;
    let qs = queries(task, batch);
    let facts: Vec<Facts> = batch
        .iter()
        .map(|ex| model.facts(&ex.input))
        .collect::<Result<_, _>>()?;

    let t = Instant::now();
    let hz = induce(&task.background, task.target, &qs, &facts, budget)?;
    let h_to_z_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut rows = Vec::new();
    for ex in batch {
        for x in &ex.input {
            rows.push(classifier.log_probs(x)?);
        }
    }
    let (mut tried, mut nodes, mut found) = (0u64, 0u64, false);
    let mut memo: FxHashMap<(usize, Vec<i64>), bool> = FxHashMap::default();
    for (values, _) in BestFirst::new(&rows) {
        if tried >= cap {
            break;
        }
        tried += 1;
        let mut offset = 0;
        let labels: Vec<Facts> = batch
            .iter()
            .map(|ex| {
                let n = ex.input.len();
                offset += n;
                Facts::Labels(values[offset - n..offset].to_vec())
            })
            .collect();
        let mut alone = true;
        for (i, f) in labels.iter().enumerate() {
            let Facts::Labels(z) = f else { unreachable!() };
            let key = (i, z.clone());
            let ok = match memo.get(&key) {
                Some(&ok) => ok,
                None => {
                    let one = induce(
                        &task.background,
                        task.target,
                        &qs[i..=i],
                        std::slice::from_ref(f),
                        budget,
                    )?;
                    nodes += one.stats.nodes();
                    memo.insert(key, one.best.is_some());
                    one.best.is_some()
                }
            };
            if !ok {
                alone = false;
                break;
            }
        }
        if !alone {
            continue;
        }
        let zh = induce(&task.background, task.target, &qs, &labels, budget)?;
        nodes += zh.stats.nodes();
        if zh.best.is_some() {
            found = true;
            break;
        }
    }
    Ok(AbductionCost {
        h_to_z_labelings: hz.stats.labelings,
        h_to_z_nodes: hz.stats.nodes(),
        h_to_z_secs,
        z_to_h_labelings: tried,
        z_to_h_capped: !found,
        z_to_h_nodes: nodes,
        z_to_h_secs: t.elapsed().as_secs_f64(),
    })
}

/// Induction cost with one metarule subset.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaruleCost {
    pub metarules: Vec<String>,
    pub nodes: u64,
    pub secs: f64,
    /// The induced program, or `None` if the subset cannot express one
    /// within budget.
    pub program: Option<String>,
}

/// Induce from `facts`-annotated queries with each metarule subset.
pub fn bench_metarules(
    task: &TaskSpec,
    queries: &[Query],
    facts: &[Facts],
    subsets: &[Vec<String>],
    budget: &Budget,
) -> Result<Vec<MetaruleCost>, BenchError> {
    let mut out = Vec::with_capacity(subsets.len());
    for names in subsets {
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut bg = task.background.clone();
        bg.metarules = select_metarules(&refs)?;
        let t = Instant::now();
        let res = induce(&bg, task.target, queries, facts, budget)?;
        out.push(MetaruleCost {
            metarules: names.clone(),
            nodes: res.stats.nodes(),
            secs: t.elapsed().as_secs_f64(),
            program: res.best.map(|b| b.program.pretty()),
        });
    }
    Ok(out)
}

/// Names of the default metarules, in library order.
pub fn metarule_names() -> Vec<String> {
    DEFAULT_METARULES
        .lines()
        .filter_map(|l| {
            l.strip_prefix("metarule(")?
                .split(',')
                .next()
                .map(|s| s.trim().to_string())
        })
        .collect()
}

/// Every `k`-subset of the default library that contains all of `required`,
/// in lexicographic order of library positions.
pub fn subsets_with(k: usize, required: &[&str]) -> Vec<Vec<String>> {
    let names = metarule_names();
    let mut out = Vec::new();
    let mut pick: Vec<usize> = Vec::with_capacity(k);
    fn rec(
        start: usize,
        k: usize,
        names: &[String],
        pick: &mut Vec<usize>,
        out: &mut Vec<Vec<String>>,
    ) {
        if pick.len() == k {
            out.push(pick.iter().map(|&i| names[i].clone()).collect());
            return;
        }
        for i in start..names.len() {
            pick.push(i);
            rec(i + 1, k, names, pick, out);
            pick.pop();
        }
    }
    rec(0, k, &names, &mut pick, &mut out);
    out.retain(|s| required.iter().all(|r| s.iter().any(|n| n == r)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_first_matches_sorted_product() {
        let rows = vec![
            vec![0.5f64.ln(), 0.3f64.ln(), 0.2f64.ln()],
            vec![0.6f64.ln(), 0.4f64.ln()],
            vec![0.9f64.ln(), 0.1f64.ln()],
        ];
        let got: Vec<f64> = BestFirst::new(&rows).map(|(_, lp)| lp).collect();
        let mut all = Vec::new();
        for a in &rows[0] {
            for b in &rows[1] {
                for c in &rows[2] {
                    all.push(a + b + c);
                }
            }
        }
        all.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(got.len(), 12);
        for (g, w) in got.iter().zip(&all) {
            assert!((g - w).abs() < 1e-12);
        }
        let distinct: rustc_hash::FxHashSet<Vec<i64>> =
            BestFirst::new(&rows).map(|(v, _)| v).collect();
        assert_eq!(distinct.len(), 12);
    }

    #[test]
    fn subsets_contain_required() {
        assert_eq!(metarule_names().len(), 9);
        assert_eq!(subsets_with(2, &["chain", "ident"]).len(), 1);
        assert_eq!(subsets_with(3, &["chain", "ident"]).len(), 7);
        assert_eq!(subsets_with(9, &[]).len(), 1);
        assert_eq!(subsets_with(2, &[]).len(), 36);
    }
}
