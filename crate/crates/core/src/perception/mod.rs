//! Perception models: a feed-forward softmax classifier over feature vectors
//! and an antisymmetric pairwise-relation wrapper around it.

mod checkpoint;
mod mlp;
mod pair;

pub use checkpoint::{load_mlp, save_mlp, CHECKPOINT_MAGIC};
pub use mlp::{FitConfig, Mlp};
pub use pair::PairModel;

/// Raw features of one perceived item.
pub type Instance = Vec<f64>;

#[derive(Debug, thiserror::Error)]
pub enum PerceptionError {
    #[error("instance has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("empty training batch")]
    EmptyBatch,
    #[error("loss became non-finite in epoch {epoch} (last finite loss {last_loss})")]
    NonFiniteLoss { epoch: usize, last_loss: f64 },
    #[error("few-shot set must hold exactly one instance of each class; class {0} has {1}")]
    FewShotClass(usize, usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Class probabilities for one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelDistribution {
    pub probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn log_probs(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.ln()).collect()
    }
}

/// Instances with integer labels and optional per-instance weights.
#[derive(Clone, Debug, Default)]
pub struct TrainBatch {
    pub instances: Vec<Instance>,
    pub labels: Vec<usize>,
    pub weights: Option<Vec<f64>>,
}

impl TrainBatch {
    pub fn new(instances: Vec<Instance>, labels: Vec<usize>) -> TrainBatch {
        TrainBatch {
            instances,
            labels,
            weights: None,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }
}

/// Fit on one labeled instance per class.
pub fn pretrain_few_shot(
    model: &mut Mlp,
    shots: &[(Instance, usize)],
    epochs: usize,
    lr: f64,
) -> Result<f64, PerceptionError> {
    let k = model.classes();
    let mut counts = vec![0usize; k];
    for (_, l) in shots {
        if *l >= k {
            return Err(PerceptionError::LabelOutOfRange {
                label: *l,
                classes: k,
            });
        }
        counts[*l] += 1;
    }
    if let Some((c, n)) = counts.iter().enumerate().find(|(_, n)| **n != 1) {
        return Err(PerceptionError::FewShotClass(c, *n));
    }
    let batch = TrainBatch::new(
        shots.iter().map(|s| s.0.clone()).collect(),
        shots.iter().map(|s| s.1).collect(),
    );
    model.fit(&batch, epochs, lr)
}

/// The perception model a task trains: a per-item classifier or a pairwise
/// relation model.
#[derive(Clone, Debug)]
pub enum PerceptionModel {
    Classifier(Mlp),
    Pair(PairModel),
}

impl PerceptionModel {
    /// Abducible probabilities for the items of one example.
    pub fn facts(&self, items: &[Instance]) -> Result<crate::mil::Facts, PerceptionError> {
        match self {
            PerceptionModel::Classifier(m) => {
                let rows = items
                    .iter()
                    .map(|x| m.log_probs(x))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(crate::mil::Facts::Monadic(rows))
            }
            PerceptionModel::Pair(m) => Ok(crate::mil::Facts::Dyadic(m.pair_matrix(items)?)),
        }
    }

    pub fn classifier(&self) -> Option<&Mlp> {
        match self {
            PerceptionModel::Classifier(m) => Some(m),
            PerceptionModel::Pair(_) => None,
        }
    }

    pub fn pair(&self) -> Option<&PairModel> {
        match self {
            PerceptionModel::Pair(m) => Some(m),
            PerceptionModel::Classifier(_) => None,
        }
    }
}
