//! Training configuration.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Upper bound on induced program size; `None` uses the task default.
    pub max_clauses: Option<usize>,
    pub max_invented: usize,
    /// Metarule names to search with; empty means all.
    pub metarules: Vec<String>,
    pub pruning: bool,
    pub proof_steps: u64,
    pub solver_nodes: u64,
    /// Wall-clock limit per E-step.
    pub batch_seconds: Option<f64>,
    /// Per-example scoring threads.
    pub workers: usize,
    pub classes: usize,
    pub hidden: Vec<usize>,
    pub lr: f64,
    /// Multiplier applied to the learning rate after every epoch from
    /// `decay_from` on.
    pub lr_decay: f64,
    pub decay_from: usize,
    pub momentum: f64,
    /// Passes over each batch's pseudo-labels per M-step.
    pub m_epochs: usize,
    pub seed: u64,
    /// Fit on one labeled instance per class before the first epoch.
    pub pretrain: bool,
    pub pretrain_epochs: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            epochs: 3,
            batch_size: 32,
            max_clauses: None,
            max_invented: 1,
            metarules: Vec::new(),
            pruning: true,
            proof_steps: 2_000_000,
            solver_nodes: 1_000_000,
            batch_seconds: Some(30.0),
            workers: 1,
            classes: 10,
            hidden: vec![64],
            lr: 0.05,
            lr_decay: 1.0,
            decay_from: 0,
            momentum: 0.9,
            m_epochs: 1,
            seed: 0,
            pretrain: false,
            pretrain_epochs: 50,
        }
    }
}
