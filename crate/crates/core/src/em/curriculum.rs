//! Sequential training stages that reuse earlier programs and models.

use crate::tasks::{SequenceDataset, TaskSpec};

use super::trainer::{new_model, train, EmError, EmState};
use super::EmConfig;

/// One stage: a task, its training settings, and whether it builds on the
/// previous stage's program (installed as interpreted background) and model.
#[derive(Clone, Debug)]
pub struct Stage {
    pub task: TaskSpec,
    pub config: EmConfig,
    pub reuse_previous: bool,
}

/// The task and starting state for `stage`, given the previous stage's
/// result. Items have `dim` features.
pub fn prepare_stage(
    stage: &Stage,
    prev: Option<&EmState>,
    dim: usize,
) -> Result<(TaskSpec, EmState), EmError> {
    let mut task = stage.task.clone();
    let state = match (stage.reuse_previous, prev) {
        (true, Some(prev)) => {
            if let Some(program) = prev.program() {
                task.reuse(program)?;
            }
            EmState::new(prev.model.clone(), stage.config.lr)
        }
        _ => EmState::new(new_model(&task, dim, &stage.config), stage.config.lr),
    };
    Ok((task, state))
}

/// Train each stage in order on the matching dataset.
pub fn run_curriculum(
    stages: &[Stage],
    datasets: &[SequenceDataset],
) -> Result<Vec<EmState>, EmError> {
    let mut done: Vec<EmState> = Vec::new();
    for (stage, data) in stages.iter().zip(datasets) {
        let (task, state) = prepare_stage(stage, done.last(), data.dim().unwrap_or(0))?;
        let trained = train(&stage.config, &task, data, state, None, None)?;
        done.push(trained);
    }
    Ok(done)
}
