//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use abil_core::em::EmConfig;
use abil_core::tasks::TaskId;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A training run: one stage per task, trained in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory receiving all artifacts.
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Scoring threads; defaults to the machine's core count.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(rename = "stage")]
    pub stages: Vec<StageConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub task: TaskId,
    /// Directory holding `train.tsv` and `val.tsv`.
    pub data: PathBuf,
    /// Start from the previous stage's model and call its program.
    #[serde(default)]
    pub reuse_previous: bool,
    #[serde(default)]
    pub em: EmConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if cfg.stages.is_empty() {
            return Err(CliError::Config(
                "at least one [[stage]] is required".into(),
            ));
        }
        if cfg.stages[0].reuse_previous {
            return Err(CliError::Config(
                "the first stage has nothing to reuse".into(),
            ));
        }
        // Relative data paths are taken from the config file's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut cfg.stages {
            if s.data.is_relative() {
                s.data = base.join(&s.data);
            }
        }
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    /// Push run-level settings into every stage.
    pub fn resolve(&mut self, workers: Option<usize>) {
        let workers = workers
            .or(self.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1);
        self.workers = Some(workers);
        for s in &mut self.stages {
            s.em.workers = workers;
            s.em.seed = self.seed;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let bad = "out = \"x\"\n[[stage]]\ntask = \"sum\"\ndata = \"d\"\nepochs = 3\n";
        assert!(toml::from_str::<RunConfig>(bad).is_err());
        let bad_em =
            "out = \"x\"\n[[stage]]\ntask = \"sum\"\ndata = \"d\"\n[stage.em]\nepoch = 3\n";
        assert!(toml::from_str::<RunConfig>(bad_em).is_err());
        let good = "out = \"x\"\n[[stage]]\ntask = \"sum\"\ndata = \"d\"\n[stage.em]\nepochs = 3\n";
        let cfg: RunConfig = toml::from_str(good).unwrap();
        assert_eq!(cfg.stages[0].em.epochs, 3);
        assert_eq!(cfg.stages[0].task, TaskId::Sum);
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = "out = \"x\"\nseed = 4\n[[stage]]\ntask = \"sorted_concept\"\ndata = \"a\"\n[[stage]]\ntask = \"bogosort\"\ndata = \"b\"\nreuse_previous = true\n";
        let mut cfg: RunConfig = toml::from_str(text).unwrap();
        cfg.resolve(Some(1));
        let again: RunConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert!(cfg
            .stages
            .iter()
            .all(|s| s.em.seed == 4 && s.em.workers == 1));
    }
}
