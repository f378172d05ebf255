//! Per-stage artifact directories.
//!
//! A stage directory holds `stage.toml` (task and model shape),
//! `program.pl` (the learned program), `background.pl` (programs reused
//! from earlier stages), `model.ckpt` and `metrics.csv`.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use abil_core::mil::{default_metarules, Program};
use abil_core::perception::{load_mlp, save_mlp, PairModel, PerceptionModel};
use abil_core::tasks::{make_task, TaskId, TaskSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageMeta {
    pub task: TaskId,
    /// Layer widths of the saved network.
    pub dims: Vec<usize>,
    /// Tasks whose programs `background.pl` holds, earliest first.
    #[serde(default)]
    pub reused: Vec<TaskId>,
}

pub fn stage_dir(out: &Path, index: usize, task: TaskId) -> PathBuf {
    out.join(format!("stage-{}-{}", index + 1, task))
}

/// A loaded stage: its task with reused programs installed, the program and
/// the model.
pub struct LoadedStage {
    pub meta: StageMeta,
    pub task: TaskSpec,
    pub program: Program,
    pub model: PerceptionModel,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Parse programs in `text`, one per reused task, separated by blank lines.
fn parse_background(text: &str, reused: &[TaskId]) -> Result<Vec<Program>, CliError> {
    let blocks: Vec<&str> = text
        .split("\n\n")
        .map(str::trim)
        .filter(|b| !b.is_empty())
        .collect();
    if blocks.len() != reused.len() {
        return Err(CliError::Data(format!(
            "background.pl holds {} programs, stage.toml lists {}",
            blocks.len(),
            reused.len()
        )));
    }
    let ms = default_metarules();
    blocks
        .iter()
        .zip(reused)
        .map(|(b, id)| {
            let target = make_task(*id).target.0;
            Program::from_text(b, &ms, target)
                .map_err(|e| CliError::Data(format!("background.pl: {e}")))
        })
        .collect()
}

pub fn save_stage(
    dir: &Path,
    task: TaskId,
    reused: &[(TaskId, Program)],
    program: &Program,
    model: &PerceptionModel,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let net = match model {
        PerceptionModel::Classifier(m) => m,
        PerceptionModel::Pair(p) => &p.net,
    };
    let meta = StageMeta {
        task,
        dims: net.dims().to_vec(),
        reused: reused.iter().map(|r| r.0).collect(),
    };
    fs::write(
        dir.join("stage.toml"),
        toml::to_string(&meta).map_err(|e| CliError::Other(e.to_string()))?,
    )?;
    fs::write(dir.join("program.pl"), program.pretty())?;
    let background: Vec<String> = reused.iter().map(|r| r.1.pretty()).collect();
    fs::write(dir.join("background.pl"), background.join("\n"))?;
    let mut f = std::io::BufWriter::new(fs::File::create(dir.join("model.ckpt"))?);
    save_mlp(net, &mut f).map_err(|e| CliError::Other(e.to_string()))?;
    Ok(())
}

pub fn load_stage(dir: &Path) -> Result<LoadedStage, CliError> {
    let meta: StageMeta = toml::from_str(&read(&dir.join("stage.toml"))?)
        .map_err(|e| CliError::Data(format!("{}/stage.toml: {e}", dir.display())))?;
    let mut task = make_task(meta.task);
    let background = read(&dir.join("background.pl"))?;
    for p in parse_background(&background, &meta.reused)? {
        task.reuse(&p)
            .map_err(|e| CliError::Data(format!("background.pl: {e}")))?;
    }
    let program = Program::from_text(
        &read(&dir.join("program.pl"))?,
        &default_metarules(),
        task.target.0,
    )
    .map_err(|e| CliError::Data(format!("program.pl: {e}")))?;
    let ckpt = dir.join("model.ckpt");
    let f =
        fs::File::open(&ckpt).map_err(|e| CliError::Data(format!("{}: {e}", ckpt.display())))?;
    let net = load_mlp(BufReader::new(f), Some(&meta.dims))
        .map_err(|e| CliError::Data(format!("{}: {e}", ckpt.display())))?;
    let model = match task.label_kind() {
        abil_core::tasks::LabelKind::Monadic => PerceptionModel::Classifier(net),
        abil_core::tasks::LabelKind::Dyadic => {
            if net.classes() != 2 || net.input_dim() % 2 != 0 {
                return Err(CliError::Data(format!(
                    "{}: not a pair model for task {}",
                    ckpt.display(),
                    meta.task
                )));
            }
            PerceptionModel::Pair(PairModel { net })
        }
    };
    Ok(LoadedStage {
        meta,
        task,
        program,
        model,
    })
}
