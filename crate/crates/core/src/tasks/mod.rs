//! Tasks, datasets and evaluation.

pub mod data;
pub mod eval;
pub mod idx;
pub mod task;

pub use data::{
    gen_examples, gen_sequences, ranks_descending, read_examples, shots_from_examples, task_output,
    write_dataset, write_examples, Counts, DataError, DigitSource, Example, Output,
    SequenceDataset, SyntheticDigitGen,
};
pub use eval::{evaluate, evaluate_with, EvalError, LabelSource, Metrics};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use task::{make_task, LabelKind, TaskId, TaskSpec, UnknownTask, LIST_BK, PERMUTE_BK};
