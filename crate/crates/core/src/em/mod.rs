//! Hard expectation-maximisation over programs, pseudo-labels and perception
//! parameters.

mod config;
mod curriculum;
mod trainer;

pub use config::EmConfig;
pub use curriculum::{prepare_stage, run_curriculum, Stage};
pub use trainer::{
    e_step, epochs_to_plateau, m_step, new_model, perception_accuracy, train, EStep, EmError,
    EmState, MetricsRow, METRICS_HEADER,
};
