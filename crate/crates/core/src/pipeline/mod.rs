//! The two-stage reconstruction: log preprocessing, the coupled
//! low-resolution problem, high-resolution refinement, and display.

mod config;
mod display;
mod highres;
mod lowres;
mod preprocess;
mod two_stage;

pub use config::{CoupledProblemConfig, DisplayConfig, SolverParams, TikhonovConfig};
pub use display::{
    compose_display, depth_blur, estimate_background, form_display, Background, DisplayResult,
};
pub use highres::{reconstruct_highres, HighresResult, TikhonovProblem};
pub use lowres::{
    build_coupled_problem, dtv_operators, reconstruct_lowres, LowresResult, BLOCK_NAMES,
};
pub use preprocess::{preprocess_transmission, LOG_FLOOR};
pub use two_stage::{run_two_stage, Stage, TwoStageOptions, TwoStageOutput};
