//! Command-line front end: run configuration, training runs, evaluation,
//! the theory lab and the gradient-check suite.

mod commands;
mod config;
mod gradcheck;
mod lab;

pub use commands::{
    build_learner, evaluate_checkpoint, exit_code, train, TrainOutcome, CHECKPOINT_DIR,
    CONFIG_FILE, EXIT_BUDGET, EXIT_CONFIG, EXIT_FAILURE, EXIT_NON_FINITE, EXIT_OK, EXIT_VERSION,
    FINAL_CHECKPOINT, FINAL_EVAL_FILE, METRICS_FILE,
};
pub use config::{LabConfig, RunConfig, MAX_EXHAUSTIVE_BUDGET};
pub use gradcheck::{
    probe_learner, random_transitions, run_gradcheck, GradcheckOptions, GradcheckSuite,
    NetworkCheck,
};
pub use lab::{envelope_fuzz, run_lab, EnvelopeCase, EnvelopeReport, LabOutcome};
