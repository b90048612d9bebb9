//! Experiment runners behind the `amsopt` CLI.
//!
//! Every run is a pure function of its [`ExperimentConfig`]: trials derive
//! their own generators from `(rng_seed, trial)` and results are assembled
//! in trial order, so parallel execution does not change the output.

pub mod config;
pub mod experiments;
pub mod generate;
pub mod report;

pub use config::{EtaDistribution, ExperimentConfig, NoiseKind, Perturbation, ValidationMode};
pub use experiments::{
    check_intermediate_bound, reference_optimum, run_convergence_study, run_lemma1_fuzz,
    run_squared_error_transfer, run_surrogate_transfer, run_theorem1_pipeline, tuning_regret_study,
    ConvergencePoint, ConvergenceReport, IntermediateBoundCheck, RegretReport, RegretRun, RunSummary,
    TransferReport, TransferRun, BOUND_SLACK, DOMINANCE_SLACK,
};
pub use generate::{derive_seed, perturb, random_population, rng_for};
