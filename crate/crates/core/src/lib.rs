//! Consistent optimization of the approximate median significance (AMS).
//!
//! Learn a real-valued scorer by minimizing a surrogate loss, then tune a
//! threshold on it by maximizing AMS. This crate computes every quantity
//! involved exactly on finite discrete populations: rates, AMS regret,
//! surrogate regret, cost-sensitive regret, and the constants that bound
//! one by the other. It also runs randomized experiments that check the
//! bounds, and provides brute-force oracles.
//!
//! Modules:
//! - [`metric`]: AMS, AMS² and its gradient, plus the general metric contract.
//! - [`surrogate`]: logistic and squared-error losses, cost-sensitive loss,
//!   threshold maps.
//! - [`population`]: discrete populations, exact rates and regrets, the
//!   brute-force optimum.
//! - [`learner`]: plug-in and linear logistic scorers.
//! - [`threshold`]: exact and empirical threshold sweeps, sampling.
//! - [`lab`]: experiment runners and report formats used by the CLI.

pub mod error;
pub mod io;
pub mod lab;
pub mod learner;
pub mod metric;
pub mod numeric;
pub mod population;
pub mod surrogate;
pub mod threshold;

pub use error::{Error, Result};
pub use learner::{fit_linear_logistic, plugin_scorer, FitConfig, LinearScorer, Record, WeightedSample};
pub use metric::{ams, ams_squared, ams_squared_gradient, check_metric_contract, AmsSquared, Metric, Rates};
pub use population::{
    ams_regret, brute_force_ams_optimum, cost_sensitive_regret, expected_logistic_loss, logistic_regret,
    rates, threshold_classifier, BoundConstants, Cell, CellId, Classifier, DiscretePopulation, Optimum,
    PopulationFile, Scorer,
};
pub use surrogate::{CostParameter, Label, Logistic, SquaredError, Surrogate};
pub use threshold::{
    draw_sample, empirical_threshold_sweep, exact_threshold_sweep, ScoredRecord, ThresholdSweepResult,
};
