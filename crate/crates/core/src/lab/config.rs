use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::learner::DEFAULT_SMOOTHING;
use crate::population::{PopulationFile, MAX_ENUMERATION_CELLS};

/// Distribution of `η(x)` for generated cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaDistribution {
    Uniform { low: f64, high: f64 },
    Beta { alpha: f64, beta: f64 },
}

impl Default for EtaDistribution {
    fn default() -> Self {
        EtaDistribution::Uniform { low: 0.02, high: 0.98 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `U[-magnitude, magnitude]`.
    #[default]
    Uniform,
    /// `N(0, magnitude²)`.
    Gaussian,
}

/// Additive noise on the Bayes scorer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub kind: NoiseKind,
    pub magnitude: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation { kind: NoiseKind::Uniform, magnitude: 1.0 }
    }
}

/// Where `θ̂` is tuned in the two-stage pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    /// Exact AMS on the population.
    #[default]
    Exact,
    /// Empirical AMS on a fresh validation sample of the training size.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rng_seed: u64,
    /// Trials for the fuzz runs; seeds per sample size for the pipeline and
    /// convergence runs.
    pub trials: usize,
    /// Inclusive range of generated cell counts.
    pub cell_count_range: [usize; 2],
    pub eta_distribution: EtaDistribution,
    /// Symmetric Dirichlet concentration of the cell masses.
    pub mass_concentration: f64,
    pub scorer_perturbation: Perturbation,
    pub b_reg: f64,
    pub sample_sizes: Vec<usize>,
    pub validation: ValidationMode,
    /// Pseudo-count of the plug-in learner.
    pub smoothing: f64,
    /// Use this population instead of generating one per trial.
    pub population: Option<PopulationFile>,
    /// Cell count of the generated convergence-study population.
    pub convergence_cells: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rng_seed: 42,
            trials: 1000,
            cell_count_range: [6, 12],
            eta_distribution: EtaDistribution::default(),
            mass_concentration: 1.0,
            scorer_perturbation: Perturbation::default(),
            b_reg: 0.0,
            sample_sizes: vec![100, 1_000, 10_000, 100_000],
            validation: ValidationMode::Exact,
            smoothing: DEFAULT_SMOOTHING,
            population: None,
            convergence_cells: 20_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(precondition("trials must be at least 1"));
        }
        let [lo, hi] = self.cell_count_range;
        if lo < 2 || hi > MAX_ENUMERATION_CELLS || lo > hi {
            return Err(precondition(format!(
                "cell_count_range [{lo}, {hi}] must lie within [2, {MAX_ENUMERATION_CELLS}]"
            )));
        }
        match self.eta_distribution {
            EtaDistribution::Uniform { low, high } => {
                if !(0.0 < low && low <= high && high < 1.0) {
                    return Err(precondition(format!(
                        "uniform eta range [{low}, {high}] must lie inside (0, 1)"
                    )));
                }
            }
            EtaDistribution::Beta { alpha, beta } => {
                if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return Err(precondition("beta parameters must be positive"));
                }
            }
        }
        if !(self.mass_concentration.is_finite() && self.mass_concentration > 0.0) {
            return Err(precondition("mass_concentration must be positive"));
        }
        let m = self.scorer_perturbation.magnitude;
        if !(m.is_finite() && m >= 0.0) {
            return Err(precondition("perturbation magnitude must be nonnegative"));
        }
        if !(self.b_reg.is_finite() && self.b_reg >= 0.0) {
            return Err(precondition("b_reg must be nonnegative"));
        }
        if self.sample_sizes.contains(&0) {
            return Err(precondition("sample sizes must be positive"));
        }
        if !(self.smoothing.is_finite() && self.smoothing >= 0.0) {
            return Err(precondition("smoothing must be nonnegative"));
        }
        if self.validation == ValidationMode::Empirical && self.b_reg == 0.0 {
            return Err(precondition(
                "empirical validation needs b_reg > 0: a cut with no background records has infinite AMS",
            ));
        }
        if self.convergence_cells < 1 {
            return Err(precondition("convergence_cells must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = ExperimentConfig::from_json(
            r#"{"trials": 5, "eta_distribution": {"kind": "beta", "alpha": 2, "beta": 3}}"#,
        )
        .unwrap();
        assert_eq!(c.trials, 5);
        assert_eq!(c.eta_distribution, EtaDistribution::Beta { alpha: 2.0, beta: 3.0 });
        assert_eq!(c.rng_seed, 42);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"trials": 0}"#,
            r#"{"cell_count_range": [1, 5]}"#,
            r#"{"cell_count_range": [2, 21]}"#,
            r#"{"cell_count_range": [8, 6]}"#,
            r#"{"b_reg": -1}"#,
            r#"{"validation": "empirical"}"#,
            r#"{"sample_sizes": [0, 10]}"#,
            r#"{"unknown_field": 1}"#,
        ] {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }
}
