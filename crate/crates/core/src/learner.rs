//! Scorers with small logistic regret: a plug-in log-odds estimator on
//! discrete cells and a linear logistic model on continuous features.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::numeric::{sigmoid, softplus, CompensatedSum};
use crate::population::{CellId, Scorer};
use crate::surrogate::Label;

pub const DEFAULT_SMOOTHING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record<T> {
    pub x: T,
    pub y: Label,
    pub weight: f64,
}

/// Labelled observations with nonnegative weights, at least one positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample<T> {
    records: Vec<Record<T>>,
}

impl<T> WeightedSample<T> {
    pub fn new(records: Vec<Record<T>>) -> Result<Self> {
        if let Some(r) = records.iter().find(|r| !(r.weight.is_finite() && r.weight >= 0.0)) {
            return Err(Error::Input(format!("invalid weight {}", r.weight)));
        }
        if !records.iter().any(|r| r.weight > 0.0) {
            return Err(Error::Input("sample has no positive weight".into()));
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[Record<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.records.iter().map(|r| r.weight).collect::<CompensatedSum>().value()
    }

    /// Copy of the sample with every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self>
    where
        T: Clone,
    {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(precondition(format!("scale factor must be positive, got {factor}")));
        }
        Self::new(
            self.records
                .iter()
                .map(|r| Record { x: r.x.clone(), y: r.y, weight: r.weight * factor })
                .collect(),
        )
    }
}

/// Per-cell smoothed log-odds of the weighted label frequencies.
///
/// `η̂ = (W+ + a) / (W+ + W- + 2a)` and the score is `ln(η̂ / (1 - η̂))`.
/// Every id in `cells` is scored; with `smoothing > 0` an unseen cell gets 0.
pub fn plugin_scorer(
    sample: &WeightedSample<CellId>,
    cells: impl IntoIterator<Item = CellId>,
    smoothing: f64,
) -> Result<Scorer> {
    if !(smoothing.is_finite() && smoothing >= 0.0) {
        return Err(precondition(format!("smoothing must be nonnegative, got {smoothing}")));
    }
    let mut counts: HashMap<CellId, (CompensatedSum, CompensatedSum)> = HashMap::new();
    for r in sample.records() {
        let entry = counts.entry(r.x).or_default();
        match r.y {
            Label::Positive => entry.0.add(r.weight),
            Label::Negative => entry.1.add(r.weight),
        }
    }
    let mut scores = Vec::new();
    for id in cells {
        let (pos, neg) = counts.get(&id).map(|(p, n)| (p.value(), n.value())).unwrap_or((0.0, 0.0));
        if smoothing == 0.0 {
            if pos + neg == 0.0 {
                return Err(Error::MissingCell(id));
            }
            if pos == 0.0 || neg == 0.0 {
                return Err(Error::InfiniteScore(id));
            }
        }
        scores.push((id, (pos + smoothing).ln() - (neg + smoothing).ln()));
    }
    Ok(Scorer::from_scores(scores))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearScorer {
    pub fn score(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coefficients.len());
        self.intercept + self.coefficients.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn dimension(&self) -> usize {
        self.coefficients.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Stop once the gradient norm is at most this value.
    pub tolerance: f64,
    /// L2 penalty on all parameters, intercept included.
    pub ridge: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { max_iterations: 10_000, tolerance: 1e-8, ridge: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub scorer: LinearScorer,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub final_loss: f64,
    /// Objective value before each iteration and after the last one.
    #[serde(skip)]
    pub loss_trace: Vec<f64>,
}

/// Weighted mean logistic loss plus ridge penalty, over parameters laid out
/// as `[coefficients..., intercept]`.
#[derive(Debug, Clone)]
pub struct LogisticObjective<'a> {
    sample: &'a WeightedSample<Vec<f64>>,
    total_weight: f64,
    ridge: f64,
    dimension: usize,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(sample: &'a WeightedSample<Vec<f64>>, ridge: f64) -> Result<Self> {
        let dimension = sample.records().first().map_or(0, |r| r.x.len());
        for r in sample.records() {
            if r.x.len() != dimension {
                return Err(Error::Input(format!(
                    "feature dimension mismatch: {} vs {dimension}",
                    r.x.len()
                )));
            }
            if r.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input("non-finite feature value".into()));
            }
        }
        if !(ridge.is_finite() && ridge >= 0.0) {
            return Err(precondition(format!("ridge must be nonnegative, got {ridge}")));
        }
        Ok(Self { sample, total_weight: sample.total_weight(), ridge, dimension })
    }

    pub fn parameter_count(&self) -> usize {
        self.dimension + 1
    }

    fn margin(&self, params: &[f64], r: &Record<Vec<f64>>) -> f64 {
        let z = params[self.dimension]
            + params[..self.dimension].iter().zip(&r.x).map(|(w, v)| w * v).sum::<f64>();
        r.y.value() * z
    }

    fn penalty(&self, params: &[f64]) -> f64 {
        0.5 * self.ridge * params.iter().map(|p| p * p).sum::<f64>()
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for r in self.sample.records() {
            acc.add(r.weight * softplus(-self.margin(params, r)));
        }
        acc.value() / self.total_weight + self.penalty(params)
    }

    pub fn value_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let mut loss = CompensatedSum::new();
        let mut grad = vec![0.0; self.parameter_count()];
        for r in self.sample.records() {
            let m = self.margin(params, r);
            loss.add(r.weight * softplus(-m));
            // d/dz softplus(-y z) = -y σ(-y z)
            let coef = -r.weight * r.y.value() * sigmoid(-m);
            for (g, v) in grad.iter_mut().zip(&r.x) {
                *g += coef * v;
            }
            grad[self.dimension] += coef;
        }
        for (g, p) in grad.iter_mut().zip(params) {
            *g = *g / self.total_weight + self.ridge * p;
        }
        (loss.value() / self.total_weight + self.penalty(params), grad)
    }

    /// Upper bound on the curvature of the objective.
    fn smoothness_bound(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for r in self.sample.records() {
            acc.add(r.weight * (1.0 + r.x.iter().map(|v| v * v).sum::<f64>()));
        }
        0.25 * acc.value() / self.total_weight + self.ridge
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Full-batch gradient descent with Armijo backtracking on the weighted
/// logistic objective, starting from zero.
///
/// Non-convergence (for example on separable data without ridge) is reported
/// through [`LinearFit::converged`], not as an error.
pub fn fit_linear_logistic(sample: &WeightedSample<Vec<f64>>, config: &FitConfig) -> Result<LinearFit> {
    if !(config.tolerance.is_finite() && config.tolerance > 0.0) {
        return Err(precondition("tolerance must be positive"));
    }
    let objective = LogisticObjective::new(sample, config.ridge)?;
    let max_step = 4.0 / objective.smoothness_bound();
    let mut params = vec![0.0; objective.parameter_count()];
    let (mut loss, mut grad) = objective.value_and_gradient(&params);
    let mut loss_trace = vec![loss];
    let mut step = max_step;
    let mut iterations = 0;
    let mut grad_norm = norm(&grad);

    while grad_norm > config.tolerance && iterations < config.max_iterations {
        let sq = grad_norm * grad_norm;
        let mut accepted = None;
        while step > f64::MIN_POSITIVE {
            let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let value = objective.value(&candidate);
            if value <= loss - 0.5 * step * sq {
                accepted = Some(candidate);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            // No decrease representable in floating point.
            break;
        };
        params = next;
        (loss, grad) = objective.value_and_gradient(&params);
        grad_norm = norm(&grad);
        loss_trace.push(loss);
        iterations += 1;
        step = (2.0 * step).min(max_step);
    }

    let dimension = objective.parameter_count() - 1;
    Ok(LinearFit {
        scorer: LinearScorer { intercept: params[dimension], coefficients: params[..dimension].to_vec() },
        converged: grad_norm <= config.tolerance,
        iterations,
        gradient_norm: grad_norm,
        final_loss: loss,
        loss_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{logistic_regret, Cell, DiscretePopulation};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cell_sample(records: &[(CellId, Label, f64)]) -> WeightedSample<CellId> {
        WeightedSample::new(records.iter().map(|&(x, y, weight)| Record { x, y, weight }).collect()).unwrap()
    }

    fn feature_sample(records: &[(Vec<f64>, Label, f64)]) -> WeightedSample<Vec<f64>> {
        WeightedSample::new(
            records.iter().map(|(x, y, w)| Record { x: x.clone(), y: *y, weight: *w }).collect(),
        )
        .unwrap()
    }

    use Label::{Negative as N, Positive as P};

    #[test]
    fn sample_validation() {
        assert!(WeightedSample::<CellId>::new(vec![]).is_err());
        assert!(WeightedSample::new(vec![Record { x: 1u64, y: P, weight: 0.0 }]).is_err());
        assert!(WeightedSample::new(vec![Record { x: 1u64, y: P, weight: -1.0 }]).is_err());
        assert!(WeightedSample::new(vec![Record { x: 1u64, y: P, weight: f64::NAN }]).is_err());
    }

    #[test]
    fn plugin_balanced_counts_score_zero() {
        let s = cell_sample(&[(1, P, 2.0), (1, N, 2.0)]);
        let f = plugin_scorer(&s, [1], 0.0).unwrap();
        assert_eq!(f.get(1), Some(0.0));
    }

    #[test]
    fn plugin_unsmoothed_log_odds() {
        let s = cell_sample(&[(1, P, 3.0), (1, N, 1.0)]);
        let f = plugin_scorer(&s, [1], 0.0).unwrap();
        assert_abs_diff_eq!(f.get(1).unwrap(), 1.098_612_288_668_109_7, epsilon = 1e-15);
    }

    #[test]
    fn plugin_errors_and_smoothing() {
        let s = cell_sample(&[(1, P, 3.0)]);
        assert!(matches!(plugin_scorer(&s, [1], 0.0), Err(Error::InfiniteScore(1))));
        assert!(matches!(plugin_scorer(&s, [2], 0.0), Err(Error::MissingCell(2))));
        let f = plugin_scorer(&s, [1, 2], DEFAULT_SMOOTHING).unwrap();
        assert_abs_diff_eq!(f.get(1).unwrap(), (3.5f64 / 0.5).ln(), epsilon = 1e-15);
        assert_eq!(f.get(2), Some(0.0));
        assert!(plugin_scorer(&s, [1], -1.0).is_err());
    }

    #[test]
    fn plugin_on_exact_counts_has_zero_regret() {
        let pop = DiscretePopulation::new(vec![
            Cell { id: 3, mass: 0.2, eta: 0.15 },
            Cell { id: 5, mass: 0.5, eta: 0.6 },
            Cell { id: 9, mass: 0.3, eta: 0.93 },
        ])
        .unwrap();
        let records: Vec<_> = pop
            .cells()
            .iter()
            .flat_map(|c| {
                [
                    Record { x: c.id, y: P, weight: c.mass * c.eta },
                    Record { x: c.id, y: N, weight: c.mass * (1.0 - c.eta) },
                ]
            })
            .collect();
        let f = plugin_scorer(&WeightedSample::new(records).unwrap(), pop.ids(), 0.0).unwrap();
        assert!(logistic_regret(&pop, &f).unwrap() < 1e-15);
    }

    #[test]
    fn all_positive_with_ridge_has_positive_finite_intercept() {
        let s = feature_sample(&[(vec![0.5], P, 1.0), (vec![-1.0], P, 1.0), (vec![2.0], P, 1.0)]);
        let fit = fit_linear_logistic(&s, &FitConfig { ridge: 0.1, ..Default::default() }).unwrap();
        assert!(fit.converged);
        assert!(fit.scorer.intercept > 0.0 && fit.scorer.intercept.is_finite());
    }

    #[test]
    fn symmetric_sample_has_zero_intercept() {
        let s = feature_sample(&[
            (vec![1.0], P, 1.0),
            (vec![-1.0], N, 1.0),
            (vec![1.0], P, 1.0),
            (vec![-1.0], N, 1.0),
        ]);
        let fit = fit_linear_logistic(&s, &FitConfig { ridge: 0.1, ..Default::default() }).unwrap();
        assert!(fit.converged);
        assert!(fit.scorer.intercept.abs() < 1e-9);
        assert!(fit.scorer.coefficients[0] > 0.0);
    }

    #[test]
    fn separable_without_ridge_reports_non_convergence() {
        let s = feature_sample(&[(vec![1.0], P, 1.0), (vec![-1.0], N, 1.0)]);
        let fit = fit_linear_logistic(&s, &FitConfig { max_iterations: 2000, ..Default::default() }).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 2000);
        assert!(fit.scorer.coefficients[0] > 1.0);
    }

    #[test]
    fn non_finite_features_are_rejected() {
        let s = feature_sample(&[(vec![f64::NAN], P, 1.0), (vec![1.0], N, 1.0)]);
        assert!(matches!(fit_linear_logistic(&s, &FitConfig::default()), Err(Error::Input(_))));
        let ragged = feature_sample(&[(vec![1.0, 2.0], P, 1.0), (vec![1.0], N, 1.0)]);
        assert!(fit_linear_logistic(&ragged, &FitConfig::default()).is_err());
    }

    fn noisy_sample(seed: u64, n: usize) -> WeightedSample<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = (0..n)
            .map(|_| {
                let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let p = sigmoid(0.8 * x[0] - 1.2 * x[1] + 0.3);
                let y = if rng.random::<f64>() < p { P } else { N };
                Record { x, y, weight: rng.random_range(0.5..2.0) }
            })
            .collect();
        WeightedSample::new(records).unwrap()
    }

    #[test]
    fn loss_is_non_increasing() {
        let s = noisy_sample(3, 500);
        let fit = fit_linear_logistic(&s, &FitConfig::default()).unwrap();
        assert!(fit.converged);
        for w in fit.loss_trace.windows(2) {
            assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = noisy_sample(4, 300);
        let obj = LogisticObjective::new(&s, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..10 {
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (_, grad) = obj.value_and_gradient(&p);
            for k in 0..3 {
                let mut up = p.clone();
                let mut down = p.clone();
                up[k] += h;
                down[k] -= h;
                let fd = (obj.value(&up) - obj.value(&down)) / (2.0 * h);
                let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs());
                assert!(rel < 1e-6, "coordinate {k}: {} vs {fd}", grad[k]);
            }
        }
    }

    #[test]
    fn weight_scaling_leaves_fit_unchanged() {
        let s = noisy_sample(5, 400);
        let a = fit_linear_logistic(&s, &FitConfig::default()).unwrap();
        let b = fit_linear_logistic(&s.scaled(37.5).unwrap(), &FitConfig::default()).unwrap();
        assert_abs_diff_eq!(a.scorer.intercept, b.scorer.intercept, epsilon = 1e-6);
        for (x, y) in a.scorer.coefficients.iter().zip(&b.scorer.coefficients) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-6);
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let s = noisy_sample(6, 200);
        let a = fit_linear_logistic(&s, &FitConfig::default()).unwrap();
        let b = fit_linear_logistic(&s, &FitConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
