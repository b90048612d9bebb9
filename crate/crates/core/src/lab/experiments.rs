use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::learner::plugin_scorer;
use crate::metric::ams_squared;
use crate::numeric::{median, ols_slope, quantile};
use crate::population::{
    ams_regret, brute_force_ams_optimum, cost_sensitive_regret, logistic_regret, surrogate_regret,
    threshold_classifier, DiscretePopulation, Optimum, Scorer, MAX_ENUMERATION_CELLS,
};
use crate::surrogate::{Surrogate, SurrogateKind};
use crate::threshold::{
    draw_sample_with, empirical_threshold_sweep, eta_sweep_optimum, exact_threshold_sweep, score_sample,
};

use super::config::{ExperimentConfig, ValidationMode};
use super::generate::{perturb, random_population, rng_for};

/// Slack on every asserted bound.
pub const BOUND_SLACK: f64 = 1e-9;
/// Slack on `R_AMS(θ̂) <= R_AMS(θ*)` under an exact sweep.
pub const DOMINANCE_SLACK: f64 = 1e-12;

// Stream tags for seed derivation.
const TAG_POPULATION: u64 = 1;
const TAG_SCORER: u64 = 2;
const TAG_TRAIN: u64 = 3;
const TAG_VALID: u64 = 4;

/// One trial of the universal-threshold fuzz or the two-stage pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub trial: usize,
    pub population_id: String,
    pub scorer_id: String,
    pub n_train: Option<usize>,
    pub m_valid: Option<usize>,
    pub r_log: f64,
    pub r_ams_at_theta_hat: f64,
    pub r_ams_at_theta_star: f64,
    /// `(s*/b*) sqrt(R_log / 2)`.
    pub bound_paper: f64,
    /// `(2 s*/b*) sqrt(R_log / 2)`.
    pub bound_gradient: f64,
    pub holds_paper: bool,
    pub holds_gradient: bool,
    pub theta_star: f64,
    pub theta_hat: f64,
}

impl RegretReport {
    pub fn regrets_nonnegative(&self) -> bool {
        self.r_log >= 0.0 && self.r_ams_at_theta_hat >= 0.0 && self.r_ams_at_theta_star >= 0.0
    }

    pub fn theta_hat_dominates(&self) -> bool {
        self.r_ams_at_theta_hat <= self.r_ams_at_theta_star + DOMINANCE_SLACK
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub trials: usize,
    pub evaluated: usize,
    pub skipped_degenerate: usize,
    pub holds_gradient: usize,
    pub holds_paper: usize,
    pub gradient_hold_rate: f64,
    pub paper_hold_rate: f64,
    pub dominance_violations: usize,
    pub negative_regrets: usize,
    /// Whether the bound and dominance checks are release-blocking for this run.
    pub bounds_asserted: bool,
    pub asserted_failures: usize,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.asserted_failures == 0
    }

    fn from_reports(trials: usize, skipped: usize, reports: &[RegretReport], bounds_asserted: bool) -> Self {
        let evaluated = reports.len();
        let rate = |k: usize| if evaluated == 0 { 0.0 } else { k as f64 / evaluated as f64 };
        let holds_gradient = reports.iter().filter(|r| r.holds_gradient).count();
        let holds_paper = reports.iter().filter(|r| r.holds_paper).count();
        let dominance_violations = reports.iter().filter(|r| !r.theta_hat_dominates()).count();
        let negative_regrets = reports.iter().filter(|r| !r.regrets_nonnegative()).count();
        let mut asserted_failures = negative_regrets;
        if bounds_asserted {
            asserted_failures += evaluated - holds_gradient + dominance_violations;
        }
        Self {
            trials,
            evaluated,
            skipped_degenerate: skipped,
            holds_gradient,
            holds_paper,
            gradient_hold_rate: rate(holds_gradient),
            paper_hold_rate: rate(holds_paper),
            dominance_violations,
            negative_regrets,
            bounds_asserted,
            asserted_failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRun {
    pub reports: Vec<RegretReport>,
    pub summary: RunSummary,
}

/// The optimum used as the reference for regrets: enumeration when the
/// population is small enough, otherwise the `η`-threshold sweep.
pub fn reference_optimum(pop: &DiscretePopulation, b_reg: f64) -> Result<Optimum> {
    if pop.len() <= MAX_ENUMERATION_CELLS {
        brute_force_ams_optimum(pop, b_reg)
    } else {
        eta_sweep_optimum(pop, b_reg)
    }
}

/// Errors that mean "skip this trial" rather than "abort the run".
fn is_degenerate(e: &Error) -> bool {
    matches!(e, Error::DegenerateOptimum { .. } | Error::InfiniteAms { .. })
}

fn population_for(config: &ExperimentConfig, trial: usize) -> Result<(DiscretePopulation, String)> {
    if let Some(file) = &config.population {
        let (pop, _) = file.clone().into_population()?;
        return Ok((pop, "fixed".into()));
    }
    let mut rng = rng_for(config.rng_seed, &[TAG_POPULATION, trial as u64]);
    let [lo, hi] = config.cell_count_range;
    let cells = rng.random_range(lo..=hi);
    let pop = random_population(&mut rng, cells, config.eta_distribution, config.mass_concentration)?;
    Ok((pop, format!("gen-{}-{trial}", config.rng_seed)))
}

fn perturbed_minimizer(
    config: &ExperimentConfig,
    trial: usize,
    pop: &DiscretePopulation,
    surrogate: &dyn Surrogate,
) -> Result<(Scorer, String)> {
    let base = Scorer::from_fn(pop, |c| surrogate.conditional_minimizer(c.eta));
    let mut rng = rng_for(config.rng_seed, &[TAG_SCORER, trial as u64]);
    let noise = config.scorer_perturbation;
    let f = perturb(&mut rng, pop, &base, noise)?;
    let id = format!("{}+{:?}({})", surrogate.name(), noise.kind, noise.magnitude).to_lowercase();
    Ok((f, id))
}

struct Evaluation {
    r_log: f64,
    r_hat: f64,
    r_star: f64,
    bound_paper: f64,
    bound_gradient: f64,
    theta_star: f64,
}

/// Exact regrets of `f` at `θ̂` and at `θ*`, and both bounds.
fn evaluate(pop: &DiscretePopulation, f: &Scorer, opt: &Optimum, theta_hat: f64) -> Result<Evaluation> {
    let k = opt.constants()?;
    let r_log = logistic_regret(pop, f)?;
    let r_hat = ams_regret(pop, &threshold_classifier(f, theta_hat), opt)?;
    let r_star = ams_regret(pop, &threshold_classifier(f, k.theta_star), opt)?;
    let root = (r_log / 2.0).sqrt();
    Ok(Evaluation {
        r_log,
        r_hat,
        r_star,
        bound_paper: k.c_paper * root,
        bound_gradient: k.c_gradient * root,
        theta_star: k.theta_star,
    })
}

/// Runs `trial` for each index in parallel, keeping index order; degenerate
/// trials come back as `None`.
fn run_trials<T: Send>(count: usize, trial: impl Fn(usize) -> Result<T> + Sync) -> Result<(Vec<T>, usize)> {
    let outcomes: Vec<Result<Option<T>>> = (0..count)
        .into_par_iter()
        .map(|i| match trial(i) {
            Ok(t) => Ok(Some(t)),
            Err(e) if is_degenerate(&e) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut kept = Vec::with_capacity(count);
    let mut skipped = 0;
    for o in outcomes {
        match o? {
            Some(t) => kept.push(t),
            None => skipped += 1,
        }
    }
    Ok((kept, skipped))
}

/// Random populations and perturbed log-odds scorers, checked against the
/// bound at the universal threshold `θ*`. Only the gradient constant is
/// asserted; the `s*/b*` variant is recorded.
pub fn run_lemma1_fuzz(config: &ExperimentConfig) -> Result<RegretRun> {
    config.validate()?;
    let (reports, skipped) = run_trials(config.trials, |trial| {
        let (pop, population_id) = population_for(config, trial)?;
        let opt = reference_optimum(&pop, config.b_reg)?;
        opt.constants()?;
        let (f, scorer_id) = perturbed_minimizer(config, trial, &pop, &crate::surrogate::Logistic)?;
        let theta_hat = exact_threshold_sweep(&pop, &f, config.b_reg)?.best_theta;
        let e = evaluate(&pop, &f, &opt, theta_hat)?;
        Ok(RegretReport {
            trial,
            population_id,
            scorer_id,
            n_train: None,
            m_valid: None,
            r_log: e.r_log,
            r_ams_at_theta_hat: e.r_hat,
            r_ams_at_theta_star: e.r_star,
            bound_paper: e.bound_paper,
            bound_gradient: e.bound_gradient,
            holds_paper: e.r_star <= e.bound_paper + BOUND_SLACK,
            holds_gradient: e.r_star <= e.bound_gradient + BOUND_SLACK,
            theta_star: e.theta_star,
            theta_hat,
        })
    })?;
    let summary = RunSummary::from_reports(config.trials, skipped, &reports, true);
    Ok(RegretRun { reports, summary })
}

/// Two-stage procedure: plug-in logistic scorer on a training sample of
/// each size, then `θ̂` by maximizing AMS (exactly, or on a validation
/// sample of the same size). Regrets are exact; the bounds are checked at
/// `θ̂`. Under empirical validation nothing is asserted, since `θ̂` then
/// only approximates the population argmax.
pub fn run_theorem1_pipeline(config: &ExperimentConfig) -> Result<RegretRun> {
    config.validate()?;
    if config.sample_sizes.is_empty() {
        return Err(precondition("the pipeline needs at least one sample size"));
    }
    let sizes = &config.sample_sizes;
    let jobs = config.trials * sizes.len();
    let (reports, skipped) = run_trials(jobs, |job| {
        let (trial, n) = (job / sizes.len(), sizes[job % sizes.len()]);
        let (pop, population_id) = population_for(config, trial)?;
        let opt = reference_optimum(&pop, config.b_reg)?;
        opt.constants()?;

        let mut rng = rng_for(config.rng_seed, &[TAG_TRAIN, trial as u64, n as u64]);
        let train = draw_sample_with(&pop, n, &mut rng)?;
        let f = plugin_scorer(&train, pop.ids(), config.smoothing)?;

        let (theta_hat, m_valid) = match config.validation {
            ValidationMode::Exact => (exact_threshold_sweep(&pop, &f, config.b_reg)?.best_theta, None),
            ValidationMode::Empirical => {
                let mut rng = rng_for(config.rng_seed, &[TAG_VALID, trial as u64, n as u64]);
                let valid = score_sample(&draw_sample_with(&pop, n, &mut rng)?, &f)?;
                let sweep = empirical_threshold_sweep(&valid, n as f64, config.b_reg)?;
                (sweep.best_theta, Some(n))
            }
        };
        let e = evaluate(&pop, &f, &opt, theta_hat)?;
        Ok(RegretReport {
            trial,
            population_id,
            scorer_id: format!("plugin(smoothing={})", config.smoothing),
            n_train: Some(n),
            m_valid,
            r_log: e.r_log,
            r_ams_at_theta_hat: e.r_hat,
            r_ams_at_theta_star: e.r_star,
            bound_paper: e.bound_paper,
            bound_gradient: e.bound_gradient,
            holds_paper: e.r_hat <= e.bound_paper + BOUND_SLACK,
            holds_gradient: e.r_hat <= e.bound_gradient + BOUND_SLACK,
            theta_star: e.theta_star,
            theta_hat,
        })
    })?;
    let asserted = config.validation == ValidationMode::Exact;
    let summary = RunSummary::from_reports(jobs, skipped, &reports, asserted);
    Ok(RegretRun { reports, summary })
}

/// One trial of the surrogate-to-cost-sensitive transfer fuzz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub trial: usize,
    pub population_id: String,
    pub scorer_id: String,
    pub surrogate: SurrogateKind,
    pub cost_c: f64,
    pub theta_star: f64,
    pub r_surrogate: f64,
    pub r_cost: f64,
    /// `λ sqrt(R_surrogate)`.
    pub cost_bound: f64,
    pub holds_cost: bool,
    pub r_ams: f64,
    /// `(2 s*/b*) λ sqrt(R_surrogate)`.
    pub ams_bound_gradient: f64,
    pub holds_ams_gradient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRun {
    pub reports: Vec<TransferReport>,
    pub trials: usize,
    pub skipped_degenerate: usize,
    pub asserted_failures: usize,
}

impl TransferRun {
    pub fn passed(&self) -> bool {
        self.asserted_failures == 0
    }
}

/// Perturbed conditional minimizers of `surrogate`, thresholded at its
/// universal threshold `θ*(c)`. Asserts `R_c <= λ sqrt(R)`; the implied
/// AMS bound is recorded.
pub fn run_surrogate_transfer(config: &ExperimentConfig, kind: SurrogateKind) -> Result<TransferRun> {
    config.validate()?;
    let surrogate = kind.surrogate();
    let lambda = surrogate.transfer_lambda();
    let (reports, skipped) = run_trials(config.trials, |trial| {
        let (pop, population_id) = population_for(config, trial)?;
        let opt = reference_optimum(&pop, config.b_reg)?;
        let k = *opt.constants()?;
        let c = k.cost();
        let (f, scorer_id) = perturbed_minimizer(config, trial, &pop, surrogate)?;
        let theta_star = surrogate.threshold(c);
        let h = threshold_classifier(&f, theta_star);
        let r_surrogate = surrogate_regret(&pop, &f, surrogate)?;
        let r_cost = cost_sensitive_regret(&pop, &h, c)?;
        let r_ams = ams_regret(&pop, &h, &opt)?;
        let cost_bound = lambda * r_surrogate.sqrt();
        let ams_bound_gradient = k.c_gradient * cost_bound;
        Ok(TransferReport {
            trial,
            population_id,
            scorer_id,
            surrogate: kind,
            cost_c: k.cost_c,
            theta_star,
            r_surrogate,
            r_cost,
            cost_bound,
            holds_cost: r_cost <= cost_bound + BOUND_SLACK,
            r_ams,
            ams_bound_gradient,
            holds_ams_gradient: r_ams <= ams_bound_gradient + BOUND_SLACK,
        })
    })?;
    let asserted_failures = reports.iter().filter(|r| !r.holds_cost).count();
    Ok(TransferRun { trials: config.trials, skipped_degenerate: skipped, asserted_failures, reports })
}

pub fn run_squared_error_transfer(config: &ExperimentConfig) -> Result<TransferRun> {
    run_surrogate_transfer(config, SurrogateKind::SquaredError)
}

/// Worst case of `R_AMS(h) <= C R_c(h)` over every classifier of a population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntermediateBoundCheck {
    pub classifiers: u64,
    pub violations: u64,
    /// Largest `R_AMS(h) - C R_c(h)`; nonpositive when the bound holds.
    pub worst_gap: f64,
}

/// Enumerates all `2^|X|` classifiers and compares `R_AMS(h)` with
/// `(2 s*/b*) R_c(h)` at `c = 1 - (b*/s*) ln(1 + s*/b*)`.
pub fn check_intermediate_bound(pop: &DiscretePopulation, opt: &Optimum) -> Result<IntermediateBoundCheck> {
    let n = pop.len();
    if n > MAX_ENUMERATION_CELLS {
        return Err(Error::TooManyCells { cells: n, max: MAX_ENUMERATION_CELLS });
    }
    let k = opt.constants()?;
    let c = k.cost();
    let total: u64 = 1 << n;
    let (violations, worst_gap) = (0..total)
        .into_par_iter()
        .map(|mask| -> Result<(u64, f64)> {
            let r_ams = opt.ams_squared_value - ams_squared(pop.mask_rates(mask), opt.b_reg)?;
            let gap = r_ams - k.c_gradient * pop.mask_cost_sensitive_regret(mask, c);
            Ok((u64::from(gap > BOUND_SLACK), gap))
        })
        .try_reduce(|| (0, f64::NEG_INFINITY), |a, b| Ok((a.0 + b.0, a.1.max(b.1))))?;
    Ok(IntermediateBoundCheck { classifiers: total, violations, worst_gap })
}

/// Tuning-regret distribution at one validation size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub m: usize,
    pub median: f64,
    pub q10: f64,
    pub q25: f64,
    pub q75: f64,
    pub q90: f64,
    pub zero_fraction: f64,
    pub regrets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub population_cells: usize,
    pub distinct_scores: usize,
    pub seeds: usize,
    pub b_reg: f64,
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of `log10(median)` on `log10(m)`; `None` when
    /// some median is zero.
    pub slope: Option<f64>,
}

impl ConvergenceReport {
    pub fn slope_within(&self, lo: f64, hi: f64) -> bool {
        self.slope.is_some_and(|s| (lo..=hi).contains(&s))
    }
}

/// Tuning regret `max_θ AMS²(h_{f,θ}) - AMS²(h_{f,θ̂_m})` versus the
/// validation size `m` for one population and one scorer. `trials` seeds
/// per size.
pub fn run_convergence_study(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let sizes = &config.sample_sizes;
    let (lo, hi) = match (sizes.iter().min(), sizes.iter().max()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(precondition("the convergence study needs sample sizes")),
    };
    if sizes.len() < 3 || (hi as f64) < 100.0 * lo as f64 {
        return Err(precondition("sample_sizes needs at least 3 sizes spanning 2 decades"));
    }
    if config.b_reg == 0.0 {
        return Err(precondition("the convergence study tunes on validation samples and needs b_reg > 0"));
    }

    let pop = match &config.population {
        Some(file) => file.clone().into_population()?.0,
        None => {
            let mut rng = rng_for(config.rng_seed, &[TAG_POPULATION]);
            random_population(
                &mut rng,
                config.convergence_cells,
                config.eta_distribution,
                config.mass_concentration,
            )?
        }
    };
    let (f, _) = perturbed_minimizer(config, 0, &pop, &crate::surrogate::Logistic)?;
    tuning_regret_study(&pop, &f, sizes, config.trials, config.b_reg, config.rng_seed)
}

/// Tuning regret of `f` on `pop` for each validation size, `seeds`
/// validation samples per size.
pub fn tuning_regret_study(
    pop: &DiscretePopulation,
    f: &Scorer,
    sizes: &[usize],
    seeds: usize,
    b_reg: f64,
    rng_seed: u64,
) -> Result<ConvergenceReport> {
    if seeds == 0 || sizes.is_empty() || sizes.contains(&0) {
        return Err(precondition("need at least one seed and positive sample sizes"));
    }
    let exact = exact_threshold_sweep(pop, f, b_reg)?;
    let best = exact.best_ams_squared();
    // Distinct scores in decreasing order; the exact curve has one point per
    // prefix of this list.
    let mut distinct: Vec<f64> = pop.scores_of(f)?;
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();

    let jobs: Vec<(usize, usize)> = sizes.iter().flat_map(|&m| (0..seeds).map(move |s| (m, s))).collect();
    let regrets: Vec<f64> = jobs
        .par_iter()
        .map(|&(m, seed)| -> Result<f64> {
            let mut rng = rng_for(rng_seed, &[TAG_VALID, seed as u64, m as u64]);
            let valid = score_sample(&draw_sample_with(pop, m, &mut rng)?, f)?;
            let theta_hat = empirical_threshold_sweep(&valid, m as f64, b_reg)?.best_theta;
            let positives = distinct.partition_point(|&s| s >= theta_hat);
            Ok(best - exact.curve[positives].ams_squared)
        })
        .collect::<Result<_>>()?;

    let points: Vec<ConvergencePoint> = sizes
        .iter()
        .zip(regrets.chunks(seeds))
        .map(|(&m, r)| {
            let q = |p| quantile(r, p).unwrap_or(f64::NAN);
            ConvergencePoint {
                m,
                median: median(r).unwrap_or(f64::NAN),
                q10: q(0.1),
                q25: q(0.25),
                q75: q(0.75),
                q90: q(0.9),
                zero_fraction: r.iter().filter(|&&v| v == 0.0).count() as f64 / r.len() as f64,
                regrets: r.to_vec(),
            }
        })
        .collect();
    let slope = if points.iter().all(|p| p.median > 0.0) {
        let x: Vec<f64> = points.iter().map(|p| (p.m as f64).log10()).collect();
        let y: Vec<f64> = points.iter().map(|p| p.median.log10()).collect();
        ols_slope(&x, &y)
    } else {
        None
    };
    Ok(ConvergenceReport {
        population_cells: pop.len(),
        distinct_scores: distinct.len(),
        seeds,
        b_reg,
        points,
        slope,
    })
}
