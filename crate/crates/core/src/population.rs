//! Finite discrete populations and exact population-level quantities.
//!
//! A [`DiscretePopulation`] is a finite joint distribution over cells and
//! labels: cell `x` has mass `p(x)` and positive-class probability `η(x)`.
//! Rates, expected losses and regrets are exact finite sums over the cells,
//! accumulated with compensated summation.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::metric::{ams_squared, ams_squared_gradient, Rates};
use crate::numeric::{sum, CompensatedSum};
use crate::surrogate::{cost_sensitive_conditional_regret, CostParameter, Label, Logistic, Surrogate};

pub type CellId = u64;

/// Largest population the brute-force optimum will enumerate.
pub const MAX_ENUMERATION_CELLS: usize = 20;

/// Tolerance on the total mass of a population.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub id: CellId,
    pub mass: f64,
    pub eta: f64,
}

/// Immutable finite population; cell order is the order given at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePopulation {
    cells: Vec<Cell>,
    index: HashMap<CellId, usize>,
}

impl DiscretePopulation {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidPopulation("population has no cells".into()));
        }
        let mut index = HashMap::with_capacity(cells.len());
        for (i, cell) in cells.iter().enumerate() {
            if !(cell.mass.is_finite() && cell.mass > 0.0) {
                return Err(Error::InvalidPopulation(format!(
                    "cell {} has non-positive mass {}",
                    cell.id, cell.mass
                )));
            }
            if !(0.0..=1.0).contains(&cell.eta) {
                return Err(Error::InvalidPopulation(format!(
                    "cell {} has eta {} outside [0, 1]",
                    cell.id, cell.eta
                )));
            }
            if index.insert(cell.id, i).is_some() {
                return Err(Error::InvalidPopulation(format!("duplicate cell id {}", cell.id)));
            }
        }
        let total = sum(cells.iter().map(|c| c.mass));
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidPopulation(format!("cell masses sum to {total}, expected 1")));
        }
        Ok(Self { cells, index })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = CellId> + '_ {
        self.cells.iter().map(|c| c.id)
    }

    pub fn position(&self, id: CellId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn cell(&self, id: CellId) -> Option<&Cell> {
        self.position(id).map(|i| &self.cells[i])
    }

    /// `Pr(y = +1)`.
    pub fn positive_mass(&self) -> f64 {
        sum(self.cells.iter().map(|c| c.mass * c.eta))
    }

    /// `Pr(y = -1)`.
    pub fn negative_mass(&self) -> f64 {
        sum(self.cells.iter().map(|c| c.mass * (1.0 - c.eta)))
    }

    /// Labels of `h` in cell order.
    pub fn labels_of(&self, h: &Classifier) -> Result<Vec<Label>> {
        self.cells.iter().map(|c| h.get(c.id).ok_or(Error::MissingCell(c.id))).collect()
    }

    /// Scores of `f` in cell order.
    pub fn scores_of(&self, f: &Scorer) -> Result<Vec<f64>> {
        self.cells.iter().map(|c| f.get(c.id).ok_or(Error::MissingCell(c.id))).collect()
    }

    /// Rates of the classifier whose positive cells are the set bits of `mask`
    /// (bit `i` is the `i`-th cell).
    pub fn mask_rates(&self, mask: u64) -> Rates {
        let mut s = CompensatedSum::new();
        let mut b = CompensatedSum::new();
        for (i, c) in self.cells.iter().enumerate().take(64) {
            if mask >> i & 1 == 1 {
                s.add(c.mass * c.eta);
                b.add(c.mass * (1.0 - c.eta));
            }
        }
        Rates { s: s.value(), b: b.value() }
    }

    pub fn rates_of_labels(&self, labels: &[Label]) -> Rates {
        let mut s = CompensatedSum::new();
        let mut b = CompensatedSum::new();
        for (c, l) in self.cells.iter().zip(labels) {
            if l.is_positive() {
                s.add(c.mass * c.eta);
                b.add(c.mass * (1.0 - c.eta));
            }
        }
        Rates { s: s.value(), b: b.value() }
    }

    /// Cost-sensitive regret of the mask classifier (see [`Self::mask_rates`]).
    pub fn mask_cost_sensitive_regret(&self, mask: u64, c: CostParameter) -> f64 {
        sum(self.cells.iter().enumerate().map(|(i, cell)| {
            let h = if mask >> i & 1 == 1 { Label::Positive } else { Label::Negative };
            cell.mass * cost_sensitive_conditional_regret(cell.eta, h, c)
        }))
    }

    /// The plug-in Bayes scorer `ln(η / (1 - η))`; infinite where `η ∈ {0, 1}`.
    pub fn log_odds_scorer(&self) -> Scorer {
        Scorer::from_fn(self, |c| Logistic.conditional_minimizer(c.eta))
    }

    /// The scorer `f(x) = η(x)`.
    pub fn eta_scorer(&self) -> Scorer {
        Scorer::from_fn(self, |c| c.eta)
    }
}

/// JSON population file: `{"cells": [{"id", "mass", "eta"}], "b_reg"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationFile {
    pub cells: Vec<Cell>,
    #[serde(default)]
    pub b_reg: f64,
}

impl PopulationFile {
    pub fn new(pop: &DiscretePopulation, b_reg: f64) -> Self {
        Self { cells: pop.cells().to_vec(), b_reg }
    }

    /// Validates the file contents and builds the population.
    pub fn into_population(self) -> Result<(DiscretePopulation, f64)> {
        if !(self.b_reg.is_finite() && self.b_reg >= 0.0) {
            return Err(Error::InvalidPopulation(format!(
                "b_reg must be finite and nonnegative, got {}",
                self.b_reg
            )));
        }
        Ok((DiscretePopulation::new(self.cells)?, self.b_reg))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Mapping from cells to labels.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Classifier {
    labels: BTreeMap<CellId, Label>,
}

impl Classifier {
    pub fn from_labels(labels: impl IntoIterator<Item = (CellId, Label)>) -> Self {
        Self { labels: labels.into_iter().collect() }
    }

    pub fn constant(pop: &DiscretePopulation, label: Label) -> Self {
        Self::from_labels(pop.ids().map(|id| (id, label)))
    }

    pub fn from_mask(pop: &DiscretePopulation, mask: u64) -> Self {
        Self::from_labels(
            pop.ids()
                .enumerate()
                .map(|(i, id)| (id, if mask >> i & 1 == 1 { Label::Positive } else { Label::Negative })),
        )
    }

    pub fn get(&self, id: CellId) -> Option<Label> {
        self.labels.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, Label)> + '_ {
        self.labels.iter().map(|(&id, &l)| (id, l))
    }

    pub fn positive_count(&self) -> usize {
        self.labels.values().filter(|l| l.is_positive()).count()
    }

    /// The classifier with every label flipped.
    pub fn complement(&self) -> Self {
        Self::from_labels(self.iter().map(|(id, l)| (id, l.flip())))
    }
}

/// Real-valued function on cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scorer {
    scores: BTreeMap<CellId, f64>,
}

#[derive(Serialize, Deserialize)]
struct ScoreEntry {
    id: CellId,
    score: f64,
}

impl Serialize for Scorer {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<ScoreEntry> =
            self.scores.iter().map(|(&id, &score)| ScoreEntry { id, score }).collect();
        #[derive(Serialize)]
        struct Wrapper {
            scores: Vec<ScoreEntry>,
        }
        Wrapper { scores: entries }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Scorer {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wrapper {
            scores: Vec<ScoreEntry>,
        }
        let w = Wrapper::deserialize(deserializer)?;
        Ok(Scorer::from_scores(w.scores.into_iter().map(|e| (e.id, e.score))))
    }
}

impl Scorer {
    pub fn from_scores(scores: impl IntoIterator<Item = (CellId, f64)>) -> Self {
        Self { scores: scores.into_iter().collect() }
    }

    pub fn from_fn(pop: &DiscretePopulation, f: impl Fn(&Cell) -> f64) -> Self {
        Self::from_scores(pop.cells().iter().map(|c| (c.id, f(c))))
    }

    pub fn get(&self, id: CellId) -> Option<f64> {
        self.scores.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, f64)> + '_ {
        self.scores.iter().map(|(&id, &s)| (id, s))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Applies `g` to every score.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> Scorer {
        Self::from_scores(self.iter().map(|(id, s)| (id, g(s))))
    }
}

/// `(s(h), b(h))`: positive-labelled mass split by true class.
pub fn rates(pop: &DiscretePopulation, h: &Classifier) -> Result<Rates> {
    Ok(pop.rates_of_labels(&pop.labels_of(h)?))
}

/// `h_{f,θ}(x) = sgn(f(x) - θ)` with `sgn(0) = +1`.
pub fn threshold_classifier(f: &Scorer, theta: f64) -> Classifier {
    Classifier::from_labels(f.iter().map(|(id, s)| (id, Label::sign_of(s - theta))))
}

/// `E[loss(y, f(x))]` under the population.
pub fn expected_surrogate_loss(
    pop: &DiscretePopulation,
    f: &Scorer,
    surrogate: &dyn Surrogate,
) -> Result<f64> {
    let scores = pop.scores_of(f)?;
    Ok(sum(pop.cells().iter().zip(scores).map(|(c, s)| c.mass * surrogate.conditional_loss(c.eta, s))))
}

/// `E[r(η(x), f(x))]`, the population regret of `f` under a surrogate.
pub fn surrogate_regret(pop: &DiscretePopulation, f: &Scorer, surrogate: &dyn Surrogate) -> Result<f64> {
    let scores = pop.scores_of(f)?;
    Ok(sum(pop.cells().iter().zip(scores).map(|(c, s)| c.mass * surrogate.conditional_regret(c.eta, s))))
}

pub fn expected_logistic_loss(pop: &DiscretePopulation, f: &Scorer) -> Result<f64> {
    expected_surrogate_loss(pop, f, &Logistic)
}

/// `Σ p(x) D(η(x) ‖ σ(f(x)))`.
pub fn logistic_regret(pop: &DiscretePopulation, f: &Scorer) -> Result<f64> {
    surrogate_regret(pop, f, &Logistic)
}

/// `Σ p(x) r_c(η(x), h(x))`.
pub fn cost_sensitive_regret(pop: &DiscretePopulation, h: &Classifier, c: CostParameter) -> Result<f64> {
    let labels = pop.labels_of(h)?;
    Ok(sum(pop
        .cells()
        .iter()
        .zip(labels)
        .map(|(cell, l)| cell.mass * cost_sensitive_conditional_regret(cell.eta, l, c))))
}

/// Constants derived from the AMS gradient at the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// `s* / b*`.
    pub c_paper: f64,
    /// `∂AMS²/∂s - ∂AMS²/∂b = 2 s* / b*`.
    pub c_gradient: f64,
    /// `c = 1 - (b*/s*) ln(1 + s*/b*)`.
    pub cost_c: f64,
    /// `ln(c / (1 - c))`.
    pub theta_star: f64,
}

impl BoundConstants {
    /// Constants at rates `(s, b)`; `b` already includes any regularizer.
    /// `None` when `s` or `b` is zero.
    pub fn at(s: f64, b: f64) -> Option<Self> {
        if !(s > 0.0 && b > 0.0) {
            return None;
        }
        let (gs, gb) = ams_squared_gradient(Rates { s, b }, 0.0).ok()?;
        let c_gradient = gs - gb;
        let cost_c = -gb / c_gradient;
        if !(cost_c > 0.0 && cost_c < 1.0) {
            return None;
        }
        Some(Self { c_paper: s / b, c_gradient, cost_c, theta_star: (cost_c / (1.0 - cost_c)).ln() })
    }

    pub fn cost(&self) -> CostParameter {
        CostParameter::new(self.cost_c).expect("cost_c validated in (0, 1)")
    }
}

/// The AMS²-maximizing classifier of a population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimum {
    pub classifier: Classifier,
    pub rates: Rates,
    pub ams_squared_value: f64,
    pub b_reg: f64,
    /// `None` for a degenerate optimum (`s* = 0` or `b* + b_reg = 0`).
    pub constants: Option<BoundConstants>,
}

impl Optimum {
    pub fn new(classifier: Classifier, rates: Rates, b_reg: f64) -> Result<Self> {
        let ams_squared_value = ams_squared(rates, b_reg)?;
        Ok(Self {
            classifier,
            rates,
            ams_squared_value,
            b_reg,
            constants: BoundConstants::at(rates.s, rates.b + b_reg),
        })
    }

    pub fn constants(&self) -> Result<&BoundConstants> {
        self.constants
            .as_ref()
            .ok_or(Error::DegenerateOptimum { s: self.rates.s, b: self.rates.b + self.b_reg })
    }
}

/// Fails when some classifier would have infinite AMS.
pub(crate) fn check_finite_ams(pop: &DiscretePopulation, b_reg: f64) -> Result<()> {
    if b_reg == 0.0 {
        if let Some(c) = pop.cells().iter().find(|c| c.eta == 1.0) {
            return Err(Error::InfiniteAms { s: c.mass });
        }
    }
    Ok(())
}

/// Exhaustive search over all `2^|X|` classifiers. Ties go to fewer
/// positive cells, then to the smaller mask.
pub fn brute_force_ams_optimum(pop: &DiscretePopulation, b_reg: f64) -> Result<Optimum> {
    let n = pop.len();
    if n > MAX_ENUMERATION_CELLS {
        return Err(Error::TooManyCells { cells: n, max: MAX_ENUMERATION_CELLS });
    }
    if !(b_reg.is_finite() && b_reg >= 0.0) {
        return Err(precondition(format!("b_reg must be nonnegative, got {b_reg}")));
    }
    check_finite_ams(pop, b_reg)?;

    // Larger value wins, then fewer positive cells, then the smaller mask.
    let better = |a: (f64, u64), b: (f64, u64)| -> (f64, u64) {
        let order = a.0.total_cmp(&b.0).then(b.1.count_ones().cmp(&a.1.count_ones())).then(b.1.cmp(&a.1));
        if order.is_ge() {
            a
        } else {
            b
        }
    };

    let total: u64 = 1 << n;
    const CHUNK: u64 = 1 << 12;
    let chunks = total.div_ceil(CHUNK);
    let (best_value, best_mask) = (0..chunks)
        .into_par_iter()
        .map(|chunk| -> Result<(f64, u64)> {
            let mut best = (f64::NEG_INFINITY, u64::MAX);
            for mask in chunk * CHUNK..((chunk + 1) * CHUNK).min(total) {
                let v = ams_squared(pop.mask_rates(mask), b_reg)?;
                best = better((v, mask), best);
            }
            Ok(best)
        })
        .try_reduce(|| (f64::NEG_INFINITY, u64::MAX), |a, b| Ok(better(a, b)))?;

    let rates = pop.mask_rates(best_mask);
    let opt = Optimum::new(Classifier::from_mask(pop, best_mask), rates, b_reg)?;
    debug_assert_eq!(opt.ams_squared_value, best_value);
    Ok(opt)
}

/// `AMS²(h*) - AMS²(h)`.
pub fn ams_regret(pop: &DiscretePopulation, h: &Classifier, opt: &Optimum) -> Result<f64> {
    Ok(opt.ams_squared_value - ams_squared(rates(pop, h)?, opt.b_reg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{binary_entropy, conditional_logistic_loss};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn pop(cells: &[(f64, f64)]) -> DiscretePopulation {
        DiscretePopulation::new(
            cells
                .iter()
                .enumerate()
                .map(|(i, &(mass, eta))| Cell { id: i as CellId + 1, mass, eta })
                .collect(),
        )
        .unwrap()
    }

    fn two_cell() -> DiscretePopulation {
        pop(&[(0.5, 0.9), (0.5, 0.1)])
    }

    fn labels(p: &DiscretePopulation, l: &[Label]) -> Classifier {
        Classifier::from_labels(p.ids().zip(l.iter().copied()))
    }

    use Label::{Negative as N, Positive as P};

    #[test]
    fn validation() {
        assert!(DiscretePopulation::new(vec![]).is_err());
        let bad_mass = vec![Cell { id: 1, mass: 0.5, eta: 0.5 }];
        assert!(DiscretePopulation::new(bad_mass).is_err());
        let dup = vec![Cell { id: 1, mass: 0.5, eta: 0.5 }, Cell { id: 1, mass: 0.5, eta: 0.5 }];
        assert!(DiscretePopulation::new(dup).is_err());
        let bad_eta = vec![Cell { id: 1, mass: 1.0, eta: 1.5 }];
        assert!(DiscretePopulation::new(bad_eta).is_err());
        let zero = vec![Cell { id: 1, mass: 0.0, eta: 0.5 }, Cell { id: 2, mass: 1.0, eta: 0.5 }];
        assert!(DiscretePopulation::new(zero).is_err());
    }

    #[test]
    fn rates_examples() {
        let p = two_cell();
        let none = rates(&p, &Classifier::constant(&p, N)).unwrap();
        assert_eq!((none.s, none.b), (0.0, 0.0));
        let all = rates(&p, &Classifier::constant(&p, P)).unwrap();
        assert_abs_diff_eq!(all.s, p.positive_mass(), epsilon = 1e-16);
        assert_abs_diff_eq!(all.b, p.negative_mass(), epsilon = 1e-16);
        let r = rates(&p, &labels(&p, &[P, N])).unwrap();
        assert_abs_diff_eq!(r.s, 0.45, epsilon = 1e-16);
        assert_abs_diff_eq!(r.b, 0.05, epsilon = 1e-16);
        let partial = Classifier::from_labels([(1, P)]);
        assert!(matches!(rates(&p, &partial), Err(Error::MissingCell(2))));
    }

    #[test]
    fn threshold_classifier_examples() {
        let f = Scorer::from_scores([(1, 0.5), (2, -1.0), (3, 2.0)]);
        assert_eq!(threshold_classifier(&f, -1.5).positive_count(), 3);
        assert_eq!(threshold_classifier(&f, 2.5).positive_count(), 0);
        let h = threshold_classifier(&f, 0.5);
        assert_eq!(h.get(1), Some(P));
        assert_eq!(h.get(2), Some(N));
    }

    #[test]
    fn expected_logistic_loss_examples() {
        let p = two_cell();
        let f = p.log_odds_scorer();
        let entropy = 0.5 * binary_entropy(0.9) + 0.5 * binary_entropy(0.1);
        assert_abs_diff_eq!(expected_logistic_loss(&p, &f).unwrap(), entropy, epsilon = 1e-15);
        let zero = Scorer::from_fn(&p, |_| 0.0);
        assert_abs_diff_eq!(expected_logistic_loss(&p, &zero).unwrap(), LN_2, epsilon = 1e-15);
        let f = Scorer::from_scores([(1, 2.0), (2, -2.0)]);
        let direct = 0.5 * conditional_logistic_loss(0.9, 2.0) + 0.5 * conditional_logistic_loss(0.1, -2.0);
        assert_abs_diff_eq!(expected_logistic_loss(&p, &f).unwrap(), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(direct, 0.326_928_011_042_972_5, epsilon = 1e-15);
    }

    #[test]
    fn logistic_regret_examples() {
        let p = two_cell();
        assert!(logistic_regret(&p, &p.log_odds_scorer()).unwrap() < 1e-16);
        let half = pop(&[(0.3, 0.5), (0.7, 0.5)]);
        assert_eq!(logistic_regret(&half, &Scorer::from_fn(&half, |_| 0.0)).unwrap(), 0.0);
        let single = pop(&[(1.0, 0.8)]);
        assert_abs_diff_eq!(
            logistic_regret(&single, &Scorer::from_fn(&single, |_| 0.0)).unwrap(),
            0.192_744_757_021_757_43,
            epsilon = 1e-15
        );
        // Regret equals expected loss minus the loss of the log-odds scorer.
        let f = Scorer::from_scores([(1, 0.3), (2, 1.7)]);
        let diff = expected_logistic_loss(&p, &f).unwrap()
            - expected_logistic_loss(&p, &p.log_odds_scorer()).unwrap();
        assert_abs_diff_eq!(logistic_regret(&p, &f).unwrap(), diff, epsilon = 1e-15);
    }

    #[test]
    fn cost_sensitive_regret_examples() {
        let c = CostParameter::new(0.5).unwrap();
        let p = two_cell();
        let bayes = Classifier::from_labels(p.cells().iter().map(|x| (x.id, Label::sign_of(x.eta - 0.5))));
        assert_eq!(cost_sensitive_regret(&p, &bayes, c).unwrap(), 0.0);
        let single = pop(&[(1.0, 0.3)]);
        assert_abs_diff_eq!(
            cost_sensitive_regret(&single, &Classifier::constant(&single, P), c).unwrap(),
            0.2,
            epsilon = 1e-16
        );
        assert_abs_diff_eq!(
            cost_sensitive_regret(&p, &Classifier::constant(&p, P), c).unwrap(),
            0.2,
            epsilon = 1e-16
        );
    }

    #[test]
    fn brute_force_single_cell() {
        let p = pop(&[(1.0, 0.9)]);
        let opt = brute_force_ams_optimum(&p, 0.0).unwrap();
        assert_eq!(opt.classifier.get(1), Some(P));
        assert_abs_diff_eq!(opt.rates.s, 0.9, epsilon = 1e-16);
        assert_abs_diff_eq!(opt.rates.b, 0.1, epsilon = 1e-16);
        assert_abs_diff_eq!(opt.ams_squared_value, 2.805_170_185_988_091_4, epsilon = 1e-14);
        let k = opt.constants().unwrap();
        assert_abs_diff_eq!(k.c_paper, 9.0, epsilon = 1e-13);
        assert_abs_diff_eq!(k.c_gradient, 18.0, epsilon = 1e-13);
        assert_abs_diff_eq!(k.cost_c, 1.0 - 10f64.ln() / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.theta_star, (k.cost_c / (1.0 - k.cost_c)).ln(), epsilon = 1e-15);
    }

    #[test]
    fn brute_force_constant_eta_is_all_or_nothing() {
        let p = pop(&[(0.2, 0.4), (0.3, 0.4), (0.5, 0.4)]);
        let opt = brute_force_ams_optimum(&p, 0.0).unwrap();
        let k = opt.classifier.positive_count();
        assert!(k == 0 || k == 3, "optimum used {k} cells");
    }

    #[test]
    fn brute_force_errors() {
        let cells: Vec<_> = (0..21).map(|i| (1.0 / 21.0, 0.5 + 0.01 * i as f64)).collect();
        let big = pop(&cells);
        assert!(matches!(brute_force_ams_optimum(&big, 0.0), Err(Error::TooManyCells { .. })));
        let sure = pop(&[(0.5, 1.0), (0.5, 0.2)]);
        assert!(matches!(brute_force_ams_optimum(&sure, 0.0), Err(Error::InfiniteAms { .. })));
        assert!(brute_force_ams_optimum(&sure, 0.01).is_ok());
        let empty_signal = pop(&[(0.5, 0.0), (0.5, 0.0)]);
        let opt = brute_force_ams_optimum(&empty_signal, 0.0).unwrap();
        assert_eq!(opt.classifier.positive_count(), 0);
        assert!(matches!(opt.constants(), Err(Error::DegenerateOptimum { .. })));
    }

    #[test]
    fn ams_regret_examples() {
        let p = pop(&[(0.2, 0.9), (0.3, 0.5), (0.5, 0.1)]);
        let opt = brute_force_ams_optimum(&p, 0.0).unwrap();
        assert_eq!(ams_regret(&p, &opt.classifier, &opt).unwrap(), 0.0);
        assert_eq!(ams_regret(&p, &Classifier::constant(&p, N), &opt).unwrap(), opt.ams_squared_value);
        for mask in 0..8 {
            assert!(ams_regret(&p, &Classifier::from_mask(&p, mask), &opt).unwrap() >= 0.0);
        }
    }

    #[test]
    fn complement_rates_sum_to_class_masses() {
        let p = pop(&[(0.1, 0.3), (0.2, 0.7), (0.3, 0.2), (0.4, 0.95)]);
        for mask in 0..16u64 {
            let h = Classifier::from_mask(&p, mask);
            let a = rates(&p, &h).unwrap();
            let b = rates(&p, &h.complement()).unwrap();
            assert_abs_diff_eq!(a.s + b.s, p.positive_mass(), epsilon = 1e-15);
            assert_abs_diff_eq!(a.b + b.b, p.negative_mass(), epsilon = 1e-15);
            assert_eq!(p.mask_rates(mask), a);
        }
    }

    #[test]
    fn bayes_cost_sensitive_rule_has_zero_regret_at_optimum_cost() {
        let p = pop(&[(0.1, 0.3), (0.2, 0.7), (0.3, 0.2), (0.4, 0.95)]);
        let opt = brute_force_ams_optimum(&p, 0.0).unwrap();
        let c = opt.constants().unwrap().cost();
        let h = Classifier::from_labels(p.cells().iter().map(|x| (x.id, Label::sign_of(x.eta - c.get()))));
        assert_eq!(cost_sensitive_regret(&p, &h, c).unwrap(), 0.0);
    }

    #[test]
    fn population_file_roundtrip_and_strictness() {
        let text =
            r#"{"cells":[{"id":1,"mass":0.25,"eta":0.9},{"id":2,"mass":0.75,"eta":0.1}],"b_reg":0.01}"#;
        let (p, b_reg) = PopulationFile::from_json(text).unwrap().into_population().unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(b_reg, 0.01);
        let again = PopulationFile::from_json(&PopulationFile::new(&p, b_reg).to_json().unwrap()).unwrap();
        assert_eq!(again.into_population().unwrap().0, p);
        let extra = r#"{"cells":[{"id":1,"mass":1.0,"eta":0.9,"x":1}]}"#;
        assert!(PopulationFile::from_json(extra).is_err());
        let bad = r#"{"cells":[{"id":1,"mass":0.9,"eta":0.9}]}"#;
        assert!(PopulationFile::from_json(bad).unwrap().into_population().is_err());
        let neg = r#"{"cells":[{"id":1,"mass":1.0,"eta":0.9}],"b_reg":-1}"#;
        assert!(PopulationFile::from_json(neg).unwrap().into_population().is_err());
    }
}
