//! Threshold tuning: maximize exact or empirical AMS over the cuts of a
//! fixed scorer, and draw samples from populations for validation.

use std::collections::BTreeMap;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::learner::{Record, WeightedSample};
use crate::metric::{ams_squared, Rates};
use crate::numeric::CompensatedSum;
use crate::population::{
    check_finite_ams, rates, threshold_classifier, Cell, CellId, DiscretePopulation, Optimum, Scorer,
};
use crate::surrogate::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub s: f64,
    pub b: f64,
    pub ams: f64,
    pub ams_squared: f64,
}

/// All candidate cuts of a scorer, ordered from the empty positive set to
/// the full one (thresholds strictly decreasing).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSweepResult {
    pub best_theta: f64,
    pub best_ams: f64,
    pub curve: Vec<SweepPoint>,
    #[serde(skip)]
    pub best_index: usize,
}

impl ThresholdSweepResult {
    pub fn best(&self) -> &SweepPoint {
        &self.curve[self.best_index]
    }

    pub fn best_ams_squared(&self) -> f64 {
        self.best().ams_squared
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A threshold separating `lo < hi`: keeps `hi` and drops `lo` under `f >= θ`.
fn cut_between(lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * lo + 0.5 * hi;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

fn above(top: f64) -> f64 {
    let t = top + 1.0;
    if t > top {
        t
    } else {
        top.next_up()
    }
}

fn below(bottom: f64) -> f64 {
    let t = bottom - 1.0;
    if t < bottom {
        t
    } else {
        bottom.next_down()
    }
}

/// Core sweep over groups of equal score, given as `(score, s_mass, b_mass)`
/// sorted by strictly decreasing score.
fn sweep_groups(groups: &[(f64, f64, f64)], normalizer: f64, b_reg: f64) -> Result<ThresholdSweepResult> {
    let mut s = CompensatedSum::new();
    let mut b = CompensatedSum::new();
    let mut curve = Vec::with_capacity(groups.len() + 1);

    let first_theta = groups.first().map_or(0.0, |g| above(g.0));
    curve.push(SweepPoint { theta: first_theta, s: 0.0, b: 0.0, ams: 0.0, ams_squared: 0.0 });

    for (k, &(score, gs, gb)) in groups.iter().enumerate() {
        s.add(gs);
        b.add(gb);
        let theta = match groups.get(k + 1) {
            Some(next) => cut_between(next.0, score),
            None => below(score),
        };
        let rates = Rates { s: s.value() / normalizer, b: b.value() / normalizer };
        let v = ams_squared(rates, b_reg)?;
        curve.push(SweepPoint { theta, s: rates.s, b: rates.b, ams: v.sqrt(), ams_squared: v });
    }

    let mut best_index = 0;
    for (i, p) in curve.iter().enumerate() {
        if p.ams_squared > curve[best_index].ams_squared {
            best_index = i;
        }
    }
    Ok(ThresholdSweepResult {
        best_theta: curve[best_index].theta,
        best_ams: curve[best_index].ams,
        best_index,
        curve,
    })
}

fn check_scores_finite<'a>(scores: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if scores.into_iter().all(|s| s.is_finite()) {
        Ok(())
    } else {
        Err(precondition("threshold sweeps need finite scores"))
    }
}

/// Exact AMS of every distinct threshold classifier of `f` on the population.
/// Ties in AMS go to the larger threshold.
pub fn exact_threshold_sweep(
    pop: &DiscretePopulation,
    f: &Scorer,
    b_reg: f64,
) -> Result<ThresholdSweepResult> {
    let scores = pop.scores_of(f)?;
    check_scores_finite(&scores)?;
    let mut order: Vec<(f64, &Cell)> = scores.into_iter().zip(pop.cells()).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let score = order[k].0;
        let mut gs = CompensatedSum::new();
        let mut gb = CompensatedSum::new();
        while k < order.len() && order[k].0 == score {
            let c = order[k].1;
            gs.add(c.mass * c.eta);
            gb.add(c.mass * (1.0 - c.eta));
            k += 1;
        }
        groups.push((score, gs.value(), gb.value()));
    }
    sweep_groups(&groups, 1.0, b_reg)
}

/// A validation record carrying a precomputed score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub score: f64,
    pub y: Label,
    pub weight: f64,
}

/// Empirical AMS at every cut of the scored validation sample; weighted
/// sums are divided by `normalizer` before evaluation.
pub fn empirical_threshold_sweep(
    validation: &[ScoredRecord],
    normalizer: f64,
    b_reg: f64,
) -> Result<ThresholdSweepResult> {
    if !(normalizer.is_finite() && normalizer > 0.0) {
        return Err(precondition(format!("normalizer must be positive, got {normalizer}")));
    }
    if validation.iter().any(|r| !(r.weight.is_finite() && r.weight >= 0.0)) {
        return Err(Error::Input("weights must be finite and nonnegative".into()));
    }
    if !validation.iter().any(|r| r.weight > 0.0) {
        return Err(Error::Input("all validation weights are zero".into()));
    }
    check_scores_finite(validation.iter().map(|r| &r.score))?;

    let mut sorted: Vec<&ScoredRecord> = validation.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    for r in sorted {
        let (ws, wb) = match r.y {
            Label::Positive => (r.weight, 0.0),
            Label::Negative => (0.0, r.weight),
        };
        match groups.last_mut() {
            Some(g) if g.0 == r.score => {
                g.1 += ws;
                g.2 += wb;
            }
            _ => groups.push((r.score, ws, wb)),
        }
    }
    sweep_groups(&groups, normalizer, b_reg)
}

/// `n` i.i.d. draws with unit weights: cell by mass, then label by `η(cell)`.
pub fn draw_sample(pop: &DiscretePopulation, n: usize, rng_seed: u64) -> Result<WeightedSample<CellId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    draw_sample_with(pop, n, &mut rng)
}

pub fn draw_sample_with<R: Rng + ?Sized>(
    pop: &DiscretePopulation,
    n: usize,
    rng: &mut R,
) -> Result<WeightedSample<CellId>> {
    if n == 0 {
        return Err(precondition("sample size must be at least 1"));
    }
    let cells = pop.cells();
    let index = WeightedIndex::new(cells.iter().map(|c| c.mass))
        .map_err(|e| Error::InvalidPopulation(e.to_string()))?;
    let records = (0..n)
        .map(|_| {
            let cell = &cells[index.sample(rng)];
            let y = if rng.random::<f64>() < cell.eta { Label::Positive } else { Label::Negative };
            Record { x: cell.id, y, weight: 1.0 }
        })
        .collect();
    WeightedSample::new(records)
}

/// Attaches scores to a cell-indexed sample.
pub fn score_sample(sample: &WeightedSample<CellId>, f: &Scorer) -> Result<Vec<ScoredRecord>> {
    sample
        .records()
        .iter()
        .map(|r| {
            let score = f.get(r.x).ok_or(Error::MissingCell(r.x))?;
            Ok(ScoredRecord { score, y: r.y, weight: r.weight })
        })
        .collect()
}

/// The empirical distribution of a cell-indexed sample as a population.
/// Cells with zero total weight are dropped.
pub fn empirical_population(sample: &WeightedSample<CellId>) -> Result<DiscretePopulation> {
    let total = sample.total_weight();
    let mut per_cell: BTreeMap<CellId, (CompensatedSum, CompensatedSum)> = BTreeMap::new();
    for r in sample.records() {
        let e = per_cell.entry(r.x).or_default();
        e.0.add(r.weight);
        if r.y.is_positive() {
            e.1.add(r.weight);
        }
    }
    let cells = per_cell
        .into_iter()
        .filter(|(_, (w, _))| w.value() > 0.0)
        .map(|(id, (w, pos))| Cell {
            id,
            mass: w.value() / total,
            eta: (pos.value() / w.value()).clamp(0.0, 1.0),
        })
        .collect();
    DiscretePopulation::new(cells)
}

/// Best classifier among the thresholds of `η` itself.
pub fn eta_sweep_optimum(pop: &DiscretePopulation, b_reg: f64) -> Result<Optimum> {
    check_finite_ams(pop, b_reg)?;
    let f = pop.eta_scorer();
    let sweep = exact_threshold_sweep(pop, &f, b_reg)?;
    let h = threshold_classifier(&f, sweep.best_theta);
    // Recompute through `rates` so regrets against this optimum use the
    // same summation as every other classifier.
    let r = rates(pop, &h)?;
    Optimum::new(h, r, b_reg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::ams;
    use crate::population::brute_force_ams_optimum;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use Label::{Negative as N, Positive as P};

    fn pop(cells: &[(f64, f64)]) -> DiscretePopulation {
        DiscretePopulation::new(
            cells.iter().enumerate().map(|(i, &(mass, eta))| Cell { id: i as CellId, mass, eta }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_scorer_has_two_cuts() {
        let p = pop(&[(0.3, 0.2), (0.7, 0.6)]);
        let sweep = exact_threshold_sweep(&p, &Scorer::from_fn(&p, |_| 0.0), 0.0).unwrap();
        assert_eq!(sweep.curve.len(), 2);
        assert_eq!(sweep.curve[0].s, 0.0);
        assert_abs_diff_eq!(sweep.curve[1].s, p.positive_mass(), epsilon = 1e-16);
    }

    #[test]
    fn curve_thresholds_decrease_and_reproduce_rates() {
        let p = pop(&[(0.1, 0.2), (0.2, 0.9), (0.3, 0.5), (0.4, 0.05)]);
        let f = p.log_odds_scorer();
        let sweep = exact_threshold_sweep(&p, &f, 0.0).unwrap();
        assert_eq!(sweep.curve.len(), 5);
        for w in sweep.curve.windows(2) {
            assert!(w[1].theta < w[0].theta);
        }
        for point in &sweep.curve {
            let r = rates(&p, &threshold_classifier(&f, point.theta)).unwrap();
            assert_abs_diff_eq!(r.s, point.s, epsilon = 1e-15);
            assert_abs_diff_eq!(r.b, point.b, epsilon = 1e-15);
        }
        let max = sweep.curve.iter().map(|p| p.ams).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(sweep.best_ams, max);
        let last = sweep.curve.last().unwrap();
        assert_abs_diff_eq!(last.s, p.positive_mass(), epsilon = 1e-16);
        assert_abs_diff_eq!(last.b, p.negative_mass(), epsilon = 1e-16);
    }

    #[test]
    fn log_odds_sweep_matches_brute_force() {
        let p = pop(&[(0.15, 0.2), (0.25, 0.85), (0.1, 0.5), (0.3, 0.05), (0.2, 0.65)]);
        let sweep = exact_threshold_sweep(&p, &p.log_odds_scorer(), 0.0).unwrap();
        let opt = brute_force_ams_optimum(&p, 0.0).unwrap();
        assert_abs_diff_eq!(sweep.best_ams_squared(), opt.ams_squared_value, epsilon = 1e-12);
        let via_eta = eta_sweep_optimum(&p, 0.0).unwrap();
        assert_eq!(via_eta.classifier, opt.classifier);
    }

    #[test]
    fn empirical_two_record_example() {
        let v =
            [ScoredRecord { score: 2.0, y: P, weight: 0.6 }, ScoredRecord { score: 1.0, y: N, weight: 0.4 }];
        let sweep = empirical_threshold_sweep(&v, 1.0, 0.1).unwrap();
        assert_eq!(sweep.curve.len(), 3);
        assert_eq!(sweep.best_index, 1);
        let best = sweep.best();
        assert_abs_diff_eq!(best.s, 0.6, epsilon = 1e-16);
        assert_eq!(best.b, 0.0);
        assert_abs_diff_eq!(sweep.best_ams, 1.234_615_004_233_076_1, epsilon = 1e-14);
        assert_abs_diff_eq!(sweep.curve[2].ams, 0.731_167_691_300_288_8, epsilon = 1e-14);
        assert_eq!(sweep.curve[0].ams, 0.0);
        assert!(sweep.best_theta > 1.0 && sweep.best_theta <= 2.0);
    }

    #[test]
    fn empirical_errors() {
        let zero = [ScoredRecord { score: 1.0, y: P, weight: 0.0 }];
        assert!(matches!(empirical_threshold_sweep(&zero, 1.0, 0.1), Err(Error::Input(_))));
        let one = [ScoredRecord { score: 1.0, y: P, weight: 1.0 }];
        assert!(empirical_threshold_sweep(&one, 0.0, 0.1).is_err());
        assert!(matches!(empirical_threshold_sweep(&one, 1.0, 0.0), Err(Error::InfiniteAms { .. })));
        let nan = [ScoredRecord { score: f64::NAN, y: P, weight: 1.0 }];
        assert!(empirical_threshold_sweep(&nan, 1.0, 0.1).is_err());
    }

    #[test]
    fn equal_scores_are_never_split() {
        let v = [
            ScoredRecord { score: 1.0, y: P, weight: 1.0 },
            ScoredRecord { score: 1.0, y: N, weight: 1.0 },
            ScoredRecord { score: 0.0, y: P, weight: 1.0 },
        ];
        let sweep = empirical_threshold_sweep(&v, 3.0, 0.01).unwrap();
        assert_eq!(sweep.curve.len(), 3);
        assert_abs_diff_eq!(sweep.curve[1].s, 1.0 / 3.0, epsilon = 1e-16);
        assert_abs_diff_eq!(sweep.curve[1].b, 1.0 / 3.0, epsilon = 1e-16);
    }

    #[test]
    fn adjacent_float_scores_get_a_separating_cut() {
        let hi = 1.0f64;
        let lo = hi.next_down();
        assert_eq!(cut_between(lo, hi), hi);
        assert_eq!(above(1e300), 1e300f64.next_up());
        assert!(below(-1e300) < -1e300);
    }

    #[test]
    fn draw_sample_properties() {
        let sure = pop(&[(1.0, 1.0)]);
        let s = draw_sample(&sure, 100, 1).unwrap();
        assert!(s.records().iter().all(|r| r.y == P));

        let p = pop(&[(0.5, 0.3), (0.5, 0.8)]);
        let n = 100_000;
        let s = draw_sample(&p, n, 9).unwrap();
        let first = s.records().iter().filter(|r| r.x == 0).count() as f64 / n as f64;
        // 5 sigma of a binomial proportion at p = 0.5
        assert!((first - 0.5).abs() < 5.0 * (0.25 / n as f64).sqrt());
        assert!((first - 0.5).abs() < 0.01);
        assert_eq!(draw_sample(&p, 50, 3).unwrap(), draw_sample(&p, 50, 3).unwrap());
        assert_ne!(draw_sample(&p, 50, 3).unwrap(), draw_sample(&p, 50, 4).unwrap());
        assert!(draw_sample(&p, 0, 3).is_err());
    }

    #[test]
    fn empirical_sweep_agrees_with_exact_sweep_on_empirical_population() {
        let p = pop(&[(0.2, 0.3), (0.3, 0.7), (0.1, 0.5), (0.4, 0.1)]);
        let f = Scorer::from_scores([(0, 0.4), (1, 2.0), (2, -1.0), (3, 0.9)]);
        let sample = draw_sample(&p, 5000, 21).unwrap();
        let emp = empirical_population(&sample).unwrap();
        let exact = exact_threshold_sweep(&emp, &f, 0.01).unwrap();
        let scored = score_sample(&sample, &f).unwrap();
        let empirical = empirical_threshold_sweep(&scored, sample.total_weight(), 0.01).unwrap();
        assert_eq!(exact.curve.len(), empirical.curve.len());
        assert_eq!(exact.best_index, empirical.best_index);
        for (a, b) in exact.curve.iter().zip(&empirical.curve) {
            assert_abs_diff_eq!(a.s, b.s, epsilon = 1e-12);
            assert_abs_diff_eq!(a.b, b.b, epsilon = 1e-12);
            assert_abs_diff_eq!(a.ams, b.ams, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn best_ams_invariant_under_increasing_transform(
            scores in proptest::collection::vec(-5.0..5.0f64, 6),
            scale in 0.1..10.0f64,
            shift in -3.0..3.0f64,
        ) {
            let p = pop(&[(0.1, 0.2), (0.2, 0.9), (0.15, 0.5), (0.25, 0.05), (0.2, 0.6), (0.1, 0.4)]);
            let f = Scorer::from_scores(scores.iter().enumerate().map(|(i, &s)| (i as CellId, s)));
            let g = f.map(|s| (scale * s + shift).exp());
            let a = exact_threshold_sweep(&p, &f, 0.0).unwrap();
            let b = exact_threshold_sweep(&p, &g, 0.0).unwrap();
            prop_assert_eq!(a.best_ams, b.best_ams);
            prop_assert_eq!(
                threshold_classifier(&f, a.best_theta),
                threshold_classifier(&g, b.best_theta)
            );
        }

        #[test]
        fn full_cut_prefix_sums_equal_totals(
            recs in proptest::collection::vec((-3.0..3.0f64, any::<bool>(), 0.0..2.0f64), 1..40)
        ) {
            prop_assume!(recs.iter().any(|r| r.2 > 0.0));
            let v: Vec<ScoredRecord> = recs
                .iter()
                .map(|&(score, pos, weight)| ScoredRecord { score, y: if pos { P } else { N }, weight })
                .collect();
            let sweep = empirical_threshold_sweep(&v, 1.0, 1.0).unwrap();
            let last = sweep.curve.last().unwrap();
            let pos: f64 = v.iter().filter(|r| r.y == P).map(|r| r.weight).sum();
            let neg: f64 = v.iter().filter(|r| r.y == N).map(|r| r.weight).sum();
            prop_assert!((last.s - pos).abs() <= 1e-12 * (1.0 + pos));
            prop_assert!((last.b - neg).abs() <= 1e-12 * (1.0 + neg));
            prop_assert!(sweep.curve.iter().all(|p| p.ams >= 0.0));
            prop_assert_eq!(sweep.best_ams, ams(Rates { s: sweep.best().s, b: sweep.best().b }, 1.0).unwrap());
        }
    }
}
