//! Evaluation metrics over the rate pair `(s, b)`.
//!
//! The AMS of a classifier is computed from its true-positive mass `s` and
//! false-positive mass `b`:
//!
//! ```text
//! AMS²(s, b) = 2 ((s + b') ln(1 + s / b') - s),   b' = b + b_reg
//! ```
//!
//! Everything downstream works with the squared form. [`Metric`] is the
//! general contract (increasing in `s`, decreasing in `b`, jointly convex)
//! that the regret-transfer argument needs; [`check_metric_contract`]
//! verifies it by sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};

/// Mass tolerance used when validating that a pair of rates is a
/// sub-probability.
const RATE_MASS_TOLERANCE: f64 = 1e-12;

/// Below this ratio `s / b'` the AMS kernels switch to their power series.
const SERIES_CUTOFF: f64 = 0.05;

/// True-positive mass `s` and false-positive mass `b` of a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub s: f64,
    pub b: f64,
}

impl Rates {
    /// Builds a rate pair satisfying `0 <= s`, `0 <= b`, `s + b <= 1`.
    pub fn new(s: f64, b: f64) -> Result<Self> {
        if !(s.is_finite() && b.is_finite()) || s < 0.0 || b < 0.0 {
            return Err(precondition(format!("rates must be finite and nonnegative (s = {s}, b = {b})")));
        }
        if s + b > 1.0 + RATE_MASS_TOLERANCE {
            return Err(precondition(format!("s + b = {} exceeds 1", s + b)));
        }
        Ok(Self { s, b })
    }

    pub fn midpoint(self, other: Rates) -> Rates {
        Rates { s: 0.5 * (self.s + other.s), b: 0.5 * (self.b + other.b) }
    }
}

/// `(1 + x) ln(1 + x) - x` for `x >= 0`.
fn entropy_kernel(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        // sum_{k>=2} (-1)^k x^k / (k (k - 1))
        let mut acc = 0.0;
        let mut power = x * x;
        let mut k = 2.0_f64;
        loop {
            let term = power / (k * (k - 1.0));
            acc += if (k as u32).is_multiple_of(2) { term } else { -term };
            if term <= f64::EPSILON * 1e-3 * acc.abs() || k > 60.0 {
                break;
            }
            power *= x;
            k += 1.0;
        }
        acc
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

/// `ln(1 + x) - x` for `x >= 0`.
fn log_gap(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        // sum_{k>=2} (-1)^(k+1) x^k / k
        let mut acc = 0.0;
        let mut power = x * x;
        let mut k = 2.0_f64;
        loop {
            let term = power / k;
            acc += if (k as u32).is_multiple_of(2) { -term } else { term };
            if term <= f64::EPSILON * 1e-3 * acc.abs() || k > 60.0 {
                break;
            }
            power *= x;
            k += 1.0;
        }
        acc
    } else {
        x.ln_1p() - x
    }
}

fn check_inputs(r: Rates, b_reg: f64) -> Result<f64> {
    if !(r.s.is_finite() && r.b.is_finite() && b_reg.is_finite()) {
        return Err(precondition("AMS inputs must be finite"));
    }
    if r.s < 0.0 || r.b < 0.0 || b_reg < 0.0 {
        return Err(precondition(format!(
            "AMS inputs must be nonnegative (s = {}, b = {}, b_reg = {b_reg})",
            r.s, r.b
        )));
    }
    Ok(r.b + b_reg)
}

/// Squared approximate median significance.
pub fn ams_squared(r: Rates, b_reg: f64) -> Result<f64> {
    let b = check_inputs(r, b_reg)?;
    if r.s == 0.0 {
        return Ok(0.0);
    }
    if b == 0.0 {
        return Err(Error::InfiniteAms { s: r.s });
    }
    Ok((2.0 * b * entropy_kernel(r.s / b)).max(0.0))
}

/// Approximate median significance, `sqrt(AMS²)`.
pub fn ams(r: Rates, b_reg: f64) -> Result<f64> {
    ams_squared(r, b_reg).map(f64::sqrt)
}

/// `(∂AMS²/∂s, ∂AMS²/∂b)` at an interior point.
pub fn ams_squared_gradient(r: Rates, b_reg: f64) -> Result<(f64, f64)> {
    let b = check_inputs(r, b_reg)?;
    if r.s <= 0.0 || b <= 0.0 {
        return Err(Error::BoundaryPoint { s: r.s, b });
    }
    let x = r.s / b;
    Ok((2.0 * x.ln_1p(), 2.0 * log_gap(x)))
}

/// Structural properties a metric declares about itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricProperties {
    pub increasing_in_s: bool,
    pub decreasing_in_b: bool,
    pub jointly_convex: bool,
}

/// An evaluation metric `M(s, b)` with its partial derivatives.
pub trait Metric: Send + Sync {
    fn name(&self) -> &str;
    fn value(&self, r: Rates) -> Result<f64>;
    fn gradient(&self, r: Rates) -> Result<(f64, f64)>;
    fn properties(&self) -> MetricProperties;
}

/// AMS² with an optional background regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AmsSquared {
    pub b_reg: f64,
}

impl AmsSquared {
    pub fn new(b_reg: f64) -> Result<Self> {
        if !(b_reg.is_finite() && b_reg >= 0.0) {
            return Err(precondition(format!("b_reg must be finite and nonnegative, got {b_reg}")));
        }
        Ok(Self { b_reg })
    }
}

impl Metric for AmsSquared {
    fn name(&self) -> &str {
        "ams_squared"
    }

    fn value(&self, r: Rates) -> Result<f64> {
        ams_squared(r, self.b_reg)
    }

    fn gradient(&self, r: Rates) -> Result<(f64, f64)> {
        ams_squared_gradient(r, self.b_reg)
    }

    fn properties(&self) -> MetricProperties {
        MetricProperties { increasing_in_s: true, decreasing_in_b: true, jointly_convex: true }
    }
}

type RateFn<T> = Box<dyn Fn(Rates) -> T + Send + Sync>;

/// A metric assembled from closures, for experimenting with other metrics.
pub struct FnMetric {
    name: String,
    value: RateFn<f64>,
    gradient: RateFn<(f64, f64)>,
    properties: MetricProperties,
}

impl FnMetric {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(Rates) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(Rates) -> (f64, f64) + Send + Sync + 'static,
        properties: MetricProperties,
    ) -> Self {
        Self { name: name.into(), value: Box::new(value), gradient: Box::new(gradient), properties }
    }
}

impl std::fmt::Debug for FnMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnMetric")
            .field("name", &self.name)
            .field("properties", &self.properties)
            .finish_non_exhaustive()
    }
}

impl Metric for FnMetric {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, r: Rates) -> Result<f64> {
        Ok((self.value)(r))
    }

    fn gradient(&self, r: Rates) -> Result<(f64, f64)> {
        Ok((self.gradient)(r))
    }

    fn properties(&self) -> MetricProperties {
        self.properties
    }
}

/// Lower bound on each coordinate of a sampled interior rate pair.
pub const INTERIOR_MARGIN: f64 = 0.01;

/// Draws a rate pair with `s, b >= INTERIOR_MARGIN` and
/// `s + b <= 1 - INTERIOR_MARGIN`.
pub fn sample_interior_rates<R: Rng + ?Sized>(rng: &mut R) -> Rates {
    let hi = 1.0 - 2.0 * INTERIOR_MARGIN;
    loop {
        let s = rng.random_range(INTERIOR_MARGIN..hi);
        let b = rng.random_range(INTERIOR_MARGIN..hi);
        if s + b <= 1.0 - INTERIOR_MARGIN {
            return Rates { s, b };
        }
    }
}

/// Central finite-difference gradient.
pub fn finite_difference_gradient(m: &dyn Metric, r: Rates, step: f64) -> Result<(f64, f64)> {
    let ds = (m.value(Rates { s: r.s + step, ..r })? - m.value(Rates { s: r.s - step, ..r })?) / (2.0 * step);
    let db = (m.value(Rates { b: r.b + step, ..r })? - m.value(Rates { b: r.b - step, ..r })?) / (2.0 * step);
    Ok((ds, db))
}

/// Relative discrepancy `|a - b| / max(|a|, |b|)`, zero when `a == b`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let diff = (a - b).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / a.abs().max(b.abs())
    }
}

pub const FD_STEP: f64 = 1e-6;
pub const FD_RELATIVE_TOLERANCE: f64 = 1e-6;
pub const CONVEXITY_TOLERANCE: f64 = 1e-12;

/// Outcome of checking one property over all sampled points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub property: String,
    pub declared: bool,
    pub checked: usize,
    pub failures: usize,
    pub worst_violation: f64,
}

impl PropertyCheck {
    fn new(property: &str, declared: bool) -> Self {
        Self { property: property.to_string(), declared, checked: 0, failures: 0, worst_violation: 0.0 }
    }

    /// Records a violation amount; anything positive is a failure.
    fn record(&mut self, violation: f64) {
        self.checked += 1;
        if violation > 0.0 || violation.is_nan() {
            self.failures += 1;
        }
        if violation.is_nan() {
            self.worst_violation = f64::NAN;
        } else if violation > self.worst_violation {
            self.worst_violation = violation;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractReport {
    pub metric: String,
    pub trials: usize,
    pub increasing_in_s: PropertyCheck,
    pub decreasing_in_b: PropertyCheck,
    pub jointly_convex: PropertyCheck,
    pub gradient_matches_finite_differences: PropertyCheck,
    /// Sampled points where the metric itself returned an error.
    pub evaluation_errors: usize,
}

impl ContractReport {
    pub fn checks(&self) -> [&PropertyCheck; 4] {
        [
            &self.increasing_in_s,
            &self.decreasing_in_b,
            &self.jointly_convex,
            &self.gradient_matches_finite_differences,
        ]
    }

    /// True when every declared property held at every sampled point.
    pub fn all_declared_passed(&self) -> bool {
        self.evaluation_errors == 0 && self.checks().iter().all(|c| !c.declared || c.passed())
    }
}

/// Samples `trials` interior rate pairs and checks the metric's declared
/// properties: gradient signs, midpoint convexity, and agreement of the
/// analytic gradient with central finite differences.
pub fn check_metric_contract(m: &dyn Metric, trials: usize, rng_seed: u64) -> Result<ContractReport> {
    if trials == 0 {
        return Err(precondition("trials must be at least 1"));
    }
    let props = m.properties();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut inc = PropertyCheck::new("increasing_in_s", props.increasing_in_s);
    let mut dec = PropertyCheck::new("decreasing_in_b", props.decreasing_in_b);
    let mut convex = PropertyCheck::new("jointly_convex", props.jointly_convex);
    let mut fd = PropertyCheck::new("gradient_matches_finite_differences", true);
    let mut evaluation_errors = 0;

    for _ in 0..trials {
        let r1 = sample_interior_rates(&mut rng);
        let r2 = sample_interior_rates(&mut rng);
        let outcome = (|| -> Result<()> {
            let (gs, gb) = m.gradient(r1)?;
            inc.record(if gs > 0.0 { 0.0 } else { -gs + f64::MIN_POSITIVE });
            dec.record(if gb < 0.0 { 0.0 } else { gb + f64::MIN_POSITIVE });

            let (fs, fb) = finite_difference_gradient(m, r1, FD_STEP)?;
            let worst = relative_error(gs, fs).max(relative_error(gb, fb));
            fd.record((worst - FD_RELATIVE_TOLERANCE).max(0.0));

            let mid = m.value(r1.midpoint(r2))?;
            let chord = 0.5 * (m.value(r1)? + m.value(r2)?);
            convex.record((mid - chord - CONVEXITY_TOLERANCE).max(0.0));
            Ok(())
        })();
        if outcome.is_err() {
            evaluation_errors += 1;
        }
    }

    Ok(ContractReport {
        metric: m.name().to_string(),
        trials,
        increasing_in_s: inc,
        decreasing_in_b: dec,
        jointly_convex: convex,
        gradient_matches_finite_differences: fd,
        evaluation_errors,
    })
}
