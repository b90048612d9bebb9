//! Surrogate losses, cost-sensitive loss, and the regret-transfer maps.
//!
//! A surrogate is summarized by its pointwise loss, the minimizer of its
//! conditional risk, a link back to probabilities, and the threshold map
//! `c -> θ*(c)` under which `sgn(f - θ*(c)) = sgn(link(f) - c)`.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::numeric::{sigmoid, softplus, xlogx};

/// A binary label. Ordering puts `Negative` first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "-1")]
    Negative,
    #[serde(rename = "1")]
    Positive,
}

impl Label {
    /// `sgn(x)` with the convention `sgn(0) = +1`.
    pub fn sign_of(x: f64) -> Label {
        if x >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    pub fn from_value(v: i64) -> Result<Label> {
        match v {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(precondition(format!("label must be -1 or 1, got {other}"))),
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

/// Misclassification cost `c` of a false positive; false negatives cost `1 - c`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CostParameter(f64);

impl CostParameter {
    pub fn new(c: f64) -> Result<Self> {
        if c > 0.0 && c < 1.0 {
            Ok(Self(c))
        } else {
            Err(precondition(format!("cost parameter must lie in (0, 1), got {c}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

fn check_eta(eta: f64) {
    debug_assert!((0.0..=1.0).contains(&eta), "eta = {eta} outside [0, 1]");
}

/// Binary entropy in nats, `-η ln η - (1-η) ln(1-η)`.
pub fn binary_entropy(eta: f64) -> f64 {
    check_eta(eta);
    -(xlogx(eta) + xlogx(1.0 - eta))
}

/// `D(p ‖ q)` between Bernoulli distributions, with `0 ln 0 = 0`.
/// Infinite when `q` puts zero mass where `p` does not.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    };
    (term(p, q) + term(1.0 - p, 1.0 - q)).max(0.0)
}

/// `ln(1 + exp(-y f))`.
pub fn logistic_loss(y: Label, f: f64) -> f64 {
    softplus(-y.value() * f)
}

/// `(1-η) ln(1 + e^f) + η ln(1 + e^-f)`.
pub fn conditional_logistic_loss(eta: f64, f: f64) -> f64 {
    check_eta(eta);
    let neg = if eta == 1.0 { 0.0 } else { (1.0 - eta) * softplus(f) };
    let pos = if eta == 0.0 { 0.0 } else { eta * softplus(-f) };
    neg + pos
}

/// `D(η ‖ σ(f))`, the excess conditional logistic risk of score `f`.
pub fn conditional_logistic_regret(eta: f64, f: f64) -> f64 {
    check_eta(eta);
    // ln(η / σ(f)) = ln η + softplus(-f), ln((1-η) / (1-σ(f))) = ln(1-η) + softplus(f)
    let pos = if eta == 0.0 { 0.0 } else { xlogx(eta) + eta * softplus(-f) };
    let neg = if eta == 1.0 { 0.0 } else { xlogx(1.0 - eta) + (1.0 - eta) * softplus(f) };
    (pos + neg).max(0.0)
}

/// `c (1-η) 1[h = +1] + (1-c) η 1[h = -1]`.
pub fn cost_sensitive_conditional_loss(eta: f64, h: Label, c: CostParameter) -> f64 {
    check_eta(eta);
    match h {
        Label::Positive => c.get() * (1.0 - eta),
        Label::Negative => (1.0 - c.get()) * eta,
    }
}

/// Bayes rule of the cost-sensitive loss, `sgn(η - c)`.
pub fn cost_sensitive_bayes(eta: f64, c: CostParameter) -> Label {
    Label::sign_of(eta - c.get())
}

/// Zero when `h` agrees with `sgn(η - c)`, otherwise `|η - c|`.
pub fn cost_sensitive_conditional_regret(eta: f64, h: Label, c: CostParameter) -> f64 {
    check_eta(eta);
    if h == cost_sensitive_bayes(eta, c) {
        0.0
    } else {
        (eta - c.get()).abs()
    }
}

/// `(y - f)²`.
pub fn squared_error_loss(y: Label, f: f64) -> f64 {
    let d = y.value() - f;
    d * d
}

/// A margin-based surrogate loss together with its calibration data.
pub trait Surrogate: Send + Sync {
    fn name(&self) -> &str;

    fn loss(&self, y: Label, f: f64) -> f64;

    /// `(1-η) loss(-1, f) + η loss(+1, f)`.
    fn conditional_loss(&self, eta: f64, f: f64) -> f64 {
        let neg = if eta == 1.0 { 0.0 } else { (1.0 - eta) * self.loss(Label::Negative, f) };
        let pos = if eta == 0.0 { 0.0 } else { eta * self.loss(Label::Positive, f) };
        neg + pos
    }

    /// Minimizer of the conditional risk; may be infinite at `η ∈ {0, 1}`.
    fn conditional_minimizer(&self, eta: f64) -> f64;

    /// Excess conditional risk of score `f` over the minimizer.
    fn conditional_regret(&self, eta: f64, f: f64) -> f64;

    /// Maps a score back to a probability estimate.
    fn link(&self, f: f64) -> f64;

    /// Constant `λ` in `R_c(h_{f,θ*}) <= λ sqrt(R(f))`.
    fn transfer_lambda(&self) -> f64;

    /// Threshold `θ*(c)` with `f >= θ*(c)` iff `link(f) >= c`.
    fn threshold(&self, c: CostParameter) -> f64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Logistic;

impl Surrogate for Logistic {
    fn name(&self) -> &str {
        "logistic"
    }

    fn loss(&self, y: Label, f: f64) -> f64 {
        logistic_loss(y, f)
    }

    fn conditional_loss(&self, eta: f64, f: f64) -> f64 {
        conditional_logistic_loss(eta, f)
    }

    fn conditional_minimizer(&self, eta: f64) -> f64 {
        check_eta(eta);
        (eta / (1.0 - eta)).ln()
    }

    fn conditional_regret(&self, eta: f64, f: f64) -> f64 {
        conditional_logistic_regret(eta, f)
    }

    fn link(&self, f: f64) -> f64 {
        sigmoid(f)
    }

    fn transfer_lambda(&self) -> f64 {
        std::f64::consts::FRAC_1_SQRT_2
    }

    fn threshold(&self, c: CostParameter) -> f64 {
        (c.get() / (1.0 - c.get())).ln()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SquaredError;

impl Surrogate for SquaredError {
    fn name(&self) -> &str {
        "squared_error"
    }

    fn loss(&self, y: Label, f: f64) -> f64 {
        squared_error_loss(y, f)
    }

    fn conditional_minimizer(&self, eta: f64) -> f64 {
        check_eta(eta);
        2.0 * eta - 1.0
    }

    fn conditional_regret(&self, eta: f64, f: f64) -> f64 {
        let d = f - self.conditional_minimizer(eta);
        d * d
    }

    fn link(&self, f: f64) -> f64 {
        (0.5 * (1.0 + f)).clamp(0.0, 1.0)
    }

    fn transfer_lambda(&self) -> f64 {
        1.0
    }

    fn threshold(&self, c: CostParameter) -> f64 {
        2.0 * c.get() - 1.0
    }
}

/// Surrogates that can be selected by name from configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    #[default]
    Logistic,
    SquaredError,
}

impl SurrogateKind {
    pub fn surrogate(self) -> &'static dyn Surrogate {
        match self {
            SurrogateKind::Logistic => &Logistic,
            SurrogateKind::SquaredError => &SquaredError,
        }
    }
}

/// The scorer-independent threshold `θ*(c)` for the given surrogate.
pub fn universal_threshold(c: CostParameter, surrogate: &dyn Surrogate) -> f64 {
    surrogate.threshold(c)
}
