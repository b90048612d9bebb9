//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; errors become `{"error": "..."}`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use amsopt::lab::{
    perturb, random_population, reference_optimum, rng_for, EtaDistribution, NoiseKind, Perturbation,
};
use amsopt::metric::{ams_squared, ams_squared_gradient, Rates};
use amsopt::numeric::sigmoid;
use amsopt::population::{ams_regret, logistic_regret, threshold_classifier, BoundConstants};
use amsopt::surrogate::{
    bernoulli_kl, conditional_logistic_regret, cost_sensitive_conditional_regret, universal_threshold,
    CostParameter, Label, Logistic,
};
use amsopt::threshold::exact_threshold_sweep;

fn to_json<T: Serialize>(result: amsopt::Result<T>) -> String {
    match result {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| format!(r#"{{"error":"{e}"}}"#)),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}

#[derive(Serialize)]
struct PointInfo {
    ams: f64,
    ams_squared: f64,
    grad_s: f64,
    grad_b: f64,
    constants: Option<BoundConstants>,
}

/// AMS, its gradient and the bound constants at `(s, b)`.
#[wasm_bindgen]
pub fn ams_point(s: f64, b: f64, b_reg: f64) -> String {
    to_json((|| {
        let r = Rates::new(s, b)?;
        let v = ams_squared(r, b_reg)?;
        let (grad_s, grad_b) = ams_squared_gradient(r, b_reg)?;
        Ok(PointInfo {
            ams: v.sqrt(),
            ams_squared: v,
            grad_s,
            grad_b,
            constants: BoundConstants::at(s, b + b_reg),
        })
    })())
}

/// AMS² on an `n × n` grid over `s, b ∈ (0, 1)` with `s + b ≤ 1`;
/// cells outside the simplex are `null`.
#[wasm_bindgen]
pub fn ams_grid(n: usize, b_reg: f64) -> String {
    let n = n.clamp(2, 200);
    let grid: Vec<Vec<Option<f64>>> = (0..n)
        .map(|i| {
            let b = (i as f64 + 0.5) / n as f64;
            (0..n)
                .map(|j| {
                    let s = (j as f64 + 0.5) / n as f64;
                    Rates::new(s, b).ok().and_then(|r| ams_squared(r, b_reg).ok())
                })
                .collect()
        })
        .collect();
    to_json(Ok(grid))
}

#[derive(Serialize)]
struct SweepDemo {
    cells: Vec<amsopt::population::Cell>,
    scores: Vec<f64>,
    curve: Vec<amsopt::threshold::SweepPoint>,
    best_theta: f64,
    theta_star: f64,
    r_log: f64,
    r_ams_hat: f64,
    r_ams_star: f64,
    bound_paper: f64,
    bound_gradient: f64,
    optimum_ams: f64,
}

/// A random population, a perturbed log-odds scorer, its exact threshold
/// curve and the regrets at `θ̂` and `θ*`.
#[wasm_bindgen]
pub fn sweep_demo(seed: u64, cells: usize, magnitude: f64, b_reg: f64) -> String {
    to_json((|| {
        let mut rng = rng_for(seed, &[]);
        let pop = random_population(&mut rng, cells.clamp(2, 20), EtaDistribution::default(), 1.0)?;
        let noise = Perturbation { kind: NoiseKind::Uniform, magnitude: magnitude.max(0.0) };
        let f = perturb(&mut rng, &pop, &pop.log_odds_scorer(), noise)?;
        let opt = reference_optimum(&pop, b_reg)?;
        let k = *opt.constants()?;
        let sweep = exact_threshold_sweep(&pop, &f, b_reg)?;
        let r_log = logistic_regret(&pop, &f)?;
        let root = (r_log / 2.0).sqrt();
        Ok(SweepDemo {
            scores: pop.scores_of(&f)?,
            cells: pop.cells().to_vec(),
            best_theta: sweep.best_theta,
            theta_star: k.theta_star,
            r_log,
            r_ams_hat: ams_regret(&pop, &threshold_classifier(&f, sweep.best_theta), &opt)?,
            r_ams_star: ams_regret(&pop, &threshold_classifier(&f, k.theta_star), &opt)?,
            bound_paper: k.c_paper * root,
            bound_gradient: k.c_gradient * root,
            optimum_ams: opt.ams_squared_value.sqrt(),
            curve: sweep.curve,
        })
    })())
}

#[derive(Serialize)]
struct TransferPoint {
    eta_f: f64,
    kl: f64,
    pinsker: f64,
    r_log: f64,
    theta_star: f64,
    r_cost: f64,
    transfer_bound: f64,
}

/// Pointwise Pinsker and logistic-to-cost-sensitive transfer at `(η, f, c)`.
#[wasm_bindgen]
pub fn transfer_point(eta: f64, f: f64, c: f64) -> String {
    to_json((|| {
        if !(0.0..=1.0).contains(&eta) {
            return Err(amsopt::Error::Precondition(format!("eta {eta} outside [0, 1]")));
        }
        let c = CostParameter::new(c)?;
        let eta_f = sigmoid(f);
        let r_log = conditional_logistic_regret(eta, f);
        let theta_star = universal_threshold(c, &Logistic);
        Ok(TransferPoint {
            eta_f,
            kl: bernoulli_kl(eta, eta_f),
            pinsker: 2.0 * (eta - eta_f).powi(2),
            r_log,
            theta_star,
            r_cost: cost_sensitive_conditional_regret(eta, Label::sign_of(f - theta_star), c),
            transfer_bound: (r_log / 2.0).sqrt(),
        })
    })())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn point_matches_library() {
        let v = parse(ams_point(1.0 / 3.0, 1.0 / 3.0, 0.0));
        assert!((v["ams_squared"].as_f64().unwrap() - 2.0 / 3.0 * (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((v["constants"]["c_gradient"].as_f64().unwrap() - 2.0).abs() < 1e-15);
        assert!(parse(ams_point(0.8, 0.8, 0.0))["error"].is_string());
    }

    #[test]
    fn grid_marks_outside_simplex() {
        let v = parse(ams_grid(4, 0.0));
        assert!(v[0][0].is_number());
        assert!(v[3][3].is_null());
    }

    #[test]
    fn sweep_demo_is_consistent() {
        let v = parse(sweep_demo(7, 8, 1.0, 0.0));
        assert_eq!(v["cells"].as_array().unwrap().len(), 8);
        let (hat, star) = (v["r_ams_hat"].as_f64().unwrap(), v["r_ams_star"].as_f64().unwrap());
        assert!(hat <= star + 1e-12);
        assert!(star <= v["bound_gradient"].as_f64().unwrap() + 1e-9);
        assert_eq!(parse(sweep_demo(7, 8, 1.0, 0.0)), v);
    }

    #[test]
    fn transfer_point_holds() {
        let v = parse(transfer_point(0.7, -1.0, 0.3));
        assert!(v["kl"].as_f64().unwrap() >= v["pinsker"].as_f64().unwrap());
        assert!(v["r_cost"].as_f64().unwrap() <= v["transfer_bound"].as_f64().unwrap());
        assert!(parse(transfer_point(0.5, 0.0, 1.0))["error"].is_string());
    }
}
