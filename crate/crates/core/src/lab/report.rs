use std::io::Write;

use crate::error::Result;

use super::experiments::{ConvergenceReport, RegretReport, TransferReport};

/// Column order of the regret CSV.
pub const REGRET_CSV_HEADER: [&str; 10] = [
    "trial",
    "n_train",
    "m_valid",
    "R_log",
    "R_ams_hat",
    "R_ams_star",
    "bound_paper",
    "bound_gradient",
    "holds_paper",
    "holds_gradient",
];

fn opt(v: Option<usize>) -> String {
    v.map(|n| n.to_string()).unwrap_or_default()
}

pub fn write_regret_csv<W: Write>(out: W, reports: &[RegretReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REGRET_CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.trial.to_string(),
            opt(r.n_train),
            opt(r.m_valid),
            r.r_log.to_string(),
            r.r_ams_at_theta_hat.to_string(),
            r.r_ams_at_theta_star.to_string(),
            r.bound_paper.to_string(),
            r.bound_gradient.to_string(),
            r.holds_paper.to_string(),
            r.holds_gradient.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_transfer_csv<W: Write>(out: W, reports: &[TransferReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "surrogate",
        "cost_c",
        "theta_star",
        "R_surrogate",
        "R_cost",
        "cost_bound",
        "holds_cost",
        "R_ams",
        "ams_bound_gradient",
        "holds_ams_gradient",
    ])?;
    for r in reports {
        w.write_record([
            r.trial.to_string(),
            r.surrogate.surrogate().name().to_string(),
            r.cost_c.to_string(),
            r.theta_star.to_string(),
            r.r_surrogate.to_string(),
            r.r_cost.to_string(),
            r.cost_bound.to_string(),
            r.holds_cost.to_string(),
            r.r_ams.to_string(),
            r.ams_bound_gradient.to_string(),
            r.holds_ams_gradient.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (m, seed), plot-ready.
pub fn write_convergence_csv<W: Write>(out: W, report: &ConvergenceReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "seed", "tuning_regret"])?;
    for p in &report.points {
        for (seed, r) in p.regrets.iter().enumerate() {
            w.write_record([p.m.to_string(), seed.to_string(), r.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
