use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};

use crate::error::{precondition, Result};
use crate::numeric::sum;
use crate::population::{Cell, CellId, DiscretePopulation, Scorer};

use super::config::{EtaDistribution, NoiseKind, Perturbation};

/// Keeps generated `η` away from 0 and 1 so log-odds stay finite.
const ETA_FLOOR: f64 = 1e-9;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for an independent stream identified by `parts` under `base`.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(base), |h, &p| splitmix64(h ^ splitmix64(p)))
}

pub fn rng_for(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}

/// Population with `cells` cells: Dirichlet(`concentration`) masses and
/// i.i.d. `η` values. Cell ids are `1..=cells`.
pub fn random_population<R: Rng + ?Sized>(
    rng: &mut R,
    cells: usize,
    eta: EtaDistribution,
    concentration: f64,
) -> Result<DiscretePopulation> {
    if cells == 0 {
        return Err(precondition("a population needs at least one cell"));
    }
    let gamma = Gamma::new(concentration, 1.0).map_err(|e| precondition(e.to_string()))?;
    let beta = match eta {
        EtaDistribution::Beta { alpha, beta } => {
            Some(Beta::new(alpha, beta).map_err(|e| precondition(e.to_string()))?)
        }
        EtaDistribution::Uniform { .. } => None,
    };
    let mut raw = Vec::with_capacity(cells);
    for _ in 0..cells {
        let w: f64 = gamma.sample(rng);
        let e = match (eta, &beta) {
            (EtaDistribution::Uniform { low, high }, _) => rng.random_range(low..=high),
            (_, Some(b)) => b.sample(rng),
            _ => unreachable!(),
        };
        raw.push((w.max(f64::MIN_POSITIVE), e.clamp(ETA_FLOOR, 1.0 - ETA_FLOOR)));
    }
    let total = sum(raw.iter().map(|r| r.0));
    DiscretePopulation::new(
        raw.into_iter()
            .enumerate()
            .map(|(i, (w, eta))| Cell { id: i as CellId + 1, mass: w / total, eta })
            .collect(),
    )
}

/// `base + noise` cell by cell, in cell order.
pub fn perturb<R: Rng + ?Sized>(
    rng: &mut R,
    pop: &DiscretePopulation,
    base: &Scorer,
    noise: Perturbation,
) -> Result<Scorer> {
    let normal = Normal::new(0.0, noise.magnitude).map_err(|e| precondition(e.to_string()))?;
    let mut scores = Vec::with_capacity(pop.len());
    for id in pop.ids() {
        let f = base.get(id).ok_or(crate::error::Error::MissingCell(id))?;
        let e = match noise.kind {
            _ if noise.magnitude == 0.0 => 0.0,
            NoiseKind::Uniform => rng.random_range(-noise.magnitude..=noise.magnitude),
            NoiseKind::Gaussian => normal.sample(rng),
        };
        scores.push((id, f + e));
    }
    Ok(Scorer::from_scores(scores))
}
