//! Initial configurations for hydrodynamic runs, and seed splitting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::TorusGeometry;
use crate::measures::{marginals, marginals_beta, Marginals};
use crate::process::{Configuration, RateSet};

/// One-parameter family of site marginals indexed by the density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MarginalFamily {
    /// The invariant product measures of the given rates.
    Rates { rates: RateSet },
    /// The case-1 family with parameter `β`, whatever the dynamics.
    Beta { beta: f64 },
}

impl MarginalFamily {
    pub fn at(&self, rho: f64) -> Result<Marginals> {
        match self {
            MarginalFamily::Rates { rates } => marginals(rho, rates),
            MarginalFamily::Beta { beta } => marginals_beta(rho, *beta),
        }
    }
}

fn site_point(geom: &TorusGeometry, x: usize) -> Vec<f64> {
    let n = geom.side() as f64;
    geom.coords(x).into_iter().map(|c| c as f64 / n).collect()
}

/// Independent spins with the marginal of density `rho0(x/N)` at site `x`.
pub fn local_equilibrium<F: Fn(&[f64]) -> f64>(
    geom: &TorusGeometry,
    rho0: F,
    family: &MarginalFamily,
    seed: u64,
) -> Result<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spins = (0..geom.num_sites())
        .map(|x| {
            let rho = rho0(&site_point(geom, x));
            if !(-1.0..=1.0).contains(&rho) {
                return Err(Error::InvalidArgument(format!("profile value {rho} outside [-1, 1]")));
            }
            Ok(family.at(rho)?.sample(&mut rng))
        })
        .collect::<Result<Vec<i8>>>()?;
    Configuration::new(spins)
}

/// Deterministic spins whose running sum in site order tracks the running
/// integral of `rho0`: `η(x) = round(S_x) - round(S_{x-1})`.
pub fn deterministic_profile<F: Fn(&[f64]) -> f64>(geom: &TorusGeometry, rho0: F) -> Result<Configuration> {
    let mut acc = 0.0;
    let mut prev = 0i64;
    let mut spins = Vec::with_capacity(geom.num_sites());
    for x in 0..geom.num_sites() {
        let rho = rho0(&site_point(geom, x));
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!("profile value {rho} outside [-1, 1]")));
        }
        acc += rho;
        let cur = acc.round() as i64;
        spins.push((cur - prev).clamp(-1, 1) as i8);
        prev = cur;
    }
    Configuration::new(spins)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of ensemble member `index` under master seed `master`.
pub fn sub_seed(master: u64, index: u64) -> u64 {
    mix(mix(master).wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}
