//! Product invariant measures and their canonical restrictions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperplane::{support_alphabet, Hyperplane};
use crate::lattice::TorusGeometry;
use crate::process::{CaseTag, Configuration, RateSet};

/// Below this distance from `β = 1/4` the conjugate form of `Φ` is used.
const BETA_QUARTER_EPS: f64 = 1e-6;

/// Largest volume enumerated exactly (`3^14 ≈ 4.8e6 ≤ 1e7`).
pub const MAX_ENUM_VOLUME: usize = 14;

/// Default attempt budget for rejection sampling of canonical states.
pub const DEFAULT_REJECTION_BUDGET: u64 = 1_000_000;

/// Single-site law of `ν_ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub p_plus: f64,
    pub p_zero: f64,
    pub p_minus: f64,
}

impl Marginals {
    #[inline]
    pub fn prob(&self, spin: i8) -> f64 {
        match spin {
            1 => self.p_plus,
            0 => self.p_zero,
            _ => self.p_minus,
        }
    }

    pub fn mean(&self) -> f64 {
        self.p_plus - self.p_minus
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.p_plus + self.p_minus - m * m
    }

    /// Inverse-CDF draw with order `-1, 0, 1`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i8 {
        let u: f64 = rng.gen();
        if u < self.p_minus {
            -1
        } else if u < self.p_minus + self.p_zero {
            0
        } else {
            1
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !rho.is_finite() || rho.abs() > 1.0 {
        return Err(Error::InvalidArgument(format!("density {rho} outside [-1, 1]")));
    }
    Ok(())
}

fn case1_beta(rates: &RateSet) -> Result<f64> {
    match rates.case()? {
        CaseTag::Case1 => Ok(rates.beta().expect("C_A > 0")),
        c => Err(Error::Rates(format!("Φ is only defined in case 1, got {c}"))),
    }
}

/// `Φ` as a function of `β` directly.
pub fn phi_beta(rho: f64, beta: f64) -> f64 {
    let q = 1.0 - 4.0 * beta;
    let s = (4.0 * beta + rho * rho * q).max(0.0).sqrt();
    if q.abs() < BETA_QUARTER_EPS {
        (1.0 - rho * rho) / (1.0 + s)
    } else {
        (1.0 - s) / q
    }
}

/// `Φ'(ρ) = -ρ / sqrt(4β + ρ²(1 - 4β))`.
pub fn phi_prime_beta(rho: f64, beta: f64) -> f64 {
    -rho / (4.0 * beta + rho * rho * (1.0 - 4.0 * beta)).sqrt()
}

/// Hole density `Φ(ρ) = ν_ρ{η(0) = 0}` in case 1.
pub fn phi(rho: f64, rates: &RateSet) -> Result<f64> {
    check_rho(rho)?;
    Ok(phi_beta(rho, case1_beta(rates)?))
}

pub fn phi_prime(rho: f64, rates: &RateSet) -> Result<f64> {
    check_rho(rho)?;
    Ok(phi_prime_beta(rho, case1_beta(rates)?))
}

pub fn marginals(rho: f64, rates: &RateSet) -> Result<Marginals> {
    check_rho(rho)?;
    Ok(match rates.case()? {
        CaseTag::Case1 => {
            let p0 = phi_beta(rho, rates.beta().expect("C_A > 0"));
            Marginals {
                p_plus: ((1.0 - p0 + rho) / 2.0).max(0.0),
                p_zero: p0,
                p_minus: ((1.0 - p0 - rho) / 2.0).max(0.0),
            }
        }
        CaseTag::Case2 => Marginals {
            p_plus: rho.max(0.0),
            p_zero: 1.0 - rho.abs(),
            p_minus: (-rho).max(0.0),
        },
        CaseTag::Case3 => Marginals {
            p_plus: (1.0 + rho) / 2.0,
            p_zero: 0.0,
            p_minus: (1.0 - rho) / 2.0,
        },
    })
}

/// Marginals of the case-1 family with a given `β`, whatever the rates.
pub fn marginals_beta(rho: f64, beta: f64) -> Result<Marginals> {
    check_rho(rho)?;
    let p0 = phi_beta(rho, beta);
    Ok(Marginals {
        p_plus: ((1.0 - p0 + rho) / 2.0).max(0.0),
        p_zero: p0,
        p_minus: ((1.0 - p0 - rho) / 2.0).max(0.0),
    })
}

/// Static compressibility `χ(ρ) = Var_{ν_ρ}(η(0))`.
pub fn compressibility(rho: f64, rates: &RateSet) -> Result<f64> {
    Ok(marginals(rho, rates)?.variance().max(0.0))
}

/// Product weight `Π_x p(η(x))`.
pub fn product_weight(spins: &[i8], m: &Marginals) -> f64 {
    spins.iter().map(|&s| m.prob(s)).product()
}

/// Unnormalized canonical weight, independent of the conditioning density:
/// `β^{min(n₊, n₋)}` in cases 1 and 2 (with `0⁰ = 1`), and the indicator of
/// no holes in case 3.
pub fn canonical_weight(spins: &[i8], rates: &RateSet) -> Result<f64> {
    let (mut np, mut nm, mut n0) = (0i32, 0i32, 0i32);
    for &s in spins {
        match s {
            1 => np += 1,
            -1 => nm += 1,
            _ => n0 += 1,
        }
    }
    Ok(match rates.case()? {
        CaseTag::Case3 => (n0 == 0) as i32 as f64,
        _ => {
            let m = np.min(nm);
            if m == 0 {
                1.0
            } else {
                rates.beta().expect("C_A > 0").powi(m)
            }
        }
    })
}

/// Canonical measure on a fixed-charge hyperplane, restricted to its support.
#[derive(Debug, Clone)]
pub struct CanonicalEnsemble {
    pub states: Hyperplane,
    pub weights: Vec<f64>,
}

impl CanonicalEnsemble {
    pub fn volume(&self) -> usize {
        self.states.volume()
    }

    pub fn charge(&self) -> i64 {
        self.states.charge()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn expect<F: Fn(&[i8]) -> f64>(&self, f: F) -> f64 {
        self.states
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * f(s))
            .sum()
    }
}

/// Normalized canonical weights on the support of the measure, with a custom
/// state cap (used by the spectral module).
pub fn canonical_ensemble(volume: usize, charge: i64, rates: &RateSet, cap: usize) -> Result<CanonicalEnsemble> {
    if charge.unsigned_abs() as usize > volume {
        return Err(Error::InvalidArgument(format!(
            "charge {charge} exceeds volume {volume}"
        )));
    }
    let states = Hyperplane::new(volume, charge, &support_alphabet(rates, charge)?, cap)?;
    let mut weights = states
        .iter()
        .map(|s| canonical_weight(s, rates))
        .collect::<Result<Vec<_>>>()?;
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    Ok(CanonicalEnsemble { states, weights })
}

/// Exhaustive canonical enumeration for `3^volume ≤ 10^7`.
pub fn canonical_enumerate(volume: usize, charge: i64, rates: &RateSet) -> Result<CanonicalEnsemble> {
    if volume > MAX_ENUM_VOLUME {
        return Err(Error::StateSpaceTooLarge {
            states: 3u128.pow(volume as u32),
            cap: 10_000_000,
        });
    }
    canonical_ensemble(volume, charge, rates, usize::MAX)
}

/// Canonical weights obtained by conditioning `ν_ρ` at an explicit density.
pub fn conditioned_weights(ens: &CanonicalEnsemble, rho: f64, rates: &RateSet) -> Result<Vec<f64>> {
    let m = marginals(rho, rates)?;
    let mut w: Vec<f64> = ens.states.iter().map(|s| product_weight(s, &m)).collect();
    let z: f64 = w.iter().sum();
    if z <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "ν_ρ gives zero mass to charge {} at ρ = {rho}",
            ens.charge()
        )));
    }
    w.iter_mut().for_each(|x| *x /= z);
    Ok(w)
}

/// I.i.d. spins from `ν_ρ` on every site of `geom`.
pub fn sample_grand<R: Rng + ?Sized>(
    rho: f64,
    rates: &RateSet,
    geom: &TorusGeometry,
    rng: &mut R,
) -> Result<Configuration> {
    let m = marginals(rho, rates)?;
    let spins = (0..geom.num_sites()).map(|_| m.sample(rng)).collect();
    Configuration::new(spins)
}

pub fn sample_grand_seeded(rho: f64, rates: &RateSet, geom: &TorusGeometry, seed: u64) -> Result<Configuration> {
    sample_grand(rho, rates, geom, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Exact draw from the canonical measure on `volume` sites with charge `charge`.
///
/// Uses the enumerated ensemble for `volume ≤ 14` and rejection from
/// `ν_{K/volume}` otherwise.
pub fn sample_canonical<R: Rng + ?Sized>(
    volume: usize,
    charge: i64,
    rates: &RateSet,
    budget: u64,
    rng: &mut R,
) -> Result<Configuration> {
    if charge.unsigned_abs() as usize > volume {
        return Err(Error::InvalidArgument(format!(
            "charge {charge} exceeds volume {volume}"
        )));
    }
    if volume <= MAX_ENUM_VOLUME {
        let ens = canonical_enumerate(volume, charge, rates)?;
        return Ok(sample_from_ensemble(&ens, rng));
    }
    let m = marginals(charge as f64 / volume as f64, rates)?;
    for _ in 0..budget {
        let spins: Vec<i8> = (0..volume).map(|_| m.sample(rng)).collect();
        if spins.iter().map(|&s| s as i64).sum::<i64>() == charge {
            return Configuration::new(spins);
        }
    }
    Err(Error::RejectionBudget(budget))
}

pub fn sample_from_ensemble<R: Rng + ?Sized>(ens: &CanonicalEnsemble, rng: &mut R) -> Configuration {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut pick = ens.len() - 1;
    for (i, w) in ens.weights.iter().enumerate() {
        acc += w;
        if u < acc {
            pick = i;
            break;
        }
    }
    Configuration::new(ens.states.state(pick).to_vec()).expect("valid spins")
}
