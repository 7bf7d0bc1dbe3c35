//! Birth–death projection of the mean-field generator and its ramification
//! certificate.
//!
//! For `K ≥ 0` the mean-field dynamics with rates `(1, 1, 1, 1, β)` seen
//! through `X(η) = #{x : η(x) = -1}` is a birth–death chain on
//! `{0, ..., ⌊(V - K)/2⌋}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::eigen::sorted_eigenvalues;
use super::{build_generator, GeneratorVariant};
use crate::error::{Error, Result};
use crate::lattice::TorusGeometry;
use crate::process::RateSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathChain {
    pub volume: usize,
    pub charge: i64,
    pub beta: f64,
    /// `r(l, l-1)` for `l = 0..=l_max`.
    pub down: Vec<f64>,
    /// `r(l, l+1)` for `l = 0..=l_max`.
    pub up: Vec<f64>,
    /// Normalized stationary weights.
    pub weights: Vec<f64>,
}

impl BirthDeathChain {
    pub fn len(&self) -> usize {
        self.down.len()
    }

    pub fn is_empty(&self) -> bool {
        self.down.is_empty()
    }

    pub fn l_max(&self) -> usize {
        self.len() - 1
    }

    fn a(&self) -> f64 {
        (self.volume as i64 - self.charge) as f64
    }

    /// Mean drift `D(x) = r(x, x+1) - r(x, x-1)` extended to real `x`.
    pub fn drift(&self, x: f64) -> f64 {
        let a = self.a();
        let k = self.charge as f64;
        ((a - 2.0 * x) * (a - 2.0 * x - 1.0) * self.beta - x * (k + x)) / self.volume as f64
    }

    pub fn drift_slope(&self, x: f64) -> f64 {
        let a = self.a();
        let k = self.charge as f64;
        (-2.0 * self.beta * (2.0 * a - 1.0) - k + (8.0 * self.beta - 2.0) * x) / self.volume as f64
    }

    /// Lower bound on `-D'` over the state range.
    pub fn slope_constant(&self) -> f64 {
        let v = self.volume as f64;
        if self.beta >= 0.25 {
            (v - 2.0 * self.beta) / v
        } else {
            2.0 * self.beta * (2.0 * v - 1.0) / v
        }
    }

    /// `-𝓛` as a dense tridiagonal matrix.
    pub fn neg_generator(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.up[i] + self.down[i]
            } else if j + 1 == i {
                -self.down[i]
            } else if j == i + 1 {
                -self.up[i]
            } else {
                0.0
            }
        })
    }

    /// `(𝓛 f)(l)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|l| {
                let mut s = 0.0;
                if l > 0 {
                    s += self.down[l] * (f[l - 1] - f[l]);
                }
                if l + 1 < self.len() {
                    s += self.up[l] * (f[l + 1] - f[l]);
                }
                s
            })
            .collect()
    }

    /// Exact spectral gap from the symmetrized tridiagonal matrix.
    pub fn exact_gap(&self) -> Option<f64> {
        let n = self.len();
        if n < 2 {
            return None;
        }
        let q = self.neg_generator();
        let s = DMatrix::from_fn(n, n, |i, j| q[(i, j)] * (self.weights[i] / self.weights[j]).sqrt());
        let s = (&s + s.transpose()) * 0.5;
        Some(sorted_eigenvalues(s)[1])
    }
}

pub fn birth_death_chain(volume: usize, charge: i64, beta: f64) -> Result<BirthDeathChain> {
    if charge < 0 {
        return Err(Error::InvalidArgument(
            "negative charge: apply the ± duality first".into(),
        ));
    }
    if charge as usize > volume || volume == 0 {
        return Err(Error::InvalidArgument(format!(
            "charge {charge} incompatible with volume {volume}"
        )));
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")));
    }
    let v = volume as f64;
    let k = charge as f64;
    let a = volume - charge as usize;
    let l_max = a / 2;
    let down: Vec<f64> = (0..=l_max).map(|l| l as f64 * (k + l as f64) / v).collect();
    let up: Vec<f64> = (0..=l_max)
        .map(|l| {
            if l == l_max {
                return 0.0;
            }
            let h = (a - 2 * l) as f64;
            h * (h - 1.0) * beta / v
        })
        .collect();
    // detailed balance m(l+1) r(l+1, l) = m(l) r(l, l+1)
    let mut weights = vec![1.0; l_max + 1];
    for l in 0..l_max {
        weights[l + 1] = weights[l] * up[l] / down[l + 1];
    }
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    Ok(BirthDeathChain {
        volume,
        charge,
        beta,
        down,
        up,
        weights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamificationBound {
    /// Real root of the drift.
    pub root: f64,
    /// Nearest state to the root.
    pub e0: usize,
    pub c0: f64,
    /// `1 / (2 C₀)`.
    pub certified_gap: f64,
    pub exact_gap: f64,
    pub drift_at_zero: f64,
    pub drift_at_max: f64,
    pub slope_constant: f64,
}

/// Certified Poincaré constant `2 C₀` from the ramification rooted at the
/// zero of the drift, together with the exact gap.
pub fn ramification_gap_bound(chain: &BirthDeathChain) -> Result<RamificationBound> {
    if chain.len() < 2 {
        return Err(Error::InvalidArgument("chain has a single state".into()));
    }
    if chain.beta == 0.0 {
        return Err(Error::DriftCheck("beta = 0 makes the chain absorbing at 0".into()));
    }
    let l_max = chain.l_max() as f64;
    let d0 = chain.drift(0.0);
    let dmax = chain.drift(l_max);
    if d0 < 0.0 || dmax > 0.0 {
        return Err(Error::DriftCheck(format!(
            "drift has no sign change: D(0) = {d0}, D(l_max) = {dmax}"
        )));
    }
    let c = chain.slope_constant();
    let tol = 1e-12;
    for l in 0..=chain.l_max() {
        let s = chain.drift_slope(l as f64);
        if s > -c + tol {
            return Err(Error::DriftCheck(format!(
                "slope D'({l}) = {s} exceeds -C = {}",
                -c
            )));
        }
    }
    // bisection on the decreasing drift
    let (mut lo, mut hi) = (0.0, l_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chain.drift(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let e0 = (root.round() as usize).min(chain.l_max());
    let mut c0: f64 = 0.0;
    for l in 0..=chain.l_max() {
        if l == e0 {
            continue;
        }
        let toward = if l < e0 { chain.drift(l as f64) } else { -chain.drift(l as f64) };
        if toward <= 0.0 {
            return Err(Error::DriftCheck(format!(
                "no drift toward e0 = {e0} at l = {l}"
            )));
        }
        c0 = c0.max(l.abs_diff(e0) as f64 / toward);
    }
    Ok(RamificationBound {
        root,
        e0,
        c0,
        certified_gap: 1.0 / (2.0 * c0),
        exact_gap: chain.exact_gap().expect("two states"),
        drift_at_zero: d0,
        drift_at_max: dmax,
        slope_constant: c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    /// `max |(L̃^m f)(η) - (𝓛 f̃)(X(η))|` over indicator test functions.
    pub generator_defect: f64,
    /// `max_l |μ(X = l) - m̃(l)|`.
    pub weight_defect: f64,
    pub states: usize,
}

/// Check that the mean-field generator commutes with the projection `X`.
pub fn projection_identity_check(volume: usize, charge: i64, rates: &RateSet) -> Result<ProjectionReport> {
    let beta = rates
        .beta()
        .ok_or_else(|| Error::Rates("projection needs c_annihilate > 0".into()))?;
    let geom = TorusGeometry::free_box(1, volume)?;
    let gen = build_generator(&geom, charge, rates, GeneratorVariant::MeanField)?;
    let chain = birth_death_chain(volume, charge, beta)?;
    let x: Vec<usize> = gen
        .states
        .iter()
        .map(|s| s.iter().filter(|&&v| v == -1).count())
        .collect();
    let mut defect: f64 = 0.0;
    for l in 0..chain.len() {
        let f: Vec<f64> = x.iter().map(|&xl| (xl == l) as i32 as f64).collect();
        let mut ft = vec![0.0; chain.len()];
        ft[l] = 1.0;
        let lf = gen.apply_vec(&f);
        let lft = chain.apply(&ft);
        for (i, &xi) in x.iter().enumerate() {
            defect = defect.max((lf[i] - lft[xi]).abs());
        }
    }
    let mut push = vec![0.0; chain.len()];
    for (i, &xi) in x.iter().enumerate() {
        push[xi] += gen.weights[i];
    }
    let weight_defect = push
        .iter()
        .zip(&chain.weights)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ProjectionReport {
        generator_defect: defect,
        weight_defect,
        states: gen.len(),
    })
}
