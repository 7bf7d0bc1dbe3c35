//! Per-bond comparison between the Dirichlet forms of the original rates and
//! the reference rates `(1, 1, 1, 1, β)`.
//!
//! Conditioned on the spins outside a bond, the two-site pair `(a, b)` keeps
//! its sum and carries weights proportional to `p_a p_b`. Each bond form is
//! therefore block diagonal over the five pair-sum classes, and the best
//! constant in `⟨-L̃_b f, f⟩ ≤ C ⟨-L_b f, f⟩` is the largest generalized
//! eigenvalue over the blocks.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_generator, GeneratorMatrix, GeneratorVariant};
use crate::error::{Error, Result};
use crate::lattice::TorusGeometry;
use crate::process::{pair_move, CaseTag, RateSet, ALL_PAIRS};

const KERNEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Best constant from the exact per-bond generalized eigenproblem.
    pub local_ratio: f64,
    /// Largest ratio seen on random global test vectors.
    pub global_ratio: f64,
    /// `1 / min{C₊, C₋, C_A/3}`.
    pub bound: f64,
    /// `bound - max(local_ratio, global_ratio)`.
    pub slack: f64,
}

fn pair_weight(a: i8, b: i8, beta: f64) -> f64 {
    if a * b == -1 {
        beta
    } else {
        1.0
    }
}

/// Weighted bond form `⟨-(L_xy + L_yx) f, f⟩` restricted to pairs with sum `s`.
fn class_form(rates: &RateSet, beta: f64, class: &[(i8, i8)]) -> DMatrix<f64> {
    let n = class.len();
    let idx = |p: (i8, i8)| class.iter().position(|&q| q == p).expect("move stays in class");
    let mut m = DMatrix::zeros(n, n);
    for (i, &(a, b)) in class.iter().enumerate() {
        let w = pair_weight(a, b, beta);
        if w == 0.0 {
            continue;
        }
        // bond (x, y) reads (a, b); bond (y, x) reads (b, a)
        let forward = pair_move(a, b).map(|t| (rates.pair_rate(a, b), t));
        let backward = pair_move(b, a).map(|(nb, na)| (rates.pair_rate(b, a), (na, nb)));
        for (c, target) in [forward, backward].into_iter().flatten() {
            if c == 0.0 {
                continue;
            }
            let j = idx(target);
            // w c (f_j - f_i) (-f_i) summed over the two orientations gives the
            // symmetric form ½ Σ w c (f_j - f_i)²; assemble it directly
            let v = 0.5 * w * c;
            m[(i, i)] += v;
            m[(j, j)] += v;
            m[(i, j)] -= v;
            m[(j, i)] -= v;
        }
    }
    m
}

/// Best constant `C` in `⟨-L̃_b f,f⟩ ≤ C ⟨-L_b f,f⟩` on a single bond.
pub fn local_comparison_ratio(rates: &RateSet) -> Result<f64> {
    let beta = match rates.case()? {
        CaseTag::Case3 => return Err(Error::Rates("comparison needs c_annihilate > 0".into())),
        _ => rates.beta().expect("C_A > 0"),
    };
    let tilde = RateSet::tilde(beta)?;
    let mut worst: f64 = 0.0;
    for s in -2..=2i8 {
        let class: Vec<(i8, i8)> = ALL_PAIRS
            .iter()
            .copied()
            .filter(|&(a, b)| a + b == s && pair_weight(a, b, beta) > 0.0)
            .collect();
        let full = class_form(rates, beta, &class);
        let ref_form = class_form(&tilde, beta, &class);
        let eig = SymmetricEigen::new(full);
        let scale = eig.eigenvalues.amax().max(1.0);
        let range: Vec<usize> = (0..class.len())
            .filter(|&i| eig.eigenvalues[i] > KERNEL_TOL * scale)
            .collect();
        // the reference form must vanish on the kernel of the full form
        for k in (0..class.len()).filter(|i| !range.contains(i)) {
            let v = eig.eigenvectors.column(k);
            let q = (v.transpose() * &ref_form * v)[(0, 0)];
            if q > KERNEL_TOL * scale {
                return Err(Error::ComparisonViolated {
                    ratio: f64::INFINITY,
                    bound: comparison_bound(rates),
                });
            }
        }
        if range.is_empty() {
            continue;
        }
        let r = range.len();
        let mut b = DMatrix::zeros(class.len(), r);
        for (c, &k) in range.iter().enumerate() {
            let col = eig.eigenvectors.column(k) / eig.eigenvalues[k].sqrt();
            b.set_column(c, &col);
        }
        let reduced = b.transpose() * &ref_form * &b;
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let top = SymmetricEigen::new(reduced).eigenvalues.max();
        worst = worst.max(top);
    }
    Ok(worst)
}

pub fn comparison_bound(rates: &RateSet) -> f64 {
    1.0 / rates.c_plus.min(rates.c_minus).min(rates.c_annihilate / 3.0)
}

/// Sum of per-bond forms is the global form; compare on random vectors.
fn global_random_ratio(full: &GeneratorMatrix, tilde: &GeneratorMatrix, samples: usize, seed: u64) -> Result<f64> {
    let n = full.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let f: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let den = full.dirichlet_form(&f, &f)?;
        let num = tilde.dirichlet_form(&f, &f)?;
        if den <= 1e-14 * f.iter().map(|x| x * x).sum::<f64>() {
            continue;
        }
        worst = worst.max(num / den);
    }
    Ok(worst)
}

/// Empirical comparison constant for the given rates, from the exact
/// per-bond generalized eigenproblem and from random vectors on the
/// hyperplane of `geom` with charge `charge`. Fails if it exceeds the bound.
pub fn comparison_check(geom: &TorusGeometry, charge: i64, rates: &RateSet) -> Result<ComparisonReport> {
    let local = local_comparison_ratio(rates)?;
    let full = build_generator(geom, charge, rates, GeneratorVariant::Full)?;
    let tilde = build_generator(geom, charge, rates, GeneratorVariant::Tilde)?;
    let global = if full.len() > 1 {
        global_random_ratio(&full, &tilde, 200, 0xc0ffee ^ charge as u64)?
    } else {
        0.0
    };
    let bound = comparison_bound(rates);
    let ratio = local.max(global);
    if ratio > bound + 1e-9 {
        return Err(Error::ComparisonViolated { ratio, bound });
    }
    Ok(ComparisonReport {
        local_ratio: local,
        global_ratio: global,
        bound,
        slack: bound - ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_rates_give_unit_ratio() {
        for beta in [0.2, 1.0, 3.0] {
            let rates = RateSet::new(1., 1., 1., 1., beta).unwrap();
            assert_relative_eq!(local_comparison_ratio(&rates).unwrap(), 1.0, max_relative = 1e-12);
            assert!(local_comparison_ratio(&rates).unwrap() <= 3.0);
        }
    }

    #[test]
    fn bound_example_with_large_annihilation() {
        let rates = RateSet::new(1., 1., 0., 3., 3.0 * 0.5).unwrap();
        assert_relative_eq!(comparison_bound(&rates), 1.0);
        let r = local_comparison_ratio(&rates).unwrap();
        assert!(r <= 1.0 + 1e-9, "{r}");
    }

    #[test]
    fn hand_checked_hopping_class() {
        // class s = 1 is a two-state chain; ratio = tilde rate / full rate = 1 / C₊ ∨ ...
        // with C_E large, C_A large, the hopping classes dominate
        let rates = RateSet::new(0.5, 2.0, 10.0, 30.0, 30.0).unwrap();
        // s = 1 class: forward (1,0)->(0,1) at C₊ and backward (0,1) read as (1,0) at C₊
        assert_relative_eq!(local_comparison_ratio(&rates).unwrap(), 2.0, max_relative = 1e-10);
    }

    #[test]
    fn global_check_runs() {
        let g = TorusGeometry::free_box(1, 4).unwrap();
        let rates = RateSet::new(2., 1., 0.5, 2., 0.5).unwrap();
        let rep = comparison_check(&g, 0, &rates).unwrap();
        assert!(rep.slack >= 0.0);
        assert!(rep.global_ratio <= rep.local_ratio + 1e-9);
        assert!(comparison_check(&g, 0, &RateSet::new(1., 1., 1., 0., 1.).unwrap()).is_err());
    }
}
