//! Variational estimator restricted to cylinder functions on `{-k..k}` (d = 1).
//!
//! For `g` with coefficient vector `c` over the `3^{2k+1}` local
//! configurations, `π_b(η(0) + Γ_g)` is linear in `c`, so the bond form is a
//! quadratic `A + 2 rᵀc + cᵀQc` whose coefficients are exact expectations
//! over the window `{-2k..2k+1}` of i.i.d. sites. The minimum is
//! `A - rᵀ Q⁺ r`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::measures::{compressibility, marginals};
use crate::process::{pair_move, CaseTag, RateSet};

/// Largest support radius accepted by default.
pub const MAX_K: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalDetail {
    pub value: f64,
    /// Objective at `g = 0`.
    pub activity: f64,
    /// Minimized objective.
    pub minimum: f64,
    /// Numerical rank of the normal matrix.
    pub rank: usize,
    pub dimension: usize,
}

pub fn variational_diffusion(rho: f64, rates: &RateSet, k: usize) -> Result<f64> {
    Ok(variational_detail(rho, rates, k)?.value)
}

pub fn variational_detail(rho: f64, rates: &RateSet, k: usize) -> Result<VariationalDetail> {
    if rates.case()? != CaseTag::Case1 {
        return Err(Error::Rates("variational estimator needs case 1 rates".into()));
    }
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("ρ = {rho} must lie in (-1, 1)")));
    }
    if k > MAX_K {
        return Err(Error::StateSpaceTooLarge {
            states: 3u128.pow(4 * k as u32 + 2),
            cap: 3u128.pow(4 * MAX_K as u32 + 2),
        });
    }
    let chi = compressibility(rho, rates)?;
    let m = marginals(rho, rates)?;
    let probs = [m.p_minus, m.p_zero, m.p_plus];
    let table = rates.table();

    // window sites -2k..=2k+1 stored at offset +2k; bond (0,1) at (2k, 2k+1)
    let width = 4 * k + 2;
    let x0 = 2 * k;
    let support = 2 * k + 1;
    let dim = 3usize.pow(support as u32);
    let shifts: Vec<usize> = (0..=(2 * k + 1)).collect(); // τ_x g starts at window index shift
    let mut q = DMatrix::<f64>::zeros(dim, dim);
    let mut r = DVector::<f64>::zeros(dim);
    let mut activity = 0.0;

    let mut digits = vec![0usize; width];
    let mut spins = vec![-1i8; width];
    let mut v: Vec<(usize, f64)> = Vec::with_capacity(2 * shifts.len());
    let code = |s: &[i8], start: usize| -> usize {
        s[start..start + support].iter().fold(0, |acc, &x| acc * 3 + (x + 1) as usize)
    };
    loop {
        let (a, b) = (spins[x0], spins[x0 + 1]);
        let c = table[((a + 1) * 3 + (b + 1)) as usize];
        if c > 0.0 {
            let w: f64 = digits.iter().map(|&d| probs[d]).product();
            if w > 0.0 {
                let (na, nb) = pair_move(a, b).expect("active");
                let jump = (na - a) as f64;
                v.clear();
                for &s in &shifts {
                    v.push((code(&spins, s), -1.0));
                }
                spins[x0] = na;
                spins[x0 + 1] = nb;
                for &s in &shifts {
                    v.push((code(&spins, s), 1.0));
                }
                spins[x0] = a;
                spins[x0 + 1] = b;
                let wc = w * c;
                activity += wc * jump * jump;
                for &(i, vi) in &v {
                    r[i] += wc * jump * vi;
                    for &(j, vj) in &v {
                        q[(i, j)] += wc * vi * vj;
                    }
                }
            }
        }
        // odometer over the window
        let mut pos = width;
        loop {
            if pos == 0 {
                return finish(q, r, activity, chi, dim);
            }
            pos -= 1;
            if digits[pos] < 2 {
                digits[pos] += 1;
                spins[pos] = digits[pos] as i8 - 1;
                break;
            }
            digits[pos] = 0;
            spins[pos] = -1;
        }
    }
}

fn finish(q: DMatrix<f64>, r: DVector<f64>, activity: f64, chi: f64, dim: usize) -> Result<VariationalDetail> {
    let q = (&q + q.transpose()) * 0.5;
    let eig = SymmetricEigen::new(q);
    let top = eig.eigenvalues.amax();
    let cutoff = 1e-12 * top.max(1e-300);
    let mut reduction = 0.0;
    let mut rank = 0;
    for i in 0..dim {
        let lam = eig.eigenvalues[i];
        if lam > cutoff {
            rank += 1;
            let p = eig.eigenvectors.column(i).dot(&r);
            reduction += p * p / lam;
        }
    }
    let minimum = (activity - reduction).max(0.0);
    Ok(VariationalDetail {
        value: minimum / chi,
        activity,
        minimum,
        rank,
        dimension: dim,
    })
}
