//! Green–Kubo estimator on a small torus.
//!
//! With `J_i = Σ_x W_{x,x+e_i}` the total current and `ν_ρ` the product
//! measure on the whole torus state space,
//! `B_ij(λ) = N^{-d} ⟨J_i, (λ - L)^{-1} J_j⟩_ν` and
//! `D_ij(λ) = χ^{-1} (A δ_ij - B_ij(λ))`. The generator preserves the charge,
//! so the resolvent is solved hyperplane by hyperplane.

use serde::{Deserialize, Serialize};

use super::bond_activity;
use crate::error::{Error, Result};
use crate::lattice::TorusGeometry;
use crate::linalg::{conjugate_gradient, CgOptions};
use crate::measures::{compressibility, marginals, product_weight};
use crate::process::{pair_current, CaseTag, RateSet};
use crate::spectral::{build_generator, GeneratorVariant};

/// Largest torus state space `3^{N^d}` accepted by default.
pub const GREEN_KUBO_STATE_CAP: u128 = 600_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenKuboOptions {
    /// Strictly decreasing, each half the previous one.
    pub lambdas: Vec<f64>,
    /// Relative change between the last two extrapolants counted as converged.
    pub convergence_tol: f64,
    /// Also solve at `λ = 0` on the orthogonal complement of the constants.
    pub solve_at_zero: bool,
    pub state_cap: u128,
}

impl Default for GreenKuboOptions {
    fn default() -> Self {
        Self {
            lambdas: vec![0.5, 0.25, 0.125, 0.0625],
            convergence_tol: 1e-3,
            solve_at_zero: false,
            state_cap: GREEN_KUBO_STATE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenKuboSample {
    pub lambda: f64,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenKuboResult {
    /// Richardson extrapolant `2D(λ_m) - D(λ_{m-1})` of the last two samples.
    pub matrix: Vec<Vec<f64>>,
    pub raw: Vec<GreenKuboSample>,
    pub converged: bool,
    /// `D` from the `λ = 0` solve when requested.
    pub at_zero: Option<Vec<Vec<f64>>>,
    pub activity: f64,
    pub chi: f64,
    /// `B_ij` at `λ = 0`, when solved there.
    pub current_term: Option<Vec<Vec<f64>>>,
}

fn check_lambdas(l: &[f64]) -> Result<()> {
    if l.len() < 2 {
        return Err(Error::InvalidArgument("need at least two λ values".into()));
    }
    if l.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument("λ values must be positive".into()));
    }
    if l.windows(2).any(|w| (w[1] - 0.5 * w[0]).abs() > 1e-12 * w[0]) {
        return Err(Error::InvalidArgument("λ sequence must halve at each step".into()));
    }
    Ok(())
}

pub fn green_kubo_matrix(rho: f64, rates: &RateSet, geom: &TorusGeometry, opts: &GreenKuboOptions) -> Result<GreenKuboResult> {
    if rates.case()? != CaseTag::Case1 {
        return Err(Error::Rates("Green–Kubo estimator needs case 1 rates".into()));
    }
    if !geom.is_periodic() || geom.side() < 3 {
        return Err(Error::Geometry("Green–Kubo needs a torus of side ≥ 3".into()));
    }
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("ρ = {rho} must lie in (-1, 1)")));
    }
    check_lambdas(&opts.lambdas)?;
    let volume = geom.num_sites();
    let states = 3u128.checked_pow(volume as u32).unwrap_or(u128::MAX);
    if states > opts.state_cap {
        return Err(Error::StateSpaceTooLarge {
            states,
            cap: opts.state_cap,
        });
    }
    let d = geom.dim();
    let m = marginals(rho, rates)?;
    let chi = compressibility(rho, rates)?;
    let activity = bond_activity(rho, rates)?;
    let right: Vec<Vec<usize>> = (0..d)
        .map(|axis| (0..volume).map(|x| geom.neighbor(x, axis, 1).expect("periodic")).collect())
        .collect();

    let n_l = opts.lambdas.len();
    let mut b = vec![vec![vec![0.0; d]; d]; n_l];
    let mut b0 = vec![vec![0.0; d]; d];
    let cg = CgOptions::default();
    for charge in -(volume as i64)..=(volume as i64) {
        let gen = build_generator(geom, charge, rates, GeneratorVariant::Torus)?;
        let w: Vec<f64> = gen.states.iter().map(|s| product_weight(s, &m)).collect();
        let currents: Vec<Vec<f64>> = (0..d)
            .map(|axis| {
                gen.states
                    .iter()
                    .map(|s| (0..volume).map(|x| pair_current(s[x], s[right[axis][x]], rates)).sum())
                    .collect()
            })
            .collect();
        if currents.iter().all(|j| j.iter().all(|v| *v == 0.0)) {
            continue;
        }
        for (li, &lambda) in opts.lambdas.iter().enumerate() {
            for j in 0..d {
                let (g, _) = conjugate_gradient(
                    |x, out| {
                        gen.apply(x, out);
                        out.iter_mut().zip(x).for_each(|(o, x)| *o = lambda * x - *o);
                    },
                    &currents[j],
                    Some(&w),
                    None,
                    cg,
                )?;
                for i in 0..d {
                    b[li][i][j] += weighted(&w, &currents[i], &g);
                }
            }
        }
        if opts.solve_at_zero {
            let total: f64 = w.iter().sum();
            let unit = vec![1.0 / total.sqrt(); w.len()];
            for j in 0..d {
                let (g, _) = conjugate_gradient(
                    |x, out| {
                        gen.apply(x, out);
                        out.iter_mut().for_each(|o| *o = -*o);
                    },
                    &currents[j],
                    Some(&w),
                    Some(&unit),
                    cg,
                )?;
                for i in 0..d {
                    b0[i][j] += weighted(&w, &currents[i], &g);
                }
            }
        }
    }
    let scale = 1.0 / volume as f64;
    let to_d = |bm: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let a = if i == j { activity } else { 0.0 };
                        (a - scale * bm[i][j]) / chi
                    })
                    .collect()
            })
            .collect()
    };
    let raw: Vec<GreenKuboSample> = opts
        .lambdas
        .iter()
        .zip(&b)
        .map(|(&lambda, bm)| GreenKuboSample {
            lambda,
            matrix: to_d(bm),
        })
        .collect();
    let rich = |k: usize| -> Vec<Vec<f64>> {
        let (hi, lo) = (&raw[k - 1].matrix, &raw[k].matrix);
        (0..d).map(|i| (0..d).map(|j| 2.0 * lo[i][j] - hi[i][j]).collect()).collect()
    };
    let matrix = rich(n_l - 1);
    let converged = if n_l >= 3 {
        let prev = rich(n_l - 2);
        matrix
            .iter()
            .flatten()
            .zip(prev.iter().flatten())
            .all(|(a, b)| (a - b).abs() <= opts.convergence_tol * a.abs().max(1e-12))
    } else {
        true
    };
    if !converged {
        log::warn!("Green–Kubo λ-extrapolation not converged; raw sequence attached");
    }
    let (at_zero, current_term) = if opts.solve_at_zero {
        let bz: Vec<Vec<f64>> = b0.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
        (Some(to_d(&b0)), Some(bz))
    } else {
        (None, None)
    };
    Ok(GreenKuboResult {
        matrix,
        raw,
        converged,
        at_zero,
        activity,
        chi,
        current_term,
    })
}

fn weighted(w: &[f64], x: &[f64], y: &[f64]) -> f64 {
    w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::gradient_diffusion;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gradient_rates_have_no_current_term() {
        let r = RateSet::new(2., 1., 0.5, 2., 0.5).unwrap();
        let geom = TorusGeometry::torus(1, 5).unwrap();
        let res = green_kubo_matrix(0.3, &r, &geom, &GreenKuboOptions::default()).unwrap();
        assert_abs_diff_eq!(res.matrix[0][0], gradient_diffusion(0.3, &r).unwrap(), epsilon = 1e-10);
        assert!(res.converged);
    }

    #[test]
    fn nongradient_current_term_is_positive() {
        let r = RateSet::new(1., 1., 0., 1., 1.).unwrap();
        let geom = TorusGeometry::torus(1, 5).unwrap();
        let opts = GreenKuboOptions {
            solve_at_zero: true,
            ..Default::default()
        };
        let res = green_kubo_matrix(0.0, &r, &geom, &opts).unwrap();
        let b = res.current_term.unwrap()[0][0];
        assert!(b > 1e-4, "{b}");
        // B(λ) increases as λ decreases
        assert!(res.raw.windows(2).all(|w| w[1].matrix[0][0] < w[0].matrix[0][0]));
    }

    #[test]
    fn agrees_with_variational_estimator() {
        let r = RateSet::new(1., 1., 0., 1., 1.).unwrap();
        let geom = TorusGeometry::torus(1, 8).unwrap();
        let opts = GreenKuboOptions {
            solve_at_zero: true,
            ..Default::default()
        };
        let res = green_kubo_matrix(0.0, &r, &geom, &opts).unwrap();
        let v = crate::diffusion::variational_diffusion(0.0, &r, 2).unwrap();
        assert_abs_diff_eq!(res.at_zero.unwrap()[0][0], v, epsilon = 1e-4);
        assert_abs_diff_eq!(res.matrix[0][0], v, epsilon = 1e-4);
    }

    #[test]
    fn rejects_bad_input() {
        let r = RateSet::new(1., 1., 0., 1., 1.).unwrap();
        let o = GreenKuboOptions::default();
        assert!(green_kubo_matrix(0.0, &r, &TorusGeometry::torus(1, 2).unwrap(), &o).is_err());
        assert!(green_kubo_matrix(0.0, &r, &TorusGeometry::free_box(1, 4).unwrap(), &o).is_err());
        assert!(green_kubo_matrix(0.0, &r, &TorusGeometry::torus(1, 14).unwrap(), &o).is_err());
        let bad = GreenKuboOptions {
            lambdas: vec![0.5, 0.2],
            ..Default::default()
        };
        assert!(green_kubo_matrix(0.0, &r, &TorusGeometry::torus(1, 4).unwrap(), &bad).is_err());
    }
}
