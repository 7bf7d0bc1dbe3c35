//! The diffusion coefficient `d(ρ)`: closed form on the gradient manifold,
//! a finite-support variational estimator, a Green–Kubo estimator on small
//! tori, two-sided bounds, and the integrated coefficient `d̃`.

mod green_kubo;
mod variational;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use green_kubo::{green_kubo_matrix, GreenKuboOptions, GreenKuboResult, GreenKuboSample};
pub use variational::{variational_detail, variational_diffusion, VariationalDetail, MAX_K};

use crate::error::{Error, Result};
use crate::measures::{compressibility, marginals, phi_prime};
use crate::process::{pair_move, CaseTag, RateSet, ALL_PAIRS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DiffusionMethod {
    ClosedForm,
    Variational { k: usize },
    GreenKubo { n: usize, lambda: f64 },
}

impl fmt::Display for DiffusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffusionMethod::ClosedForm => f.write_str("closed_form"),
            DiffusionMethod::Variational { .. } => f.write_str("variational"),
            DiffusionMethod::GreenKubo { .. } => f.write_str("green_kubo"),
        }
    }
}

/// Sampled `d(ρ)` with bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionTable {
    pub rho: Vec<f64>,
    pub values: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub method: DiffusionMethod,
}

/// `d̃(ρ) = ∫_{-1}^ρ d` on the nodes of a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratedDiffusion {
    pub rho: Vec<f64>,
    pub dtilde: Vec<f64>,
    /// The integrand, kept for monotone interpolation.
    pub d: Vec<f64>,
}

fn require_case1(rates: &RateSet) -> Result<()> {
    match rates.case()? {
        CaseTag::Case1 => Ok(()),
        c => Err(Error::Rates(format!("diffusion estimators need case 1 rates, got {c}"))),
    }
}

/// `d(ρ) = -Φ'(ρ)(C₊ - C₋)/2 + (C₊ + C₋)/2` on the gradient manifold.
pub fn gradient_diffusion(rho: f64, rates: &RateSet) -> Result<f64> {
    require_case1(rates)?;
    if !rates.is_gradient() {
        return Err(Error::Rates(format!(
            "closed form needs C₊ + C₋ - C_A - 2C_E = 0 (defect {:.3e})",
            rates.gradient_defect()
        )));
    }
    let dp = phi_prime(rho, rates)?;
    Ok(-dp * (rates.c_plus - rates.c_minus) / 2.0 + (rates.c_plus + rates.c_minus) / 2.0)
}

/// `⟨c_b (π_b η(0))²⟩_ρ` for the directed bond `b = (0, e)`.
pub fn bond_activity(rho: f64, rates: &RateSet) -> Result<f64> {
    let m = marginals(rho, rates)?;
    Ok(ALL_PAIRS
        .iter()
        .map(|&(a, b)| {
            let c = rates.pair_rate(a, b);
            match pair_move(a, b) {
                Some((na, _)) if c > 0.0 => {
                    let jump = (na - a) as f64;
                    m.prob(a) * m.prob(b) * c * jump * jump
                }
                _ => 0.0,
            }
        })
        .sum())
}

/// `⟨Ψ²⟩_ρ` entering the lower bound: `Σ p_a p_b / (4 c_eff)` over the three
/// charge-carrying classes, each with its effective conductance.
pub fn psi_square(rho: f64, rates: &RateSet) -> Result<f64> {
    let m = marginals(rho, rates)?;
    let big = rates.c_annihilate + 2.0 * rates.c_exchange;
    let mut s = m.p_plus * m.p_zero / (4.0 * rates.c_plus) + m.p_zero * m.p_minus / (4.0 * rates.c_minus);
    if m.p_plus * m.p_minus > 0.0 {
        s += 2.0 * m.p_plus * m.p_minus / big;
    }
    Ok(s)
}

/// `(χ / (4⟨Ψ²⟩), ⟨c_b (π_b η(0))²⟩ / χ)`, with the boundary limits
/// `C₊`, `C₋` at `ρ = ±1`.
pub fn diffusion_bounds(rho: f64, rates: &RateSet) -> Result<(f64, f64)> {
    require_case1(rates)?;
    if rho >= 1.0 {
        return Ok((rates.c_plus, rates.c_plus));
    }
    if rho <= -1.0 {
        return Ok((rates.c_minus, rates.c_minus));
    }
    let chi = compressibility(rho, rates)?;
    let lower = chi / (4.0 * psi_square(rho, rates)?);
    let upper = bond_activity(rho, rates)? / chi;
    Ok((lower, upper))
}

/// Boundary value of `d` at `ρ = ±1`, `None` inside.
pub fn boundary_value(rho: f64, rates: &RateSet) -> Option<f64> {
    if rho >= 1.0 {
        Some(rates.c_plus)
    } else if rho <= -1.0 {
        Some(rates.c_minus)
    } else {
        None
    }
}

fn check_grid(rho: &[f64]) -> Result<()> {
    if rho.len() < 2 || rho.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("ρ grid must be strictly increasing with ≥ 2 points".into()));
    }
    if rho.iter().any(|r| r.abs() > 1.0) {
        return Err(Error::InvalidArgument("ρ grid must lie in [-1, 1]".into()));
    }
    Ok(())
}

/// Uniform grid of `n` points on `[-1, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
}

fn table_from<F: Fn(f64) -> Result<f64>>(rho: &[f64], rates: &RateSet, method: DiffusionMethod, f: F) -> Result<DiffusionTable> {
    check_grid(rho)?;
    let mut values = Vec::with_capacity(rho.len());
    let mut lower = Vec::with_capacity(rho.len());
    let mut upper = Vec::with_capacity(rho.len());
    for &r in rho {
        let (lo, hi) = diffusion_bounds(r, rates)?;
        values.push(match boundary_value(r, rates) {
            Some(v) => v,
            None => f(r)?,
        });
        lower.push(lo);
        upper.push(hi);
    }
    Ok(DiffusionTable {
        rho: rho.to_vec(),
        values,
        lower,
        upper,
        method,
    })
}

pub fn closed_form_table(rho: &[f64], rates: &RateSet) -> Result<DiffusionTable> {
    table_from(rho, rates, DiffusionMethod::ClosedForm, |r| gradient_diffusion(r, rates))
}

pub fn variational_table(rho: &[f64], rates: &RateSet, k: usize) -> Result<DiffusionTable> {
    table_from(rho, rates, DiffusionMethod::Variational { k }, |r| variational_diffusion(r, rates, k))
}

/// Cumulative trapezoid integral of the table from `ρ = -1`.
pub fn integrate_dtilde(table: &DiffusionTable) -> Result<IntegratedDiffusion> {
    check_grid(&table.rho)?;
    if (table.rho[0] + 1.0).abs() > 1e-12 || (table.rho[table.rho.len() - 1] - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument("table must span [-1, 1]".into()));
    }
    if let Some(v) = table.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidArgument(format!("diffusion values must be positive, found {v}")));
    }
    let mut dtilde = vec![0.0; table.rho.len()];
    for i in 1..table.rho.len() {
        let h = table.rho[i] - table.rho[i - 1];
        dtilde[i] = dtilde[i - 1] + 0.5 * h * (table.values[i] + table.values[i - 1]);
    }
    Ok(IntegratedDiffusion {
        rho: table.rho.clone(),
        dtilde,
        d: table.values.clone(),
    })
}

/// Largest jump between adjacent table entries.
pub fn max_adjacent_jump(table: &DiffusionTable) -> f64 {
    table
        .values
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grad() -> RateSet {
        RateSet::new(2., 1., 0.5, 2., 0.5).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        assert_abs_diff_eq!(gradient_diffusion(0.4, &grad()).unwrap(), 1.7, epsilon = 1e-14);
        assert_abs_diff_eq!(gradient_diffusion(1.0, &grad()).unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(gradient_diffusion(-1.0, &grad()).unwrap(), 1.0, epsilon = 1e-14);
        let sym = RateSet::new(1.5, 1.5, 0.25, 2.5, 0.7).unwrap();
        for rho in [-0.9, 0.0, 0.3] {
            assert_abs_diff_eq!(gradient_diffusion(rho, &sym).unwrap(), 1.5, epsilon = 1e-14);
        }
        assert!(gradient_diffusion(0.0, &RateSet::new(1., 1., 0., 1., 1.).unwrap()).is_err());
        assert!(gradient_diffusion(0.0, &RateSet::new(3., 1., 0., 4., 0.).unwrap()).is_err());
    }

    #[test]
    fn activity_hand_value() {
        // p = (1/4, 1/2, 1/4); five active pairs each contribute 1/8
        assert_abs_diff_eq!(bond_activity(0.0, &grad()).unwrap(), 0.75, epsilon = 1e-14);
        let (lo, hi) = diffusion_bounds(0.0, &grad()).unwrap();
        assert_abs_diff_eq!(hi, 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(lo, 0.5 / (4.0 * (0.125 / 8.0 + 0.125 / 4.0 + 0.125 / 3.0)), epsilon = 1e-14);
    }

    #[test]
    fn bounds_sandwich_closed_form() {
        let r = grad();
        for rho in uniform_grid(41) {
            let (lo, hi) = diffusion_bounds(rho, &r).unwrap();
            let d = gradient_diffusion(rho, &r).unwrap();
            assert!(lo <= d + 1e-12 && d <= hi + 1e-12, "rho {rho}: {lo} {d} {hi}");
        }
    }

    #[test]
    fn bounds_tend_to_boundary_rates() {
        let r = RateSet::new(1.3, 0.6, 0.2, 0.9, 2.0).unwrap();
        let (lo, hi) = diffusion_bounds(1.0 - 1e-7, &r).unwrap();
        assert_abs_diff_eq!(hi, 1.3, epsilon = 1e-5);
        assert_abs_diff_eq!(lo, 1.3, epsilon = 1e-5);
        let (lo, hi) = diffusion_bounds(-1.0 + 1e-7, &r).unwrap();
        assert_abs_diff_eq!(hi, 0.6, epsilon = 1e-5);
        assert_abs_diff_eq!(lo, 0.6, epsilon = 1e-5);
    }

    #[test]
    fn dtilde_examples() {
        let rho = uniform_grid(41);
        let ones = DiffusionTable {
            values: vec![1.0; 41],
            lower: vec![0.0; 41],
            upper: vec![0.0; 41],
            rho: rho.clone(),
            method: DiffusionMethod::ClosedForm,
        };
        let it = integrate_dtilde(&ones).unwrap();
        for (r, v) in it.rho.iter().zip(&it.dtilde) {
            assert_abs_diff_eq!(*v, r + 1.0, epsilon = 1e-12);
        }
        let t = closed_form_table(&rho, &grad()).unwrap();
        let it = integrate_dtilde(&t).unwrap();
        assert_eq!(it.dtilde[0], 0.0);
        // d linear in ρ, so the trapezoid is exact: d̃(0) = 1.25
        assert_abs_diff_eq!(it.dtilde[20], 1.25, epsilon = 1e-12);
        assert!(it.dtilde.windows(2).all(|w| w[1] > w[0]));
        let mut bad = t.clone();
        bad.rho.swap(3, 4);
        assert!(integrate_dtilde(&bad).is_err());
    }
}
