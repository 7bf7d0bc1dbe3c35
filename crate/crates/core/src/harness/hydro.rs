//! Hydrodynamic-limit experiments: ensembles of KMC runs against the
//! macroscopic equation.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{HydroConfig, InitialSpec, ProfileSpec, Reference};
use crate::diffusion::{closed_form_table, uniform_grid, variational_table};
use crate::error::{Error, Result};
use crate::kmc::{
    deterministic_profile, empirical_field, local_equilibrium, simulate, sub_seed, EmpiricalField, MarginalFamily,
    SimulateOptions,
};
use crate::lattice::TorusGeometry;
use crate::pde::{make_flux, solve, weak_residual, DensityProfile, FluxFunction, SolveOptions, TestFunction};
use crate::process::{CaseTag, Configuration, RateSet};

/// Snapshots used for the weak residual, besides the comparison times.
const DENSE_SNAPSHOTS: usize = 200;

/// `M^{-d} Σ |a - b|` after averaging the finer field onto the coarser grid.
///
/// The coarse value at node `i/M` is the trapezoid-weighted mean of the fine
/// values within half a coarse cell of it. The finer resolution must be an
/// integer multiple of the coarser.
pub fn compare_fields(empirical: &EmpiricalField, profile: &DensityProfile) -> Result<f64> {
    if empirical.dim != profile.dim {
        return Err(Error::DimensionMismatch {
            expected: profile.dim,
            got: empirical.dim,
        });
    }
    let (n, m, d) = (empirical.side, profile.cells, profile.dim);
    let (a, b) = if n >= m {
        (restrict(&empirical.values, d, n, m)?, profile.values.clone())
    } else {
        (empirical.values.clone(), restrict(&profile.values, d, m, n)?)
    };
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

fn restrict(values: &[f64], dim: usize, fine: usize, coarse: usize) -> Result<Vec<f64>> {
    if !fine.is_multiple_of(coarse) {
        return Err(Error::InvalidArgument(format!(
            "grid sizes {fine} and {coarse} are not nested"
        )));
    }
    let r = fine / coarse;
    let weights: Vec<(i64, f64)> = if r % 2 == 1 {
        let h = (r / 2) as i64;
        (-h..=h).map(|k| (k, 1.0 / r as f64)).collect()
    } else {
        let h = (r / 2) as i64;
        (-h..=h)
            .map(|k| (k, if k.abs() == h { 0.5 } else { 1.0 } / r as f64))
            .collect()
    };
    // one axis at a time; the grid shrinks along the processed axes
    let mut cur = values.to_vec();
    let mut sides = vec![fine; dim];
    for axis in (0..dim).rev() {
        let stride: usize = sides[axis + 1..].iter().product();
        let outer: usize = sides[..axis].iter().product();
        let mut next = vec![0.0; outer * coarse * stride];
        for o in 0..outer {
            for i in 0..coarse {
                for s in 0..stride {
                    let mut acc = 0.0;
                    for &(k, w) in &weights {
                        let j = ((i * r) as i64 + k).rem_euclid(fine as i64) as usize;
                        acc += w * cur[(o * fine + j) * stride + s];
                    }
                    next[(o * coarse + i) * stride + s] = acc;
                }
            }
        }
        sides[axis] = coarse;
        cur = next;
    }
    Ok(cur)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberFailure {
    pub index: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub side: usize,
    pub block_radius: usize,
    pub times: Vec<f64>,
    /// L¹ distance of the ensemble-mean block field to the reference.
    pub ensemble_l1: Vec<f64>,
    /// Mean and standard error over members of the per-member L¹ distance.
    pub member_l1_mean: Vec<f64>,
    pub member_l1_stderr: Vec<f64>,
    /// Mean fraction of empty sites.
    pub hole_fraction: Vec<f64>,
    pub mean_events: f64,
    pub members: usize,
    pub failures: Vec<MemberFailure>,
    #[serde(skip)]
    pub mean_fields: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeSummary {
    pub cells: usize,
    pub lipschitz: f64,
    pub weak_residuals: Vec<(String, f64)>,
    pub residual_ok: bool,
    /// `(t, u)` of the zero level set nearest `u = ½` (two-phase runs).
    pub interface: Option<Vec<(f64, f64)>>,
    pub interface_monotone: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroReport {
    pub case: CaseTag,
    pub tolerance: f64,
    pub reference: Reference,
    pub sides: Vec<SideReport>,
    pub pde: PdeSummary,
    /// Ensemble L¹ error at `t_final` on the largest lattice.
    pub final_error: f64,
    /// Final error strictly decreasing along `sides`.
    pub decreasing: Option<bool>,
    pub pass: bool,
    #[serde(skip)]
    pub reference_profiles: Vec<DensityProfile>,
}

/// Flux of the macroscopic equation for `rates`: closed-form `d` on the
/// gradient manifold, the variational table otherwise.
pub fn hydro_flux(rates: &RateSet, k: usize) -> Result<FluxFunction> {
    match rates.case()? {
        CaseTag::Case1 => {
            let grid = uniform_grid(41);
            let table = if rates.is_gradient() {
                closed_form_table(&grid, rates)?
            } else {
                variational_table(&grid, rates, k)?
            };
            make_flux(rates, Some(&table))
        }
        _ => make_flux(rates, None),
    }
}

pub(crate) fn initial_configuration(
    spec: &InitialSpec,
    rates: &RateSet,
    geom: &TorusGeometry,
    profile: &ProfileSpec,
    seed: u64,
) -> Result<Configuration> {
    let f = |u: &[f64]| profile.eval(u);
    match spec {
        InitialSpec::LocalEquilibrium => local_equilibrium(geom, f, &MarginalFamily::Rates { rates: *rates }, seed),
        InitialSpec::LocalEquilibriumWith { family } => local_equilibrium(geom, f, family, seed),
        InitialSpec::Deterministic => deterministic_profile(geom, f),
    }
}

fn comparison_times(cfg: &HydroConfig) -> Vec<f64> {
    let mut t: Vec<f64> = cfg.times.iter().copied().chain([0.0, cfg.t_final]).collect();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t.dedup();
    t
}

fn analytic_heat(cfg: &HydroConfig, t: f64) -> Result<DensityProfile> {
    let (amplitude, mode, offset) = match cfg.profile {
        ProfileSpec::Cosine { amplitude, mode, offset } => (amplitude, mode, offset),
        _ => return Err(Error::InvalidArgument("analytic heat reference needs a cosine profile".into())),
    };
    let k = 2.0 * PI * mode as f64;
    let decay = (-k * k * cfg.rates.c_exchange * t).exp();
    let mut p = DensityProfile::from_fn(cfg.dim, cfg.pde_cells, |u| offset + amplitude * decay * (k * u[0]).cos())?;
    p.time = t;
    Ok(p)
}

struct MemberOutcome {
    fields: Vec<Vec<f64>>,
    holes: Vec<f64>,
    events: u64,
}

pub fn run_hydro(cfg: &HydroConfig, master_seed: u64) -> Result<HydroReport> {
    let rates = cfg.rates;
    let case = rates.case()?;
    let times = comparison_times(cfg);
    let flux = hydro_flux(&rates, cfg.variational_k)?;

    // macroscopic reference and its diagnostics
    let init = DensityProfile::from_fn(cfg.dim, cfg.pde_cells, |u| cfg.profile.eval(u))?;
    let mut stops: Vec<f64> = (1..=DENSE_SNAPSHOTS)
        .map(|i| cfg.t_final * i as f64 / DENSE_SNAPSHOTS as f64)
        .chain(times.iter().copied())
        .collect();
    stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stops.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let opts = SolveOptions {
        snapshot_times: stops,
        ..Default::default()
    };
    let snaps = solve(&init, &flux, cfg.t_final, &opts)?;
    let tests = [
        TestFunction::constant(1.0),
        TestFunction::cos_mode(1, 0),
        TestFunction::sin_mode(1, 0),
    ];
    let weak_residuals = tests
        .iter()
        .map(|h| Ok((h.name.clone(), weak_residual(&snaps, &flux, h)?)))
        .collect::<Result<Vec<_>>>()?;
    let residual_ok = weak_residuals.iter().all(|(_, r)| *r <= cfg.residual_tolerance);
    let (interface, interface_monotone) = if case == CaseTag::Case2 && cfg.dim == 1 {
        let mut path = Vec::new();
        for s in &snaps {
            if let Some(u) = s
                .zero_crossings()?
                .into_iter()
                .min_by(|a, b| (a - 0.5).abs().partial_cmp(&(b - 0.5).abs()).unwrap())
            {
                path.push((s.time, u));
            }
        }
        let up = path.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12);
        let down = path.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
        (Some(path), Some(up || down))
    } else {
        (None, None)
    };
    let reference_profiles: Vec<DensityProfile> = times
        .iter()
        .map(|&t| match cfg.reference {
            Reference::Pde => snaps
                .iter()
                .find(|s| (s.time - t).abs() < 1e-12)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("no reference profile at t = {t}"))),
            Reference::AnalyticHeat => analytic_heat(cfg, t),
        })
        .collect::<Result<_>>()?;

    let mut sides = Vec::new();
    for &side in &cfg.sides {
        let geom = TorusGeometry::torus(cfg.dim, side)?;
        let l = (((cfg.block_width * side as f64) - 1.0) / 2.0).round().max(0.0) as usize;
        let side_seed = sub_seed(master_seed, side as u64);
        let outcomes: Vec<(usize, u64, Result<MemberOutcome>)> = (0..cfg.ensemble)
            .into_par_iter()
            .map(|i| {
                let seed = sub_seed(side_seed, i as u64);
                let run = || -> Result<MemberOutcome> {
                    let c0 = initial_configuration(&cfg.initial, &rates, &geom, &cfg.profile, sub_seed(seed, 0))?;
                    let tr = simulate(&c0, &rates, &geom, cfg.t_final, &times, sub_seed(seed, 1), &SimulateOptions::default())?;
                    let mut fields = Vec::with_capacity(times.len());
                    let mut holes = Vec::with_capacity(times.len());
                    for c in &tr.snapshots {
                        fields.push(empirical_field(c, &geom, l)?.values);
                        holes.push(c.count(0) as f64 / c.len() as f64);
                    }
                    Ok(MemberOutcome {
                        fields,
                        holes,
                        events: tr.events,
                    })
                };
                (i, seed, run())
            })
            .collect();
        let mut failures = Vec::new();
        let mut ok = Vec::new();
        for (index, seed, r) in outcomes {
            match r {
                Ok(m) => ok.push(m),
                Err(e) => failures.push(MemberFailure {
                    index,
                    seed,
                    message: e.to_string(),
                }),
            }
        }
        if ok.is_empty() {
            return Err(Error::InvalidArgument(format!("every ensemble member failed at N = {side}")));
        }
        let count = ok.len() as f64;
        let mut report = SideReport {
            side,
            block_radius: l,
            times: times.clone(),
            ensemble_l1: Vec::new(),
            member_l1_mean: Vec::new(),
            member_l1_stderr: Vec::new(),
            hole_fraction: Vec::new(),
            mean_events: ok.iter().map(|m| m.events as f64).sum::<f64>() / count,
            members: ok.len(),
            failures,
            mean_fields: Vec::new(),
        };
        let as_field = |values: Vec<f64>| EmpiricalField {
            dim: cfg.dim,
            side,
            radius: l,
            values,
        };
        for (ti, reference) in reference_profiles.iter().enumerate() {
            let n = ok[0].fields[ti].len();
            let mut mean = vec![0.0; n];
            for m in &ok {
                mean.iter_mut().zip(&m.fields[ti]).for_each(|(a, b)| *a += b / count);
            }
            let per_member = ok
                .iter()
                .map(|m| compare_fields(&as_field(m.fields[ti].clone()), reference))
                .collect::<Result<Vec<f64>>>()?;
            let mm = per_member.iter().sum::<f64>() / count;
            let var = if ok.len() > 1 {
                per_member.iter().map(|v| (v - mm).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            report.ensemble_l1.push(compare_fields(&as_field(mean.clone()), reference)?);
            report.member_l1_mean.push(mm);
            report.member_l1_stderr.push((var / count).sqrt());
            report.hole_fraction.push(ok.iter().map(|m| m.holes[ti]).sum::<f64>() / count);
            report.mean_fields.push(mean);
        }
        log::info!(
            "N = {side}: L¹ at T = {:.4}, {} members, {:.3e} events each",
            report.ensemble_l1.last().unwrap(),
            report.members,
            report.mean_events
        );
        sides.push(report);
    }
    let finals: Vec<f64> = sides.iter().map(|s| *s.ensemble_l1.last().unwrap()).collect();
    let final_error = *finals.last().unwrap();
    let decreasing = (finals.len() > 1).then(|| finals.windows(2).all(|w| w[1] < w[0]));
    let any_failure = sides.iter().any(|s| !s.failures.is_empty());
    let pass = final_error <= cfg.tolerance
        && decreasing.unwrap_or(true)
        && residual_ok
        && interface_monotone.unwrap_or(true)
        && !any_failure;
    Ok(HydroReport {
        case,
        tolerance: cfg.tolerance,
        reference: cfg.reference,
        sides,
        pde: PdeSummary {
            cells: cfg.pde_cells,
            lipschitz: flux.lipschitz,
            weak_residuals,
            residual_ok,
            interface,
            interface_monotone,
        },
        final_error,
        decreasing,
        pass,
        reference_profiles,
    })
}

impl HydroReport {
    /// `side,time,ensemble_l1,member_l1_mean,member_l1_stderr,hole_fraction`.
    pub fn errors_csv(&self) -> String {
        let mut s = String::from("side,time,ensemble_l1,member_l1_mean,member_l1_stderr,hole_fraction\n");
        for side in &self.sides {
            for i in 0..side.times.len() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    side.side,
                    side.times[i],
                    side.ensemble_l1[i],
                    side.member_l1_mean[i],
                    side.member_l1_stderr[i],
                    side.hole_fraction[i]
                );
            }
        }
        s
    }

    /// `side,time,cell_index,density` of the ensemble-mean block fields.
    pub fn fields_csv(&self) -> String {
        let mut s = String::from("side,time,cell_index,density\n");
        for side in &self.sides {
            for (t, f) in side.times.iter().zip(&side.mean_fields) {
                for (i, v) in f.iter().enumerate() {
                    let _ = writeln!(s, "{},{},{},{}", side.side, t, i, v);
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn field(side: usize, values: Vec<f64>) -> EmpiricalField {
        EmpiricalField {
            dim: 1,
            side,
            radius: 0,
            values,
        }
    }

    #[test]
    fn compare_fields_examples() {
        let p = DensityProfile::from_fn(1, 8, |u| (2.0 * PI * u[0]).sin() * 0.5).unwrap();
        assert_eq!(compare_fields(&field(8, p.values.clone()), &p).unwrap(), 0.0);
        let shifted: Vec<f64> = p.values.iter().map(|v| v + 0.125).collect();
        assert_abs_diff_eq!(compare_fields(&field(8, shifted), &p).unwrap(), 0.125, epsilon = 1e-15);
        // constant shift survives resampling in either direction
        let fine = DensityProfile::from_fn(1, 32, |_| 0.25).unwrap();
        assert_abs_diff_eq!(compare_fields(&field(8, vec![0.0; 8]), &fine).unwrap(), 0.25, epsilon = 1e-15);
        let coarse = DensityProfile::from_fn(1, 4, |_| -0.5).unwrap();
        assert_abs_diff_eq!(compare_fields(&field(12, vec![0.0; 12]), &coarse).unwrap(), 0.5, epsilon = 1e-15);
        assert!(compare_fields(&field(10, vec![0.0; 10]), &coarse).is_err());
    }

    #[test]
    fn restriction_of_linear_data_is_pointwise() {
        // linear data away from the wrap: trapezoid weights reproduce the node value
        let fine: Vec<f64> = (0..16).map(|x| x as f64).collect();
        let r = restrict(&fine, 1, 16, 4).unwrap();
        assert_abs_diff_eq!(r[1], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[2], 8.0, epsilon = 1e-14);
        let two_d: Vec<f64> = (0..36).map(|i| ((i / 6) * 10 + i % 6) as f64).collect();
        let r = restrict(&two_d, 2, 6, 2).unwrap();
        assert_eq!(r.len(), 4);
        // node (1,1) of the coarse grid sits at fine (3,3); odd ratio averages 3×3
        assert_abs_diff_eq!(r[3], 33.0, epsilon = 1e-12);
    }

    #[test]
    fn small_hydro_run_is_reproducible() {
        let cfg = HydroConfig {
            rates: RateSet::new(1., 1., 1., 0., 1.).unwrap(),
            dim: 1,
            sides: vec![32],
            t_final: 0.01,
            times: vec![],
            profile: ProfileSpec::Cosine {
                amplitude: 0.5,
                mode: 1,
                offset: 0.0,
            },
            ensemble: 3,
            block_width: 0.125,
            pde_cells: 32,
            tolerance: 1.0,
            initial: InitialSpec::LocalEquilibrium,
            reference: Reference::AnalyticHeat,
            variational_k: 2,
            residual_tolerance: 1.0,
        };
        let a = run_hydro(&cfg, 5).unwrap();
        let b = run_hydro(&cfg, 5).unwrap();
        assert_eq!(a.errors_csv(), b.errors_csv());
        assert_eq!(a.fields_csv(), b.fields_csv());
        assert_eq!(a.sides[0].block_radius, 2);
        assert!(a.sides[0].hole_fraction.iter().all(|h| *h == 0.0));
    }
}
