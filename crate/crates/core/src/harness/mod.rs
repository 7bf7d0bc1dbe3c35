//! Experiment harness: validated JSON configurations, dispatch, and output
//! files.

mod config;
mod experiments;
mod hydro;

use std::path::{Path, PathBuf};

use serde_json::json;

pub use config::*;
pub use experiments::{diffusion_csv, diffusion_tables, gap_rows, GapRow};
pub use hydro::{compare_fields, hydro_flux, run_hydro, HydroReport, MemberFailure, PdeSummary, SideReport};

use crate::diffusion::MAX_K;
use crate::error::Result;
use crate::process::{CaseTag, RateSet};
use crate::spectral::GeneratorVariant;

/// Result of one experiment run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub experiment: String,
    /// Every tolerance check of the experiment held.
    pub pass: bool,
    pub summary: serde_json::Value,
    /// `(file name, contents)`.
    pub files: Vec<(String, String)>,
}

impl RunOutcome {
    /// Write `summary.json`, the echoed configuration and the data files into `dir`.
    pub fn write(&self, dir: &Path, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let summary = json!({
            "experiment": self.experiment,
            "pass": self.pass,
            "seed": config.seed,
            "summary": self.summary,
        });
        let mut put = |name: &str, text: &str| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, text)?;
            written.push(p);
            Ok(())
        };
        put("summary.json", &serde_json::to_string_pretty(&summary)?)?;
        put("config.json", &config.to_json())?;
        for (name, text) in &self.files {
            put(name, text)?;
        }
        Ok(written)
    }
}

fn require(ok: bool, field: &str, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(config_err(field, msg()))
    }
}

fn check_rates(rates: &RateSet) -> Result<CaseTag> {
    rates.validate().map_err(|e| config_err("experiment.rates", e.to_string()))?;
    rates.case().map_err(|e| config_err("experiment.rates", e.to_string()))
}

fn check_dim(dim: usize) -> Result<()> {
    require((1..=3).contains(&dim), "experiment.dim", || format!("dimension {dim} not in 1..=3"))
}

fn check_times(t_final: f64, times: &[f64]) -> Result<()> {
    require(t_final.is_finite() && t_final > 0.0, "experiment.t_final", || {
        format!("{t_final} is not a positive time")
    })?;
    require(
        times.iter().all(|t| (0.0..=t_final).contains(t)) && times.windows(2).all(|w| w[1] > w[0]),
        "experiment.times",
        || "times must increase strictly within [0, t_final]".into(),
    )
}

/// Macroscopic-equation prerequisites shared by hydro and pde runs.
fn check_flux(rates: &RateSet, case: CaseTag, dim: usize, k: usize) -> Result<()> {
    match case {
        CaseTag::Case2 | CaseTag::Case3 => require(rates.is_gradient(), "experiment.rates", || {
            format!(
                "{case} needs the gradient condition, defect {:.3e}",
                rates.gradient_defect()
            )
        }),
        CaseTag::Case1 if !rates.is_gradient() => {
            require(dim == 1, "experiment.dim", || "nongradient rates need dim = 1".into())?;
            require(k <= MAX_K, "experiment.variational_k", || format!("k = {k} exceeds {MAX_K}"))
        }
        CaseTag::Case1 => Ok(()),
    }
}

/// Field-level validation of an experiment; the errors name the offending key.
pub fn validate_experiment(exp: &Experiment) -> Result<()> {
    match exp {
        Experiment::Hydro(h) => {
            let case = check_rates(&h.rates)?;
            check_dim(h.dim)?;
            check_flux(&h.rates, case, h.dim, h.variational_k)?;
            check_times(h.t_final, &h.times)?;
            h.profile.validate("experiment.profile")?;
            require(!h.sides.is_empty(), "experiment.sides", || "no lattice sides".into())?;
            require(h.ensemble >= 1, "experiment.ensemble", || "ensemble must be positive".into())?;
            require(h.pde_cells >= 3, "experiment.pde_cells", || "at least 3 cells".into())?;
            require(
                h.block_width > 0.0 && h.block_width < 1.0,
                "experiment.block_width",
                || "block width must lie in (0, 1)".into(),
            )?;
            require(h.tolerance > 0.0, "experiment.tolerance", || "must be positive".into())?;
            for &n in &h.sides {
                require(n >= 3, "experiment.sides", || format!("side {n} below 3"))?;
                let (a, b) = (n.max(h.pde_cells), n.min(h.pde_cells));
                require(a % b == 0, "experiment.pde_cells", || {
                    format!("{} cells and side {n} are not nested grids", h.pde_cells)
                })?;
                let l = (((h.block_width * n as f64) - 1.0) / 2.0).round().max(0.0) as usize;
                require(2 * l < n, "experiment.block_width", || format!("block wraps at side {n}"))?;
            }
            if h.reference == Reference::AnalyticHeat {
                require(case == CaseTag::Case3 && h.dim == 1, "experiment.reference", || {
                    "the analytic heat reference needs case 3 rates in d = 1".into()
                })?;
                require(
                    matches!(h.profile, ProfileSpec::Cosine { .. }),
                    "experiment.reference",
                    || "the analytic heat reference needs a cosine profile".into(),
                )?;
            }
            if let InitialSpec::LocalEquilibriumWith {
                family: crate::kmc::MarginalFamily::Beta { beta },
            } = h.initial
            {
                require(beta > 0.0 && beta.is_finite(), "experiment.initial", || format!("β = {beta}"))?;
            }
            Ok(())
        }
        Experiment::Gap(g) => {
            check_rates(&g.rates)?;
            check_dim(g.dim)?;
            require(!g.sides.is_empty(), "experiment.sides", || "no lattice sides".into())?;
            let min = if g.variant == GeneratorVariant::Torus { 3 } else { 2 };
            require(g.sides.iter().all(|&n| n >= min), "experiment.sides", || {
                format!("sides must be at least {min}")
            })
        }
        Experiment::Diffusion(d) => {
            let case = check_rates(&d.rates)?;
            require(case == CaseTag::Case1, "experiment.rates", || "diffusion tables need case 1 rates".into())?;
            require(d.grid >= 2, "experiment.grid", || "at least two grid points".into())?;
            match &d.method {
                DiffusionMethodSpec::ClosedForm => require(d.rates.is_gradient(), "experiment.rates", || {
                    "the closed form needs the gradient condition".into()
                }),
                DiffusionMethodSpec::Variational { ks } => require(
                    !ks.is_empty() && ks.iter().all(|&k| k <= MAX_K),
                    "experiment.method.ks",
                    || format!("ks must be nonempty and at most {MAX_K}"),
                ),
            }
        }
        Experiment::Variance(v) => {
            check_rates(&v.rates)?;
            check_dim(v.dim)?;
            require(
                !v.radii.is_empty() && v.radii.iter().all(|&l| l >= 1),
                "experiment.radii",
                || "radii must be nonempty and positive".into(),
            )
        }
        Experiment::GreenKubo(g) => {
            let case = check_rates(&g.rates)?;
            require(case == CaseTag::Case1, "experiment.rates", || "Green–Kubo needs case 1 rates".into())?;
            check_dim(g.dim)?;
            require(g.side >= 3, "experiment.side", || "side must be at least 3".into())?;
            require((-1.0..=1.0).contains(&g.rho), "experiment.rho", || format!("{} outside [-1, 1]", g.rho))?;
            require(
                g.lambdas.len() >= 2 && g.lambdas.iter().all(|l| *l > 0.0),
                "experiment.lambdas",
                || "need at least two positive λ".into(),
            )
        }
        Experiment::Simulate(s) => {
            check_rates(&s.rates)?;
            check_dim(s.dim)?;
            check_times(s.t_final, &s.times)?;
            s.profile.validate("experiment.profile")?;
            require(s.side >= 2, "experiment.side", || "side must be at least 2".into())?;
            require(2 * s.block_radius < s.side, "experiment.block_radius", || "block wraps".into())
        }
        Experiment::Pde(p) => {
            let case = check_rates(&p.rates)?;
            check_dim(p.dim)?;
            check_flux(&p.rates, case, p.dim, p.variational_k)?;
            check_times(p.t_final, &p.times)?;
            p.profile.validate("experiment.profile")?;
            require(p.cells >= 3, "experiment.cells", || "at least 3 cells".into())
        }
        Experiment::Sample(s) => {
            check_rates(&s.rates)?;
            check_dim(s.dim)?;
            require(s.side >= 1, "experiment.side", || "side must be positive".into())?;
            match s.measure {
                SampleEnsemble::Grand { rho } => {
                    require((-1.0..=1.0).contains(&rho), "experiment.measure.rho", || format!("{rho} outside [-1, 1]"))
                }
                SampleEnsemble::Canonical { charge } => {
                    let v = (s.side as i64).pow(s.dim as u32);
                    require(charge.abs() <= v, "experiment.measure.charge", || {
                        format!("|{charge}| exceeds volume {v}")
                    })
                }
            }
        }
    }
}

/// Validate and run a configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let seed = cfg.seed;
    match &cfg.experiment {
        Experiment::Hydro(h) => {
            let report = run_hydro(h, seed)?;
            let profiles = crate::pde::profiles_csv(&report.reference_profiles);
            Ok(RunOutcome {
                experiment: "hydro".into(),
                pass: report.pass,
                files: vec![
                    ("hydro_errors.csv".into(), report.errors_csv()),
                    ("hydro_fields.csv".into(), report.fields_csv()),
                    ("reference_profiles.csv".into(), profiles),
                ],
                summary: serde_json::to_value(&report)?,
            })
        }
        Experiment::Gap(g) => experiments::run_gap(g),
        Experiment::Diffusion(d) => experiments::run_diffusion(d),
        Experiment::Variance(v) => experiments::run_variance(v),
        Experiment::GreenKubo(g) => experiments::run_green_kubo(g),
        Experiment::Simulate(s) => experiments::run_simulate(s, seed),
        Experiment::Pde(p) => experiments::run_pde(p),
        Experiment::Sample(s) => experiments::run_sample(s, seed),
    }
}
