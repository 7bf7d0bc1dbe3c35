//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.
//!
//! `cargo test --test acceptance -- 11 12` runs only the criteria whose id
//! starts with one of the given prefixes.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twospecies::diffusion::{
    diffusion_bounds, gradient_diffusion, green_kubo_matrix, variational_diffusion, GreenKuboOptions,
};
use twospecies::harness::{
    gap_rows, run_hydro, AllCharges, ChargeSpec, GapCheck, GapConfig, HydroConfig, HydroReport, InitialSpec,
    ProfileSpec, Reference,
};
use twospecies::kmc::MarginalFamily;
use twospecies::measures::{marginals, product_weight};
use twospecies::pde::{make_flux, solve, weak_residual, DensityProfile, SolveOptions, TestFunction};
use twospecies::process::{flux_h, generator_apply, pair_current, pair_move, ALL_PAIRS};
use twospecies::spectral::{
    birth_death_chain, comparison_check, projection_identity_check, ramification_gap_bound, GeneratorVariant,
};
use twospecies::{Configuration, RateSet, TorusGeometry};

type Outcome = Result<(bool, String), String>;

fn rates(p: f64, m: f64, e: f64, a: f64, c: f64) -> RateSet {
    RateSet::new(p, m, e, a, c).unwrap()
}

fn rho_grid() -> Vec<f64> {
    (0..11).map(|i| -1.0 + 0.2 * i as f64).collect()
}

/// Eleven interior densities; the estimators are defined on the open interval.
fn interior_grid() -> Vec<f64> {
    (0..11).map(|i| -0.95 + 0.19 * i as f64).collect()
}

fn all_configs(n: usize) -> Vec<Vec<i8>> {
    (0..3usize.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let s = (code % 3) as i8 - 1;
                    code /= 3;
                    s
                })
                .collect()
        })
        .collect()
}

fn c1_detailed_balance() -> Outcome {
    let r = rates(2.0, 1.0, 0.5, 2.0, 0.5);
    let mut worst_pair = 0.0f64;
    for &rho in &rho_grid() {
        let m = marginals(rho, &r).map_err(|e| e.to_string())?;
        for &(a, b) in &ALL_PAIRS {
            if let Some((a2, b2)) = pair_move(a, b) {
                // the reverse move happens on the reversed bond
                assert_eq!(pair_move(b2, a2), Some((b, a)));
                let fwd = m.prob(a) * m.prob(b) * r.pair_rate(a, b);
                let back = m.prob(a2) * m.prob(b2) * r.pair_rate(b2, a2);
                worst_pair = worst_pair.max((fwd - back).abs());
            }
        }
    }
    let geom = TorusGeometry::torus(1, 4).unwrap();
    let configs = all_configs(4);
    let mut worst_global = 0.0f64;
    for &rho in &[-0.6, 0.0, 0.3, 0.8] {
        let m = marginals(rho, &r).map_err(|e| e.to_string())?;
        for xi in &configs {
            let target = xi.clone();
            let sum: f64 = configs
                .iter()
                .map(|eta| {
                    let c = Configuration::new(eta.clone()).unwrap();
                    let lf = generator_apply(|c: &Configuration| f64::from(c.spins() == target.as_slice()), &c, &r, &geom);
                    product_weight(eta, &m) * lf
                })
                .sum();
            worst_global = worst_global.max(sum.abs());
        }
    }
    Ok((
        worst_pair <= 1e-12 && worst_global <= 1e-10,
        format!("per-bond defect {worst_pair:.1e}, stationarity defect {worst_global:.1e}"),
    ))
}

fn c2_gradient_identity() -> Outcome {
    let sweep = [
        rates(1.0, 1.0, 0.5, 1.0, 1.0),
        rates(2.0, 1.0, 0.5, 2.0, 0.5),
        rates(3.0, 1.0, 0.0, 4.0, 0.0),
        rates(1.0, 1.0, 1.0, 0.0, 1.0),
        rates(0.7, 2.3, 1.2, 0.6, 2.0),
    ];
    let mut worst = 0.0f64;
    for r in &sweep {
        assert!(r.is_gradient());
        for &(a, b) in &ALL_PAIRS {
            worst = worst.max((pair_current(a, b, r) - (flux_h(a, r) - flux_h(b, r))).abs());
        }
    }
    Ok((worst == 0.0, format!("max |W - (h(a) - h(b))| = {worst:.1e} over 5 rate sets")))
}

fn hydro_line(rep: &HydroReport) -> String {
    let finals: Vec<String> = rep
        .sides
        .iter()
        .map(|s| {
            format!(
                "N={} L1={:.4} (member {:.4}±{:.4})",
                s.side,
                s.ensemble_l1.last().unwrap(),
                s.member_l1_mean.last().unwrap(),
                s.member_l1_stderr.last().unwrap()
            )
        })
        .collect();
    format!("{}; decreasing {:?}", finals.join(", "), rep.decreasing)
}

fn hydro_base(r: RateSet, profile: ProfileSpec) -> HydroConfig {
    HydroConfig {
        rates: r,
        dim: 1,
        sides: vec![128, 512],
        t_final: 0.05,
        times: vec![0.02],
        profile,
        ensemble: 20,
        block_width: 0.0625,
        pde_cells: 256,
        tolerance: 0.05,
        initial: InitialSpec::LocalEquilibrium,
        reference: Reference::Pde,
        variational_k: 2,
        residual_tolerance: 1e-3,
    }
}

fn cosine() -> ProfileSpec {
    ProfileSpec::Cosine {
        amplitude: 0.5,
        mode: 1,
        offset: 0.0,
    }
}

fn c3_hydro_case1(reports: &mut Vec<HydroReport>) -> Outcome {
    let r = rates(2.0, 1.0, 0.5, 2.0, 0.5);
    // the reference uses d(ρ) = ρ/2 + 3/2 at these rates
    for &rho in &rho_grid() {
        let d = gradient_diffusion(rho, &r).map_err(|e| e.to_string())?;
        if (d - (rho / 2.0 + 1.5)).abs() > 1e-12 {
            return Ok((false, format!("closed form {d} at rho = {rho}")));
        }
    }
    let rep = run_hydro(&hydro_base(r, cosine()), 3).map_err(|e| e.to_string())?;
    let pass = rep.final_error <= 0.05 && rep.decreasing == Some(true) && rep.sides.iter().all(|s| s.failures.is_empty());
    let line = hydro_line(&rep);
    reports.push(rep);
    Ok((pass, line))
}

fn c4_hydro_case2(reports: &mut Vec<HydroReport>) -> Outcome {
    let cfg = hydro_base(rates(3.0, 1.0, 0.0, 4.0, 0.0), ProfileSpec::Step { left: 0.5, right: -0.5 });
    let rep = run_hydro(&cfg, 4).map_err(|e| e.to_string())?;
    let monotone = rep.pde.interface_monotone == Some(true);
    let pass = rep.final_error <= 0.05 && monotone && rep.sides.iter().all(|s| s.failures.is_empty());
    let path = rep.pde.interface.as_deref().unwrap_or(&[]);
    let line = format!(
        "{}; interface {:.4} -> {:.4}, monotone {monotone}",
        hydro_line(&rep),
        path.first().map_or(f64::NAN, |p| p.1),
        path.last().map_or(f64::NAN, |p| p.1)
    );
    reports.push(rep);
    Ok((pass, line))
}

fn c5_hydro_case3(reports: &mut Vec<HydroReport>) -> Outcome {
    let mut cfg = hydro_base(rates(1.0, 1.0, 1.0, 0.0, 1.0), cosine());
    cfg.reference = Reference::AnalyticHeat;
    // β = ¼ marginals put holes into the initial state
    cfg.initial = InitialSpec::LocalEquilibriumWith {
        family: MarginalFamily::Beta { beta: 0.25 },
    };
    let rep = run_hydro(&cfg, 5).map_err(|e| e.to_string())?;
    let big = rep.sides.last().unwrap();
    let at = |t: f64| big.times.iter().position(|s| (s - t).abs() < 1e-12).unwrap();
    let (h0, h2) = (big.hole_fraction[at(0.0)], big.hole_fraction[at(0.02)]);
    let pass = rep.final_error <= 0.05 && h2 < h0 && rep.sides.iter().all(|s| s.failures.is_empty());
    let line = format!("{}; holes {h0:.4} -> {h2:.4}", hydro_line(&rep));
    reports.push(rep);
    Ok((pass, line))
}

fn c6_gap_scaling() -> Outcome {
    let cfg = GapConfig {
        rates: rates(1.0, 1.0, 1.0, 1.0, 1.0),
        dim: 1,
        sides: (3..=8).collect(),
        charges: ChargeSpec::List(vec![0]),
        variant: GeneratorVariant::Full,
        check: GapCheck::ScalingAgainstFirst { ratio: 0.5 },
    };
    let rows = gap_rows(&cfg).map_err(|e| e.to_string())?;
    let scaled: Vec<f64> = rows.iter().map(|r| r.scaled().unwrap_or(0.0)).collect();
    let floor = 0.5 * scaled[0];
    let pass = floor > 0.0 && scaled.iter().all(|&g| g >= floor);
    let listing: Vec<String> = scaled.iter().map(|g| format!("{g:.3}")).collect();
    Ok((pass, format!("gap·N² for N=3..8: [{}], floor {floor:.3}", listing.join(", "))))
}

fn c7_meanfield_uniform() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for beta in [0.25, 1.0] {
        let cfg = GapConfig {
            rates: rates(1.0, 1.0, 1.0, 1.0, beta),
            dim: 1,
            sides: vec![8],
            charges: ChargeSpec::All(AllCharges::All),
            variant: GeneratorVariant::MeanField,
            check: GapCheck::None,
        };
        let gaps: Vec<f64> = gap_rows(&cfg)
            .map_err(|e| e.to_string())?
            .into_iter()
            .filter_map(|r| r.gap)
            .collect();
        let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let max = gaps.iter().copied().fold(0.0, f64::max);
        pass &= gaps.len() == 15 && min > 0.0 && min / max >= 0.1;
        parts.push(format!("β={beta}: min {min:.4}, max {max:.4}, ratio {:.3}", min / max));
    }
    Ok((pass, parts.join("; ")))
}

fn c8_birth_death() -> Outcome {
    let mut pass = true;
    let mut worst = f64::INFINITY;
    for volume in [8usize, 16, 32] {
        for charge in [0, volume as i64 / 2] {
            for beta in [0.1, 0.25, 1.0] {
                let chain = birth_death_chain(volume, charge, beta).map_err(|e| e.to_string())?;
                let b = ramification_gap_bound(&chain).map_err(|e| format!("V={volume} K={charge} β={beta}: {e}"))?;
                pass &= b.exact_gap >= b.certified_gap && b.drift_at_zero >= 0.0 && b.drift_at_max <= 0.0;
                worst = worst.min(b.exact_gap / b.certified_gap);
            }
        }
    }
    Ok((pass, format!("18 chains, min exact/certified = {worst:.3}")))
}

fn c9_comparison() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let geom = TorusGeometry::free_box(1, 5).unwrap();
    let mut min_slack = f64::INFINITY;
    for _ in 0..10 {
        let mut draw = || rng.gen_range(0.2..3.0);
        let r = rates(draw(), draw(), draw(), draw(), draw());
        for charge in [0, 1] {
            let rep = comparison_check(&geom, charge, &r).map_err(|e| e.to_string())?;
            min_slack = min_slack.min(rep.slack);
        }
    }
    Ok((min_slack >= 0.0, format!("10 random rate sets, min slack {min_slack:.4}")))
}

fn c10_projection() -> Outcome {
    let mut worst = 0.0f64;
    for beta in [0.1, 0.25, 1.0, 2.0] {
        for charge in 0..=6 {
            let rep = projection_identity_check(6, charge, &rates(1.0, 1.0, 1.0, 1.0, beta)).map_err(|e| e.to_string())?;
            worst = worst.max(rep.generator_defect);
        }
    }
    Ok((worst <= 1e-10, format!("max generator defect {worst:.1e} (volume 6, K=0..6, 4 values of β)")))
}

fn c11a_closed_form() -> Outcome {
    let mut worst = 0.0f64;
    for r in [rates(2.0, 1.0, 0.5, 2.0, 0.5), rates(1.0, 1.0, 0.5, 1.0, 1.0), rates(1.5, 0.5, 0.25, 1.5, 3.0)] {
        for &rho in &interior_grid() {
            let exact = gradient_diffusion(rho, &r).map_err(|e| e.to_string())?;
            for k in 0..=2 {
                let v = variational_diffusion(rho, &r, k).map_err(|e| e.to_string())?;
                worst = worst.max((v - exact).abs());
            }
        }
    }
    Ok((worst <= 1e-8, format!("max |variational - closed form| = {worst:.1e}")))
}

fn nongradient_sweep() -> Vec<RateSet> {
    vec![rates(1.0, 1.0, 0.0, 1.0, 1.0), rates(2.0, 1.0, 1.0, 0.5, 0.5), rates(1.0, 3.0, 0.2, 2.0, 0.7)]
}

fn c11b_monotone() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for r in nongradient_sweep() {
        for &rho in &interior_grid() {
            let v: Vec<f64> = (0..=2).map(|k| variational_diffusion(rho, &r, k)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
            worst = worst.max(v[1] - v[0]).max(v[2] - v[1]);
        }
    }
    Ok((worst <= 1e-9, format!("max increase in k = {worst:.1e}")))
}

fn c11c_sandwich() -> Outcome {
    let mut violations = 0;
    let mut total = 0;
    let mut sets = nongradient_sweep();
    sets.push(rates(2.0, 1.0, 0.5, 2.0, 0.5));
    for r in &sets {
        for &rho in &interior_grid() {
            let (lo, hi) = diffusion_bounds(rho, r).map_err(|e| e.to_string())?;
            let mut est: Vec<f64> = (0..=2).map(|k| variational_diffusion(rho, r, k)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
            if r.is_gradient() {
                est.push(gradient_diffusion(rho, r).map_err(|e| e.to_string())?);
            }
            for v in est {
                total += 1;
                if v < lo - 1e-9 || v > hi + 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    Ok((violations == 0, format!("{violations} of {total} estimates outside the bounds")))
}

fn c11d_diagonal() -> Outcome {
    let geom = TorusGeometry::torus(2, 3).unwrap();
    let res = green_kubo_matrix(0.0, &rates(1.0, 1.0, 0.0, 1.0, 1.0), &geom, &GreenKuboOptions::default())
        .map_err(|e| e.to_string())?;
    let off = res.matrix[0][1].abs().max(res.matrix[1][0].abs());
    Ok((
        off <= 1e-8,
        format!("off-diagonal {off:.1e}, diagonal ({:.4}, {:.4})", res.matrix[0][0], res.matrix[1][1]),
    ))
}

fn c11e_green_kubo_closed_form() -> Outcome {
    let geom = TorusGeometry::torus(1, 8).unwrap();
    let mut worst = 0.0f64;
    for r in [rates(2.0, 1.0, 0.5, 2.0, 0.5), rates(1.0, 1.0, 0.5, 1.0, 1.0)] {
        for rho in [0.0, 0.5] {
            let res = green_kubo_matrix(rho, &r, &geom, &GreenKuboOptions::default()).map_err(|e| e.to_string())?;
            let exact = gradient_diffusion(rho, &r).map_err(|e| e.to_string())?;
            worst = worst.max((res.matrix[0][0] - exact).abs());
        }
    }
    Ok((worst <= 0.05, format!("max |D_11 - closed form| = {worst:.1e}")))
}

fn c12_weak_residual(reports: &[HydroReport]) -> Outcome {
    // standalone heat run in addition to the hydro references
    let flux = make_flux(&rates(1.0, 1.0, 1.0, 0.0, 1.0), None).map_err(|e| e.to_string())?;
    let init = DensityProfile::from_fn(1, 256, |u| 0.5 * (2.0 * PI * u[0]).cos()).map_err(|e| e.to_string())?;
    let snaps = solve(&init, &flux, 0.05, &SolveOptions::every(0.05, 200)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for h in [TestFunction::constant(1.0), TestFunction::cos_mode(1, 0), TestFunction::sin_mode(1, 0)] {
        worst = worst.max(weak_residual(&snaps, &flux, &h).map_err(|e| e.to_string())?);
    }
    let mut runs = 1;
    for rep in reports {
        if rep.pde.cells != 256 {
            return Ok((false, "hydro reference not at M = 256".into()));
        }
        runs += 1;
        for (_, r) in &rep.pde.weak_residuals {
            worst = worst.max(*r);
        }
    }
    Ok((worst <= 1e-3, format!("max residual {worst:.2e} over {runs} PDE runs")))
}

fn c13_order() -> Outcome {
    let flux = make_flux(&rates(1.0, 1.0, 1.0, 0.0, 1.0), None).map_err(|e| e.to_string())?;
    let t = 0.02;
    let errors: Vec<f64> = [64usize, 128, 256]
        .iter()
        .map(|&m| {
            let init = DensityProfile::from_fn(1, m, |u| (2.0 * PI * u[0]).cos()).unwrap();
            let snaps = solve(&init, &flux, t, &SolveOptions::default()).unwrap();
            let last = snaps.last().unwrap();
            let decay = (-4.0 * PI * PI * t).exp();
            (0..m)
                .map(|i| (last.values[i] - decay * (2.0 * PI * i as f64 / m as f64).cos()).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let orders = [(errors[0] / errors[1]).log2(), (errors[1] / errors[2]).log2()];
    let order = orders[0].min(orders[1]);
    Ok((
        order >= 1.9,
        format!("max errors {:.2e}, {:.2e}, {:.2e}; order {order:.3}", errors[0], errors[1], errors[2]),
    ))
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| filters.is_empty() || filters.iter().any(|f| id.starts_with(f.as_str()));
    let mut reports: Vec<HydroReport> = Vec::new();
    let mut failed = 0;
    let mut run = |id: &str, name: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(id) {
            return;
        }
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f));
        let secs = start.elapsed().as_secs_f64();
        let (ok, msg) = match res {
            Ok(Ok((ok, msg))) => (ok, msg),
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".into()),
        };
        if !ok {
            failed += 1;
        }
        println!("[{}] {id:>3} {name}: {msg} ({secs:.1}s)", if ok { "PASS" } else { "FAIL" });
    };
    run("1", "detailed balance and stationarity", &mut c1_detailed_balance);
    run("2", "gradient identity", &mut c2_gradient_identity);
    run("3", "hydrodynamic limit, case 1 gradient", &mut || c3_hydro_case1(&mut reports));
    run("4", "hydrodynamic limit, case 2", &mut || c4_hydro_case2(&mut reports));
    run("5", "hydrodynamic limit, case 3", &mut || c5_hydro_case3(&mut reports));
    run("6", "spectral gap scaling", &mut c6_gap_scaling);
    run("7", "mean-field gap uniformity", &mut c7_meanfield_uniform);
    run("8", "birth-death certified bound", &mut c8_birth_death);
    run("9", "comparison constant", &mut c9_comparison);
    run("10", "projection identity", &mut c10_projection);
    run("11a", "variational estimator vs closed form", &mut c11a_closed_form);
    run("11b", "variational estimator monotone in k", &mut c11b_monotone);
    run("11c", "diffusion bounds sandwich", &mut c11c_sandwich);
    run("11d", "Green-Kubo diagonality", &mut c11d_diagonal);
    run("11e", "Green-Kubo vs closed form", &mut c11e_green_kubo_closed_form);
    let snapshot = reports.clone();
    run("12", "weak-solution residual", &mut || c12_weak_residual(&snapshot));
    run("13", "PDE spatial order", &mut c13_order);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
