use twospecies::harness::{compare_fields, run_experiment, ExperimentConfig};
use twospecies::kmc::empirical_field;
use twospecies::measures::{compressibility, sample_grand_seeded};
use twospecies::pde::DensityProfile;
use twospecies::{Error, RateSet, TorusGeometry};

fn config(kind_body: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(r#"{{"schema_version": 1, "seed": 17, "experiment": {kind_body}}}"#)).unwrap()
}

fn field_of(text: &str) -> Option<String> {
    match ExperimentConfig::from_json(text) {
        Err(Error::Config { field, .. }) => Some(field),
        _ => None,
    }
}

#[test]
fn identical_configs_give_identical_files() {
    let bodies = [
        r#"{"kind": "simulate", "rates": {"c_plus": 2, "c_minus": 1, "c_exchange": 0.5, "c_annihilate": 2, "c_create": 0.5},
            "side": 64, "t_final": 0.01, "times": [0.005, 0.01], "profile": {"shape": "sine", "amplitude": 0.4}}"#,
        r#"{"kind": "sample", "rates": {"c_plus": 1, "c_minus": 1, "c_exchange": 1, "c_annihilate": 1, "c_create": 1},
            "side": 12, "measure": {"ensemble": "canonical", "charge": 3}, "count": 5}"#,
        r#"{"kind": "hydro", "rates": {"c_plus": 1, "c_minus": 1, "c_exchange": 1, "c_annihilate": 0, "c_create": 1},
            "sides": [32, 64], "t_final": 0.01, "profile": {"shape": "cosine", "amplitude": 0.5},
            "ensemble": 4, "block_width": 0.125, "pde_cells": 32}"#,
    ];
    for body in bodies {
        let cfg = config(body);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.files, b.files, "{}", a.experiment);
        assert_eq!(a.summary, b.summary);
        let mut other = cfg.clone();
        other.seed += 1;
        assert_ne!(run_experiment(&other).unwrap().files, a.files);
    }
}

#[test]
fn outputs_land_in_the_directory() {
    let cfg = config(
        r#"{"kind": "variance", "rates": {"c_plus": 1, "c_minus": 1, "c_exchange": 0, "c_annihilate": 1, "c_create": 1},
            "observable": "current", "radii": [1, 2]}"#,
    );
    let dir = std::env::temp_dir().join(format!("twospecies-harness-{}", std::process::id()));
    let out = run_experiment(&cfg).unwrap();
    let written = out.write(&dir, &cfg).unwrap();
    assert_eq!(written.len(), 3);
    let echoed = ExperimentConfig::load(&dir.join("config.json")).unwrap();
    assert_eq!(echoed, cfg);
    let csv = std::fs::read_to_string(dir.join("variance.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("l,charge,variance"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn validation_names_the_field() {
    let wrap = |body: &str| format!(r#"{{"schema_version": 1, "experiment": {body}}}"#);
    // case 3 off its gradient condition C₊ + C₋ = 2 C_E
    let case3 = wrap(
        r#"{"kind": "hydro", "rates": {"c_plus": 2, "c_minus": 1, "c_exchange": 1, "c_annihilate": 0, "c_create": 1},
            "sides": [64], "t_final": 0.01, "profile": {"shape": "constant", "value": 0}}"#,
    );
    assert_eq!(field_of(&case3).as_deref(), Some("experiment.rates"));
    let pde = wrap(
        r#"{"kind": "pde", "rates": {"c_plus": 2, "c_minus": 1, "c_exchange": 1, "c_annihilate": 0, "c_create": 1},
            "cells": 64, "t_final": 0.01, "profile": {"shape": "constant", "value": 0}}"#,
    );
    assert_eq!(field_of(&pde).as_deref(), Some("experiment.rates"));
    let nested = wrap(
        r#"{"kind": "hydro", "rates": {"c_plus": 1, "c_minus": 1, "c_exchange": 1, "c_annihilate": 0, "c_create": 1},
            "sides": [100], "t_final": 0.01, "profile": {"shape": "constant", "value": 0}}"#,
    );
    assert_eq!(field_of(&nested).as_deref(), Some("experiment.pde_cells"));
    let times = wrap(
        r#"{"kind": "simulate", "rates": {"c_plus": 1, "c_minus": 1, "c_exchange": 1, "c_annihilate": 1, "c_create": 1},
            "side": 16, "t_final": 0.01, "times": [0.02], "profile": {"shape": "constant", "value": 0}}"#,
    );
    assert_eq!(field_of(&times).as_deref(), Some("experiment.times"));
    let unknown = wrap(r#"{"kind": "bogus"}"#);
    assert_eq!(field_of(&unknown).as_deref(), Some("<document>"));
    let gk = wrap(
        r#"{"kind": "greenkubo", "rates": {"c_plus": 1, "c_minus": 1, "c_exchange": 1, "c_annihilate": 1, "c_create": 0},
            "dim": 1, "side": 4, "rho": 0}"#,
    );
    assert_eq!(field_of(&gk).as_deref(), Some("experiment.rates"));
}

#[test]
fn flat_sample_within_clt_band() {
    let rates = RateSet::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    let geom = TorusGeometry::torus(1, 10_000).unwrap();
    let c = sample_grand_seeded(0.0, &rates, &geom, 23).unwrap();
    let l = 50;
    let field = empirical_field(&c, &geom, l).unwrap();
    let zero = DensityProfile::from_fn(1, 100, |_| 0.0).unwrap();
    let err = compare_fields(&field, &zero).unwrap();
    let block_se = (compressibility(0.0, &rates).unwrap() / (2 * l + 1) as f64).sqrt();
    assert!(err <= 4.0 * block_se, "L1 {err}, block standard error {block_se}");
    // unresampled comparison on the sample's own grid
    let fine = DensityProfile::from_fn(1, 10_000, |_| 0.0).unwrap();
    assert!(compare_fields(&field, &fine).unwrap() <= 4.0 * block_se);
}
