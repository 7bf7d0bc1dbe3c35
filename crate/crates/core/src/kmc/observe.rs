//! Observables of a configuration: block averages and pairings with test
//! functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BlockShape, TorusGeometry};
use crate::process::Configuration;

/// `η^l(x)`: average spin over the cube of radius `l` around `site`.
pub fn block_average(config: &Configuration, geom: &TorusGeometry, site: usize, l: usize) -> Result<f64> {
    check(config, geom)?;
    let sites = geom.block_sites(site, l, BlockShape::Cube)?;
    let sum: i64 = sites.iter().map(|&s| config.get(s) as i64).sum();
    Ok(sum as f64 / sites.len() as f64)
}

fn check(config: &Configuration, geom: &TorusGeometry) -> Result<()> {
    if config.len() != geom.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: geom.num_sites(),
            got: config.len(),
        });
    }
    Ok(())
}

/// Block-averaged density at every site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalField {
    pub dim: usize,
    pub side: usize,
    pub radius: usize,
    pub values: Vec<f64>,
}

impl EmpiricalField {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// `η^l` on every site. Separable running sums along each axis.
pub fn empirical_field(config: &Configuration, geom: &TorusGeometry, l: usize) -> Result<EmpiricalField> {
    check(config, geom)?;
    if !geom.is_periodic() {
        return Err(Error::Geometry("block averages are taken on the torus".into()));
    }
    let n = geom.side();
    if 2 * l + 1 > n {
        return Err(Error::InvalidArgument(format!("block radius {l} wraps onto itself on a side of {n}")));
    }
    let mut cur: Vec<f64> = config.spins().iter().map(|&s| s as f64).collect();
    let mut next = vec![0.0; cur.len()];
    for axis in 0..geom.dim() {
        let stride = geom.stride(axis);
        for start in 0..cur.len() {
            if !(start / stride).is_multiple_of(n) {
                continue;
            }
            // line through `start` along `axis`
            let at = |k: usize| start + (k % n) * stride;
            let mut window: f64 = (0..=2 * l).map(|k| cur[at(n - l + k)]).sum();
            for k in 0..n {
                next[at(k)] = window;
                window += cur[at(k + l + 1)] - cur[at(k + n - l)];
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let norm = ((2 * l + 1) as f64).powi(geom.dim() as i32);
    Ok(EmpiricalField {
        dim: geom.dim(),
        side: n,
        radius: l,
        values: cur.into_iter().map(|v| v / norm).collect(),
    })
}

/// `N^{-d} Σ_x G(x/N) η(x)`.
pub fn empirical_pairing<G: Fn(&[f64]) -> f64>(config: &Configuration, geom: &TorusGeometry, g: G) -> Result<f64> {
    check(config, geom)?;
    let n = geom.side() as f64;
    let mut u = vec![0.0; geom.dim()];
    let mut sum = 0.0;
    for (x, &s) in config.spins().iter().enumerate() {
        if s == 0 {
            continue;
        }
        for (ui, c) in u.iter_mut().zip(geom.coords(x)) {
            *ui = c as f64 / n;
        }
        sum += g(&u) * s as f64;
    }
    Ok(sum / geom.num_sites() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn block_examples() {
        let g = TorusGeometry::torus(1, 8).unwrap();
        let c = Configuration::new(vec![1, -1, 0, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(block_average(&c, &g, 1, 1).unwrap(), 0.0);
        assert_eq!(block_average(&c, &g, 0, 0).unwrap(), 1.0);
        assert!(block_average(&c, &g, 0, 4).is_err());
        let plus = Configuration::filled(8, 1).unwrap();
        assert_eq!(block_average(&plus, &g, 5, 3).unwrap(), 1.0);
    }

    #[test]
    fn pairing_examples() {
        let g = TorusGeometry::torus(2, 4).unwrap();
        let c = Configuration::new(vec![1, 0, -1, 1, 1, 1, 0, 0, -1, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        assert_abs_diff_eq!(
            empirical_pairing(&c, &g, |_| 1.0).unwrap(),
            c.charge() as f64 / 16.0,
            epsilon = 1e-15
        );
        let zero = Configuration::filled(16, 0).unwrap();
        assert_eq!(empirical_pairing(&zero, &g, |u| u[0] + 3.0).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn field_matches_direct_blocks(spins in prop::collection::vec(-1i8..=1, 36), l in 0usize..3) {
            let g = TorusGeometry::torus(2, 6).unwrap();
            let c = Configuration::new(spins).unwrap();
            let f = empirical_field(&c, &g, l).unwrap();
            for x in 0..36 {
                prop_assert!((f.values[x] - block_average(&c, &g, x, l).unwrap()).abs() < 1e-12);
                prop_assert!(f.values[x].abs() <= 1.0);
            }
            prop_assert!((f.mean() - c.charge() as f64 / 36.0).abs() < 1e-12);
        }
    }
}
