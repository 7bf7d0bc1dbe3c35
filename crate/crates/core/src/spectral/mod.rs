//! Finite-volume generators on fixed-charge hyperplanes and their spectra.

mod birth_death;
mod comparison;
mod eigen;
mod multispecies;
mod variance;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use birth_death::{
    birth_death_chain, projection_identity_check, ramification_gap_bound, BirthDeathChain, ProjectionReport,
    RamificationBound,
};
pub use comparison::{comparison_check, local_comparison_ratio, ComparisonReport};
pub use eigen::{spectral_gap, spectral_gap_with, EigenMethod, EigenOptions, GapResult};
pub use multispecies::{multispecies_meanfield_gap, MultispeciesGenerator};
pub use variance::{current_local_function, finite_volume_variance, generator_of_local, LocalFunction};

use crate::error::{Error, Result};
use crate::hyperplane::{Hyperplane, DEFAULT_STATE_CAP};
use crate::lattice::TorusGeometry;
use crate::measures::canonical_ensemble;
use crate::process::{pair_move, table_index, RateSet};

/// Which finite-volume dynamics to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorVariant {
    /// Nearest-neighbour dynamics on the free-boundary box.
    Full,
    /// Free-boundary box with rates `(1, 1, 1, 1, β)`.
    Tilde,
    /// Every ordered site pair interacts with tilde rates, scaled by `1/volume`.
    MeanField,
    /// Nearest-neighbour dynamics on the torus.
    Torus,
}

impl fmt::Display for GeneratorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorVariant::Full => "full",
            GeneratorVariant::Tilde => "tilde",
            GeneratorVariant::MeanField => "meanfield",
            GeneratorVariant::Torus => "torus",
        })
    }
}

impl FromStr for GeneratorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "tilde" => Ok(Self::Tilde),
            "meanfield" | "mean-field" | "mean_field" => Ok(Self::MeanField),
            "torus" => Ok(Self::Torus),
            _ => Err(Error::Parse(format!("unknown generator variant `{s}`"))),
        }
    }
}

/// Sparse generator `Q` on an enumerated hyperplane, stored as the
/// off-diagonal rates in CSR form plus the exit rates.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub variant: GeneratorVariant,
    pub states: Hyperplane,
    /// Normalized reversible measure.
    pub weights: Vec<f64>,
    /// Rates the matrix was assembled with (tilde rates for tilde/mean-field).
    pub rates: RateSet,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    exit: Vec<f64>,
}

/// Ordered site pairs with a rate multiplier.
fn interaction_pairs(geom: &TorusGeometry, variant: GeneratorVariant) -> Vec<(usize, usize, f64)> {
    match variant {
        GeneratorVariant::MeanField => {
            let v = geom.num_sites();
            let scale = 1.0 / v as f64;
            let mut out = Vec::with_capacity(v * (v - 1));
            for x in 0..v {
                for y in 0..v {
                    if x != y {
                        out.push((x, y, scale));
                    }
                }
            }
            out
        }
        _ => geom
            .bonds()
            .into_iter()
            .map(|b| (b.from, b.to, b.multiplicity as f64))
            .collect(),
    }
}

/// Assemble the generator of `variant` on the hyperplane `Σ η = charge`.
pub fn build_generator(
    geom: &TorusGeometry,
    charge: i64,
    rates: &RateSet,
    variant: GeneratorVariant,
) -> Result<GeneratorMatrix> {
    build_generator_capped(geom, charge, rates, variant, DEFAULT_STATE_CAP)
}

pub fn build_generator_capped(
    geom: &TorusGeometry,
    charge: i64,
    rates: &RateSet,
    variant: GeneratorVariant,
    cap: usize,
) -> Result<GeneratorMatrix> {
    match variant {
        GeneratorVariant::Torus if !geom.is_periodic() => {
            return Err(Error::Geometry("torus variant needs a periodic geometry".into()))
        }
        GeneratorVariant::Full | GeneratorVariant::Tilde | GeneratorVariant::MeanField if geom.is_periodic() => {
            return Err(Error::Geometry(format!(
                "{variant} variant needs a free-boundary geometry"
            )))
        }
        _ => {}
    }
    let used = match variant {
        GeneratorVariant::Tilde | GeneratorVariant::MeanField => {
            let beta = rates
                .beta()
                .ok_or_else(|| Error::Rates("tilde rates need c_annihilate > 0".into()))?;
            RateSet::tilde(beta)?
        }
        _ => *rates,
    };
    let volume = geom.num_sites();
    if charge.unsigned_abs() as usize > volume {
        return Err(Error::InvalidArgument(format!(
            "charge {charge} exceeds volume {volume}"
        )));
    }
    let ens = canonical_ensemble(volume, charge, &used, cap)?;
    let pairs = interaction_pairs(geom, variant);
    let table = used.table();
    let n = ens.states.len();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut exit = vec![0.0; n];
    let mut word = vec![0i8; volume];
    let mut row: Vec<(usize, f64)> = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        let s = ens.states.state(i);
        row.clear();
        for &(x, y, mult) in &pairs {
            let (a, b) = (s[x], s[y]);
            let r = table[table_index(a, b)];
            if r == 0.0 {
                continue;
            }
            let (na, nb) = pair_move(a, b).expect("active pair");
            word.copy_from_slice(s);
            word[x] = na;
            word[y] = nb;
            let j = ens.states.rank(&word).ok_or_else(|| {
                Error::InvalidArgument("move leaves the support of the canonical measure".into())
            })?;
            row.push((j, mult * r));
        }
        row.sort_unstable_by_key(|e| e.0);
        let mut k = 0;
        while k < row.len() {
            let j = row[k].0;
            let mut v = 0.0;
            while k < row.len() && row[k].0 == j {
                v += row[k].1;
                k += 1;
            }
            cols.push(j);
            vals.push(v);
            exit[i] += v;
        }
        row_ptr.push(cols.len());
    }
    Ok(GeneratorMatrix {
        variant,
        states: ens.states,
        weights: ens.weights,
        rates: used,
        row_ptr,
        cols,
        vals,
        exit,
    })
}

impl GeneratorMatrix {
    pub fn len(&self) -> usize {
        self.exit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exit.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    /// Off-diagonal entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// `q(i → j)` for `i ≠ j`, or the diagonal `-exit(i)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return -self.exit[i];
        }
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    /// `(Qf)(i) = Σ_j q(i→j) (f(j) - f(i))`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let fi = f[i];
            *o = self.row(i).map(|(j, q)| q * (f[j] - fi)).sum();
        }
    }

    pub fn apply_vec(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.apply(f, &mut out);
        out
    }

    /// `⟨-Qf, g⟩_w`.
    pub fn dirichlet_form(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        for v in [f, g] {
            if v.len() != self.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.len(),
                    got: v.len(),
                });
            }
        }
        let qf = self.apply_vec(f);
        Ok(-qf.iter().zip(g).zip(&self.weights).map(|((q, g), w)| q * g * w).sum::<f64>())
    }

    /// `max |w_i q_ij - w_j q_ji|` over all stored entries.
    pub fn reversibility_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for (j, q) in self.row(i) {
                let back = self.entry(j, i);
                worst = worst.max((self.weights[i] * q - self.weights[j] * back).abs());
            }
        }
        worst
    }

    /// Number of communicating classes of the transition graph.
    pub fn components(&self) -> usize {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            queue.push_back(s);
            while let Some(i) = queue.pop_front() {
                for (j, _) in self.row(i) {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        count
    }

    /// Off-diagonal entries of `S = W^{1/2} Q W^{-1/2}`, row by row.
    pub(crate) fn symmetrized_row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let wi = self.weights[i];
        self.row(i).map(move |(j, q)| (j, q * (wi / self.weights[j]).sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn r(a: f64, b: f64, c: f64, d: f64, e: f64) -> RateSet {
        RateSet::new(a, b, c, d, e).unwrap()
    }

    #[test]
    fn single_state_hyperplane() {
        let g = TorusGeometry::free_box(1, 2).unwrap();
        let gen = build_generator(&g, 2, &r(1., 1., 1., 1., 1.), GeneratorVariant::Full).unwrap();
        assert_eq!(gen.len(), 1);
        assert_eq!(gen.nnz(), 0);
    }

    #[test]
    fn two_site_free_box_entries() {
        let rates = r(2., 3., 5., 7., 11.);
        let g = TorusGeometry::free_box(1, 2).unwrap();
        let gen = build_generator(&g, 0, &rates, GeneratorVariant::Full).unwrap();
        let idx = |s: [i8; 2]| gen.states.rank(&s).unwrap();
        let (pm, zz, mp) = (idx([1, -1]), idx([0, 0]), idx([-1, 1]));
        assert_eq!(gen.entry(pm, zz), 7.);
        assert_eq!(gen.entry(zz, mp), 11.);
        assert_eq!(gen.entry(zz, pm), 11.);
        assert_eq!(gen.entry(mp, pm), 5.);
        assert_eq!(gen.entry(pm, mp), 5.);
        // (-1,1) on bond (1,0) reads (1,-1): annihilation
        assert_eq!(gen.entry(mp, zz), 7.);
        assert!(gen.reversibility_defect() < 1e-14);
    }

    #[test]
    fn variant_geometry_checks() {
        let rates = r(1., 1., 1., 1., 1.);
        let free = TorusGeometry::free_box(1, 3).unwrap();
        let torus = TorusGeometry::torus(1, 3).unwrap();
        assert!(build_generator(&free, 0, &rates, GeneratorVariant::Torus).is_err());
        assert!(build_generator(&torus, 0, &rates, GeneratorVariant::Full).is_err());
        assert!(build_generator(&free, 4, &rates, GeneratorVariant::Full).is_err());
        assert!(build_generator(&free, 0, &r(1., 1., 1., 0., 1.), GeneratorVariant::Tilde).is_err());
        assert!(matches!(
            build_generator_capped(&free, 0, &rates, GeneratorVariant::Full, 2),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn dirichlet_form_identities() {
        let rates = r(2., 1., 0.5, 2., 0.5);
        let g = TorusGeometry::free_box(1, 4).unwrap();
        let gen = build_generator(&g, 1, &rates, GeneratorVariant::Full).unwrap();
        let n = gen.len();
        assert_abs_diff_eq!(gen.dirichlet_form(&vec![1.0; n], &vec![1.0; n]).unwrap(), 0.0, epsilon = 1e-15);
        let mut ind = vec![0.0; n];
        ind[3] = 1.0;
        assert_abs_diff_eq!(
            gen.dirichlet_form(&ind, &ind).unwrap(),
            gen.weights[3] * gen.exit_rate(3),
            epsilon = 1e-14
        );
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let h: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut half = 0.0;
        for i in 0..n {
            for (j, q) in gen.row(i) {
                half += 0.5 * gen.weights[i] * q * (f[j] - f[i]) * (h[j] - h[i]);
            }
        }
        assert_abs_diff_eq!(gen.dirichlet_form(&f, &h).unwrap(), half, epsilon = 1e-12);
        assert_abs_diff_eq!(gen.dirichlet_form(&f, &h).unwrap(), gen.dirichlet_form(&h, &f).unwrap(), epsilon = 1e-12);
        assert!(gen.dirichlet_form(&f[1..], &h).is_err());
    }

    #[test]
    fn stationary_weights_annihilate_generator() {
        let rates = r(2., 1., 0.5, 2., 0.5);
        for variant in [GeneratorVariant::Full, GeneratorVariant::Tilde, GeneratorVariant::MeanField] {
            let g = TorusGeometry::free_box(1, 5).unwrap();
            let gen = build_generator(&g, -1, &rates, variant).unwrap();
            let n = gen.len();
            let mut q = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    q[(i, j)] = gen.entry(i, j);
                }
            }
            let w = nalgebra::DVector::from_column_slice(&gen.weights);
            let flux = q.transpose() * w;
            assert!(flux.amax() < 1e-14, "{variant}");
            assert!(q.column_sum().amax() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn reversible_by_construction(n in 2usize..6, k in -3i64..=3, a in 0.1f64..3., b in 0.1f64..3.,
                                      e in 0.0f64..3., ca in 0.0f64..3., cc in 0.0f64..3., periodic in any::<bool>()) {
            prop_assume!(k.unsigned_abs() as usize <= n);
            prop_assume!(ca > 0.0 || cc > 0.0);
            let rates = RateSet::new(a, b, e, ca, cc).unwrap();
            let g = TorusGeometry::new(1, n, periodic).unwrap();
            let variant = if periodic { GeneratorVariant::Torus } else { GeneratorVariant::Full };
            let gen = build_generator(&g, k, &rates, variant).unwrap();
            prop_assert!(gen.reversibility_defect() < 1e-12);
            prop_assert!((gen.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
