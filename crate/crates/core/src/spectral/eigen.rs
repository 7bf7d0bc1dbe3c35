//! Spectral gaps of reversible generators.
//!
//! The generator is symmetrized as `S = W^{1/2} Q W^{-1/2}`. Small matrices
//! are diagonalized densely; larger ones use Lanczos on `(-S)^{-1}` restricted
//! to the orthogonal complement of the kernel vector `W^{1/2} 1`, with the
//! inner solves done by conjugate gradients.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GeneratorMatrix;
use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, deflate, dot, CgOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    Dense,
    Lanczos,
    /// No diagonalization was needed (one state, or a frozen hyperplane).
    None,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Largest state count handled by the dense solver.
    pub dense_limit: usize,
    /// Relative accuracy of the extremal Ritz value.
    pub tol: f64,
    pub max_lanczos: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_limit: 4000,
            tol: 1e-10,
            max_lanczos: 400,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    /// Smallest nonzero eigenvalue of `-Q`; `None` on a single state.
    pub gap: Option<f64>,
    /// Every state is absorbing.
    pub frozen: bool,
    /// Single-state hyperplane.
    pub degenerate: bool,
    pub components: usize,
    pub states: usize,
    pub method: EigenMethod,
}

pub fn spectral_gap(gen: &GeneratorMatrix) -> Result<GapResult> {
    spectral_gap_with(gen, EigenOptions::default())
}

pub fn spectral_gap_with(gen: &GeneratorMatrix, opts: EigenOptions) -> Result<GapResult> {
    let n = gen.len();
    let mut res = GapResult {
        gap: None,
        frozen: false,
        degenerate: n <= 1,
        components: if n == 0 { 0 } else { gen.components() },
        states: n,
        method: EigenMethod::None,
    };
    if n <= 1 {
        return Ok(res);
    }
    if gen.nnz() == 0 {
        res.frozen = true;
        res.gap = Some(0.0);
        return Ok(res);
    }
    if res.components > 1 {
        return Err(Error::Reducible {
            components: res.components,
        });
    }
    if n <= opts.dense_limit {
        res.gap = Some(dense_gap(gen));
        res.method = EigenMethod::Dense;
    } else {
        res.gap = Some(lanczos_gap(gen, opts)?);
        res.method = EigenMethod::Lanczos;
    }
    Ok(res)
}

/// `-S` as a dense matrix.
pub(crate) fn dense_neg_symmetrized(gen: &GeneratorMatrix) -> DMatrix<f64> {
    let n = gen.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = gen.exit_rate(i);
        for (j, s) in gen.symmetrized_row(i) {
            a[(i, j)] -= s;
        }
    }
    // symmetrize away rounding in sqrt(w_i / w_j)
    let t = a.transpose();
    (a + t) * 0.5
}

/// Eigenvalues of a dense symmetric matrix in increasing order.
pub(crate) fn sorted_eigenvalues(a: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn dense_gap(gen: &GeneratorMatrix) -> f64 {
    sorted_eigenvalues(dense_neg_symmetrized(gen))[1]
}

fn apply_neg_sym(gen: &GeneratorMatrix, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = gen.exit_rate(i) * x[i];
        for (j, v) in gen.symmetrized_row(i) {
            s -= v * x[j];
        }
        *o = s;
    }
}

fn lanczos_gap(gen: &GeneratorMatrix, opts: EigenOptions) -> Result<f64> {
    let n = gen.len();
    let kernel: Vec<f64> = gen.weights.iter().map(|w| w.sqrt()).collect();
    let knorm = dot(None, &kernel, &kernel).sqrt();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / knorm).collect();
    let cg = CgOptions {
        tol: 1e-13,
        max_iter: 50 * n.max(100),
    };
    let solve = |b: &[f64]| -> Result<Vec<f64>> {
        conjugate_gradient(|x, out| apply_neg_sym(gen, x, out), b, None, Some(&kernel), cg).map(|r| r.0)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    deflate(None, &kernel, &mut v);
    let nv = dot(None, &v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);

    let m_max = opts.max_lanczos.min(n - 1);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for k in 0..m_max {
        let mut w = solve(&basis[k])?;
        let a = dot(None, &w, &basis[k]);
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            deflate(None, &kernel, &mut w);
            for q in &basis {
                let c = dot(None, q, &w);
                w.iter_mut().zip(q).for_each(|(w, q)| *w -= c * q);
            }
        }
        let b = dot(None, &w, &w).sqrt();

        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imax, theta) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        let resid = (b * eig.eigenvectors[(m - 1, imax)]).abs();
        let converged = resid <= opts.tol * theta.abs() && (theta - last).abs() <= opts.tol * theta.abs();
        last = theta;
        if converged || b <= 1e-14 * theta.abs() || k + 1 == m_max {
            if theta <= 0.0 {
                return Err(Error::Solver("nonpositive Ritz value in shift-invert Lanczos".into()));
            }
            if !converged && b > 1e-14 * theta.abs() && k + 1 < n - 1 {
                return Err(Error::Solver(format!(
                    "Lanczos did not converge in {m_max} steps (residual {resid:.3e})"
                )));
            }
            return Ok(1.0 / theta);
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Err(Error::Solver("Lanczos exhausted its iterations".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TorusGeometry;
    use crate::process::RateSet;
    use crate::spectral::{build_generator, GeneratorVariant};
    use approx::assert_relative_eq;

    fn r(a: f64, b: f64, c: f64, d: f64, e: f64) -> RateSet {
        RateSet::new(a, b, c, d, e).unwrap()
    }

    #[test]
    fn degenerate_and_small_cases() {
        let g = TorusGeometry::free_box(1, 2).unwrap();
        let rates = r(2., 3., 5., 7., 11.);
        let one = build_generator(&g, 2, &rates, GeneratorVariant::Full).unwrap();
        let res = spectral_gap(&one).unwrap();
        assert!(res.degenerate && res.gap.is_none());

        // 3x3 oracle for the two-site box at K = 0
        let gen = build_generator(&g, 0, &rates, GeneratorVariant::Full).unwrap();
        let mut q = DMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                q[(i, j)] = gen.entry(i, j);
            }
        }
        // -Q has real spectrum since it is similar to a symmetric matrix
        let mut ev: Vec<f64> = (-q).complex_eigenvalues().iter().map(|c| c.re).collect();
        ev.sort_by(f64::total_cmp);
        let res = spectral_gap(&gen).unwrap();
        assert_relative_eq!(res.gap.unwrap(), ev[1], max_relative = 1e-10);
        assert!(ev[0].abs() < 1e-10);
    }

    #[test]
    fn case2_single_species_hopping_is_not_frozen() {
        let g = TorusGeometry::free_box(1, 4).unwrap();
        let gen = build_generator(&g, 2, &r(3., 1., 0., 4., 0.), GeneratorVariant::Full).unwrap();
        let res = spectral_gap(&gen).unwrap();
        assert!(!res.frozen);
        assert!(res.gap.unwrap() > 0.0);
    }

    #[test]
    fn lanczos_matches_dense() {
        let rates = r(2., 1., 0.5, 2., 0.5);
        for (n, k, periodic) in [(6, 0, false), (7, 1, true), (7, -2, false)] {
            let g = TorusGeometry::new(1, n, periodic).unwrap();
            let v = if periodic { GeneratorVariant::Torus } else { GeneratorVariant::Full };
            let gen = build_generator(&g, k, &rates, v).unwrap();
            let dense = spectral_gap(&gen).unwrap();
            let opts = EigenOptions {
                dense_limit: 1,
                ..Default::default()
            };
            let it = spectral_gap_with(&gen, opts).unwrap();
            assert_eq!(it.method, EigenMethod::Lanczos);
            assert_relative_eq!(dense.gap.unwrap(), it.gap.unwrap(), max_relative = 1e-8);
        }
    }

    #[test]
    fn kernel_is_one_dimensional() {
        let g = TorusGeometry::free_box(1, 5).unwrap();
        for k in 0..=4 {
            let gen = build_generator(&g, k, &r(1., 1., 1., 1., 1.), GeneratorVariant::Full).unwrap();
            let ev = sorted_eigenvalues(dense_neg_symmetrized(&gen));
            assert!(ev[0].abs() < 1e-10);
            assert!(ev.len() == 1 || ev[1] > 1e-8);
        }
    }

    #[test]
    fn duality_of_gaps() {
        let g = TorusGeometry::free_box(1, 5).unwrap();
        let rates = r(2., 0.7, 0.3, 1.5, 0.8);
        for k in 1..=3 {
            let a = spectral_gap(&build_generator(&g, k, &rates, GeneratorVariant::Full).unwrap()).unwrap();
            let b = spectral_gap(&build_generator(&g, -k, &rates.dual(), GeneratorVariant::Full).unwrap()).unwrap();
            assert_relative_eq!(a.gap.unwrap(), b.gap.unwrap(), max_relative = 1e-10);
            let t = rates.beta().unwrap();
            let tr = RateSet::tilde(t).unwrap();
            let a = spectral_gap(&build_generator(&g, k, &tr, GeneratorVariant::Tilde).unwrap()).unwrap();
            let b = spectral_gap(&build_generator(&g, -k, &tr, GeneratorVariant::Tilde).unwrap()).unwrap();
            assert_relative_eq!(a.gap.unwrap(), b.gap.unwrap(), max_relative = 1e-10);
        }
    }
}
