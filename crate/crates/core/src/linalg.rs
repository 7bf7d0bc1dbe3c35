//! Small iterative solvers shared by the spectral and diffusion code.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Relative residual target `|r| / |b|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 20_000,
        }
    }
}

/// Inner product `Σ w_i x_i y_i`, or the Euclidean one when `w` is `None`.
#[inline]
pub fn dot(w: Option<&[f64]>, x: &[f64], y: &[f64]) -> f64 {
    match w {
        Some(w) => w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum(),
        None => x.iter().zip(y).map(|(x, y)| x * y).sum(),
    }
}

/// Remove the component along a unit vector `k` (unit in the same inner product).
#[inline]
pub fn deflate(w: Option<&[f64]>, k: &[f64], x: &mut [f64]) {
    let c = dot(w, k, x);
    x.iter_mut().zip(k).for_each(|(x, k)| *x -= c * k);
}

/// Conjugate gradients for `A x = b` with `A` self-adjoint and positive in
/// the inner product defined by `weights`. When `kernel` is given, the
/// problem is solved on its orthogonal complement.
pub fn conjugate_gradient<F>(
    apply: F,
    b: &[f64],
    weights: Option<&[f64]>,
    kernel: Option<&[f64]>,
    opts: CgOptions,
) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut r = b.to_vec();
    if let Some(k) = kernel {
        deflate(weights, k, &mut r);
    }
    let bnorm = dot(weights, &r, &r).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = bnorm * bnorm;
    for it in 0..opts.max_iter {
        apply(&p, &mut ap);
        if let Some(k) = kernel {
            deflate(weights, k, &mut ap);
        }
        let pap = dot(weights, &p, &ap);
        if pap <= 0.0 {
            return Err(Error::Solver(format!(
                "operator not positive on search direction (pAp = {pap:.3e}) at iteration {it}"
            )));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(weights, &r, &r);
        if rr_new.sqrt() <= opts.tol * bnorm {
            if let Some(k) = kernel {
                deflate(weights, k, &mut x);
            }
            return Ok((x, it + 1));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::Solver(format!(
        "conjugate gradients stalled after {} iterations (residual {:.3e})",
        opts.max_iter,
        rr.sqrt() / bnorm
    )))
}
