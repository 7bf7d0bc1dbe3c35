//! Finite-volume central-limit variance of space averages of local functions.

use serde::{Deserialize, Serialize};

use super::{build_generator, GeneratorVariant};
use crate::error::{Error, Result};
use crate::lattice::TorusGeometry;
use crate::linalg::{conjugate_gradient, CgOptions};
use crate::measures::canonical_ensemble;
use crate::process::{pair_current, pair_move, RateSet};

/// A function of the spins at finitely many offsets in `ℤ^d`.
///
/// `table` is indexed by the base-3 digits `η(offset_i) + 1`, the first offset
/// being the most significant digit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFunction {
    pub offsets: Vec<Vec<i64>>,
    pub table: Vec<f64>,
}

impl LocalFunction {
    pub fn new(offsets: Vec<Vec<i64>>, table: Vec<f64>) -> Result<Self> {
        let m = offsets.len();
        if m == 0 {
            return Err(Error::InvalidArgument("local function needs at least one site".into()));
        }
        let d = offsets[0].len();
        if offsets.iter().any(|o| o.len() != d) || d == 0 {
            return Err(Error::InvalidArgument("offsets must share a positive dimension".into()));
        }
        if table.len() != 3usize.pow(m as u32) {
            return Err(Error::DimensionMismatch {
                expected: 3usize.pow(m as u32),
                got: table.len(),
            });
        }
        Ok(Self { offsets, table })
    }

    pub fn from_fn<F: Fn(&[i8]) -> f64>(offsets: Vec<Vec<i64>>, f: F) -> Result<Self> {
        let m = offsets.len();
        let table = (0..3usize.pow(m as u32))
            .map(|code| f(&decode(code, m)))
            .collect();
        Self::new(offsets, table)
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            offsets: vec![vec![0; dim]],
            table: vec![0.0; 3],
        }
    }

    pub fn dim(&self) -> usize {
        self.offsets[0].len()
    }

    /// Value on the local spins listed in offset order.
    pub fn eval_local(&self, spins: &[i8]) -> f64 {
        self.table[encode(spins)]
    }

    /// `max_i max_j |offset_i[j]|`.
    pub fn radius(&self) -> usize {
        self.offsets
            .iter()
            .flat_map(|o| o.iter().map(|c| c.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }

    /// Lower and upper corner of the bounding rectangle of the offsets.
    fn bounding_box(&self) -> (Vec<i64>, Vec<i64>) {
        let d = self.dim();
        let lo = (0..d).map(|j| self.offsets.iter().map(|o| o[j]).min().unwrap()).collect();
        let hi = (0..d).map(|j| self.offsets.iter().map(|o| o[j]).max().unwrap()).collect();
        (lo, hi)
    }

    /// Largest `|E[ψ]|` over the canonical measures on the bounding rectangle.
    pub fn canonical_mean_defect(&self, rates: &RateSet) -> Result<f64> {
        let (lo, hi) = self.bounding_box();
        let sides: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        let volume: usize = sides.iter().product();
        let pos: Vec<usize> = self
            .offsets
            .iter()
            .map(|o| {
                o.iter()
                    .zip(&lo)
                    .zip(&sides)
                    .fold(0usize, |acc, ((c, l), s)| acc * s + (c - l) as usize)
            })
            .collect();
        let mut worst: f64 = 0.0;
        for k in -(volume as i64)..=(volume as i64) {
            let ens = canonical_ensemble(volume, k, rates, usize::MAX)?;
            if ens.is_empty() {
                continue;
            }
            let mean = ens.expect(|s| {
                let local: Vec<i8> = pos.iter().map(|&p| s[p]).collect();
                self.eval_local(&local)
            });
            worst = worst.max(mean.abs());
        }
        Ok(worst)
    }
}

fn decode(mut code: usize, m: usize) -> Vec<i8> {
    let mut out = vec![0i8; m];
    for i in (0..m).rev() {
        out[i] = (code % 3) as i8 - 1;
        code /= 3;
    }
    out
}

fn encode(spins: &[i8]) -> usize {
    spins.iter().fold(0, |acc, &s| acc * 3 + (s + 1) as usize)
}

/// The current `W_{0, e_axis}` as a local function.
pub fn current_local_function(dim: usize, axis: usize, rates: &RateSet) -> Result<LocalFunction> {
    if axis >= dim {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    let mut e = vec![0i64; dim];
    e[axis] = 1;
    LocalFunction::from_fn(vec![vec![0; dim], e], |s| pair_current(s[0], s[1], rates))
}

/// `L g` for a local `g`, summed over the bonds touching its support.
pub fn generator_of_local(g: &LocalFunction, rates: &RateSet) -> Result<LocalFunction> {
    let d = g.dim();
    // support of L g: offsets of g and their nearest neighbours
    let mut sites: Vec<Vec<i64>> = g.offsets.clone();
    for o in &g.offsets {
        for axis in 0..d {
            for sign in [-1i64, 1] {
                let mut n = o.clone();
                n[axis] += sign;
                if !sites.contains(&n) {
                    sites.push(n);
                }
            }
        }
    }
    let g_pos: Vec<usize> = g
        .offsets
        .iter()
        .map(|o| sites.iter().position(|s| s == o).unwrap())
        .collect();
    let mut bonds = Vec::new();
    for (i, s) in sites.iter().enumerate() {
        for (j, t) in sites.iter().enumerate() {
            let dist: i64 = s.iter().zip(t).map(|(a, b)| (a - b).abs()).sum();
            if dist == 1 && (g_pos.contains(&i) || g_pos.contains(&j)) {
                bonds.push((i, j));
            }
        }
    }
    let eval_g = |spins: &[i8]| {
        let local: Vec<i8> = g_pos.iter().map(|&p| spins[p]).collect();
        g.eval_local(&local)
    };
    LocalFunction::from_fn(sites, |spins| {
        let g0 = eval_g(spins);
        let mut out = 0.0;
        let mut w = spins.to_vec();
        for &(x, y) in &bonds {
            let (a, b) = (spins[x], spins[y]);
            let c = rates.pair_rate(a, b);
            if c == 0.0 {
                continue;
            }
            let (na, nb) = pair_move(a, b).unwrap();
            w[x] = na;
            w[y] = nb;
            out += c * (eval_g(&w) - g0);
            w[x] = a;
            w[y] = b;
        }
        out
    })
}

/// `V_l^ψ = (2l)^{-d} ⟨(-L_Λ)^{-1} F, F⟩` with `F = Σ_{|x|≤l-s_ψ} τ_x ψ` on the
/// cube `Λ = {-l..l}^d` with free boundary at total charge `charge`.
pub fn finite_volume_variance(psi: &LocalFunction, l: usize, charge: i64, rates: &RateSet) -> Result<f64> {
    let d = psi.dim();
    let defect = psi.canonical_mean_defect(rates)?;
    if defect > 1e-10 {
        return Err(Error::NotMeanZero(defect));
    }
    let s = psi.radius();
    if l < s || l == 0 {
        return Err(Error::InvalidArgument(format!(
            "box radius {l} smaller than the support radius {s} of ψ"
        )));
    }
    let side = 2 * l + 1;
    let geom = TorusGeometry::free_box(d, side)?;
    let gen = build_generator(&geom, charge, rates, GeneratorVariant::Full)?;
    let inner = (l - s) as i64;
    // translates x ∈ {-inner..inner}^d; box coordinates shifted by +l
    let mut translates: Vec<Vec<usize>> = Vec::new();
    let count = (2 * inner + 1) as usize;
    for code in 0..count.pow(d as u32) {
        let mut c = code;
        let mut x = vec![0i64; d];
        for j in (0..d).rev() {
            x[j] = (c % count) as i64 - inner;
            c /= count;
        }
        let sites = psi
            .offsets
            .iter()
            .map(|o| {
                let coords: Vec<usize> = o.iter().zip(&x).map(|(a, b)| (a + b + l as i64) as usize).collect();
                geom.site(&coords)
            })
            .collect();
        translates.push(sites);
    }
    let mut local = vec![0i8; psi.offsets.len()];
    let f: Vec<f64> = gen
        .states
        .iter()
        .map(|st| {
            translates
                .iter()
                .map(|sites| {
                    for (v, &p) in local.iter_mut().zip(sites) {
                        *v = st[p];
                    }
                    psi.eval_local(&local)
                })
                .sum()
        })
        .collect();
    if gen.len() <= 1 || f.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let ones = vec![1.0; gen.len()];
    let (u, _) = conjugate_gradient(
        |x, out| {
            gen.apply(x, out);
            out.iter_mut().for_each(|v| *v = -*v);
        },
        &f,
        Some(&gen.weights),
        Some(&ones),
        CgOptions::default(),
    )?;
    let uf: f64 = u.iter().zip(&f).zip(&gen.weights).map(|((u, f), w)| u * f * w).sum();
    Ok(uf / (2.0 * l as f64).powi(d as i32))
}
