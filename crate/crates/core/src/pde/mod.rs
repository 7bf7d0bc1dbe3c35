//! Explicit conservative solver for `∂_t ρ = Δ φ(ρ)` on the unit torus and
//! the weak-form residual used to check its output.

mod flux;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use flux::{make_flux, FluxFunction, FluxKind, MonotoneCubic};

use crate::error::{Error, Result};

/// Slack allowed on `[-1, 1]` for values produced by floating point.
const RANGE_SLACK: f64 = 1e-12;

/// `ρ` on the nodes `i / M` of the uniform grid of `[0, 1)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub dim: usize,
    pub cells: usize,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityProfile {
    pub fn new(dim: usize, cells: usize, values: Vec<f64>, time: f64) -> Result<Self> {
        if dim == 0 || cells < 3 {
            return Err(Error::InvalidArgument("profile needs d ≥ 1 and M ≥ 3".into()));
        }
        let n = cells.checked_pow(dim as u32).ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite profile value {v}")));
        }
        if let Some(v) = values.iter().find(|v| v.abs() > 1.0 + RANGE_SLACK) {
            return Err(Error::InvalidArgument(format!("profile value {v} outside [-1, 1]")));
        }
        Ok(Self {
            dim,
            cells,
            values,
            time,
        })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(dim: usize, cells: usize, f: F) -> Result<Self> {
        let n = cells.pow(dim as u32);
        let values = (0..n).map(|i| f(&node(i, dim, cells))).collect();
        Self::new(dim, cells, values, 0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinates of node `i` in `[0, 1)^d`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        node(i, self.dim, self.cells)
    }

    /// `M^{-d} Σ ρ_i`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// `M^{-d} Σ H(u_i) ρ_i`.
    pub fn pair(&self, h: &TestFunction) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| h.value(&self.point(i)) * v)
            .sum::<f64>()
            / self.len() as f64
    }

    /// Zero crossings of a one-dimensional profile, by linear interpolation
    /// between nodes, as points of `[0, 1)`.
    pub fn zero_crossings(&self) -> Result<Vec<f64>> {
        if self.dim != 1 {
            return Err(Error::InvalidArgument("zero crossings need d = 1".into()));
        }
        let m = self.cells;
        let mut out = Vec::new();
        for i in 0..m {
            let (a, b) = (self.values[i], self.values[(i + 1) % m]);
            if (a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0) {
                let frac = a / (a - b);
                out.push((i as f64 + frac) / m as f64);
            }
        }
        Ok(out)
    }
}

fn node(mut i: usize, dim: usize, cells: usize) -> Vec<f64> {
    let mut u = vec![0.0; dim];
    for j in (0..dim).rev() {
        u[j] = (i % cells) as f64 / cells as f64;
        i /= cells;
    }
    u
}

type Field = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A smooth function on the torus together with its Laplacian.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    value: Field,
    laplacian: Field,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).finish()
    }
}

impl TestFunction {
    pub fn new<F, G>(name: impl Into<String>, value: F, laplacian: G) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            value: Arc::new(value),
            laplacian: Arc::new(laplacian),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c, |_| 0.0)
    }

    /// `cos(2πk u_axis)`.
    pub fn cos_mode(k: u32, axis: usize) -> Self {
        let w = 2.0 * PI * k as f64;
        Self::new(
            format!("cos(2π·{k}·u{axis})"),
            move |u| (w * u[axis]).cos(),
            move |u| -w * w * (w * u[axis]).cos(),
        )
    }

    /// `sin(2πk u_axis)`.
    pub fn sin_mode(k: u32, axis: usize) -> Self {
        let w = 2.0 * PI * k as f64;
        Self::new(
            format!("sin(2π·{k}·u{axis})"),
            move |u| (w * u[axis]).sin(),
            move |u| -w * w * (w * u[axis]).sin(),
        )
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        (self.value)(u)
    }

    pub fn laplacian(&self, u: &[f64]) -> f64 {
        (self.laplacian)(u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Time step; defaults to `cfl_fraction` times the bound.
    pub dt: Option<f64>,
    pub cfl_fraction: f64,
    /// Times at which profiles are returned, besides `0` and `T`.
    pub snapshot_times: Vec<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            dt: None,
            cfl_fraction: 0.9,
            snapshot_times: Vec::new(),
        }
    }
}

impl SolveOptions {
    /// `count` evenly spaced snapshots on `(0, T]`.
    pub fn every(t_final: f64, count: usize) -> Self {
        Self {
            snapshot_times: (1..=count).map(|i| t_final * i as f64 / count as f64).collect(),
            ..Default::default()
        }
    }
}

/// `h² / (2 d Lip φ)`.
pub fn cfl_bound(dim: usize, cells: usize, flux: &FluxFunction) -> f64 {
    let h = 1.0 / cells as f64;
    h * h / (2.0 * dim as f64 * flux.lipschitz)
}

/// Periodic neighbours `(i - e_j, i + e_j)` of every node.
fn neighbours(dim: usize, cells: usize) -> Vec<[usize; 2]> {
    let n = cells.pow(dim as u32);
    let mut out = Vec::with_capacity(n * dim);
    for i in 0..n {
        let mut stride = 1;
        for _ in 0..dim {
            let c = (i / stride) % cells;
            let down = if c == 0 { i + (cells - 1) * stride } else { i - stride };
            let up = if c == cells - 1 { i - (cells - 1) * stride } else { i + stride };
            out.push([down, up]);
            stride *= cells;
        }
    }
    out
}

/// Forward Euler with the conservative stencil
/// `ρ_x += dt/h² Σ_j (φ_{x+e_j} - 2φ_x + φ_{x-e_j})`.
///
/// Returns profiles at `0`, the requested snapshot times, and `t_final`,
/// with steps shortened to land on them exactly.
pub fn solve(initial: &DensityProfile, flux: &FluxFunction, t_final: f64, opts: &SolveOptions) -> Result<Vec<DensityProfile>> {
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::InvalidArgument(format!("final time {t_final} must be positive")));
    }
    let initial = DensityProfile::new(initial.dim, initial.cells, initial.values.clone(), 0.0)?;
    if !(flux.lipschitz.is_finite() && flux.lipschitz > 0.0) {
        return Err(Error::InvalidArgument("flux Lipschitz constant must be positive".into()));
    }
    let bound = cfl_bound(initial.dim, initial.cells, flux);
    let dt = match opts.dt {
        Some(dt) if !(dt > 0.0 && dt <= bound) => return Err(Error::Cfl { dt, bound }),
        Some(dt) => dt,
        None => {
            if !(opts.cfl_fraction > 0.0 && opts.cfl_fraction <= 1.0) {
                return Err(Error::InvalidArgument("cfl_fraction must lie in (0, 1]".into()));
            }
            opts.cfl_fraction * bound
        }
    };
    let mut stops: Vec<f64> = opts.snapshot_times.iter().copied().filter(|t| *t > 0.0 && *t < t_final).collect();
    if opts.snapshot_times.iter().any(|t| !(t.is_finite() && *t >= 0.0 && *t <= t_final)) {
        return Err(Error::InvalidArgument("snapshot times must lie in [0, T]".into()));
    }
    stops.push(t_final);
    stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stops.dedup();

    let (dim, cells) = (initial.dim, initial.cells);
    let nb = neighbours(dim, cells);
    let inv_h2 = (cells * cells) as f64;
    let n = initial.len();
    let mut rho = initial.values.clone();
    let mut phi = vec![0.0; n];
    let mut out = vec![initial];
    let mut t = 0.0;
    for &stop in &stops {
        loop {
            let remaining = stop - t;
            if remaining <= 1e-14 * stop.max(1.0) {
                break;
            }
            let step = if remaining < dt * (1.0 + 1e-9) { remaining } else { dt };
            for (p, r) in phi.iter_mut().zip(&rho) {
                *p = flux.eval(*r);
            }
            let c = step * inv_h2;
            for i in 0..n {
                let mut lap = 0.0;
                for j in 0..dim {
                    let [down, up] = nb[i * dim + j];
                    lap += phi[down] - 2.0 * phi[i] + phi[up];
                }
                rho[i] += c * lap;
            }
            t = if step == remaining { stop } else { t + step };
        }
        out.push(DensityProfile {
            dim,
            cells,
            values: rho.clone(),
            time: stop,
        });
    }
    Ok(out)
}

/// `max_n |∫Hρ(t_n) - ∫Hρ₀ - ∫₀^{t_n} ∫φ(ρ)ΔH|` with grid quadrature in
/// space and the trapezoid rule over the snapshots in time.
pub fn weak_residual(snapshots: &[DensityProfile], flux: &FluxFunction, h: &TestFunction) -> Result<f64> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::InvalidArgument("no snapshots".into()))?;
    if snapshots.iter().any(|s| s.dim != first.dim || s.cells != first.cells) {
        return Err(Error::InvalidArgument("snapshots on different grids".into()));
    }
    if snapshots.windows(2).any(|w| w[1].time <= w[0].time) {
        return Err(Error::InvalidArgument("snapshot times must increase".into()));
    }
    let n = first.len();
    let points: Vec<Vec<f64>> = (0..n).map(|i| first.point(i)).collect();
    let hv: Vec<f64> = points.iter().map(|u| h.value(u)).collect();
    let lap: Vec<f64> = points.iter().map(|u| h.laplacian(u)).collect();
    let pair = |s: &DensityProfile| hv.iter().zip(&s.values).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let drift = |s: &DensityProfile| lap.iter().zip(&s.values).map(|(a, b)| a * flux.eval(*b)).sum::<f64>() / n as f64;
    let p0 = pair(first);
    let mut integral = 0.0;
    let mut prev = drift(first);
    let mut worst: f64 = 0.0;
    for w in snapshots.windows(2) {
        let cur = drift(&w[1]);
        integral += 0.5 * (w[1].time - w[0].time) * (prev + cur);
        prev = cur;
        worst = worst.max((pair(&w[1]) - p0 - integral).abs());
    }
    Ok(worst)
}

/// `M^{-d} Σ |a - b|` for profiles on the same grid.
pub fn l1_distance(a: &DensityProfile, b: &DensityProfile) -> Result<f64> {
    if a.dim != b.dim || a.cells != b.cells {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// CSV with columns `time,cell_index,value`.
pub fn profiles_csv(profiles: &[DensityProfile]) -> String {
    let mut s = String::from("time,cell_index,value\n");
    for p in profiles {
        for (i, v) in p.values.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", p.time, i, v);
        }
    }
    s
}
