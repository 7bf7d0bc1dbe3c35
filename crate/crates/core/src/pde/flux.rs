//! Case-specific fluxes `φ` for `∂_t ρ = Δ φ(ρ)`.

use serde::{Deserialize, Serialize};

use crate::diffusion::{integrate_dtilde, DiffusionTable};
use crate::error::{Error, Result};
use crate::process::{CaseTag, RateSet};

/// Cubic Hermite interpolant with Fritsch–Carlson limited slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCubic {
    /// `slopes` are the exact derivatives at the nodes when known; they are
    /// limited so the interpolant stays monotone.
    pub fn new(x: Vec<f64>, y: Vec<f64>, slopes: Option<Vec<f64>>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("monotone cubic needs ≥ 2 increasing nodes".into()));
        }
        if y.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("monotone cubic needs nondecreasing values".into()));
        }
        let secant: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut m = match slopes {
            Some(s) if s.len() == n => s,
            Some(s) => {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: s.len(),
                })
            }
            None => {
                let mut m = vec![0.0; n];
                m[0] = secant[0];
                m[n - 1] = secant[n - 2];
                for i in 1..n - 1 {
                    m[i] = if secant[i - 1] * secant[i] > 0.0 {
                        0.5 * (secant[i - 1] + secant[i])
                    } else {
                        0.0
                    };
                }
                m
            }
        };
        for i in 0..n - 1 {
            let s = secant[i];
            if s == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            m[i] = m[i].max(0.0);
            m[i + 1] = m[i + 1].max(0.0);
            let a = m[i] / s;
            let b = m[i + 1] / s;
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                m[i] = t * a * s;
                m[i + 1] = t * b * s;
            }
        }
        Ok(Self { x, y, m })
    }

    fn interval(&self, t: f64) -> usize {
        match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= self.x.len() => self.x.len() - 2,
            p => p - 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(self.x[0], self.x[self.x.len() - 1]);
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[i]
            + (s3 - 2.0 * s2 + s) * h * self.m[i]
            + (-2.0 * s3 + 3.0 * s2) * self.y[i + 1]
            + (s3 - s2) * h * self.m[i + 1]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let t = t.clamp(self.x[0], self.x[self.x.len() - 1]);
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let dy = (self.y[i + 1] - self.y[i]) / h;
        (6.0 * s - 6.0 * s * s) * dy + (3.0 * s * s - 4.0 * s + 1.0) * self.m[i] + (3.0 * s * s - 2.0 * s) * self.m[i + 1]
    }

    /// Exact maximum of the derivative (a quadratic on each interval).
    pub fn max_derivative(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.x.len() - 1 {
            let h = self.x[i + 1] - self.x[i];
            let dy = (self.y[i + 1] - self.y[i]) / h;
            let (m0, m1) = (self.m[i], self.m[i + 1]);
            best = best.max(m0).max(m1);
            // p'(s) = qa s² + qb s + m0
            let qa = -6.0 * dy + 3.0 * m0 + 3.0 * m1;
            let qb = 6.0 * dy - 4.0 * m0 - 2.0 * m1;
            if qa < 0.0 {
                let s = -qb / (2.0 * qa);
                if s > 0.0 && s < 1.0 {
                    best = best.max(qa * s * s + qb * s + m0);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FluxKind {
    /// `φ(ρ) = slope · ρ`.
    Linear { slope: f64 },
    /// `φ(ρ) = c_plus · ρ` for `ρ > 0`, `c_minus · ρ` for `ρ < 0`.
    TwoPhase { c_plus: f64, c_minus: f64 },
    /// Monotone cubic through `(ρ_i, d̃(ρ_i))`.
    Table { interpolant: MonotoneCubic },
    /// `φ(ρ) = d̃(ρ) = ∫_{-1}^ρ d` with `d` affine (closed form on the gradient
    /// manifold at β = ¼, or a constant).
    Quadratic { d0: f64, d1: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxFunction {
    pub kind: FluxKind,
    pub lipschitz: f64,
    pub case: CaseTag,
}

impl FluxFunction {
    pub fn linear(slope: f64, case: CaseTag) -> Result<Self> {
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::InvalidArgument(format!("flux slope {slope} must be positive")));
        }
        Ok(Self {
            kind: FluxKind::Linear { slope },
            lipschitz: slope,
            case,
        })
    }

    /// Flux for `d(ρ) = d0 + d1 ρ`, which must stay positive on `[-1, 1]`.
    pub fn affine_diffusion(d0: f64, d1: f64) -> Result<Self> {
        let (lo, hi) = (d0 - d1.abs(), d0 + d1.abs());
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("d(ρ) = {d0} + {d1}ρ is not positive on [-1, 1]")));
        }
        Ok(Self {
            kind: FluxKind::Quadratic { d0, d1 },
            lipschitz: hi,
            case: CaseTag::Case1,
        })
    }

    pub fn eval(&self, rho: f64) -> f64 {
        let r = rho.clamp(-1.0, 1.0);
        match &self.kind {
            FluxKind::Linear { slope } => slope * r,
            FluxKind::TwoPhase { c_plus, c_minus } => {
                if r > 0.0 {
                    c_plus * r
                } else {
                    c_minus * r
                }
            }
            FluxKind::Table { interpolant } => interpolant.eval(r),
            FluxKind::Quadratic { d0, d1 } => {
                let antideriv = |x: f64| d0 * x + 0.5 * d1 * x * x;
                antideriv(r) - antideriv(-1.0)
            }
        }
    }

    /// `φ'(ρ)` where it exists (right derivative at kinks).
    pub fn derivative(&self, rho: f64) -> f64 {
        let r = rho.clamp(-1.0, 1.0);
        match &self.kind {
            FluxKind::Linear { slope } => *slope,
            FluxKind::TwoPhase { c_plus, c_minus } => {
                if r >= 0.0 {
                    *c_plus
                } else {
                    *c_minus
                }
            }
            FluxKind::Table { interpolant } => interpolant.derivative(r),
            FluxKind::Quadratic { d0, d1 } => d0 + d1 * r,
        }
    }
}

/// `φ` for the hydrodynamic equation of the case of `rates`.
///
/// Case 1 needs a diffusion table; the two-phase flux for case 2 uses the
/// slope `C₋` on `ρ < 0` so that `φ` is increasing.
pub fn make_flux(rates: &RateSet, table: Option<&DiffusionTable>) -> Result<FluxFunction> {
    match rates.case()? {
        CaseTag::Case1 => {
            let table = table.ok_or_else(|| Error::InvalidArgument("case 1 flux needs a diffusion table".into()))?;
            let integrated = integrate_dtilde(table)?;
            let interpolant = MonotoneCubic::new(integrated.rho, integrated.dtilde, Some(integrated.d))?;
            let lipschitz = interpolant.max_derivative();
            Ok(FluxFunction {
                kind: FluxKind::Table { interpolant },
                lipschitz,
                case: CaseTag::Case1,
            })
        }
        CaseTag::Case2 => Ok(FluxFunction {
            kind: FluxKind::TwoPhase {
                c_plus: rates.c_plus,
                c_minus: rates.c_minus,
            },
            lipschitz: rates.c_plus.max(rates.c_minus),
            case: CaseTag::Case2,
        }),
        CaseTag::Case3 => FluxFunction::linear(rates.c_exchange, CaseTag::Case3),
    }
}
