//! Geometry of the discrete torus and of the free-boundary box.
//!
//! Sites are indexed row-major over coordinates in `{0, ..., N-1}^d`: the
//! first coordinate is the most significant digit, so in `d = 2` the site
//! `(x0, x1)` has index `x0 * N + x1`. The box `{1, ..., N}^d` is shifted to
//! base zero. Axes are zero-based throughout.

use crate::error::{Error, Result};

/// Side length and dimension of a cubic lattice, periodic or with free boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGeometry {
    dim: usize,
    side: usize,
    periodic: bool,
}

/// Ordered nearest-neighbour pair.
///
/// `multiplicity` is 2 for the collapsed pair on an `N = 2` torus, where the
/// two adjacencies between the same sites coincide, and 1 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DirectedBond {
    pub from: usize,
    pub to: usize,
    pub multiplicity: u8,
}

impl DirectedBond {
    pub fn reversed(self) -> Self {
        Self {
            from: self.to,
            to: self.from,
            multiplicity: self.multiplicity,
        }
    }
}

/// Shape of the block used for local averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockShape {
    /// `{y : sum_i |y_i - x_i| <= l}`.
    SumNorm,
    /// `{y : max_i |y_i - x_i| <= l}`, i.e. `x + {-l..l}^d`.
    #[default]
    Cube,
}

impl TorusGeometry {
    pub fn new(dim: usize, side: usize, periodic: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Geometry("dimension must be at least 1".into()));
        }
        if side < 2 {
            return Err(Error::Geometry(format!(
                "side length must be at least 2, got {side}"
            )));
        }
        if (side as f64).powi(dim as i32) > u32::MAX as f64 {
            return Err(Error::Geometry("site count overflows".into()));
        }
        Ok(Self {
            dim,
            side,
            periodic,
        })
    }

    pub fn torus(dim: usize, side: usize) -> Result<Self> {
        Self::new(dim, side, true)
    }

    pub fn free_box(dim: usize, side: usize) -> Result<Self> {
        Self::new(dim, side, false)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn num_sites(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    /// Number of directed bonds counted with multiplicity.
    pub fn num_directed_bonds(&self) -> usize {
        let n = self.side;
        if self.periodic {
            2 * self.dim * self.num_sites()
        } else {
            2 * self.dim * n.pow(self.dim as u32 - 1) * (n - 1)
        }
    }

    /// Stride of `axis` in the row-major index.
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    pub fn coord(&self, site: usize, axis: usize) -> usize {
        (site / self.stride(axis)) % self.side
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        (0..self.dim).map(|a| self.coord(site, a)).collect()
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        coords
            .iter()
            .fold(0, |acc, &c| acc * self.side + (c % self.side))
    }

    /// Site at `coords` reduced modulo `N` (any integer coordinates).
    pub fn site_wrapped(&self, coords: &[i64]) -> usize {
        let n = self.side as i64;
        coords
            .iter()
            .fold(0usize, |acc, &c| acc * self.side + c.rem_euclid(n) as usize)
    }

    /// Neighbour of `site` one step along `axis` in direction `sign`
    /// (`+1` or `-1`); `None` when the step leaves a free-boundary box.
    pub fn neighbor(&self, site: usize, axis: usize, sign: i8) -> Option<usize> {
        let c = self.coord(site, axis);
        let stride = self.stride(axis);
        match sign {
            1 if c + 1 < self.side => Some(site + stride),
            1 if self.periodic => Some(site + stride - self.side * stride),
            -1 if c > 0 => Some(site - stride),
            -1 if self.periodic => Some(site + (self.side - 1) * stride),
            _ => None,
        }
    }

    /// All directed nearest-neighbour bonds. Each ordered pair appears once;
    /// on an `N = 2` torus the two coincident adjacencies along an axis are
    /// merged into one bond of multiplicity 2.
    pub fn bonds(&self) -> Vec<DirectedBond> {
        let mut out = Vec::with_capacity(self.num_directed_bonds());
        let collapsed = self.periodic && self.side == 2;
        for x in 0..self.num_sites() {
            for axis in 0..self.dim {
                for sign in [1i8, -1] {
                    if collapsed && sign == -1 {
                        continue;
                    }
                    if let Some(y) = self.neighbor(x, axis, sign) {
                        out.push(DirectedBond {
                            from: x,
                            to: y,
                            multiplicity: if collapsed { 2 } else { 1 },
                        });
                    }
                }
            }
        }
        out
    }

    /// Reflection with respect to `e_axis / 2`: `x_axis -> 1 - x_axis (mod N)`.
    pub fn reflect_site(&self, site: usize, axis: usize) -> Result<usize> {
        if !self.periodic {
            return Err(Error::Geometry(
                "reflection is only defined on the torus".into(),
            ));
        }
        if axis >= self.dim {
            return Err(Error::InvalidArgument(format!(
                "axis {axis} out of range for dimension {}",
                self.dim
            )));
        }
        let c = self.coord(site, axis) as i64;
        let reflected = (1 - c).rem_euclid(self.side as i64) as usize;
        Ok(site - self.coord(site, axis) * self.stride(axis) + reflected * self.stride(axis))
    }

    /// Sites of the block of radius `l` around `center`, wrapped periodically.
    pub fn block_sites(&self, center: usize, l: usize, shape: BlockShape) -> Result<Vec<usize>> {
        if !self.periodic {
            return Err(Error::Geometry("blocks are defined on the torus".into()));
        }
        if 2 * l + 1 > self.side {
            return Err(Error::InvalidArgument(format!(
                "block radius {l} wraps onto itself on a side of {}",
                self.side
            )));
        }
        let base: Vec<i64> = self.coords(center).iter().map(|&c| c as i64).collect();
        let l = l as i64;
        let mut offsets = vec![-l; self.dim];
        let mut out = Vec::new();
        loop {
            let keep = match shape {
                BlockShape::Cube => true,
                BlockShape::SumNorm => offsets.iter().map(|o| o.abs()).sum::<i64>() <= l,
            };
            if keep {
                let c: Vec<i64> = base.iter().zip(&offsets).map(|(b, o)| b + o).collect();
                out.push(self.site_wrapped(&c));
            }
            // odometer over {-l..l}^d
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return Ok(out);
                }
                axis -= 1;
                if offsets[axis] < l {
                    offsets[axis] += 1;
                    break;
                }
                offsets[axis] = -l;
            }
        }
    }
}
