//! Rates, moves and the generator of the two-species exclusion process.
//!
//! A directed bond `(x, y)` with spins `(a, b) = (η(x), η(y))` fires at rate
//!
//! | pair      | rate  | result    |
//! |-----------|-------|-----------|
//! | `( 1, 0)` | `C₊`  | `( 0, 1)` |
//! | `( 0,-1)` | `C₋`  | `(-1, 0)` |
//! | `(-1, 1)` | `C_E` | `( 1,-1)` |
//! | `( 1,-1)` | `C_A` | `( 0, 0)` |
//! | `( 0, 0)` | `C_C` | `(-1, 1)` |
//!
//! and every other ordered pair is inactive. Each move preserves `a + b`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DirectedBond, TorusGeometry};

/// Tolerance for deciding whether a rate set sits on the gradient manifold.
pub const GRADIENT_TOL: f64 = 1e-12;

/// The three regimes of creation/annihilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    /// Annihilation and creation both active.
    Case1,
    /// Annihilation only.
    Case2,
    /// Creation only.
    Case3,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseTag::Case1 => "case1",
            CaseTag::Case2 => "case2",
            CaseTag::Case3 => "case3",
        };
        f.write_str(s)
    }
}

/// The five rate constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub c_plus: f64,
    pub c_minus: f64,
    pub c_exchange: f64,
    pub c_annihilate: f64,
    pub c_create: f64,
}

#[inline]
fn pair_index(a: i8, b: i8) -> usize {
    ((a + 1) * 3 + (b + 1)) as usize
}

/// Result of the move on an active pair, or `None` when the pair is inactive.
#[inline]
pub fn pair_move(a: i8, b: i8) -> Option<(i8, i8)> {
    match (a, b) {
        (1, 0) => Some((0, 1)),
        (0, -1) => Some((-1, 0)),
        (-1, 1) => Some((1, -1)),
        (1, -1) => Some((0, 0)),
        (0, 0) => Some((-1, 1)),
        _ => None,
    }
}

/// All nine ordered spin pairs, in lexicographic order.
pub const ALL_PAIRS: [(i8, i8); 9] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 0),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

impl RateSet {
    /// Validated constructor. Argument order is `(C₊, C₋, C_E, C_A, C_C)`.
    pub fn new(
        c_plus: f64,
        c_minus: f64,
        c_exchange: f64,
        c_annihilate: f64,
        c_create: f64,
    ) -> Result<Self> {
        let r = Self {
            c_plus,
            c_minus,
            c_exchange,
            c_annihilate,
            c_create,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("c_plus", self.c_plus),
            ("c_minus", self.c_minus),
            ("c_exchange", self.c_exchange),
            ("c_annihilate", self.c_annihilate),
            ("c_create", self.c_create),
        ];
        for (name, v) in all {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Rates(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.c_plus <= 0.0 || self.c_minus <= 0.0 {
            return Err(Error::Rates("c_plus and c_minus must be positive".into()));
        }
        if self.c_annihilate == 0.0 && self.c_create == 0.0 {
            return Err(Error::Rates(
                "at least one of c_annihilate, c_create must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Rates of the reference process used in the comparison argument:
    /// unit hopping, exchange and annihilation, creation at `β`.
    pub fn tilde(beta: f64) -> Result<Self> {
        Self::new(1.0, 1.0, 1.0, 1.0, beta)
    }

    pub fn case(&self) -> Result<CaseTag> {
        match (self.c_annihilate > 0.0, self.c_create > 0.0) {
            (true, true) => Ok(CaseTag::Case1),
            (true, false) => Ok(CaseTag::Case2),
            (false, true) => Ok(CaseTag::Case3),
            (false, false) => Err(Error::Rates(
                "c_annihilate = c_create = 0 has no conserved-charge regime".into(),
            )),
        }
    }

    /// `β = C_C / C_A`, defined when `C_A > 0`.
    pub fn beta(&self) -> Option<f64> {
        (self.c_annihilate > 0.0).then(|| self.c_create / self.c_annihilate)
    }

    /// Signed distance from the gradient manifold for the active case.
    pub fn gradient_defect(&self) -> f64 {
        match self.case() {
            Ok(CaseTag::Case3) => self.c_plus + self.c_minus - 2.0 * self.c_exchange,
            _ => self.c_plus + self.c_minus - self.c_annihilate - 2.0 * self.c_exchange,
        }
    }

    pub fn is_gradient(&self) -> bool {
        self.gradient_defect().abs() <= GRADIENT_TOL * (1.0 + self.c_plus + self.c_minus)
    }

    /// Rate of an ordered spin pair, zero on inactive pairs.
    #[inline]
    pub fn pair_rate(&self, a: i8, b: i8) -> f64 {
        self.table()[pair_index(a, b)]
    }

    /// The nine pair rates indexed by `3(a+1) + (b+1)`.
    #[inline]
    pub fn table(&self) -> [f64; 9] {
        let mut t = [0.0; 9];
        t[pair_index(1, 0)] = self.c_plus;
        t[pair_index(0, -1)] = self.c_minus;
        t[pair_index(-1, 1)] = self.c_exchange;
        t[pair_index(1, -1)] = self.c_annihilate;
        t[pair_index(0, 0)] = self.c_create;
        t
    }

    /// Swap the roles of the two species (`η ↦ -η`).
    pub fn dual(&self) -> Self {
        Self {
            c_plus: self.c_minus,
            c_minus: self.c_plus,
            ..*self
        }
    }
}

/// Index of a pair in the table returned by [`RateSet::table`].
#[inline]
pub fn table_index(a: i8, b: i8) -> usize {
    pair_index(a, b)
}

/// Spin configuration with cached total charge.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    spins: Vec<i8>,
    charge: i64,
}

impl Configuration {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(s) = spins.iter().find(|s| !(-1..=1).contains(*s)) {
            return Err(Error::InvalidArgument(format!("spin {s} not in {{-1,0,1}}")));
        }
        let charge = spins.iter().map(|&s| s as i64).sum();
        Ok(Self { spins, charge })
    }

    pub fn filled(n: usize, spin: i8) -> Result<Self> {
        Self::new(vec![spin; n])
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn into_spins(self) -> Vec<i8> {
        self.spins
    }

    pub fn charge(&self) -> i64 {
        self.charge
    }

    #[inline]
    pub fn get(&self, site: usize) -> i8 {
        self.spins[site]
    }

    /// Set one spin, keeping the cached charge in sync.
    pub fn set(&mut self, site: usize, spin: i8) {
        debug_assert!((-1..=1).contains(&spin));
        self.charge += spin as i64 - self.spins[site] as i64;
        self.spins[site] = spin;
    }

    pub fn count(&self, spin: i8) -> usize {
        self.spins.iter().filter(|&&s| s == spin).count()
    }

    /// Apply the move of `bond` in place.
    #[inline]
    pub fn apply_move(&mut self, from: usize, to: usize) -> Result<()> {
        let (a, b) = (self.spins[from], self.spins[to]);
        let (na, nb) = pair_move(a, b).ok_or(Error::InactiveMove(a, b))?;
        self.spins[from] = na;
        self.spins[to] = nb;
        Ok(())
    }

    /// `η^{(x,y)}` as a new configuration.
    pub fn moved(&self, bond: DirectedBond) -> Result<Self> {
        let mut c = self.clone();
        c.apply_move(bond.from, bond.to)?;
        Ok(c)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.spins.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spins = s
            .trim()
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<i8>()
                    .map_err(|e| Error::Parse(format!("bad spin `{t}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(spins)
    }
}

/// Classify the rate set into its case.
pub fn classify_case(rates: &RateSet) -> Result<CaseTag> {
    rates.case()
}

/// `c_b(η)` for a single directed bond, without multiplicity.
#[inline]
pub fn bond_rate(config: &Configuration, bond: DirectedBond, rates: &RateSet) -> f64 {
    rates.pair_rate(config.get(bond.from), config.get(bond.to))
}

/// `η^{(x,y)}`; fails on inactive pairs.
pub fn apply_move(config: &Configuration, bond: DirectedBond) -> Result<Configuration> {
    config.moved(bond)
}

/// `(L_N f)(η) = Σ_b c_b(η) (f(η^b) - f(η))`, bonds counted with multiplicity.
pub fn generator_apply<F>(f: F, config: &Configuration, rates: &RateSet, geom: &TorusGeometry) -> f64
where
    F: Fn(&Configuration) -> f64,
{
    let f0 = f(config);
    let mut out = 0.0;
    let mut scratch = config.clone();
    for b in geom.bonds() {
        let c = bond_rate(config, b, rates);
        if c == 0.0 {
            continue;
        }
        scratch.apply_move(b.from, b.to).expect("active pair");
        out += b.multiplicity as f64 * c * (f(&scratch) - f0);
        scratch.spins[b.from] = config.get(b.from);
        scratch.spins[b.to] = config.get(b.to);
    }
    out
}

/// Instantaneous current across the pair `(a, b) = (η(x), η(y))`.
#[inline]
pub fn pair_current(a: i8, b: i8, rates: &RateSet) -> f64 {
    let big = rates.c_annihilate + 2.0 * rates.c_exchange;
    match (a, b) {
        (1, 0) => rates.c_plus,
        (0, 1) => -rates.c_plus,
        (1, -1) => big,
        (-1, 1) => -big,
        (0, -1) => rates.c_minus,
        (-1, 0) => -rates.c_minus,
        _ => 0.0,
    }
}

/// `W_{x, x+e_axis}`.
pub fn current(
    config: &Configuration,
    geom: &TorusGeometry,
    site: usize,
    axis: usize,
    rates: &RateSet,
) -> Result<f64> {
    if !geom.is_periodic() {
        return Err(Error::Geometry("current is defined on the torus".into()));
    }
    if axis >= geom.dim() {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    let y = geom.neighbor(site, axis, 1).expect("torus neighbour");
    Ok(pair_current(config.get(site), config.get(y), rates))
}

/// Local flux `h` with `W_{x,y} = h(η(x)) - h(η(y))` on the gradient manifold.
pub fn flux_h(spin: i8, rates: &RateSet) -> f64 {
    if !rates.is_gradient() {
        log::warn!(
            "flux_h called off the gradient manifold (defect {:.3e}); W is not a gradient of h",
            rates.gradient_defect()
        );
    }
    flux_h_unchecked(spin, rates)
}

#[inline]
pub(crate) fn flux_h_unchecked(spin: i8, rates: &RateSet) -> f64 {
    match spin {
        1 => rates.c_plus,
        -1 => -rates.c_minus,
        _ => 0.0,
    }
}
