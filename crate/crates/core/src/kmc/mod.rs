//! Event-driven simulation of the process under the diffusively accelerated
//! generator `N² L_N`.
//!
//! Every directed bond is a slot whose weight is its current rate; the slots
//! live in a [`SumTree`], so an event costs `O(log B)` and only the slots
//! touching the two changed sites are updated. Waiting times are
//! exponential with rate `N² Σ_b c_b(η)` in macroscopic time.

mod initial;
mod observe;
mod tree;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use initial::{deterministic_profile, local_equilibrium, sub_seed, MarginalFamily};
pub use observe::{block_average, empirical_field, empirical_pairing, EmpiricalField};
pub use tree::SumTree;

use crate::error::{Error, Result};
use crate::lattice::TorusGeometry;
use crate::pde::TestFunction;
use crate::process::{pair_move, table_index, Configuration, RateSet};

pub const DEFAULT_EVENT_BUDGET: u64 = 10_000_000_000;

/// Events between full recomputations of the martingale drift sums.
const DRIFT_REFRESH: u64 = 1 << 20;

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub event_budget: u64,
    /// Test functions `H` whose martingales `M^H` are recorded.
    pub martingales: Vec<TestFunction>,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            event_budget: DEFAULT_EVENT_BUDGET,
            martingales: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: Configuration,
    pub t_final: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<Configuration>,
    /// Events up to `t_final`.
    pub events: u64,
    pub seed: u64,
    /// `M^{H_k}` at each snapshot time, one row per recorded test function.
    pub martingales: Vec<Vec<f64>>,
}

impl Trajectory {
    /// CSV with columns `time,site_index,spin`.
    pub fn spins_csv(&self) -> String {
        let mut s = String::from("time,site_index,spin\n");
        for (t, c) in self.times.iter().zip(&self.snapshots) {
            for (i, v) in c.spins().iter().enumerate() {
                let _ = writeln!(s, "{t},{i},{v}");
            }
        }
        s
    }

    /// CSV with columns `time,cell_index,density` of the block averages.
    pub fn density_csv(&self, geom: &TorusGeometry, l: usize) -> Result<String> {
        let mut s = String::from("time,cell_index,density\n");
        for (t, c) in self.times.iter().zip(&self.snapshots) {
            let f = empirical_field(c, geom, l)?;
            for (i, v) in f.values.iter().enumerate() {
                let _ = writeln!(s, "{t},{i},{v}");
            }
        }
        Ok(s)
    }
}

struct Engine<'a> {
    spins: Vec<i8>,
    table: [f64; 9],
    /// (from, to, multiplicity) per slot.
    slots: Vec<(usize, usize, f64)>,
    /// Slots touching each site.
    touching: Vec<Vec<usize>>,
    tree: SumTree,
    /// `H_k(x/N)` per test function and site.
    h: Vec<Vec<f64>>,
    /// `Σ_slots rate · δ_slot H_k`.
    drift: Vec<f64>,
    geom: &'a TorusGeometry,
}

impl<'a> Engine<'a> {
    fn new(initial: &Configuration, rates: &RateSet, geom: &'a TorusGeometry, tests: &[TestFunction]) -> Self {
        let slots: Vec<(usize, usize, f64)> = geom
            .bonds()
            .into_iter()
            .map(|b| (b.from, b.to, b.multiplicity as f64))
            .collect();
        let mut touching = vec![Vec::new(); geom.num_sites()];
        for (k, &(x, y, _)) in slots.iter().enumerate() {
            touching[x].push(k);
            touching[y].push(k);
        }
        let n = geom.side() as f64;
        let h = tests
            .iter()
            .map(|t| {
                (0..geom.num_sites())
                    .map(|x| {
                        let u: Vec<f64> = geom.coords(x).into_iter().map(|c| c as f64 / n).collect();
                        t.value(&u)
                    })
                    .collect()
            })
            .collect();
        let mut e = Self {
            spins: initial.spins().to_vec(),
            table: rates.table(),
            tree: SumTree::new(&[]),
            slots,
            touching,
            h,
            drift: vec![0.0; tests.len()],
            geom,
        };
        let w: Vec<f64> = (0..e.slots.len()).map(|k| e.slot_rate(k)).collect();
        e.tree = SumTree::new(&w);
        e.refresh_drift();
        e
    }

    fn slot_rate(&self, k: usize) -> f64 {
        let (x, y, m) = self.slots[k];
        m * self.table[table_index(self.spins[x], self.spins[y])]
    }

    /// Change of `Σ_x H(x/N) η(x)` if slot `k` fires.
    fn slot_delta(&self, hk: &[f64], k: usize) -> f64 {
        let (x, y, _) = self.slots[k];
        let a = self.spins[x];
        match pair_move(a, self.spins[y]) {
            Some((na, _)) => (na - a) as f64 * (hk[x] - hk[y]),
            None => 0.0,
        }
    }

    fn refresh_drift(&mut self) {
        for t in 0..self.h.len() {
            self.drift[t] = (0..self.slots.len())
                .map(|k| self.tree.get(k) * self.slot_delta(&self.h[t], k))
                .sum();
        }
    }

    fn affected(&self, x: usize, y: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.touching[x].iter().chain(&self.touching[y]).copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn fire(&mut self, k: usize) {
        let (x, y, _) = self.slots[k];
        let affected = self.affected(x, y);
        for t in 0..self.h.len() {
            let old: f64 = affected.iter().map(|&j| self.tree.get(j) * self.slot_delta(&self.h[t], j)).sum();
            self.drift[t] -= old;
        }
        let (na, nb) = pair_move(self.spins[x], self.spins[y]).expect("fired slot is active");
        self.spins[x] = na;
        self.spins[y] = nb;
        for &j in &affected {
            let r = self.slot_rate(j);
            self.tree.set(j, r);
        }
        for t in 0..self.h.len() {
            let new: f64 = affected.iter().map(|&j| self.tree.get(j) * self.slot_delta(&self.h[t], j)).sum();
            self.drift[t] += new;
        }
    }

    fn pairing(&self, t: usize) -> f64 {
        self.h[t].iter().zip(&self.spins).map(|(h, &s)| h * s as f64).sum::<f64>() / self.geom.num_sites() as f64
    }
}

/// Simulate on `[0, t_final]` and record configurations at `snapshot_times`.
pub fn simulate(
    initial: &Configuration,
    rates: &RateSet,
    geom: &TorusGeometry,
    t_final: f64,
    snapshot_times: &[f64],
    seed: u64,
    opts: &SimulateOptions,
) -> Result<Trajectory> {
    rates.validate()?;
    if !geom.is_periodic() {
        return Err(Error::Geometry("simulation runs on the torus".into()));
    }
    if initial.len() != geom.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: geom.num_sites(),
            got: initial.len(),
        });
    }
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::InvalidArgument(format!("final time {t_final} must be positive")));
    }
    if snapshot_times.is_empty() {
        return Err(Error::InvalidArgument("empty snapshot list".into()));
    }
    if snapshot_times.iter().any(|t| !(*t >= 0.0 && *t <= t_final)) || snapshot_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("snapshot times must increase strictly within [0, T]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eng = Engine::new(initial, rates, geom, &opts.martingales);
    let scale = (geom.side() * geom.side()) as f64;
    let volume = geom.num_sites() as f64;
    let n_tests = opts.martingales.len();
    let start: Vec<f64> = (0..n_tests).map(|t| eng.pairing(t)).collect();
    // ∫₀ᵗ N² L⟨π, H⟩ ds; the drift is N² N^{-d} Σ rate·δ
    let mut integral = vec![0.0; n_tests];
    let drift_factor = scale / volume;

    let mut times = Vec::with_capacity(snapshot_times.len());
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut martingales = vec![Vec::with_capacity(snapshot_times.len()); n_tests];
    let mut next = 0;
    let mut t = 0.0;
    let mut events = 0u64;
    loop {
        let total = eng.tree.total();
        let wait = if total > 0.0 {
            let u: f64 = rng.gen();
            -(1.0 - u).ln() / (scale * total)
        } else {
            f64::INFINITY
        };
        let t_event = t + wait;
        // record every snapshot strictly before the next event (or at T)
        while next < snapshot_times.len() && (snapshot_times[next] < t_event || t_event > t_final) {
            let s = snapshot_times[next];
            times.push(s);
            snapshots.push(Configuration::new(eng.spins.clone())?);
            for k in 0..n_tests {
                let m = eng.pairing(k) - start[k] - integral[k] - drift_factor * eng.drift[k] * (s - t);
                martingales[k].push(m);
            }
            next += 1;
        }
        if t_event > t_final {
            break;
        }
        if events >= opts.event_budget {
            return Err(Error::EventBudget(opts.event_budget));
        }
        for k in 0..n_tests {
            integral[k] += drift_factor * eng.drift[k] * wait;
        }
        let u: f64 = rng.gen::<f64>() * total;
        let slot = eng.tree.find(u);
        eng.fire(slot);
        t = t_event;
        events += 1;
        if n_tests > 0 && events.is_multiple_of(DRIFT_REFRESH) {
            eng.refresh_drift();
        }
    }
    Ok(Trajectory {
        initial: initial.clone(),
        t_final,
        times,
        snapshots,
        events,
        seed,
        martingales,
    })
}

/// `M^H` at the snapshot times of `traj`, obtained by replaying the run from
/// its initial configuration and seed; the replay must reproduce the
/// recorded snapshots.
pub fn martingale_residual(traj: &Trajectory, h: &TestFunction, rates: &RateSet, geom: &TorusGeometry) -> Result<Vec<f64>> {
    let opts = SimulateOptions {
        martingales: vec![h.clone()],
        ..Default::default()
    };
    let replay = simulate(&traj.initial, rates, geom, traj.t_final, &traj.times, traj.seed, &opts)?;
    if replay.snapshots != traj.snapshots {
        return Err(Error::InvalidArgument(
            "trajectory does not match a replay with its seed and rates".into(),
        ));
    }
    Ok(replay.martingales.into_iter().next().unwrap_or_default())
}
