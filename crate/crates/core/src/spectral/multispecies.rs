//! Mean-field color exchange among `r` species and holes.
//!
//! `L f(η) = n^{-1} Σ_{j ≠ k} (f(η^{j,k}) - f(η))` where `η^{j,k}` swaps the
//! contents of sites `j` and `k`. The uniform measure is reversible, so the
//! generator is already symmetric.

use std::collections::HashMap;

use nalgebra::DMatrix;

use super::eigen::sorted_eigenvalues;
use super::GapResult;
use crate::error::{Error, Result};
use crate::spectral::EigenMethod;

/// Largest state count diagonalized.
pub const MULTISPECIES_CAP: usize = 4000;

#[derive(Debug, Clone)]
pub struct MultispeciesGenerator {
    pub sites: usize,
    pub states: Vec<Vec<u8>>,
    /// `-L` in the state basis.
    pub neg_generator: DMatrix<f64>,
}

fn multiset_permutations(counts: &mut [usize], word: &mut Vec<u8>, len: usize, out: &mut Vec<Vec<u8>>) {
    if word.len() == len {
        out.push(word.clone());
        return;
    }
    for c in 0..counts.len() {
        if counts[c] > 0 {
            counts[c] -= 1;
            word.push(c as u8);
            multiset_permutations(counts, word, len, out);
            word.pop();
            counts[c] += 1;
        }
    }
}

impl MultispeciesGenerator {
    pub fn new(sites: usize, counts: &[usize]) -> Result<Self> {
        let occupied: usize = counts.iter().sum();
        if occupied > sites {
            return Err(Error::InvalidArgument(format!(
                "{occupied} particles on {sites} sites"
            )));
        }
        let mut all = vec![sites - occupied];
        all.extend_from_slice(counts);
        // multinomial coefficient, checked against the cap before enumerating
        let mut states_f = 1.0f64;
        let mut placed = 0usize;
        for &c in &all {
            for i in 1..=c {
                placed += 1;
                states_f *= placed as f64 / i as f64;
            }
        }
        let n_states = states_f.round() as u128;
        if n_states > MULTISPECIES_CAP as u128 {
            return Err(Error::StateSpaceTooLarge {
                states: n_states,
                cap: MULTISPECIES_CAP as u128,
            });
        }
        let mut states = Vec::new();
        multiset_permutations(&mut all, &mut Vec::with_capacity(sites), sites, &mut states);
        let index: HashMap<Vec<u8>, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let n = states.len();
        let mut a = DMatrix::zeros(n, n);
        let rate = 1.0 / sites as f64;
        let mut w = vec![0u8; sites];
        for (i, s) in states.iter().enumerate() {
            for j in 0..sites {
                for k in 0..sites {
                    if j == k || s[j] == s[k] {
                        continue;
                    }
                    w.copy_from_slice(s);
                    w.swap(j, k);
                    let t = index[&w];
                    a[(i, t)] -= rate;
                    a[(i, i)] += rate;
                }
            }
        }
        Ok(Self {
            sites,
            states,
            neg_generator: a,
        })
    }
}

/// Exact gap of the mean-field color exchange under the uniform measure.
pub fn multispecies_meanfield_gap(sites: usize, counts: &[usize]) -> Result<GapResult> {
    let g = MultispeciesGenerator::new(sites, counts)?;
    let n = g.states.len();
    let mut res = GapResult {
        gap: None,
        frozen: false,
        degenerate: n <= 1,
        components: 1,
        states: n,
        method: EigenMethod::None,
    };
    if n > 1 {
        res.gap = Some(sorted_eigenvalues(g.neg_generator)[1]);
        res.method = EigenMethod::Dense;
    }
    Ok(res)
}
