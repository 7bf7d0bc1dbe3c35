//! Enumeration and ranking of spin configurations with fixed total charge.
//!
//! States are listed in lexicographic order (site 0 most significant, with
//! `-1 < 0 < 1`) over an alphabet that may exclude some spin values. The
//! rank of a configuration is computed from a table of completion counts, so
//! lookup costs `O(volume)` and no hash map is needed.

use crate::error::{Error, Result};
use crate::process::{CaseTag, RateSet};

/// Default cap on enumerated state counts.
pub const DEFAULT_STATE_CAP: usize = 2_000_000;

#[derive(Debug, Clone)]
pub struct Hyperplane {
    volume: usize,
    charge: i64,
    alphabet: Vec<i8>,
    /// `counts[r][c + r]` = number of words of length `r` with sum `c`.
    counts: Vec<Vec<u64>>,
    data: Vec<i8>,
    len: usize,
}

/// Spin values carried with positive weight by the canonical measure of the
/// given rates at total charge `charge`.
pub fn support_alphabet(rates: &RateSet, charge: i64) -> Result<Vec<i8>> {
    Ok(match rates.case()? {
        CaseTag::Case1 => vec![-1, 0, 1],
        CaseTag::Case2 if charge >= 0 => vec![0, 1],
        CaseTag::Case2 => vec![-1, 0],
        CaseTag::Case3 => vec![-1, 1],
    })
}

fn count_table(volume: usize, alphabet: &[i8]) -> Vec<Vec<u64>> {
    let mut counts = Vec::with_capacity(volume + 1);
    counts.push(vec![1u64]);
    for r in 1..=volume {
        let prev: &Vec<u64> = &counts[r - 1];
        let mut row = vec![0u64; 2 * r + 1];
        for (j, &n) in prev.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let c = j as i64 - (r as i64 - 1);
            for &a in alphabet {
                let idx = (c + a as i64 + r as i64) as usize;
                row[idx] = row[idx].saturating_add(n);
            }
        }
        counts.push(row);
    }
    counts
}

impl Hyperplane {
    /// All words over the full alphabet `{-1, 0, 1}` with sum `charge`.
    pub fn full(volume: usize, charge: i64, cap: usize) -> Result<Self> {
        Self::new(volume, charge, &[-1, 0, 1], cap)
    }

    pub fn new(volume: usize, charge: i64, alphabet: &[i8], cap: usize) -> Result<Self> {
        if charge.unsigned_abs() as usize > volume {
            return Err(Error::InvalidArgument(format!(
                "charge {charge} exceeds volume {volume}"
            )));
        }
        let mut alphabet = alphabet.to_vec();
        alphabet.sort_unstable();
        alphabet.dedup();
        let counts = count_table(volume, &alphabet);
        let len = counts[volume][(charge + volume as i64) as usize];
        if len as u128 > cap as u128 {
            return Err(Error::StateSpaceTooLarge {
                states: len as u128,
                cap: cap as u128,
            });
        }
        let len = len as usize;
        let mut h = Self {
            volume,
            charge,
            alphabet,
            counts,
            data: Vec::with_capacity(len * volume),
            len,
        };
        let mut word = vec![0i8; volume];
        h.fill(0, charge, &mut word);
        debug_assert_eq!(h.data.len(), len * volume);
        Ok(h)
    }

    fn completions(&self, remaining: usize, sum: i64) -> u64 {
        if sum.unsigned_abs() as usize > remaining {
            return 0;
        }
        self.counts[remaining][(sum + remaining as i64) as usize]
    }

    fn fill(&mut self, pos: usize, sum: i64, word: &mut [i8]) {
        if pos == self.volume {
            self.data.extend_from_slice(word);
            return;
        }
        for i in 0..self.alphabet.len() {
            let a = self.alphabet[i];
            if self.completions(self.volume - pos - 1, sum - a as i64) > 0 {
                word[pos] = a;
                self.fill(pos + 1, sum - a as i64, word);
            }
        }
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn charge(&self) -> i64 {
        self.charge
    }

    pub fn alphabet(&self) -> &[i8] {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn state(&self, i: usize) -> &[i8] {
        &self.data[i * self.volume..(i + 1) * self.volume]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i8]> {
        self.data.chunks_exact(self.volume.max(1)).take(self.len)
    }

    /// Lexicographic rank of `word`, or `None` if it is not on the hyperplane.
    pub fn rank(&self, word: &[i8]) -> Option<usize> {
        if word.len() != self.volume {
            return None;
        }
        let mut sum = self.charge;
        let mut rank = 0u64;
        for (pos, &s) in word.iter().enumerate() {
            let remaining = self.volume - pos - 1;
            let mut found = false;
            for &a in &self.alphabet {
                if a == s {
                    found = true;
                    break;
                }
                rank += self.completions(remaining, sum - a as i64);
            }
            if !found {
                return None;
            }
            sum -= s as i64;
        }
        (sum == 0).then_some(rank as usize)
    }
}
