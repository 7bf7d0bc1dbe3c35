//! Complete binary tree of partial sums for sampling an index with
//! probability proportional to its weight.

#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    /// Heap layout: node `i` has children `2i`, `2i + 1`; leaves start at `leaves`.
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(weights: &[f64]) -> Self {
        let leaves = weights.len().max(1).next_power_of_two();
        let mut nodes = vec![0.0; 2 * leaves];
        nodes[leaves..leaves + weights.len()].copy_from_slice(weights);
        for i in (1..leaves).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { leaves, nodes }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    /// Parents are recomputed from their children, so no rounding error
    /// accumulates across updates.
    pub fn set(&mut self, i: usize, w: f64) {
        let mut k = self.leaves + i;
        self.nodes[k] = w;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf `i` with `Σ_{j<i} w_j ≤ u < Σ_{j≤i} w_j`, for `u ∈ [0, total)`.
    /// Zero-weight leaves are never returned.
    pub fn find(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if u < left || self.nodes[2 * k + 1] == 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        // rounding can land on an empty leaf at the right edge of a subtree
        let mut i = k - self.leaves;
        while self.nodes[self.leaves + i] == 0.0 && i > 0 {
            i -= 1;
        }
        i
    }
}
