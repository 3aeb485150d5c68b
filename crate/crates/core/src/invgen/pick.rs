//! Minimum cover selection.
//!
//! Encoding: a pick variable `P_j` per pool element and a cover variable
//! `C_i` per assertion, with clauses `C_i -> OR { P_j : j in S_i }` and all
//! `C_i` asserted. The smallest satisfying set of true `P_j` is found by
//! enumerating subsets in increasing size, so the first hit is minimum and,
//! with the pool sorted, lexicographically least.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverInstance {
    /// Number of pool elements.
    pub pool: usize,
    /// `entail_sets[i]`: pool indices that assertion `i` entails.
    pub entail_sets: Vec<Vec<usize>>,
}

/// Beyond this pool size the exact search gives way to greedy.
pub const EXACT_LIMIT: usize = 20;

impl CoverInstance {
    /// `C_i -> OR P_j` clauses, one per assertion.
    pub fn clauses(&self) -> Vec<(usize, Vec<usize>)> {
        self.entail_sets.iter().cloned().enumerate().collect()
    }

    pub fn is_cover(&self, picked: &[usize]) -> bool {
        self.entail_sets.iter().all(|s| s.iter().any(|j| picked.contains(j)))
    }

    /// Smallest cover, lexicographically least among equals. `None` when
    /// some assertion entails nothing in the pool.
    pub fn solve(&self) -> Option<Vec<usize>> {
        self.min_covers(1).into_iter().next()
    }

    /// Up to `limit` covers of minimum size, in lexicographic order. Above
    /// `EXACT_LIMIT` only the greedy cover is returned.
    pub fn min_covers(&self, limit: usize) -> Vec<Vec<usize>> {
        if self.entail_sets.iter().any(|s| s.is_empty()) {
            return vec![];
        }
        if self.entail_sets.is_empty() {
            return vec![vec![]];
        }
        if self.pool > EXACT_LIMIT {
            return vec![self.greedy()];
        }
        let mut out = vec![];
        for k in 1..=self.pool {
            let mut idx: Vec<usize> = (0..k).collect();
            loop {
                if self.is_cover(&idx) {
                    out.push(idx.clone());
                    if out.len() >= limit {
                        return out;
                    }
                }
                // next k-combination in lexicographic order
                let Some(i) = (0..k).rev().find(|&i| idx[i] < self.pool - k + i) else { break };
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
            }
            if !out.is_empty() {
                return out;
            }
        }
        out
    }

    fn greedy(&self) -> Vec<usize> {
        let mut uncovered: Vec<usize> = (0..self.entail_sets.len()).collect();
        let mut picked = vec![];
        while !uncovered.is_empty() {
            let best = (0..self.pool)
                .max_by_key(|j| {
                    let n = uncovered.iter().filter(|&&i| self.entail_sets[i].contains(j)).count();
                    (n, std::cmp::Reverse(*j))
                })
                .unwrap();
            picked.push(best);
            uncovered.retain(|&i| !self.entail_sets[i].contains(&best));
        }
        picked.sort();
        picked
    }
}
