//! Tiny undirected graphs (3 or 4 vertices) as adjacency bitmasks, with
//! brute-force isomorphism over enumerated vertex permutations.

use crate::qstate::QError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Graph {
    pub n: usize,
    /// Bit pair_index(i, j) is set iff edge {i, j} is present, i < j.
    pub adj: u8,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &out {
            for v in 0..n {
                if !p.contains(&v) {
                    let mut q = p.clone();
                    q.push(v);
                    next.push(q);
                }
            }
        }
        out = next;
    }
    out
}

impl Graph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, QError> {
        if !(2..=4).contains(&n) {
            return Err(QError::Invalid(format!("graph size {n} outside 2..=4")));
        }
        let mut adj = 0u8;
        for &(a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(QError::Invalid(format!("bad edge ({a}, {b}) on {n} vertices")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            adj |= 1 << pair_index(n, i, j);
        }
        Ok(Graph { n, adj })
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        self.adj >> pair_index(self.n, i, j) & 1 == 1
    }

    pub fn edge_count(&self) -> u32 {
        self.adj.count_ones()
    }

    /// The image graph H with H(perm[i], perm[j]) = G(i, j).
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        let mut adj = 0u8;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.has_edge(i, j) {
                    let (a, b) = (perm[i], perm[j]);
                    let (a, b) = if a < b { (a, b) } else { (b, a) };
                    adj |= 1 << pair_index(self.n, a, b);
                }
            }
        }
        Graph { n: self.n, adj }
    }

    pub fn isomorphic(&self, other: &Graph) -> bool {
        self.n == other.n && permutations(self.n).iter().any(|p| self.permuted(p) == *other)
    }
}
