use petgraph::algo::kosaraju_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::space::{successor, StateSpace};
use crate::crn::Crn;
use crate::sparse::CsrMatrix;

/// Transition-rate matrix `K` with `π̇ = K π`: the rate from state `j` into
/// state `i` sits at `(i, j)` and every column sums to zero.
///
/// Off-diagonal entries are stored column-wise; transitions leaving the
/// state space (possible on truncated spaces) only enter the diagonal.
#[derive(Debug, Clone)]
pub struct Generator {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<f64>,
}

impl Generator {
    pub fn new(crn: &Crn, space: &StateSpace) -> Self {
        let n = space.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        let mut diag = vec![0.0; n];
        col_ptr.push(0);
        for j in 0..n {
            let x = space.get(j);
            let start = row_idx.len();
            let mut outflow = 0.0;
            for l in 0..crn.n_reactions() {
                let Some(y) = successor(crn, x, l) else {
                    continue;
                };
                let rate = crn.reaction_propensity(l, x);
                if rate == 0.0 {
                    continue;
                }
                match space.index_of(&y) {
                    Some(i) => match row_idx[start..].iter().position(|&r| r == i) {
                        Some(p) => values[start + p] += rate,
                        None => {
                            row_idx.push(i);
                            values.push(rate);
                        }
                    },
                    None => outflow += rate,
                }
            }
            let inside: f64 = values[start..].iter().sum();
            diag[j] = -(inside + outflow);
            col_ptr.push(row_idx.len());
        }
        Generator {
            n,
            col_ptr,
            row_idx,
            values,
            diag,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Entry `(i, j)`: the rate from `j` into `i`, or the diagonal.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[j];
        }
        (self.col_ptr[j]..self.col_ptr[j + 1])
            .find(|&k| self.row_idx[k] == i)
            .map_or(0.0, |k| self.values[k])
    }

    /// Off-diagonal transitions `(target, rate)` out of state `j`.
    pub fn out_transitions(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |k| (self.row_idx[k], self.values[k]))
    }

    /// `1ᵀ K`, accumulated in storage order.
    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| self.out_transitions(j).map(|(_, v)| v).sum::<f64>() + self.diag[j])
            .collect()
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |a, &d| a.max(-d))
    }

    /// `out = K p`.
    pub fn apply(&self, p: &[f64], out: &mut [f64]) {
        for (o, (d, pj)) in out.iter_mut().zip(self.diag.iter().zip(p)) {
            *o = d * pj;
        }
        for (j, &pj) in p.iter().enumerate() {
            if pj == 0.0 {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                out[self.row_idx[k]] += self.values[k] * pj;
            }
        }
    }

    /// Row-major copy of `K` restricted to rows/columns other than `skip`.
    pub(crate) fn to_csr_without(&self, skip: usize) -> CsrMatrix {
        let map = |i: usize| if i < skip { i } else { i - 1 };
        let mut triplets = Vec::with_capacity(self.values.len() + self.n);
        for j in 0..self.n {
            if j == skip {
                continue;
            }
            triplets.push((map(j), map(j), self.diag[j]));
            for (i, v) in self.out_transitions(j) {
                if i != skip {
                    triplets.push((map(i), map(j), v));
                }
            }
        }
        CsrMatrix::from_triplets(self.n - 1, triplets)
    }

    /// Strongly connected components of the transition graph.
    pub fn communicating_classes(&self) -> usize {
        let mut g: DiGraph<(), ()> = DiGraph::with_capacity(self.n, self.values.len());
        for _ in 0..self.n {
            g.add_node(());
        }
        for j in 0..self.n {
            for (i, _) in self.out_transitions(j) {
                g.add_edge(NodeIndex::new(j), NodeIndex::new(i), ());
            }
        }
        kosaraju_scc(&g).len()
    }
}
