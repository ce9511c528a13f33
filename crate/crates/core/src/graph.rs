//! Directed graphs with stable edge indexing, and the map from edge weights
//! to transition matrices.
//!
//! Edges are sorted lexicographically by `(tail, head)`, so the out-edges of
//! every node occupy one contiguous block of the weight vector. A weight
//! vector is therefore the concatenation of per-node blocks, and most of the
//! constraint machinery in this crate works block by block.

use std::collections::HashMap;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Edge weights, indexed by edge id.
pub type WeightVector = DVector<f64>;

/// Default tolerance for detailed-balance checks.
pub const REVERSIBILITY_TOL: f64 = 1e-9;

/// A finite, simple directed graph (self-loops allowed) whose node indices are
/// 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    blocks: Vec<Range<usize>>,
    index: HashMap<(usize, usize), usize>,
    risky: Vec<usize>,
}

impl Graph {
    /// Builds a graph from 0-based edges. `risky` lists failure-prone edges; the
    /// backbone (all edges minus the risky ones) must be strongly connected.
    pub fn new(nodes: usize, edges: &[(usize, usize)], risky: &[(usize, usize)]) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::Parse("graph needs at least one node".into()));
        }
        let mut sorted = edges.to_vec();
        for &(i, j) in &sorted {
            if i >= nodes || j >= nodes {
                return Err(Error::InvalidNode(i + 1, j + 1, nodes));
            }
        }
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge(w[0].0 + 1, w[0].1 + 1));
        }

        let index: HashMap<_, _> = sorted.iter().enumerate().map(|(k, &e)| (e, k)).collect();
        let mut blocks = Vec::with_capacity(nodes);
        let mut start = 0;
        for i in 0..nodes {
            let mut end = start;
            while end < sorted.len() && sorted[end].0 == i {
                end += 1;
            }
            blocks.push(start..end);
            start = end;
        }

        let mut risky_ids = Vec::with_capacity(risky.len());
        for &(i, j) in risky {
            let id = *index.get(&(i, j)).ok_or(Error::UnknownEdge(i + 1, j + 1))?;
            if risky_ids.contains(&id) {
                return Err(Error::DuplicateEdge(i + 1, j + 1));
            }
            risky_ids.push(id);
        }
        risky_ids.sort_unstable();

        let graph = Self { nodes, edges: sorted, blocks, index, risky: risky_ids };
        let backbone: Vec<bool> = (0..graph.edge_count()).map(|e| !graph.is_risky(e)).collect();
        if !graph.is_strongly_connected(&backbone) {
            let what = if graph.risky.is_empty() { "graph" } else { "backbone without risky edges" };
            return Err(Error::NotStronglyConnected(format!("{what} on {nodes} nodes")));
        }
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// All edges in index order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> (usize, usize) {
        self.edges[id]
    }

    pub fn edge_id(&self, tail: usize, head: usize) -> Option<usize> {
        self.index.get(&(tail, head)).copied()
    }

    /// Edge-id range of the out-edges of `node`.
    pub fn out_block(&self, node: usize) -> Range<usize> {
        self.blocks[node].clone()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.blocks[node].len()
    }

    /// Ids of the failure-prone edges, ascending.
    pub fn risky_edges(&self) -> &[usize] {
        &self.risky
    }

    pub fn is_risky(&self, id: usize) -> bool {
        self.risky.binary_search(&id).is_ok()
    }

    /// The same graph with its risky annotations replaced.
    pub fn with_risky(&self, risky: &[(usize, usize)]) -> Result<Self> {
        Self::new(self.nodes, &self.edges, risky)
    }

    /// Subgraph keeping only edges whose reverse edge also exists. Self-loops
    /// are kept.
    pub fn bidirectional_subgraph(&self) -> Result<Self> {
        let kept: Vec<_> =
            self.edges.iter().copied().filter(|&(i, j)| self.index.contains_key(&(j, i))).collect();
        let risky: Vec<_> =
            self.risky.iter().map(|&e| self.edges[e]).filter(|e| kept.contains(e)).collect();
        Self::new(self.nodes, &kept, &risky)
    }

    /// True iff every node reaches every other node using only the edges
    /// flagged in `active` (indexed by edge id).
    pub fn is_strongly_connected(&self, active: &[bool]) -> bool {
        assert_eq!(active.len(), self.edge_count(), "edge mask has wrong length");
        let mut fwd = vec![Vec::new(); self.nodes];
        let mut rev = vec![Vec::new(); self.nodes];
        for (id, &(i, j)) in self.edges.iter().enumerate() {
            if active[id] {
                fwd[i].push(j);
                rev[j].push(i);
            }
        }
        reaches_all(&fwd) && reaches_all(&rev)
    }

    /// Uniform weights `1 / out_degree` on every block.
    pub fn uniform_weights(&self) -> WeightVector {
        let mut x = DVector::zeros(self.edge_count());
        for i in 0..self.nodes {
            let block = self.out_block(i);
            let w = 1.0 / block.len() as f64;
            for e in block {
                x[e] = w;
            }
        }
        x
    }

    /// Maximum violation of the per-node block-sum constraint.
    pub fn block_sum_residual(&self, x: &WeightVector) -> f64 {
        (0..self.nodes)
            .map(|i| (x.as_slice()[self.out_block(i)].iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|x_(i,j) - x_(j,i)|` over edges whose reverse exists.
    pub fn symmetry_residual(&self, x: &WeightVector) -> f64 {
        self.edges
            .iter()
            .enumerate()
            .filter_map(|(e, &(i, j))| self.edge_id(j, i).map(|r| (x[e] - x[r]).abs()))
            .fold(0.0, f64::max)
    }

    /// Edge weights of a row-stochastic matrix supported on this graph.
    pub fn weights_from_matrix(&self, p: &DMatrix<f64>) -> WeightVector {
        DVector::from_iterator(self.edge_count(), self.edges.iter().map(|&(i, j)| p[(i, j)]))
    }
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}

/// A dense row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix(DMatrix<f64>);

impl StochasticMatrix {
    /// Validates non-negativity and unit row sums (within `1e-12` per row,
    /// scaled by the row length).
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::Dimension { expected: p.nrows(), got: p.ncols() });
        }
        for i in 0..p.nrows() {
            let row = p.row(i);
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::Parse(format!("row {} has a negative or non-finite entry", i + 1)));
            }
            let tol = 1e-12 * (p.ncols() as f64).max(1.0);
            if (row.sum() - 1.0).abs() > tol {
                return Err(Error::Parse(format!("row {} sums to {}", i + 1, row.sum())));
            }
        }
        Ok(Self(p))
    }

    /// Wraps without validation.
    pub fn new_unchecked(p: DMatrix<f64>) -> Self {
        Self(p)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl std::ops::Index<(usize, usize)> for StochasticMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// `P_ij = x_(i,j) / sum of the out-weights of i`.
pub fn transition_matrix(g: &Graph, x: &WeightVector) -> Result<StochasticMatrix> {
    if x.len() != g.edge_count() {
        return Err(Error::Dimension { expected: g.edge_count(), got: x.len() });
    }
    let n = g.node_count();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let block = g.out_block(i);
        let total: f64 = block.clone().map(|e| x[e]).sum();
        if !(total > 0.0) {
            return Err(Error::ZeroRowSum(i + 1));
        }
        for e in block {
            let (_, j) = g.edge(e);
            p[(i, j)] = x[e] / total;
        }
    }
    Ok(StochasticMatrix(p))
}

/// Detailed balance: `|pi_i P_ij - pi_j P_ji| <= tol` for all pairs.
pub fn check_reversible(p: &StochasticMatrix, pi: &DVector<f64>, tol: f64) -> bool {
    let n = p.dim();
    (0..n).all(|i| (i + 1..n).all(|j| (pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs() <= tol))
}
