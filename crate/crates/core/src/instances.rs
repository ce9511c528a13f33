//! Graph families used by tests, examples and the CLI.

use rand::Rng;
use rand::seq::SliceRandom;

use crate::graph::{Graph, WeightVector};

/// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`.
pub fn directed_cycle(n: usize) -> Graph {
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Graph::new(n, &edges, &[]).expect("cycle is strongly connected")
}

/// Cycle with both directions on every edge. For `n = 2` this is a single
/// bidirectional edge.
pub fn undirected_cycle(n: usize) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        edges.push((i, j));
        edges.push((j, i));
    }
    edges.sort_unstable();
    edges.dedup();
    Graph::new(n, &edges, &[]).expect("cycle is strongly connected")
}

/// Complete digraph without self-loops.
pub fn complete(n: usize) -> Graph {
    let edges: Vec<_> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    Graph::new(n, &edges, &[]).expect("complete graph is strongly connected")
}

/// Star with center 0 and bidirectional spokes.
pub fn star(n: usize) -> Graph {
    let edges: Vec<_> = (1..n).flat_map(|j| [(0, j), (j, 0)]).collect();
    Graph::new(n, &edges, &[]).expect("star is strongly connected")
}

/// Two nodes with both self-loops and both cross edges.
pub fn two_node_full() -> Graph {
    Graph::new(2, &[(0, 0), (0, 1), (1, 0), (1, 1)], &[]).expect("valid")
}

const OUTER: [(usize, usize); 5] = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)];
const SPOKES: [(usize, usize); 5] = [(0, 5), (1, 6), (2, 7), (3, 8), (4, 9)];
const PENTAGRAM: [(usize, usize); 5] = [(5, 7), (7, 9), (9, 6), (6, 8), (8, 5)];

/// Directed Petersen instance. The 15 Petersen edges (outer pentagon,
/// spokes, inner pentagram) are bidirectional; the inner pentagon
/// `5 -> 6 -> 7 -> 8 -> 9 -> 5` is added one way. The one-way arcs make the
/// digraph Hamiltonian, e.g. `0 5 6 7 8 9 4 3 2 1`.
///
/// This is a reconstruction: the published figure is not available, and the
/// Petersen graph itself has no Hamiltonian cycle.
pub fn directed_petersen() -> Graph {
    let mut edges = Vec::new();
    for &(i, j) in OUTER.iter().chain(&SPOKES).chain(&PENTAGRAM) {
        edges.push((i, j));
        edges.push((j, i));
    }
    edges.extend((0..5).map(|k| (5 + k, 5 + (k + 1) % 5)));
    Graph::new(10, &edges, &[]).expect("petersen reconstruction is strongly connected")
}

/// `rows x cols` grid with bidirectional neighbour edges and a self-loop at
/// every node. Node `(r, c)` has index `r * cols + c`.
pub fn grid(rows: usize, cols: usize) -> Graph {
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            edges.push((id(r, c), id(r, c)));
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
                edges.push((id(r, c + 1), id(r, c)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
                edges.push((id(r + 1, c), id(r, c)));
            }
        }
    }
    Graph::new(rows * cols, &edges, &[]).expect("grid is strongly connected")
}

/// A random strongly connected digraph on `n` nodes with random positive
/// block-normalized weights. A random Hamiltonian cycle guarantees
/// irreducibility; other arcs and self-loops are added at random.
pub fn random_irreducible<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Graph, WeightVector) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = (0..n).map(|k| (order[k], order[(k + 1) % n])).collect();
    for i in 0..n {
        for j in 0..n {
            let p = if i == j { 0.3 } else { 0.4 };
            if !edges.contains(&(i, j)) && rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let g = Graph::new(n, &edges, &[]).expect("contains a hamiltonian cycle");
    let mut x = WeightVector::from_fn(g.edge_count(), |_, _| rng.random_range(0.05..1.0));
    for i in 0..n {
        let block = g.out_block(i);
        let s: f64 = x.as_slice()[block.clone()].iter().sum();
        for e in block {
            x[e] /= s;
        }
    }
    (g, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn petersen_shape() {
        let g = directed_petersen();
        assert_eq!(g.node_count(), 10);
        assert_eq!(g.edge_count(), 35);
        let bi = g.bidirectional_subgraph().unwrap();
        assert_eq!(bi.edge_count(), 30);
        assert!((0..10).all(|i| bi.out_degree(i) == 3));
    }

    #[test]
    fn grid_shape() {
        let g = grid(5, 5);
        assert_eq!(g.edge_count(), 25 + 2 * 40);
    }

    #[test]
    fn random_instances_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 3..=8 {
            let (g, x) = random_irreducible(n, &mut rng);
            assert!(g.block_sum_residual(&x) < 1e-12);
            assert!(g.is_strongly_connected(&vec![true; g.edge_count()]));
        }
    }
}
