//! Exact chain analytics: stationary distribution, ergodic projector,
//! deviation matrix, mean first passage times, and the weighted-MFPT
//! connectivity objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{transition_matrix, Graph, StochasticMatrix, WeightVector};

/// Entries at or below this value do not count as transitions when checking
/// irreducibility.
pub const SUPPORT_THRESHOLD: f64 = 1e-14;

/// Relative tolerance when checking `x_(i,j) = x_(j,i)`.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Stationary distribution, ergodic projector, deviation matrix and MFPT
/// matrix of an irreducible chain.
#[derive(Debug, Clone)]
pub struct ChainAnalytics {
    pub pi: DVector<f64>,
    pub ergodic: DMatrix<f64>,
    pub deviation: DMatrix<f64>,
    pub mfpt: DMatrix<f64>,
}

impl ChainAnalytics {
    pub fn new(p: &StochasticMatrix) -> Result<Self> {
        ensure_irreducible(p)?;
        let pi = solve_stationary(p)?;
        let ergodic = ergodic_projector(&pi);
        let deviation = deviation_from(p, &ergodic)?;
        let mfpt = mfpt_from(&deviation, &pi);
        Ok(Self { pi, ergodic, deviation, mfpt })
    }

    pub fn dim(&self) -> usize {
        self.pi.len()
    }

    /// `sum_j pi_j M_ij`, independent of `i`; computed from row 0.
    pub fn kemeny(&self) -> f64 {
        (0..self.dim()).map(|j| self.pi[j] * self.mfpt[(0, j)]).sum()
    }
}

/// Errors with [`Error::Reducible`] unless the support of `p` is strongly
/// connected.
pub fn ensure_irreducible(p: &StochasticMatrix) -> Result<()> {
    let n = p.dim();
    let m = p.matrix();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in 0..n {
                let entry = if forward { m[(v, w)] } else { m[(w, v)] };
                if entry > SUPPORT_THRESHOLD && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    if reach(true) && reach(false) {
        Ok(())
    } else {
        Err(Error::Reducible(format!("support of the {n}x{n} matrix is not strongly connected")))
    }
}

fn solve_stationary(p: &StochasticMatrix) -> Result<DVector<f64>> {
    let n = p.dim();
    // (I - P^T) pi^T = 0 with the last equation swapped for sum(pi) = 1.
    let mut a = DMatrix::identity(n, n) - p.matrix().transpose();
    a.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    a.lu().solve(&rhs).ok_or_else(|| Error::Singular("stationary system".into()))
}

fn ergodic_projector(pi: &DVector<f64>) -> DMatrix<f64> {
    let n = pi.len();
    DMatrix::from_fn(n, n, |_, j| pi[j])
}

fn deviation_from(p: &StochasticMatrix, ergodic: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = p.dim();
    let fundamental = DMatrix::identity(n, n) - p.matrix() + ergodic;
    let inv = fundamental
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("I - P + Pi is not invertible".into()))?;
    Ok(inv - ergodic)
}

fn mfpt_from(deviation: &DMatrix<f64>, pi: &DVector<f64>) -> DMatrix<f64> {
    let n = pi.len();
    // M = (I - D + 1 1^T dg(D)) dg(Pi)^-1
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        (delta - deviation[(i, j)] + deviation[(j, j)]) / pi[j]
    })
}

/// Row vector `pi` with `pi P = pi` and `sum(pi) = 1`.
pub fn stationary_distribution(p: &StochasticMatrix) -> Result<DVector<f64>> {
    ensure_irreducible(p)?;
    solve_stationary(p)
}

/// `D = (I - P + Pi)^-1 - Pi`.
pub fn deviation_matrix(p: &StochasticMatrix) -> Result<DMatrix<f64>> {
    Ok(ChainAnalytics::new(p)?.deviation)
}

/// Mean first passage times; `M_ii` is the mean return time `1 / pi_i`.
pub fn mfpt_matrix(p: &StochasticMatrix) -> Result<DMatrix<f64>> {
    Ok(ChainAnalytics::new(p)?.mfpt)
}

/// Pairwise weights `C` of the objective `S(P, C) = sum_ij C_ij M_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ConnectivityWeights {
    /// `1 1^T - I`: every ordered pair of distinct nodes counts once.
    Unit,
    /// A fixed non-negative matrix.
    Explicit { matrix: Vec<Vec<f64>> },
    /// `C_ij = pi_i pi_j` with `pi` recomputed from the chain being scored;
    /// the objective is then the Kemeny constant.
    Kemeny,
    /// `C_ij = t_i t_j` for a fixed target distribution `t`.
    Target { pi: Vec<f64> },
}

impl ConnectivityWeights {
    /// Validates an explicit matrix (square, non-negative).
    pub fn explicit(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension { expected: matrix.nrows(), got: matrix.ncols() });
        }
        if matrix.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidConfig("connectivity weights must be non-negative".into()));
        }
        let rows = matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok(Self::Explicit { matrix: rows })
    }

    pub fn target(pi: &DVector<f64>) -> Self {
        Self::Target { pi: pi.iter().copied().collect() }
    }

    /// Whether `C` depends on the chain being scored.
    pub fn depends_on_chain(&self) -> bool {
        matches!(self, Self::Kemeny)
    }

    /// The weight matrix for a chain with stationary distribution `pi`.
    pub fn matrix(&self, pi: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = pi.len();
        match self {
            Self::Unit => Ok(DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 })),
            Self::Explicit { matrix } => {
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::Dimension { expected: n, got: matrix.len() });
                }
                Ok(DMatrix::from_fn(n, n, |i, j| matrix[i][j]))
            }
            Self::Kemeny => Ok(pi * pi.transpose()),
            Self::Target { pi: t } => {
                if t.len() != n {
                    return Err(Error::Dimension { expected: n, got: t.len() });
                }
                Ok(DMatrix::from_fn(n, n, |i, j| t[i] * t[j]))
            }
        }
    }
}

/// `S(P, C) = sum_ij C_ij M_ij` from precomputed analytics.
pub fn objective_from(analytics: &ChainAnalytics, c: &ConnectivityWeights) -> Result<f64> {
    let cm = c.matrix(&analytics.pi)?;
    Ok(cm.component_mul(&analytics.mfpt).sum())
}

/// `S(P, C) = sum_ij C_ij M_ij`.
pub fn connectivity_objective(p: &StochasticMatrix, c: &ConnectivityWeights) -> Result<f64> {
    objective_from(&ChainAnalytics::new(p)?, c)
}

/// Kemeny constant `sum_ij pi_i pi_j M_ij`.
pub fn kemeny_constant(p: &StochasticMatrix) -> Result<f64> {
    connectivity_objective(p, &ConnectivityWeights::Kemeny)
}

/// Effective resistances `R_ij = (M_ij + M_ji) / sum(x)` for symmetric
/// weights, together with `R_tot = sum_{i<j} R_ij`.
pub fn effective_resistance(g: &Graph, x: &WeightVector) -> Result<(DMatrix<f64>, f64)> {
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        let rev = g.edge_id(j, i).ok_or(Error::NonSymmetric(i + 1, j + 1))?;
        if (x[e] - x[rev]).abs() > SYMMETRY_TOL * x[e].abs().max(1.0) {
            return Err(Error::NonSymmetric(i + 1, j + 1));
        }
    }
    let p = transition_matrix(g, x)?;
    let m = mfpt_matrix(&p)?;
    let total = x.sum();
    let n = g.node_count();
    let r = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (m[(i, j)] + m[(j, i)]) / total });
    let r = (&r + r.transpose()) * 0.5;
    let r_tot = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| r[(i, j)]).sum();
    Ok((r, r_tot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sm(n: usize, rows: &[f64]) -> StochasticMatrix {
        StochasticMatrix::new(DMatrix::from_row_slice(n, n, rows)).unwrap()
    }

    fn cycle3() -> StochasticMatrix {
        sm(3, &[0., 1., 0., 0., 0., 1., 1., 0., 0.])
    }

    fn k3() -> StochasticMatrix {
        sm(3, &[0., 0.5, 0.5, 0.5, 0., 0.5, 0.5, 0.5, 0.])
    }

    fn two_state(p: f64, q: f64) -> StochasticMatrix {
        sm(2, &[1. - p, p, q, 1. - q])
    }

    #[test]
    fn stationary_examples() {
        let pi = stationary_distribution(&k3()).unwrap();
        for v in pi.iter() {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-14);
        }
        let pi = stationary_distribution(&two_state(0.3, 0.6)).unwrap();
        assert_abs_diff_eq!(pi[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pi[1], 1.0 / 3.0, epsilon = 1e-14);
        let pi = stationary_distribution(&cycle3()).unwrap();
        assert_abs_diff_eq!(pi[2], 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn reducible_chain_is_rejected() {
        let p = sm(2, &[1., 0., 0.5, 0.5]);
        assert!(matches!(stationary_distribution(&p), Err(Error::Reducible(_))));
        assert!(matches!(mfpt_matrix(&p), Err(Error::Reducible(_))));
    }

    #[test]
    fn deviation_of_rank_one_chain() {
        let d = deviation_matrix(&two_state(0.5, 0.5)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert_abs_diff_eq!(d, expected, epsilon = 1e-14);
    }

    #[test]
    fn deviation_annihilated_by_pi_and_ones() {
        let a = ChainAnalytics::new(&two_state(0.3, 0.6)).unwrap();
        let row_sums = a.deviation.column_sum();
        let pi_d = a.pi.transpose() * &a.deviation;
        assert!(row_sums.amax() < 1e-13);
        assert!(pi_d.amax() < 1e-13);
    }

    #[test]
    fn mfpt_examples() {
        let m = mfpt_matrix(&cycle3()).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[3., 1., 2., 2., 3., 1., 1., 2., 3.]);
        assert_abs_diff_eq!(m, expected, epsilon = 1e-12);

        let m = mfpt_matrix(&k3()).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[3., 2., 2., 2., 3., 2., 2., 2., 3.]);
        assert_abs_diff_eq!(m, expected, epsilon = 1e-12);

        let m = mfpt_matrix(&two_state(0.3, 0.6)).unwrap();
        assert_abs_diff_eq!(m[(0, 1)], 10.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(1, 0)], 5.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn objective_examples() {
        assert_abs_diff_eq!(
            connectivity_objective(&cycle3(), &ConnectivityWeights::Unit).unwrap(),
            9.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            connectivity_objective(&k3(), &ConnectivityWeights::Unit).unwrap(),
            12.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(kemeny_constant(&two_state(0.5, 0.5)).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kemeny_constant(&k3()).unwrap(), 7.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kemeny_constant(&cycle3()).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn kemeny_is_trace_plus_one() {
        for p in [cycle3(), k3(), two_state(0.3, 0.6)] {
            let a = ChainAnalytics::new(&p).unwrap();
            assert_abs_diff_eq!(kemeny_constant(&p).unwrap(), a.deviation.trace() + 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(a.kemeny(), a.deviation.trace() + 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn explicit_weights_validate() {
        assert!(ConnectivityWeights::explicit(DMatrix::from_element(2, 2, -1.0)).is_err());
        let c = ConnectivityWeights::explicit(DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert!(c.matrix(&DVector::from_element(3, 1.0 / 3.0)).is_err());
    }

    #[test]
    fn resistance_rejects_asymmetric_weights() {
        let g = Graph::new(3, &[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)], &[]).unwrap();
        let mut x = g.uniform_weights();
        assert!(effective_resistance(&g, &x).is_ok());
        x[0] = 0.7;
        assert!(matches!(effective_resistance(&g, &x), Err(Error::NonSymmetric(1, 2))));
        let one_way = Graph::new(3, &[(0, 1), (1, 2), (2, 0)], &[]).unwrap();
        assert!(effective_resistance(&one_way, &one_way.uniform_weights()).is_err());
    }
}
