//! Linear constraint systems on the weight vector, their null-space bases,
//! and analytical directional derivatives of the chain analytics.
//!
//! Every feasible set used by the optimizer is an affine subspace `A x = b`
//! intersected with a box. Moving along a column of the null-space basis `B`
//! keeps `A x = b` intact, so descent directions and SPSA perturbations are
//! always built as `B u`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::chain::{ChainAnalytics, ConnectivityWeights};
use crate::error::{Error, Result};
use crate::graph::{transition_matrix, Graph, StochasticMatrix, WeightVector};

/// Pivot tolerance for the row-reduced echelon form.
pub const PIVOT_TOL: f64 = 1e-10;
/// Norm below which a descent direction is reported as zero.
pub const STATIONARY_NORM: f64 = 1e-12;

/// `A x = b` with independent rows, plus an orthonormal basis of `null(A)`
/// and the minimum-norm particular solution `A^+ b`.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub basis: DMatrix<f64>,
    pub particular: DVector<f64>,
    pub rank: usize,
}

impl ConstraintSystem {
    /// Reduces `[a | b]` to row-echelon form, drops dependent rows, and builds
    /// the null-space basis. Fails with [`Error::Infeasible`] when the system
    /// is inconsistent.
    pub fn from_rows(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let (a, b) = rref(&a, &b)?;
        let cols = a.ncols();
        let rank = a.nrows();
        let (basis, particular) = null_space_and_pinv(&a, &b)?;
        debug_assert_eq!(basis.ncols(), cols - rank);
        Ok(Self { a, b, basis, particular, rank })
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// Number of free directions, `|E| - r`.
    pub fn free_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `max |A x - b|`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        if self.rank == 0 {
            return 0.0;
        }
        (&self.a * x - &self.b).amax()
    }
}

/// Gauss-Jordan elimination with partial pivoting on `[a | b]`. Returns the
/// non-zero rows only.
fn rref(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let rows = a.nrows();
    let cols = a.ncols();
    let mut m = DMatrix::zeros(rows, cols + 1);
    m.view_mut((0, 0), (rows, cols)).copy_from(a);
    m.set_column(cols, b);

    let scale = a.amax().max(1.0);
    let mut pivot_row = 0;
    for col in 0..cols {
        if pivot_row == rows {
            break;
        }
        let (best, best_val) = (pivot_row..rows)
            .map(|r| (r, m[(r, col)].abs()))
            .fold((pivot_row, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best_val <= PIVOT_TOL * scale {
            for r in pivot_row..rows {
                m[(r, col)] = 0.0;
            }
            continue;
        }
        m.swap_rows(pivot_row, best);
        let pivot = m[(pivot_row, col)];
        for c in 0..=cols {
            m[(pivot_row, c)] /= pivot;
        }
        for r in 0..rows {
            if r != pivot_row {
                let factor = m[(r, col)];
                if factor != 0.0 {
                    for c in 0..=cols {
                        let v = m[(pivot_row, c)];
                        m[(r, c)] -= factor * v;
                    }
                }
            }
        }
        pivot_row += 1;
    }

    let b_scale = b.amax().max(1.0);
    for r in pivot_row..rows {
        if m[(r, cols)].abs() > 1e-8 * b_scale {
            return Err(Error::Infeasible(format!(
                "constraint row {} reduces to 0 = {:.3e}",
                r + 1,
                m[(r, cols)]
            )));
        }
    }
    let reduced_a = m.view((0, 0), (pivot_row, cols)).into_owned();
    let reduced_b = m.view((0, cols), (pivot_row, 1)).column(0).into_owned();
    Ok((reduced_a, reduced_b))
}

/// Null-space basis of `a` (orthonormal columns) and `a^+ b` for a matrix
/// of independent rows. The basis is the eigenvector set of the projector
/// `I - a^T (a a^T)^-1 a` with eigenvalue 1.
fn null_space_and_pinv(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let cols = a.ncols();
    let rank = a.nrows();
    if rank == 0 {
        return Ok((DMatrix::identity(cols, cols), DVector::zeros(cols)));
    }
    // nalgebra's SVD of the zero-padded square matrix can be inaccurate
    // (1e-2 reconstruction error seen on stationary systems), so stay with
    // normal equations on the already row-reduced system.
    let chol = (a * a.transpose())
        .cholesky()
        .ok_or_else(|| Error::Singular("reduced constraint rows are dependent".into()))?;
    let particular = a.transpose() * chol.solve(b);
    let projector = DMatrix::identity(cols, cols) - a.transpose() * chol.solve(a);
    let eig = SymmetricEigen::new((&projector + projector.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let null_cols: Vec<DVector<f64>> = order[..cols - rank].iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect();
    let basis = if null_cols.is_empty() { DMatrix::zeros(cols, 0) } else { DMatrix::from_columns(&null_cols) };
    Ok((basis, particular))
}

/// One row of ones per node over its out-edges, `b = 1`.
pub fn block_rows(g: &Graph) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(g.node_count(), g.edge_count());
    for i in 0..g.node_count() {
        for e in g.out_block(i) {
            a[(i, e)] = 1.0;
        }
    }
    a
}

/// Every per-node block sums to one.
pub fn equality_system(g: &Graph) -> Result<ConstraintSystem> {
    ConstraintSystem::from_rows(block_rows(g), DVector::from_element(g.node_count(), 1.0))
}

/// Block sums equal one and `target P = target`. The second group has, for
/// edge `(i, j)`, the entry `target_i` in row `j`.
pub fn stationary_system(g: &Graph, target: &DVector<f64>) -> Result<ConstraintSystem> {
    let n = g.node_count();
    if target.len() != n {
        return Err(Error::Dimension { expected: n, got: target.len() });
    }
    if target.iter().any(|&t| !(t > 0.0)) || (target.sum() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig("target distribution must be positive and sum to 1".into()));
    }
    let m = g.edge_count();
    let mut a = DMatrix::zeros(2 * n, m);
    a.view_mut((0, 0), (n, m)).copy_from(&block_rows(g));
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        a[(n + j, e)] = target[i];
    }
    let mut b = DVector::from_element(2 * n, 1.0);
    b.rows_mut(n, n).copy_from(target);
    ConstraintSystem::from_rows(a, b)
}

/// Block sums equal one and `x_(i,j) = x_(j,i)`. Every edge must have its
/// reverse in the graph.
pub fn symmetric_system(g: &Graph) -> Result<ConstraintSystem> {
    let n = g.node_count();
    let m = g.edge_count();
    let mut pairs = Vec::new();
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        let rev = g.edge_id(j, i).ok_or(Error::NonSymmetric(i + 1, j + 1))?;
        if e < rev {
            pairs.push((e, rev));
        }
    }
    let mut a = DMatrix::zeros(n + pairs.len(), m);
    a.view_mut((0, 0), (n, m)).copy_from(&block_rows(g));
    for (k, &(e, rev)) in pairs.iter().enumerate() {
        a[(n + k, e)] = 1.0;
        a[(n + k, rev)] = -1.0;
    }
    let mut b = DVector::zeros(n + pairs.len());
    b.rows_mut(0, n).fill(1.0);
    ConstraintSystem::from_rows(a, b)
}

/// `dP = d/dt P(x + t delta)` at `t = 0` for the normalized map
/// `P_ij = x_ij / s_i`. On block-normalized `x` with block-sum-free `delta`
/// this is just `delta` placed at the edge entries.
pub fn transition_derivative(g: &Graph, x: &WeightVector, delta: &DVector<f64>) -> DMatrix<f64> {
    let n = g.node_count();
    let mut dp = DMatrix::zeros(n, n);
    for i in 0..n {
        let block = g.out_block(i);
        let s: f64 = block.clone().map(|e| x[e]).sum();
        let ds: f64 = block.clone().map(|e| delta[e]).sum();
        for e in block {
            let (_, j) = g.edge(e);
            dp[(i, j)] = delta[e] / s - x[e] * ds / (s * s);
        }
    }
    dp
}

/// Directional derivatives of `Pi`, `D`, `M` and `S` along a perturbation
/// `dP` of the transition matrix.
#[derive(Debug, Clone)]
pub struct DirectionalDerivatives {
    pub d_ergodic: DMatrix<f64>,
    pub d_deviation: DMatrix<f64>,
    pub d_mfpt: DMatrix<f64>,
    pub d_objective: f64,
}

/// `Pi' = Pi P' D`, `D' = D P' D - Pi' D`, and `M'` by differentiating
/// `M = (I - D + 1 1^T dg(D)) dg(Pi)^-1`. When `C` depends on the chain the
/// objective derivative includes the `C'` term.
pub fn directional_derivatives(
    dp: &DMatrix<f64>,
    analytics: &ChainAnalytics,
    c: &ConnectivityWeights,
) -> Result<DirectionalDerivatives> {
    let n = analytics.dim();
    let pi = &analytics.pi;
    let d = &analytics.deviation;

    // Pi has identical rows, so Pi P' D = 1 (pi P' D).
    let d_pi = (pi.transpose() * dp * d).transpose();
    let d_ergodic = DMatrix::from_fn(n, n, |_, j| d_pi[j]);
    let dpd = dp * d;
    let d_deviation = d * &dpd - &d_ergodic * d;

    let d_mfpt = DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        let lead = (-d_deviation[(i, j)] + d_deviation[(j, j)]) / pi[j];
        let base = delta - d[(i, j)] + d[(j, j)];
        lead - base * d_pi[j] / (pi[j] * pi[j])
    });

    let cm = c.matrix(pi)?;
    let mut d_objective = cm.component_mul(&d_mfpt).sum();
    if c.depends_on_chain() {
        let d_c = &d_pi * pi.transpose() + pi * d_pi.transpose();
        d_objective += d_c.component_mul(&analytics.mfpt).sum();
    }
    Ok(DirectionalDerivatives { d_ergodic, d_deviation, d_mfpt, d_objective })
}

/// `-B g` where `g_k` is the derivative of `S(P(x), C)` along basis column
/// `k`. Not normalized.
pub fn projected_gradient_direction(
    g: &Graph,
    x: &WeightVector,
    c: &ConnectivityWeights,
    sys: &ConstraintSystem,
) -> Result<DVector<f64>> {
    let p = transition_matrix(g, x)?;
    let analytics = ChainAnalytics::new(&p)?;
    let coords = basis_derivatives(g, x, &analytics, c, &sys.basis)?;
    Ok(-(&sys.basis * coords))
}

/// Derivatives of `S(P(x), C)` along each column of `basis`.
pub fn basis_derivatives(
    g: &Graph,
    x: &WeightVector,
    analytics: &ChainAnalytics,
    c: &ConnectivityWeights,
    basis: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(basis.ncols());
    for k in 0..basis.ncols() {
        let v = basis.column(k).into_owned();
        let dp = transition_derivative(g, x, &v);
        out[k] = directional_derivatives(&dp, analytics, c)?.d_objective;
    }
    Ok(out)
}

/// Unit-length steepest feasible descent direction at an interior `x`, or the
/// zero vector at a stationary point or when the basis is empty.
pub fn steepest_feasible_descent(
    g: &Graph,
    x: &WeightVector,
    c: &ConnectivityWeights,
    sys: &ConstraintSystem,
) -> Result<DVector<f64>> {
    if sys.free_dim() == 0 {
        return Ok(DVector::zeros(x.len()));
    }
    let raw = projected_gradient_direction(g, x, c, sys)?;
    let norm = raw.norm();
    if norm < STATIONARY_NORM {
        Ok(DVector::zeros(x.len()))
    } else {
        Ok(raw / norm)
    }
}

/// Convenience: the transition matrix and analytics at `x`.
pub fn analytics_at(g: &Graph, x: &WeightVector) -> Result<(StochasticMatrix, ChainAnalytics)> {
    let p = transition_matrix(g, x)?;
    let a = ChainAnalytics::new(&p)?;
    Ok((p, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_node_full() -> Graph {
        Graph::new(2, &[(0, 0), (0, 1), (1, 0), (1, 1)], &[]).unwrap()
    }

    fn check_basis(sys: &ConstraintSystem) {
        let ab = &sys.a * &sys.basis;
        assert!(ab.amax() < 1e-10, "A B = {ab}");
        let btb = sys.basis.transpose() * &sys.basis;
        let eye = DMatrix::identity(sys.free_dim(), sys.free_dim());
        assert!((btb - eye).amax() < 1e-10);
        assert!((&sys.a * &sys.particular - &sys.b).amax() < 1e-10);
    }

    #[test]
    fn stationary_particular_solution() {
        // Regression: this system once came back with |A p - b| ~ 7e-3.
        use rand::SeedableRng;
        for seed in [17104943958783893717u64, 1, 2, 3] {
            let (g, x0) = crate::instances::random_irreducible(4, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let target = crate::chain::stationary_distribution(&transition_matrix(&g, &x0).unwrap()).unwrap();
            let sys = stationary_system(&g, &target).unwrap();
            check_basis(&sys);
            let back = &sys.particular + &sys.basis * (sys.basis.transpose() * (&x0 - &sys.particular));
            assert!((back - &x0).amax() < 1e-12);
        }
    }

    #[test]
    fn single_block_basis() {
        let g = Graph::new(2, &[(0, 0), (0, 1), (1, 0)], &[]).unwrap();
        let sys = equality_system(&g).unwrap();
        assert_eq!(sys.rank, 2);
        assert_eq!(sys.free_dim(), 1);
        let v = sys.basis.column(0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(v[0].abs(), s, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0], -v[1], epsilon = 1e-12);
        assert_abs_diff_eq!(v[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cycle_has_no_free_direction() {
        let g = Graph::new(3, &[(0, 1), (1, 2), (2, 0)], &[]).unwrap();
        let sys = equality_system(&g).unwrap();
        assert_eq!(sys.free_dim(), 0);
        let x = g.uniform_weights();
        let d = steepest_feasible_descent(&g, &x, &ConnectivityWeights::Unit, &sys).unwrap();
        assert_eq!(d, DVector::zeros(3));
    }

    #[test]
    fn two_node_equality_basis() {
        let sys = equality_system(&two_node_full()).unwrap();
        assert_eq!(sys.rank, 2);
        assert_eq!(sys.free_dim(), 2);
        check_basis(&sys);
        assert!(sys.residual(&sys.particular) < 1e-12);
    }

    #[test]
    fn stationary_systems() {
        let g = two_node_full();
        let sys = stationary_system(&g, &DVector::from_vec(vec![0.5, 0.5])).unwrap();
        assert!(sys.free_dim() > 0);
        check_basis(&sys);

        let cyc = Graph::new(3, &[(0, 1), (1, 2), (2, 0)], &[]).unwrap();
        let sys = stationary_system(&cyc, &DVector::from_element(3, 1.0 / 3.0)).unwrap();
        assert_eq!(sys.free_dim(), 0);
        let bad = stationary_system(&cyc, &DVector::from_vec(vec![0.5, 0.25, 0.25]));
        assert!(matches!(bad, Err(Error::Infeasible(_))));
    }

    #[test]
    fn symmetric_system_requires_reverse_edges() {
        let cyc = Graph::new(3, &[(0, 1), (1, 2), (2, 0)], &[]).unwrap();
        assert!(matches!(symmetric_system(&cyc), Err(Error::NonSymmetric(..))));
        let k3 = Graph::new(3, &[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)], &[]).unwrap();
        let sys = symmetric_system(&k3).unwrap();
        check_basis(&sys);
        // Symmetric doubly stochastic on K3 without loops is unique.
        assert_eq!(sys.free_dim(), 0);
    }

    #[test]
    fn zero_direction_has_zero_derivatives() {
        let g = two_node_full();
        let x = DVector::from_element(4, 0.5);
        let (_, a) = analytics_at(&g, &x).unwrap();
        let dp = transition_derivative(&g, &x, &DVector::zeros(4));
        let d = directional_derivatives(&dp, &a, &ConnectivityWeights::Unit).unwrap();
        assert_eq!(d.d_objective, 0.0);
        assert!(d.d_mfpt.amax() == 0.0 && d.d_deviation.amax() == 0.0);
    }

    #[test]
    fn ergodic_derivative_rows_sum_to_zero() {
        let g = two_node_full();
        let x = DVector::from_vec(vec![0.3, 0.7, 0.6, 0.4]);
        let (_, a) = analytics_at(&g, &x).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let dp = transition_derivative(&g, &x, &DVector::from_vec(vec![s, -s, 0.0, 0.0]));
        let d = directional_derivatives(&dp, &a, &ConnectivityWeights::Unit).unwrap();
        assert!(d.d_ergodic.column_sum().amax() < 1e-12);
    }
}
