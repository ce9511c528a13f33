//! Brute-force reference computations.
//!
//! Nothing in here calls into [`crate::chain`], [`crate::directions`] or
//! [`crate::projection`]. The oracles share only the graph and matrix types
//! with the code they check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Largest search dimension for [`exhaustive_spsa_expectation`].
pub const EXHAUSTIVE_MAX_DIM: usize = 12;
/// Largest graph accepted by [`hamiltonian_cycle_search`].
pub const HAMILTONIAN_MAX_NODES: usize = 16;

/// Gaussian elimination with partial pivoting on a dense row-major system.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}

/// First-step analysis: for each target `j`, `m_i = 1 + sum_{k != j} P_ik m_k`
/// for all `i`. Row `i = j` of the result is the mean return time.
pub fn mfpt_first_step(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        // Unknowns: hitting times from every i != j.
        let others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
        let a: Vec<Vec<f64>> = others
            .iter()
            .map(|&i| {
                others.iter().map(|&k| if i == k { 1.0 } else { 0.0 } - p[(i, k)]).collect()
            })
            .collect();
        let h = gauss_solve(a, vec![1.0; others.len()])
            .ok_or_else(|| Error::Singular(format!("first-step system for target {}", j + 1)))?;
        for (pos, &i) in others.iter().enumerate() {
            m[(i, j)] = h[pos];
        }
        m[(j, j)] = 1.0 + others.iter().enumerate().map(|(pos, &k)| p[(j, k)] * h[pos]).sum::<f64>();
    }
    Ok(m)
}

/// Stationary distribution by power iteration on the lazy chain `(I + P)/2`.
pub fn power_iteration_stationary(p: &DMatrix<f64>, tol: f64, max_iter: usize) -> DVector<f64> {
    let n = p.nrows();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..max_iter {
        let next = (&v + p.transpose() * &v) * 0.5;
        let diff = (&next - &v).amax();
        v = next;
        if diff < tol {
            break;
        }
    }
    v
}

/// Backtracking search for a directed Hamiltonian cycle, returned as a node
/// order starting at 0.
pub fn hamiltonian_cycle_search(g: &Graph) -> Result<Option<Vec<usize>>> {
    let n = g.node_count();
    if n > HAMILTONIAN_MAX_NODES {
        return Err(Error::InvalidConfig(format!(
            "hamiltonian search supports at most {HAMILTONIAN_MAX_NODES} nodes"
        )));
    }
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|i| g.out_block(i).map(|e| g.edge(e).1).filter(|&j| j != i).collect())
        .collect();
    if n == 1 {
        return Ok(g.edge_id(0, 0).map(|_| vec![0]));
    }
    let mut path = vec![0];
    let mut used = vec![false; n];
    used[0] = true;
    fn extend(succ: &[Vec<usize>], path: &mut Vec<usize>, used: &mut [bool]) -> bool {
        let last = *path.last().unwrap();
        if path.len() == used.len() {
            return succ[last].contains(&0);
        }
        for &next in &succ[last] {
            if !used[next] {
                used[next] = true;
                path.push(next);
                if extend(succ, path, used) {
                    return true;
                }
                path.pop();
                used[next] = false;
            }
        }
        false
    }
    Ok(extend(&succ, &mut path, &mut used).then_some(path))
}

/// Permutation matrix that walks `cycle` deterministically.
pub fn cycle_chain(n: usize, cycle: &[usize]) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    for k in 0..cycle.len() {
        p[(cycle[k], cycle[(k + 1) % cycle.len()])] = 1.0;
    }
    p
}

/// `(N^3 - N^2) / 2`, the unit-weight objective of a Hamiltonian tour.
pub fn hamiltonian_tour_value(n: usize) -> f64 {
    let n = n as f64;
    (n.powi(3) - n.powi(2)) / 2.0
}

/// Lower and upper bounds on the optimal reversible unit-weight objective:
/// `(N^3 - 2N^2 + N, (N^4 - N^2) / 6)`, attained by the uniform complete graph
/// and the symmetric cycle.
pub fn reversible_bound_values(n: usize) -> (f64, f64) {
    let n = n as f64;
    (n.powi(3) - 2.0 * n.powi(2) + n, (n.powi(4) - n.powi(2)) / 6.0)
}

/// Unit-weight MFPT sum `sum_{i != j} M_ij` computed from the first-step
/// oracle.
pub fn unit_objective(p: &DMatrix<f64>) -> Result<f64> {
    let m = mfpt_first_step(p)?;
    Ok(m.sum() - m.trace())
}

/// `[J(x + h d) - J(x - h d)] / (2h)`.
pub fn finite_difference_directional<F>(j: F, x: &DVector<f64>, delta: &DVector<f64>, h: f64) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let plus = j(&(x + delta * h))?;
    let minus = j(&(x - delta * h))?;
    Ok((plus - minus) / (2.0 * h))
}

/// Mean of the two-point estimate
/// `[J(x - eta B D) - J(x + eta B D)] / (2 eta) * B D` over every
/// `D in {-1, 1}^k`, where `k` is the number of basis columns.
pub fn exhaustive_spsa_expectation<F>(j: F, x: &DVector<f64>, basis: &DMatrix<f64>, eta: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let k = basis.ncols();
    if k > EXHAUSTIVE_MAX_DIM {
        return Err(Error::EnumerationCap(k, EXHAUSTIVE_MAX_DIM));
    }
    let mut acc = DVector::zeros(x.len());
    if k == 0 {
        return Ok(acc);
    }
    let count = 1usize << k;
    for mask in 0..count {
        let d = DVector::from_fn(k, |c, _| if mask >> c & 1 == 1 { 1.0 } else { -1.0 });
        let step = basis * d;
        let lo = j(&(x - &step * eta))?;
        let hi = j(&(x + &step * eta))?;
        acc += step * ((lo - hi) / (2.0 * eta));
    }
    Ok(acc / count as f64)
}

/// Exact Euclidean projection onto `{A y = b, lo <= y <= hi}` by enumerating
/// every assignment of each coordinate to free / lower / upper and solving
/// the equality-constrained problem on the free coordinates. Exponential,
/// meant for at most about 8 variables. `None` if the set is empty.
pub fn brute_force_projection(
    x: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lo: f64,
    hi: f64,
) -> Option<DVector<f64>> {
    let n = x.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut y = x.clone();
        let mut free = Vec::new();
        let mut c = code;
        for (i, yi) in y.iter_mut().enumerate() {
            match c % 3 {
                0 => free.push(i),
                1 => *yi = lo,
                _ => *yi = hi,
            }
            c /= 3;
        }
        let fixed_part = a * &y.map_with_location(|i, _, v| if free.contains(&i) { 0.0 } else { v });
        let rhs = b - fixed_part;
        if free.is_empty() {
            if rhs.amax() > 1e-9 {
                continue;
            }
        } else {
            let af = DMatrix::from_fn(a.nrows(), free.len(), |r, k| a[(r, free[k])]);
            let xf = DVector::from_fn(free.len(), |k, _| x[free[k]]);
            // y_F = x_F + A_F^T lambda with A_F A_F^T lambda = rhs - A_F x_F.
            let gram = &af * af.transpose();
            let lambda = gram.pseudo_inverse(1e-12).ok()? * (&rhs - &af * &xf);
            let yf = &xf + af.transpose() * lambda;
            if (&af * &yf - &rhs).amax() > 1e-9 {
                continue;
            }
            for (k, &i) in free.iter().enumerate() {
                y[i] = yf[k];
            }
        }
        if y.iter().any(|&v| v < lo - 1e-12 || v > hi + 1e-12) {
            continue;
        }
        let dist = (&y - x).norm_squared();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, y));
        }
    }
    best.map(|(_, y)| y)
}
