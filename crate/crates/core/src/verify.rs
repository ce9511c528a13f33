//! Cross-checks of the library against the oracles in [`crate::oracles`].
//!
//! Each check takes its corpus size and tolerance as arguments and returns a
//! [`Check`] naming the worst disagreement it saw.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{connectivity_objective, deviation_matrix, kemeny_constant, mfpt_matrix, stationary_distribution, ChainAnalytics, ConnectivityWeights};
use crate::directions::{basis_derivatives, equality_system, ConstraintSystem};
use crate::error::Result;
use crate::graph::{transition_matrix, Graph, StochasticMatrix, WeightVector};
use crate::instances;
use crate::oracles::{brute_force_projection, cycle_chain, exhaustive_spsa_expectation, finite_difference_directional, hamiltonian_cycle_search, mfpt_first_step, hamiltonian_tour_value, reversible_bound_values};
use crate::projection::{dykstra_project, project_affine, project_scaled_simplex};
use crate::random_support::{expected_objective_enumerate, realized_chain, redistribute, sample_edge_sets, Correlation, FailureModel};
use crate::spsa::{infeasibility_demo, sample_perturbation, Problem, Support};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// `count` random irreducible chains with `N` in `3..=8`.
pub fn random_corpus(count: usize, seed: u64) -> Vec<(Graph, WeightVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| {
        let n = rng.random_range(3..=8);
        instances::random_irreducible(n, &mut rng)
    }).collect()
}

fn chains(corpus: &[(Graph, WeightVector)]) -> Result<Vec<StochasticMatrix>> {
    corpus.iter().map(|(g, x)| transition_matrix(g, x)).collect()
}

/// Closed-form MFPT matrix against first-step analysis, max abs error.
pub fn mfpt_equivalence(corpus: &[(Graph, WeightVector)], tol: f64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for p in chains(corpus)? {
        let diff = mfpt_matrix(&p)? - mfpt_first_step(p.matrix())?;
        worst = worst.max(diff.amax());
    }
    Ok(Check::new("mfpt oracle equivalence", worst < tol, format!("{} chains, max abs error {worst:.3e} (tol {tol:e})", corpus.len())))
}

/// `K = Tr(D) + 1` and `M_ii pi_i = 1`.
pub fn kemeny_identity(corpus: &[(Graph, WeightVector)], tol: f64) -> Result<Check> {
    let (mut trace_err, mut return_err): (f64, f64) = (0.0, 0.0);
    for p in chains(corpus)? {
        let k = kemeny_constant(&p)?;
        trace_err = trace_err.max((k - deviation_matrix(&p)?.trace() - 1.0).abs());
        let pi = stationary_distribution(&p)?;
        let m = mfpt_matrix(&p)?;
        for i in 0..p.dim() {
            return_err = return_err.max((m[(i, i)] * pi[i] - 1.0).abs());
        }
    }
    let worst = trace_err.max(return_err);
    Ok(Check::new(
        "kemeny identity",
        worst < tol,
        format!("|K - Tr(D) - 1| <= {trace_err:.3e}, |M_ii pi_i - 1| <= {return_err:.3e} (tol {tol:e})"),
    ))
}

/// Hamiltonian tours on `C_N` for `N in 2..=max_n` and on the Petersen
/// reconstruction evaluate to `(N^3 - N^2) / 2`.
pub fn hamiltonian_tours(max_n: usize, tol: f64) -> Result<Check> {
    let mut failures = Vec::new();
    for n in 2..=max_n {
        let g = instances::directed_cycle(n);
        let s = connectivity_objective(&transition_matrix(&g, &g.uniform_weights())?, &ConnectivityWeights::Unit)?;
        if (s - s.round()).abs() > tol || s.round() != hamiltonian_tour_value(n) {
            failures.push(format!("C_{n}: {s}"));
        }
    }
    let petersen = instances::directed_petersen();
    let tour = hamiltonian_cycle_search(&petersen)?;
    let petersen_value = match &tour {
        Some(t) => {
            let p = StochasticMatrix::new(cycle_chain(10, t))?;
            connectivity_objective(&p, &ConnectivityWeights::Unit)?
        }
        None => f64::NAN,
    };
    if !((petersen_value - 450.0).abs() <= tol) {
        failures.push(format!("petersen tour: {petersen_value}"));
    }
    let passed = failures.is_empty();
    let detail = if passed {
        format!("C_2..C_{max_n} match (N^3-N^2)/2; petersen tour S = {petersen_value}")
    } else {
        failures.join("; ")
    };
    Ok(Check::new("hamiltonian tours", passed, detail))
}

/// Uniform complete graphs and symmetric cycles attain the reversible
/// bounds, and the tour value is strictly below the lower bound.
pub fn reversible_bounds(tol: f64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for n in 3..=8 {
        let (lo, hi) = reversible_bound_values(n);
        let k = instances::complete(n);
        let c = instances::undirected_cycle(n);
        let sk = connectivity_objective(&transition_matrix(&k, &k.uniform_weights())?, &ConnectivityWeights::Unit)?;
        let sc = connectivity_objective(&transition_matrix(&c, &c.uniform_weights())?, &ConnectivityWeights::Unit)?;
        worst = worst.max((sk - lo).abs()).max((sc - hi).abs());
    }
    let gap_ok = (3..=12).all(|n| hamiltonian_tour_value(n) < reversible_bound_values(n).0);
    Ok(Check::new(
        "reversible bounds",
        worst <= tol && gap_ok,
        format!("K_N / C_N max error {worst:.3e} (tol {tol:e}); tour < lower bound for N=3..12: {gap_ok}"),
    ))
}

/// Unit-weight or Kemeny objective computed from the first-step oracle only.
fn oracle_objective(g: &Graph, y: &DVector<f64>, kemeny: bool) -> Result<f64> {
    let n = g.node_count();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let s: f64 = g.out_block(i).map(|e| y[e]).sum();
        for e in g.out_block(i) {
            p[g.edge(e)] = y[e] / s;
        }
    }
    let m = mfpt_first_step(&p)?;
    Ok(if kemeny {
        // pi_j = 1 / M_jj; K = sum_j pi_i pi_j M_ij summed over i, j.
        let pi = DVector::from_fn(n, |j, _| 1.0 / m[(j, j)]);
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| pi[i] * pi[j] * m[(i, j)]).sum()
    } else {
        m.sum() - m.trace()
    })
}

/// Analytical directional derivatives of `S` along basis columns against
/// central differences of the oracle objective.
pub fn derivative_agreement(pairs: usize, seed: u64, h: f64, rel_tol: f64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..pairs {
        let n = rng.random_range(3..=8);
        let (g, x) = instances::random_irreducible(n, &mut rng);
        let sys = equality_system(&g)?;
        if sys.free_dim() == 0 {
            continue;
        }
        let col = rng.random_range(0..sys.free_dim());
        let kemeny = k % 2 == 1;
        let c = if kemeny { ConnectivityWeights::Kemeny } else { ConnectivityWeights::Unit };
        let analytics = ChainAnalytics::new(&transition_matrix(&g, &x)?)?;
        let v = sys.basis.column(col).into_owned();
        let analytic = basis_derivatives(&g, &x, &analytics, &c, &DMatrix::from_columns(&[v.clone()]))?[0];
        let fd = finite_difference_directional(|y| oracle_objective(&g, y, kemeny), &x, &v, h)?;
        worst = worst.max((analytic - fd).abs() / fd.abs().max(1.0));
    }
    Ok(Check::new(
        "derivative agreement",
        worst < rel_tol,
        format!("{pairs} pairs, max relative error {worst:.3e} (tol {rel_tol:e}, h {h:e})"),
    ))
}

/// Bias of the exhaustively averaged SPSA estimate on the 2-node 4-edge
/// instance. Returns the check and the successive error ratios
/// `error(eta) / error(eta / 2)`.
pub fn bias_law(etas: &[f64], ratio_range: (f64, f64), quad_tol: f64) -> Result<(Check, Vec<f64>)> {
    let g = instances::two_node_full();
    let sys = equality_system(&g)?;
    let x = DVector::from_vec(vec![0.3, 0.7, 0.6, 0.4]);
    let c = ConnectivityWeights::Unit;
    let analytics = ChainAnalytics::new(&transition_matrix(&g, &x)?)?;
    let exact = -(&sys.basis * basis_derivatives(&g, &x, &analytics, &c, &sys.basis)?);
    let j = |y: &DVector<f64>| connectivity_objective(&transition_matrix(&g, y)?, &c);
    let errors: Vec<f64> = etas
        .iter()
        .map(|&eta| Ok((exhaustive_spsa_expectation(j, &x, &sys.basis, eta)? - &exact).norm()))
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let ratios_ok = ratios.iter().all(|r| (ratio_range.0..=ratio_range.1).contains(r));

    let quad = |y: &DVector<f64>| Ok(y.norm_squared());
    let projected = -(&sys.basis * (sys.basis.transpose() * (&x * 2.0)));
    let quad_err = etas
        .iter()
        .map(|&eta| Ok((exhaustive_spsa_expectation(quad, &x, &sys.basis, eta)? - &projected).amax()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let passed = ratios_ok && quad_err < quad_tol;
    let detail = format!(
        "errors {:?}, ratios {:?} (want {:?}); quadratic max error {quad_err:.1e}",
        errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
        ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
        ratio_range
    );
    Ok((Check::new("spsa bias law", passed, detail), ratios))
}

/// Simplex, affine and Dykstra projections against the brute-force QP, plus
/// idempotence.
pub fn projection_agreement(problems: usize, seed: u64, tol: f64, idem_tol: f64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut worst_idem): (f64, f64) = (0.0, 0.0);
    for k in 0..problems {
        let n = rng.random_range(2..=6);
        let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.5));
        match k % 3 {
            0 => {
                let eps = rng.random_range(0.0..0.5 / n as f64);
                let got = DVector::from_vec(project_scaled_simplex(x.as_slice(), eps)?);
                let want = brute_force_projection(&x, &DMatrix::from_element(1, n, 1.0), &DVector::from_element(1, 1.0), eps, 1.0).expect("simplex is nonempty");
                worst = worst.max((&got - want).amax());
                let again = DVector::from_vec(project_scaled_simplex(got.as_slice(), eps)?);
                worst_idem = worst_idem.max((again - got).amax());
            }
            1 => {
                let rows = rng.random_range(1..n.min(3));
                let a = DMatrix::from_fn(rows, n, |_, _| rng.random_range(-1.0..1.0));
                let y0 = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0));
                let sys = ConstraintSystem::from_rows(a.clone(), &a * y0)?;
                let got = project_affine(&x, &sys);
                let want = brute_force_projection(&x, &sys.a, &sys.b, -1e6, 1e6).expect("affine set is nonempty");
                worst = worst.max((&got - want).amax());
                worst_idem = worst_idem.max((project_affine(&got, &sys) - &got).amax());
            }
            _ => {
                // Block sums over a random split, box [eps, 1 - eps].
                let split = rng.random_range(1..n);
                let a = DMatrix::from_fn(2, n, |r, c| if (c < split) == (r == 0) { 1.0 } else { 0.0 });
                let b = DVector::from_element(2, 1.0);
                // A singleton block pins its coordinate to 1, outside [eps, 1 - eps].
                let eps = if split == 1 || n - split == 1 { 0.0 } else { rng.random_range(0.0..0.15) };
                let sys = ConstraintSystem::from_rows(a.clone(), b.clone())?;
                let out = dykstra_project(&x, &sys, eps, 1e-13, 200_000);
                let want = brute_force_projection(&x, &a, &b, eps, 1.0 - eps).expect("box and blocks intersect");
                worst = worst.max((&out.point - want).amax());
                let again = dykstra_project(&out.point, &sys, eps, 1e-13, 200_000);
                worst_idem = worst_idem.max((again.point - &out.point).amax());
            }
        }
    }
    Ok(Check::new(
        "projection agreement",
        worst < tol && worst_idem < idem_tol,
        format!(
            "{problems} problems, max error {worst:.3e} (tol {tol:e}), idempotence {worst_idem:.3e} (tol {idem_tol:e})"
        ),
    ))
}

/// Monte Carlo mean of the sample-average objective against exact
/// enumeration, and row sums of every redistributed chain.
pub fn random_support_consistency(total: usize, batch: usize, seed: u64, rel_tol: f64, row_tol: f64) -> Result<Check> {
    let g = instances::complete(4);
    let risky = [(0, 0.3), (4, 0.2), (6, 0.5), (9, 0.1), (11, 0.4)];
    let model = FailureModel::new(&g, &risky, Correlation::Independent)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::from_fn(g.edge_count(), |_, _| rng.random_range(0.1..1.0));
    for i in 0..4 {
        let s: f64 = g.out_block(i).map(|e| x[e]).sum();
        g.out_block(i).for_each(|e| x[e] /= s);
    }
    let c = ConnectivityWeights::Unit;
    let exact = expected_objective_enumerate(&g, &x, &c, &model)?;
    let p = transition_matrix(&g, &x)?;
    let (mut sum, mut row_err) = (0.0, 0.0f64);
    let mut drawn = 0;
    while drawn < total {
        let l = batch.min(total - drawn);
        let mut batch_sum = 0.0;
        for r in sample_edge_sets(&model, l, &mut rng) {
            let q = redistribute(&g, &p, &r)?;
            for i in 0..q.dim() {
                row_err = row_err.max((q.matrix().row(i).sum() - 1.0).abs());
            }
            batch_sum += connectivity_objective(&q, &c)?;
        }
        sum += batch_sum;
        drawn += l;
    }
    let mean = sum / total as f64;
    let rel = (mean - exact).abs() / exact;
    Ok(Check::new(
        "random support consistency",
        rel < rel_tol && row_err <= row_tol,
        format!("exact {exact:.4}, monte carlo {mean:.4} over {total} samples, relative error {rel:.2e} (tol {rel_tol:e}); max row-sum error {row_err:.1e}"),
    ))
}

/// A chain with `pi(P(x)) = target` whose expected realized stationary
/// distribution is off target.
pub fn stationary_caveat(threshold: f64) -> Result<Check> {
    let g = instances::complete(3);
    let x = g.uniform_weights();
    let target = DVector::from_element(3, 1.0 / 3.0);
    let pi = stationary_distribution(&transition_matrix(&g, &x)?)?;
    let model = FailureModel::new(&g, &[(0, 0.5)], Correlation::Independent)?;
    let mut expected = DVector::zeros(3);
    for (r, prob) in crate::random_support::enumerate_realizations(&model)? {
        expected += stationary_distribution(&realized_chain(&g, &x, &r)?)? * prob;
    }
    let on_target = (&pi - &target).amax();
    let gap = (&expected - &target).amax();
    Ok(Check::new(
        "stationary caveat",
        on_target < 1e-12 && gap > threshold,
        format!("|pi(P) - target| = {on_target:.1e}, |E[pi(Q)] - target| = {gap:.4} (threshold {threshold:e})"),
    ))
}

/// The naive three-node perturbation leaves the stochastic matrices, while random
/// null-space perturbations within the `eta` bound never do.
pub fn infeasibility_regression(iterations: usize, seed: u64) -> Result<Check> {
    let g = instances::complete(3);
    let x = g.uniform_weights();
    let naive = DVector::from_vec(vec![1.0, 1.0, -1.0, 1.0, 1.0, 1.0]);
    let reduced = DVector::from_vec(vec![1.0, 1.0, 1.0]);
    let demo = infeasibility_demo(&g, &x, &naive, &reduced, 0.01)?;
    let naive_ok = !demo.naive_in_simplex;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = 1e-4;
    let problem = Problem::new(g.clone(), ConnectivityWeights::Unit, &crate::spsa::ConstraintKind::Simplex, eps, Support::Fixed)?;
    let dim = problem.system.free_dim();
    let mut violations = 0;
    for k in 0..iterations {
        let point = if k % 2 == 0 {
            problem.random_start(&mut rng)?
        } else {
            // Push some coordinates onto the lower bound.
            let raw = DVector::from_fn(g.edge_count(), |_, _| rng.random_range(-0.5..1.0));
            problem.region.project(&g, &raw)?.point
        };
        let eta = rng.random_range(0.0..eps / (dim as f64).sqrt());
        let d = sample_perturbation(dim, &mut rng);
        let r = infeasibility_demo(&g, &point, &DVector::zeros(g.edge_count()), &d, eta)?;
        if !r.constrained_in_simplex {
            violations += 1;
        }
    }
    Ok(Check::new(
        "infeasibility regression",
        naive_ok && violations == 0,
        format!(
            "naive row sums {:?} (outside: {naive_ok}); constrained points outside in {violations} of {iterations} iterations",
            demo.naive_row_sums.iter().map(|s| format!("{s:.2}")).collect::<Vec<_>>()
        ),
    ))
}

/// The oracle suite run by `chainopt verify`.
pub fn run_suite(seed: u64) -> Result<Vec<Check>> {
    let corpus = random_corpus(200, seed);
    Ok(vec![
        mfpt_equivalence(&corpus, 1e-8)?,
        kemeny_identity(&corpus, 1e-9)?,
        hamiltonian_tours(12, 1e-9)?,
        reversible_bounds(1e-6)?,
        derivative_agreement(100, seed, 1e-6, 1e-5)?,
        bias_law(&[1e-2, 5e-3, 2.5e-3], (3.5, 4.5), 1e-12)?.0,
        projection_agreement(50, seed, 1e-6, 1e-12)?,
        random_support_consistency(100_000, 1_000, seed, 0.01, 1e-12)?,
        stationary_caveat(1e-3)?,
        infeasibility_regression(10_000, seed)?,
    ])
}
