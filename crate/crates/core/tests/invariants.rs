//! Property tests for the invariants of each module.

use chainopt::chain::{connectivity_objective, effective_resistance, kemeny_constant, mfpt_matrix, stationary_distribution, ChainAnalytics, ConnectivityWeights};
use chainopt::directions::{directional_derivatives, stationary_system, steepest_feasible_descent, transition_derivative, equality_system};
use chainopt::graph::{check_reversible, transition_matrix, Graph, WeightVector};
use chainopt::instances;
use chainopt::oracles::mfpt_first_step;
use chainopt::projection::{dykstra_project, project_scaled_simplex};
use chainopt::random_support::{enumerate_realizations, realized_chain, redistribute, Correlation, FailureModel};
use chainopt::spsa::{restart_rng, run_spsa, ConstraintKind, Problem, SpsaConfig, Support};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_chain(seed: u64, n: usize) -> (Graph, WeightVector) {
    instances::random_irreducible(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// A point of the symmetric doubly stochastic set on `K_n` with loops.
fn symmetric_point(seed: u64, n: usize) -> (Graph, WeightVector) {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            edges.push((i, j));
        }
    }
    let g = Graph::new(n, &edges, &[]).unwrap();
    let p = Problem::new(g.clone(), ConnectivityWeights::Unit, &ConstraintKind::Symmetric, 1e-4, Support::Fixed).unwrap();
    let x = p.random_start(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    (g, x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transition_matrix_is_stochastic(seed in any::<u64>(), n in 2usize..9) {
        let (g, x) = random_chain(seed, n);
        let p = transition_matrix(&g, &x).unwrap();
        for i in 0..n {
            let row = p.matrix().row(i);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_index_round_trip(seed in any::<u64>(), n in 2usize..9) {
        let (g, _) = random_chain(seed, n);
        for e in 0..g.edge_count() {
            let (i, j) = g.edge(e);
            prop_assert_eq!(g.edge_id(i, j), Some(e));
        }
    }

    #[test]
    fn symmetric_weights_are_reversible(seed in any::<u64>(), n in 2usize..7) {
        let (g, x) = symmetric_point(seed, n);
        let p = transition_matrix(&g, &x).unwrap();
        let pi = stationary_distribution(&p).unwrap();
        prop_assert!(check_reversible(&p, &pi, 1e-10));
    }

    #[test]
    fn mfpt_matches_first_step(seed in any::<u64>(), n in 2usize..9) {
        let (g, x) = random_chain(seed, n);
        let p = transition_matrix(&g, &x).unwrap();
        let m = mfpt_matrix(&p).unwrap();
        let oracle = mfpt_first_step(p.matrix()).unwrap();
        prop_assert!((&m - &oracle).amax() <= 1e-8 * oracle.amax().max(1.0));
        let pi = stationary_distribution(&p).unwrap();
        for i in 0..n {
            prop_assert!((m[(i, i)] * pi[i] - 1.0).abs() < 1e-9);
        }
        let a = ChainAnalytics::new(&p).unwrap();
        prop_assert!((kemeny_constant(&p).unwrap() - a.deviation.trace() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn objective_is_n_times_resistance(seed in any::<u64>(), n in 2usize..7) {
        let (g, x) = symmetric_point(seed, n);
        let s = connectivity_objective(&transition_matrix(&g, &x).unwrap(), &ConnectivityWeights::Unit).unwrap();
        let (_, r_tot) = effective_resistance(&g, &x).unwrap();
        prop_assert!((s - n as f64 * r_tot).abs() < 1e-8 * s.max(1.0));
    }

    #[test]
    fn ergodic_derivative_rows_vanish(seed in any::<u64>(), n in 3usize..8, col in 0usize..64) {
        let (g, x) = random_chain(seed, n);
        let sys = equality_system(&g).unwrap();
        prop_assume!(sys.free_dim() > 0);
        let v = sys.basis.column(col % sys.free_dim()).into_owned();
        let a = ChainAnalytics::new(&transition_matrix(&g, &x).unwrap()).unwrap();
        let d = directional_derivatives(&transition_derivative(&g, &x, &v), &a, &ConnectivityWeights::Unit).unwrap();
        for i in 0..n {
            prop_assert!(d.d_ergodic.row(i).sum().abs() < 1e-10);
        }
    }

    #[test]
    fn steepest_direction_descends(seed in any::<u64>(), n in 3usize..8) {
        let (g, x) = random_chain(seed, n);
        let sys = equality_system(&g).unwrap();
        let c = ConnectivityWeights::Unit;
        let d = steepest_feasible_descent(&g, &x, &c, &sys).unwrap();
        prop_assume!(d.norm() > 0.0);
        let s0 = connectivity_objective(&transition_matrix(&g, &x).unwrap(), &c).unwrap();
        let s1 = connectivity_objective(&transition_matrix(&g, &(&x + &d * 1e-6)).unwrap(), &c).unwrap();
        prop_assert!(s1 < s0, "{} !< {}", s1, s0);
    }

    #[test]
    fn stationary_basis_keeps_target(seed in any::<u64>(), n in 3usize..7, scale in 0.0f64..0.05) {
        let (g, x0) = random_chain(seed, n);
        let target = stationary_distribution(&transition_matrix(&g, &x0).unwrap()).unwrap();
        let sys = stationary_system(&g, &target).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let noise = DVector::from_fn(sys.free_dim(), |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let u = sys.basis.transpose() * (&x0 - &sys.particular) + noise * scale;
        let x = &sys.particular + &sys.basis * u;
        prop_assume!(x.min() >= 1e-4);
        let pi = stationary_distribution(&transition_matrix(&g, &x).unwrap()).unwrap();
        prop_assert!((pi - target).amax() < 1e-8);
    }

    #[test]
    fn simplex_projection_idempotent_and_nonexpansive(
        a in prop::collection::vec(-2.0f64..2.0, 1..8),
        shift in prop::collection::vec(-1.0f64..1.0, 8),
        eps_frac in 0.0f64..0.9,
    ) {
        let eps = eps_frac / a.len() as f64;
        let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let pa = project_scaled_simplex(&a, eps).unwrap();
        let pb = project_scaled_simplex(&b, eps).unwrap();
        let again = project_scaled_simplex(&pa, eps).unwrap();
        prop_assert!(pa.iter().zip(&again).all(|(x, y)| (x - y).abs() <= 1e-12));
        let d = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!(d(&pa, &pb) <= d(&a, &b) + 1e-12);
        prop_assert!((pa.iter().sum::<f64>() - 1.0).abs() < 1e-12 && pa.iter().all(|&v| v >= eps - 1e-15));
    }

    #[test]
    fn dykstra_lands_in_the_set(seed in any::<u64>(), n in 3usize..7) {
        let (g, x0) = random_chain(seed, n);
        let target = stationary_distribution(&transition_matrix(&g, &x0).unwrap()).unwrap();
        let sys = stationary_system(&g, &target).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = DVector::from_fn(g.edge_count(), |_, _| rand::Rng::random_range(&mut rng, -0.5..1.5));
        let eps = 1e-4f64.min(0.5 * x0.min());
        let out = dykstra_project(&y, &sys, eps, 1e-12, 200_000);
        prop_assert!(sys.residual(&out.point) < 1e-8);
        prop_assert!(out.point.min() >= eps - 1e-10);
    }

    #[test]
    fn redistribution_is_stochastic(seed in any::<u64>(), mask in any::<u8>()) {
        let g = instances::complete(4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xk = DVector::from_fn(g.edge_count(), |_, _| rand::Rng::random_range(&mut rng, 0.05..1.0));
        let p = transition_matrix(&g, &xk).unwrap();
        let risky = [(0, 0.3), (4, 0.2), (6, 0.5), (9, 0.1), (11, 0.4)];
        let model = FailureModel::new(&g, &risky, Correlation::Independent).unwrap();
        let (r, _) = enumerate_realizations(&model).unwrap().swap_remove(mask as usize % 32);
        let q = redistribute(&g, &p, &r).unwrap();
        for i in 0..4 {
            prop_assert!((q.matrix().row(i).sum() - 1.0).abs() < 1e-12);
        }
        for e in r.failed_edges() {
            prop_assert_eq!(q[g.edge(e)], 0.0);
        }
    }

    #[test]
    fn reciprocal_failures_keep_reversibility(seed in any::<u64>()) {
        let g = instances::complete(4);
        let p = Problem::new(g.clone(), ConnectivityWeights::Unit, &ConstraintKind::Symmetric, 1e-4, Support::Fixed).unwrap();
        let x = p.random_start(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let risky = [(0, 0.4), (3, 0.4), (8, 0.2), (11, 0.2)];
        let model = FailureModel::new(&g, &risky, Correlation::Reciprocal).unwrap();
        for (r, _) in enumerate_realizations(&model).unwrap() {
            let q = realized_chain(&g, &x, &r).unwrap();
            let pi = stationary_distribution(&q).unwrap();
            prop_assert!(check_reversible(&q, &pi, 1e-10));
        }
    }
}

#[test]
fn spsa_iterates_stay_feasible() {
    let g = instances::grid(3, 3);
    let target = DVector::from_element(9, 1.0 / 9.0);
    for kind in [ConstraintKind::Simplex, ConstraintKind::Stationary(target.clone()), ConstraintKind::Symmetric] {
        let p = Problem::new(g.clone(), ConnectivityWeights::target(&target), &kind, 1e-4, Support::Fixed).unwrap();
        let cfg = SpsaConfig { max_iterations: 20_000, eval_interval: 1_000, restarts: 2, seed: 5, ..Default::default() };
        for t in run_spsa(&p, &cfg).unwrap() {
            assert!(t.max_residual <= 1e-8, "{kind:?}: {}", t.max_residual);
            assert!(t.checkpoints.iter().all(|c| c.residual <= 1e-8));
        }
    }
}

#[test]
fn polyak_ruppert_objective_trends_down_on_petersen() {
    let g = instances::directed_petersen();
    let p = Problem::new(g, ConnectivityWeights::Unit, &ConstraintKind::Simplex, 1e-4, Support::Fixed).unwrap();
    let mut drops = Vec::new();
    for seed in 0..5 {
        let cfg = SpsaConfig { max_iterations: 40_000, eval_interval: 5_000, restarts: 1, seed, ..Default::default() };
        let t = run_spsa(&p, &cfg).unwrap().remove(0);
        let first = t.checkpoints.first().unwrap().objective;
        let last = t.checkpoints.last().unwrap().objective;
        drops.push(first - last);
    }
    drops.sort_by(f64::total_cmp);
    assert!(drops[2] > 0.0, "{drops:?}");
}

#[test]
fn restart_streams_are_distinct() {
    use rand::Rng;
    let a: u64 = restart_rng(1, 0).random();
    let b: u64 = restart_rng(1, 1).random();
    assert_ne!(a, b);
}
