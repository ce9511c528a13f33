//! Edge failures: redistribution of a policy onto a realization, exact
//! expectation by enumeration, sampling, and correlated failures.
//!
//! cargo run --release --example random_support

use chainopt::chain::{connectivity_objective, ConnectivityWeights};
use chainopt::graph::transition_matrix;
use chainopt::instances;
use chainopt::random_support::{enumerate_realizations, expected_objective_enumerate, redistribute, sample_average_objective, sample_edge_sets, Correlation, FailureModel};
use chainopt::spsa::restart_rng;

fn main() -> chainopt::Result<()> {
    let g = instances::complete(4);
    let x = g.uniform_weights();
    let c = ConnectivityWeights::Unit;
    let model = FailureModel::new(&g, &[(0, 0.3), (4, 0.2), (11, 0.5)], Correlation::Independent)?;

    let p = transition_matrix(&g, &x)?;
    let all_failed = enumerate_realizations(&model)?.into_iter().map(|(r, _)| r).find(|r| r.failed_edges().count() == 3).unwrap();
    println!("policy with edges {:?} failed:{:.3}", all_failed.failed_edges().collect::<Vec<_>>(), redistribute(&g, &p, &all_failed)?.matrix());

    let fixed = connectivity_objective(&p, &c)?;
    let exact = expected_objective_enumerate(&g, &x, &c, &model)?;
    println!("S with all edges {fixed:.4}, expected S {exact:.4}");
    let mut rng = restart_rng(1, 0);
    for l in [10, 100, 1000, 10000] {
        let sample = sample_edge_sets(&model, l, &mut rng);
        println!("  sample average over {l:>5}: {:.4}", sample_average_objective(&g, &x, &c, &sample)?);
    }

    for rho in [0.0, 0.5, 0.9] {
        let m = FailureModel::new(&g, &[(0, 0.3), (4, 0.3), (11, 0.3)], Correlation::Correlated { rho })?;
        let draws = sample_edge_sets(&m, 20_000, &mut rng);
        let all = draws.iter().filter(|r| r.failed_edges().count() == 3).count();
        println!("rho {rho}: all three edges down in {:.2}% of draws", 100.0 * all as f64 / draws.len() as f64);
    }
    Ok(())
}
