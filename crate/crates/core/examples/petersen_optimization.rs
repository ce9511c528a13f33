//! Price of reversibility on the directed Petersen reconstruction.
//!
//! Finds a Hamiltonian tour, runs SPSA on the full digraph, and compares with
//! the optimal reversible chain on the bidirectional subgraph.
//!
//! cargo run --release --example petersen_optimization -- [restarts] [max_iterations]

use chainopt::chain::ConnectivityWeights;
use chainopt::descent::{projected_gradient, DescentOptions};
use chainopt::instances::directed_petersen;
use chainopt::oracles::{cycle_chain, hamiltonian_cycle_search, hamiltonian_tour_value, unit_objective};
use chainopt::spsa::{best_restart, run_spsa, ConstraintKind, Problem, SpsaConfig, Support};

fn main() -> chainopt::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let restarts = args.first().copied().unwrap_or(10);
    let max_iterations = args.get(1).copied().unwrap_or(400_000);

    let g = directed_petersen();
    let tour = hamiltonian_cycle_search(&g)?.expect("reconstruction is hamiltonian");
    let tour_value = unit_objective(&cycle_chain(10, &tour))?;
    println!("tour {:?}: S = {tour_value} (closed form {})", tour.iter().map(|v| v + 1).collect::<Vec<_>>(), hamiltonian_tour_value(10));

    let problem = Problem::new(g.clone(), ConnectivityWeights::Unit, &ConstraintKind::Simplex, 1e-4, Support::Fixed)?;
    let cfg = SpsaConfig { restarts, max_iterations, eval_interval: 10_000, seed: 1, ..Default::default() };
    let traces = run_spsa(&problem, &cfg)?;
    for t in &traces {
        println!("restart {}: S = {:.3} after {} iterations ({:?})", t.restart, t.final_objective, t.iterations, t.termination);
    }
    let best = &traces[best_restart(&traces).unwrap()];
    println!("best non-reversible S = {:.3}", best.final_objective);

    let bi = g.bidirectional_subgraph()?;
    let sym = Problem::new(bi, ConnectivityWeights::Unit, &ConstraintKind::Symmetric, 1e-4, Support::Fixed)?;
    let rev = projected_gradient(&sym, &sym.uniform_start()?, &DescentOptions::default())?;
    println!("optimal reversible S = {:.3} ({} iterations)", rev.objective, rev.iterations);
    Ok(())
}
