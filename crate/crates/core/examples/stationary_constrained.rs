//! SPSA under a prescribed stationary distribution on a small grid.
//!
//! cargo run --release --example stationary_constrained

use chainopt::chain::{stationary_distribution, ConnectivityWeights};
use chainopt::graph::transition_matrix;
use chainopt::instances;
use chainopt::spsa::{best_restart, run_spsa, ConstraintKind, Preset, Problem, SpsaConfig, Support};
use nalgebra::DVector;

fn main() -> chainopt::Result<()> {
    let g = instances::grid(3, 3);
    // Visit the centre twice as often as the other nodes.
    let mut target = DVector::from_element(9, 1.0);
    target[4] = 2.0;
    target /= target.sum();
    let problem = Problem::new(g.clone(), ConnectivityWeights::target(&target), &ConstraintKind::Stationary(target.clone()), 1e-4, Support::Fixed)?;
    let cfg = SpsaConfig { max_iterations: 200_000, eval_interval: 5_000, restarts: 2, seed: 2, ..SpsaConfig::preset(Preset::SurveillanceFixed) };
    let traces = run_spsa(&problem, &cfg)?;
    let start = problem.objective(&problem.uniform_start()?)?;
    let best = &traces[best_restart(&traces).unwrap()];
    println!("objective: start {start:.4}, best {:.4} after {} iterations", best.final_objective, best.iterations);
    let pi = stationary_distribution(&transition_matrix(&g, &best.final_weights)?)?;
    println!("target pi   {:.4}", target.transpose());
    println!("achieved pi {:.4}", pi.transpose());
    println!("max constraint residual along the run: {:.2e}", best.max_residual);
    Ok(())
}
