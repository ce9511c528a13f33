//! Non-reversible vs reversible surveillance policies on the 5x5 grid.
//!
//! Both policies target the uniform stationary distribution with
//! `C = pi pi^T`. The non-reversible one comes from SPSA under the
//! stationary constraint, the reversible one from projected gradient under
//! the symmetric constraint. Each policy is then simulated.
//!
//! cargo run --release --example surveillance -- [fixed|random] [max_iterations] [residence]

use chainopt::chain::ConnectivityWeights;
use chainopt::descent::{projected_gradient, DescentOptions};
use chainopt::io::load_graph;
use chainopt::random_support::WeightedRealizations;
use chainopt::spsa::{best_restart, run_spsa, ConstraintKind, Preset, Problem, SpsaConfig, Support};
use chainopt::surveillance::{simulate, SimulationSpec};
use nalgebra::DVector;

fn main() -> chainopt::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let random = args.first().is_some_and(|a| a == "random");
    let max_iterations = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(300_000);
    let residence = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(10);

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/grid5x5.json");
    let loaded = load_graph(path.as_ref())?;
    let g = loaded.graph;
    let n = g.node_count();
    let target = DVector::from_element(n, 1.0 / n as f64);
    let c = ConnectivityWeights::target(&target);
    // Random support: one sampled realization per iteration, exact
    // expectation at checkpoints and for the reversible baseline.
    let (support, baseline_support) = match (&loaded.failures, random) {
        (Some(model), true) => {
            let exact = WeightedRealizations::enumerate(model)?;
            (Support::Online { model: model.clone(), per_iteration: 1, checkpoint: exact.clone() }, Support::SampleAverage(exact))
        }
        _ => (Support::Fixed, Support::Fixed),
    };

    let preset = if random { Preset::SurveillanceRandom } else { Preset::SurveillanceFixed };
    let cfg = SpsaConfig { max_iterations, eval_interval: 10_000, restarts: 4, seed: 3, ..SpsaConfig::preset(preset) };
    let nonrev = Problem::new(g.clone(), c.clone(), &ConstraintKind::Stationary(target.clone()), cfg.epsilon, support)?;
    let traces = run_spsa(&nonrev, &cfg)?;
    let best = &traces[best_restart(&traces).unwrap()];
    println!("non-reversible objective {:.4} ({} iterations, {:?})", best.final_objective, best.iterations, best.termination);

    let rev = Problem::new(g.clone(), c, &ConstraintKind::Symmetric, cfg.epsilon, baseline_support)?;
    let baseline = projected_gradient(&rev, &rev.uniform_start()?, &DescentOptions::default())?;
    println!("reversible objective     {:.4} (converged {})", baseline.objective, baseline.converged);

    let spec = SimulationSpec { residence, replications: 200, seed: 11, ..Default::default() };
    let failures = if random { loaded.failures.as_ref() } else { None };
    let a = simulate(&g, &best.final_weights, &spec, failures)?;
    let b = simulate(&g, &baseline.x, &spec, failures)?;
    println!("policy          min     mean    max     sd");
    for (name, s) in [("non-reversible", &a), ("reversible", &b)] {
        println!("{name:<15} {:<7.2} {:<7.2} {:<7.2} {:.2}", s.min, s.mean, s.max, s.sd);
    }
    let pooled = (a.std_error().powi(2) + b.std_error().powi(2)).sqrt();
    println!("difference {:.2} = {:.1} pooled standard errors", a.mean - b.mean, (a.mean - b.mean) / pooled);
    Ok(())
}
