//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. A criterion passes only if its check holds and it ran
//! within its time limit.
//!
//! cargo test --release --test acceptance
//! cargo test --release --test acceptance -- --long   # adds the 68-node run

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use chainopt::chain::ConnectivityWeights;
use chainopt::descent::{projected_gradient, DescentOptions};
use chainopt::graph::Graph;
use chainopt::instances;
use chainopt::io::load_graph;
use chainopt::random_support::{FailureModel, WeightedRealizations};
use chainopt::spsa::{best_restart, run_spsa, ConstraintKind, Preset, Problem, SpsaConfig, Support};
use chainopt::surveillance::{simulate, SimulationSpec};
use chainopt::verify::{self, Check};
use nalgebra::DVector;

type Outcome = chainopt::Result<(bool, String)>;

fn from_check(c: chainopt::Result<Check>) -> Outcome {
    c.map(|c| (c.passed, c.detail))
}

fn run(id: &str, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (ok, detail) = match result {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = elapsed <= limit;
    let passed = ok && in_time;
    println!(
        "criterion {id:>2} {name}: {} ({detail}; {:.1}s of {}s{})",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", over time" }
    );
    passed
}

fn petersen() -> Outcome {
    let g = instances::directed_petersen();
    let cfg = SpsaConfig {
        restarts: 10,
        max_iterations: 400_000,
        eval_interval: 10_000,
        seed: 1,
        ..SpsaConfig::preset(Preset::Scalability)
    };
    let full = Problem::new(g.clone(), ConnectivityWeights::Unit, &ConstraintKind::Simplex, cfg.epsilon, Support::Fixed)?;
    let traces = run_spsa(&full, &cfg)?;
    let best = traces[best_restart(&traces).unwrap()].final_objective;

    let bi = g.bidirectional_subgraph()?;
    let sym = Problem::new(bi, ConnectivityWeights::Unit, &ConstraintKind::Symmetric, cfg.epsilon, Support::Fixed)?;
    let sym_traces = run_spsa(&sym, &cfg)?;
    let sym_best = sym_traces[best_restart(&sym_traces).unwrap()].final_objective;
    let exact = projected_gradient(&sym, &sym.uniform_start()?, &DescentOptions::default())?.objective;
    Ok((
        best <= 472.5 && sym_best <= 1544.3,
        format!(
            "non-reversible best {best:.3} (<= 472.5), symmetric best {sym_best:.3} (<= 1544.3); \
             reconstructed instance, its exact reversible optimum is {exact:.3}"
        ),
    ))
}

struct Comparison {
    ok: bool,
    detail: String,
}

fn surveillance_pair(g: &Graph, failures: Option<&FailureModel>, residence: usize) -> chainopt::Result<Comparison> {
    let n = g.node_count();
    let target = DVector::from_element(n, 1.0 / n as f64);
    let c = ConnectivityWeights::target(&target);
    let (support, baseline_support, preset) = match failures {
        Some(model) => {
            let exact = WeightedRealizations::enumerate(model)?;
            (
                Support::Online { model: model.clone(), per_iteration: 1, checkpoint: exact.clone() },
                Support::SampleAverage(exact),
                Preset::SurveillanceRandom,
            )
        }
        None => (Support::Fixed, Support::Fixed, Preset::SurveillanceFixed),
    };
    let cfg = SpsaConfig { max_iterations: 300_000, eval_interval: 10_000, restarts: 2, seed: 3, ..SpsaConfig::preset(preset) };
    let nonrev = Problem::new(g.clone(), c.clone(), &ConstraintKind::Stationary(target), cfg.epsilon, support)?;
    let traces = run_spsa(&nonrev, &cfg)?;
    let best = &traces[best_restart(&traces).unwrap()];
    let rev = Problem::new(g.clone(), c, &ConstraintKind::Symmetric, cfg.epsilon, baseline_support)?;
    let baseline = projected_gradient(&rev, &rev.uniform_start()?, &DescentOptions::default())?;

    let spec = SimulationSpec { residence, replications: 200, seed: 11, ..Default::default() };
    let a = simulate(g, &best.final_weights, &spec, failures)?;
    let b = simulate(g, &baseline.x, &spec, failures)?;
    let pooled = (a.std_error().powi(2) + b.std_error().powi(2)).sqrt();
    let margin = (a.mean - b.mean) / pooled;
    let ok = margin > 3.0 && best.final_objective < baseline.objective;
    Ok(Comparison {
        ok,
        detail: format!(
            "capture {:.2}% vs {:.2}% ({margin:.1} pooled SE), objective {:.3} vs {:.3}",
            a.mean, b.mean, best.final_objective, baseline.objective
        ),
    })
}

fn surveillance_ordering() -> Outcome {
    let loaded = load_graph(concat!(env!("CARGO_MANIFEST_DIR"), "/data/grid5x5.json").as_ref())?;
    let fixed = surveillance_pair(&loaded.graph, None, 10)?;
    let random = surveillance_pair(&loaded.graph, loaded.failures.as_ref(), 10)?;
    Ok((fixed.ok && random.ok, format!("fixed: {}; random: {}", fixed.detail, random.detail)))
}

/// Full-size run on the 68-node reconstruction. Reported, not gated.
fn grid68() -> Outcome {
    let loaded = load_graph(concat!(env!("CARGO_MANIFEST_DIR"), "/data/grid68.json").as_ref())?;
    let g = &loaded.graph;
    let n = g.node_count();
    let target = DVector::from_element(n, 1.0 / n as f64);
    let c = ConnectivityWeights::target(&target);
    let cfg = SpsaConfig { eval_interval: 10_000, seed: 1, ..SpsaConfig::preset(Preset::SurveillanceFixed) };
    let nonrev = Problem::new(g.clone(), c.clone(), &ConstraintKind::Stationary(target), cfg.epsilon, Support::Fixed)?;
    let traces = run_spsa(&nonrev, &cfg)?;
    let best = &traces[best_restart(&traces).unwrap()];
    let rev = Problem::new(g.clone(), c, &ConstraintKind::Symmetric, cfg.epsilon, Support::Fixed)?;
    let baseline = projected_gradient(&rev, &rev.uniform_start()?, &DescentOptions::default())?;
    let spec = SimulationSpec { seed: 11, ..Default::default() };
    let a = simulate(g, &best.final_weights, &spec, None)?;
    let b = simulate(g, &baseline.x, &spec, None)?;
    Ok((
        best.final_objective <= 60.0,
        format!(
            "non-reversible objective {:.3} (target <= 60) after {} iterations, reversible {:.3}; capture {:.2}% vs {:.2}%",
            best.final_objective, best.iterations, baseline.objective, a.mean, b.mean
        ),
    ))
}

/// Strips the wall-clock column of a trace.
fn deterministic_columns(trace: &str) -> String {
    trace.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("run.toml");
    fs::write(&config, "[spsa]\nmax_iterations = 60000\neval_interval = 5000\nrestarts = 2\n")?;
    let graph = concat!(env!("CARGO_MANIFEST_DIR"), "/data/petersen.json");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_chainopt"))
            .args(["optimize", "--graph", graph, "--seed", "42", "--out"])
            .arg(&out)
            .arg("--config")
            .arg(&config)
            .output()?;
        if !status.status.success() {
            return Ok((false, format!("optimize failed: {}", String::from_utf8_lossy(&status.stderr))));
        }
        outputs.push((fs::read_to_string(out.join("trace.csv"))?, fs::read(out.join("weights.csv"))?));
    }
    let traces_equal = deterministic_columns(&outputs[0].0) == deterministic_columns(&outputs[1].0);
    let weights_equal = outputs[0].1 == outputs[1].1;
    let rows = outputs[0].0.lines().count() - 1;
    Ok((traces_equal && weights_equal, format!("{rows} trace rows identical: {traces_equal}, weights identical: {weights_equal}")))
}

fn main() {
    let long = std::env::args().any(|a| a == "--long" || a == "--ignored" || a == "--include-ignored")
        || std::env::var_os("CHAINOPT_LONG").is_some();
    let secs = Duration::from_secs;
    let corpus = verify::random_corpus(200, 2024);
    let results = [
        run("1", "mfpt oracle equivalence", secs(10), || from_check(verify::mfpt_equivalence(&corpus, 1e-8))),
        run("2", "kemeny identity", secs(5), || from_check(verify::kemeny_identity(&corpus, 1e-9))),
        run("3", "hamiltonian tours", secs(5), || from_check(verify::hamiltonian_tours(12, 1e-9))),
        run("4", "reversible bounds", secs(5), || from_check(verify::reversible_bounds(1e-6))),
        run("5", "derivative correctness", secs(30), || from_check(verify::derivative_agreement(100, 2024, 1e-6, 1e-5))),
        run("6", "spsa bias law", secs(10), || from_check(verify::bias_law(&[1e-2, 5e-3, 2.5e-3], (3.5, 4.5), 1e-12).map(|r| r.0))),
        run("7", "projection correctness", secs(10), || from_check(verify::projection_agreement(50, 2024, 1e-6, 1e-12))),
        run("8", "petersen optimization", secs(20 * 60), petersen),
        run("9", "random support consistency", secs(5 * 60), || {
            from_check(verify::random_support_consistency(100_000, 1_000, 2024, 0.01, 1e-12))
        }),
        run("10", "stationary constraint caveat", secs(60), || from_check(verify::stationary_caveat(1e-3))),
        run("11", "surveillance ordering", secs(15 * 60), surveillance_ordering),
        run("12", "infeasibility regression", secs(60), || from_check(verify::infeasibility_regression(10_000, 2024))),
        run("13", "determinism", secs(60), determinism),
    ];
    if long {
        // Not gated: printed for the record only.
        run("11L", "68-node surveillance (not gated)", secs(24 * 3600), grid68);
    }
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
