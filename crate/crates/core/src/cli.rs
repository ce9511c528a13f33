//! Command-line front end. The `chainopt` binary parses [`Cli`] and calls
//! [`run`].
//!
//! Every flag can also be set through an environment variable named
//! `CHAINOPT_<FLAG>`, e.g. `CHAINOPT_SEED=3`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::chain::{effective_resistance, ChainAnalytics, ConnectivityWeights};
use crate::descent::{projected_gradient, DescentOptions};
use crate::error::{Error, Result};
use crate::graph::{transition_matrix, Graph, WeightVector};
use crate::io::{self, GraphDocument, Manifest, RunConfig};
use crate::random_support::{expected_objective_enumerate, sample_edge_sets, Correlation, FailureModel, WeightedRealizations, ENUMERATION_CAP};
use crate::spsa::{self, restart_rng, ConstraintKind, Estimator, OptimizationTrace, Problem, Support, Termination};
use crate::surveillance::simulate;
use crate::verify;

#[derive(Debug, Parser)]
#[command(name = "chainopt", version, about = "Connectivity analysis and optimization of Markov chains on digraphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Options {
    /// Graph document (JSON, 1-based nodes).
    #[arg(long, global = true, env = "CHAINOPT_GRAPH")]
    pub graph: Option<PathBuf>,
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "CHAINOPT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Weight vector file; uniform weights when absent.
    #[arg(long, global = true, env = "CHAINOPT_WEIGHTS")]
    pub weights: Option<PathBuf>,
    #[arg(long, global = true, env = "CHAINOPT_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Mode::Fixed, env = "CHAINOPT_MODE")]
    pub mode: Mode,
    #[arg(long, global = true, value_enum, default_value_t = Constraint::Simplex, env = "CHAINOPT_CONSTRAINT")]
    pub constraint: Constraint,
    #[arg(long, global = true, env = "CHAINOPT_RESTARTS")]
    pub restarts: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "chainopt-out", env = "CHAINOPT_OUT")]
    pub out: PathBuf,
    /// Worker thread cap.
    #[arg(long, global = true, env = "CHAINOPT_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Print pi, K, S and R_tot of a graph and weights.
    Analyze,
    /// Optimize the weights and write the trace and the final weights.
    Optimize {
        #[arg(long, value_enum, default_value_t = Solver::Spsa, env = "CHAINOPT_SOLVER")]
        solver: Solver,
    },
    /// Project weights onto the feasible set of `--constraint`.
    Project,
    /// Run the surveillance simulation.
    Simulate,
    /// Run the oracle suite.
    Verify,
    /// Expected objective under random support by enumeration.
    Expected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Fixed,
    /// Sample-average objective over a fixed set of realizations.
    Random,
    /// Fresh realizations every iteration.
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Constraint {
    Simplex,
    Stationary,
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Spsa,
    /// Exact projected gradient with the SPSA gain sequence.
    Gradient,
    /// Deterministic projected gradient with line search.
    Descent,
}

/// Inputs shared by the graph-based subcommands.
struct Context {
    graph: Graph,
    failures: Option<FailureModel>,
    document: GraphDocument,
    /// True when the symmetric constraint forced the bidirectional subgraph.
    restricted: bool,
    config: RunConfig,
    weights: WeightVector,
    inputs: Vec<PathBuf>,
}

impl Context {
    fn load(opts: &Options) -> Result<Self> {
        let path = opts.graph.as_ref().ok_or_else(|| Error::InvalidConfig("--graph is required".into()))?;
        let mut document = io::load_document(path)?;
        let mut restricted = false;
        if opts.constraint == Constraint::Symmetric {
            let bi = document.bidirectional();
            if bi.edges.len() != document.edges.len() {
                eprintln!("note: symmetric constraint uses the bidirectional subgraph ({} of {} edges)", bi.edges.len(), document.edges.len());
                document = bi;
                restricted = true;
            }
        }
        let loaded = match document.into_graph() {
            Err(Error::NotStronglyConnected(m)) if restricted => {
                return Err(Error::Infeasible(format!("bidirectional subgraph is not strongly connected: {m}")))
            }
            other => other?,
        };
        let mut config = match &opts.config {
            Some(p) => io::load_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = opts.seed {
            config.spsa.seed = seed;
            config.simulation.seed = seed;
        }
        if let Some(r) = opts.restarts {
            config.spsa.restarts = r;
        }
        let weights = match &opts.weights {
            Some(p) => io::read_weights(p, &loaded.graph)?,
            None => loaded.graph.uniform_weights(),
        };
        let mut inputs = vec![path.clone()];
        inputs.extend(opts.config.iter().cloned());
        inputs.extend(opts.weights.iter().cloned());
        Ok(Self { graph: loaded.graph, failures: loaded.failures, document, restricted, config, weights, inputs })
    }

    fn objective_weights(&self) -> Result<ConnectivityWeights> {
        self.config.problem.weights_for(self.graph.node_count())
    }

    fn failures(&self) -> Result<&FailureModel> {
        self.failures
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("random support needs risky edges in the graph document".into()))
    }

    fn constraint_kind(&self, c: Constraint) -> Result<ConstraintKind> {
        Ok(match c {
            Constraint::Simplex => ConstraintKind::Simplex,
            Constraint::Stationary => ConstraintKind::Stationary(self.config.problem.target_for(self.graph.node_count())?),
            Constraint::Symmetric => ConstraintKind::Symmetric,
        })
    }

    /// Exact enumeration when small enough and not correlated, otherwise a
    /// sample of `count` realizations from the stream `stream`.
    fn measure(&self, count: usize, stream: usize) -> Result<WeightedRealizations> {
        let model = self.failures()?;
        if enumerable(model) {
            return WeightedRealizations::enumerate(model);
        }
        let mut rng = restart_rng(self.config.spsa.seed, stream);
        Ok(WeightedRealizations::sample(sample_edge_sets(model, count, &mut rng)))
    }

    fn support(&self, mode: Mode) -> Result<Support> {
        let p = &self.config.problem;
        Ok(match mode {
            Mode::Fixed => Support::Fixed,
            Mode::Random => {
                let model = self.failures()?;
                let mut rng = restart_rng(self.config.spsa.seed, usize::MAX);
                Support::SampleAverage(WeightedRealizations::sample(sample_edge_sets(model, p.saa_samples, &mut rng)))
            }
            Mode::Online => Support::Online {
                model: self.failures()?.clone(),
                per_iteration: p.samples,
                checkpoint: self.measure(p.checkpoint_samples, usize::MAX - 1)?,
            },
        })
    }

    fn manifest(&self, command: &str) -> Result<Manifest> {
        let inputs: Vec<&Path> = self.inputs.iter().map(PathBuf::as_path).collect();
        let config = serde_json::to_value(&self.config).map_err(|e| Error::Parse(e.to_string()))?;
        Manifest::new(command, Some(self.config.spsa.seed), config, &inputs)
    }
}

/// Independent or reciprocal models with few enough units to enumerate.
fn enumerable(model: &FailureModel) -> bool {
    !matches!(model.correlation(), Correlation::Correlated { .. }) && model.unit_count() <= ENUMERATION_CAP.min(12)
}

fn write_out(dir: &Path, manifest: &mut Manifest, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    manifest.outputs.push(name.into());
    Ok(())
}

fn fmt_vec(v: &nalgebra::DVector<f64>) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.opts.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    fs::create_dir_all(&cli.opts.out)?;
    match &cli.command {
        Command::Analyze => analyze(&cli.opts),
        Command::Optimize { solver } => optimize(&cli.opts, *solver),
        Command::Project => project(&cli.opts),
        Command::Simulate => simulate_cmd(&cli.opts),
        Command::Verify => verify_cmd(&cli.opts),
        Command::Expected => expected(&cli.opts),
    }
}

fn analyze(opts: &Options) -> Result<()> {
    let ctx = Context::load(opts)?;
    let p = transition_matrix(&ctx.graph, &ctx.weights)?;
    let a = ChainAnalytics::new(&p)?;
    let unit = crate::chain::objective_from(&a, &ConnectivityWeights::Unit)?;
    let mut report = String::new();
    let _ = writeln!(report, "nodes = {}", ctx.graph.node_count());
    let _ = writeln!(report, "edges = {}", ctx.graph.edge_count());
    let _ = writeln!(report, "pi = {}", fmt_vec(&a.pi));
    let _ = writeln!(report, "K = {:?}", a.kemeny());
    let _ = writeln!(report, "S = {unit:?}");
    if ctx.config.problem.objective != io::ObjectiveKind::Unit {
        let s = crate::chain::objective_from(&a, &ctx.objective_weights()?)?;
        let _ = writeln!(report, "S_config = {s:?}");
    }
    match effective_resistance(&ctx.graph, &ctx.weights) {
        Ok((_, total)) => {
            let _ = writeln!(report, "R_tot = {total:?}");
        }
        Err(Error::NonSymmetric(..)) => {
            let _ = writeln!(report, "R_tot = n/a (weights not symmetric)");
        }
        Err(e) => return Err(e),
    }
    print!("{report}");
    let mut m = ctx.manifest("analyze")?;
    write_out(&opts.out, &mut m, "analysis.txt", &report)?;
    m.write(&opts.out)
}

fn optimize(opts: &Options, solver: Solver) -> Result<()> {
    let ctx = Context::load(opts)?;
    let kind = ctx.constraint_kind(opts.constraint)?;
    let support = ctx.support(opts.mode)?;
    let mut cfg = ctx.config.spsa.clone();
    if solver == Solver::Gradient {
        cfg.estimator = Estimator::Gradient;
    }
    let problem = Problem::new(ctx.graph.clone(), ctx.objective_weights()?, &kind, cfg.epsilon, support)?;
    let traces = match solver {
        Solver::Spsa | Solver::Gradient => spsa::run_spsa(&problem, &cfg)?,
        Solver::Descent => descent_traces(&problem, &cfg)?,
    };
    let best = spsa::best_restart(&traces).ok_or_else(|| Error::InvalidConfig("restarts must be positive".into()))?;
    for t in &traces {
        println!(
            "restart {}: objective = {:?}, iterations = {}, termination = {:?}",
            t.restart, t.final_objective, t.iterations, t.termination
        );
    }
    let b = &traces[best];
    println!("best restart = {}, objective = {:?}", b.restart, b.final_objective);

    let mut m = ctx.manifest("optimize")?;
    write_out(&opts.out, &mut m, "trace.csv", &io::format_trace(&traces))?;
    write_out(&opts.out, &mut m, "weights.csv", &io::format_weights(&ctx.graph, &b.final_weights))?;
    if ctx.restricted {
        let doc = serde_json::to_string_pretty(&ctx.document).map_err(|e| Error::Parse(e.to_string()))?;
        write_out(&opts.out, &mut m, "graph.json", &(doc + "\n"))?;
    }
    let summary = json!({
        "best_restart": b.restart,
        "objective": b.final_objective,
        "restarts": traces.iter().map(|t| json!({
            "restart": t.restart,
            "objective": t.final_objective,
            "iterations": t.iterations,
            "termination": t.termination,
            "unconverged_projections": t.unconverged_projections,
            "max_residual": t.max_residual,
        })).collect::<Vec<_>>(),
    });
    write_out(&opts.out, &mut m, "summary.json", &format!("{summary:#}\n"))?;
    m.write(&opts.out)
}

/// Projected-gradient runs presented as traces with a single checkpoint.
fn descent_traces(problem: &Problem, cfg: &spsa::SpsaConfig) -> Result<Vec<OptimizationTrace>> {
    let start_clock = std::time::Instant::now();
    (0..cfg.restarts.max(1))
        .map(|r| {
            let start = if r == 0 { problem.uniform_start()? } else { problem.random_start(&mut restart_rng(cfg.seed, r))? };
            let res = projected_gradient(problem, &start, &DescentOptions::default())?;
            Ok(OptimizationTrace {
                restart: r,
                initial: start,
                checkpoints: vec![spsa::Checkpoint {
                    iteration: res.iterations,
                    objective: res.objective,
                    proxy_norm: 0.0,
                    residual: problem.region.residual(&problem.graph, &res.x),
                    elapsed_secs: start_clock.elapsed().as_secs_f64(),
                }],
                final_objective: res.objective,
                iterations: res.iterations,
                termination: if res.converged { Termination::Converged } else { Termination::MaxIterations },
                unconverged_projections: 0,
                max_residual: problem.region.residual(&problem.graph, &res.x),
                final_weights: res.x,
            })
        })
        .collect()
}

fn project(opts: &Options) -> Result<()> {
    let ctx = Context::load(opts)?;
    let kind = ctx.constraint_kind(opts.constraint)?;
    let problem = Problem::new(ctx.graph.clone(), ConnectivityWeights::Unit, &kind, ctx.config.spsa.epsilon, Support::Fixed)?;
    let out = problem.region.project(&ctx.graph, &ctx.weights)?;
    let residual = problem.region.residual(&ctx.graph, &out.point);
    println!("distance = {:?}", (&out.point - &ctx.weights).norm());
    println!("residual = {residual:?}");
    println!("converged = {}", out.converged);
    let mut m = ctx.manifest("project")?;
    write_out(&opts.out, &mut m, "projected.csv", &io::format_weights(&ctx.graph, &out.point))?;
    m.write(&opts.out)
}

fn simulate_cmd(opts: &Options) -> Result<()> {
    let ctx = Context::load(opts)?;
    let c = ctx.objective_weights()?;
    let (failures, objective) = match opts.mode {
        Mode::Fixed => (None, crate::chain::connectivity_objective(&transition_matrix(&ctx.graph, &ctx.weights)?, &c)?),
        Mode::Random | Mode::Online => {
            let measure = ctx.measure(ctx.config.problem.checkpoint_samples, usize::MAX - 1)?;
            (Some(ctx.failures()?), measure.objective(&ctx.graph, &ctx.weights, &c)?)
        }
    };
    let stats = simulate(&ctx.graph, &ctx.weights, &ctx.config.simulation, failures)?;
    let table = format!(
        "min,mean,max,sd,objective\n{:.2},{:.2},{:.2},{:.2},{:.4}\n",
        stats.min, stats.mean, stats.max, stats.sd, objective
    );
    print!("{table}");
    let mut reps = String::from("replication,captured_percent\n");
    for (i, p) in stats.percentages.iter().enumerate() {
        let _ = writeln!(reps, "{i},{p}");
    }
    let mut m = ctx.manifest("simulate")?;
    write_out(&opts.out, &mut m, "capture.csv", &table)?;
    write_out(&opts.out, &mut m, "replications.csv", &reps)?;
    m.write(&opts.out)
}

fn verify_cmd(opts: &Options) -> Result<()> {
    let seed = opts.seed.unwrap_or(7);
    let checks = verify::run_suite(seed)?;
    let mut report = String::new();
    for c in &checks {
        let _ = writeln!(report, "{c}");
    }
    print!("{report}");
    let mut m = Manifest::new("verify", Some(seed), json!({}), &[])?;
    write_out(&opts.out, &mut m, "verify.txt", &report)?;
    m.write(&opts.out)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Error::Evaluation(format!("{failed} oracle checks failed")));
    }
    Ok(())
}

fn expected(opts: &Options) -> Result<()> {
    let ctx = Context::load(opts)?;
    let c = ctx.objective_weights()?;
    let value = match &ctx.failures {
        Some(model) => expected_objective_enumerate(&ctx.graph, &ctx.weights, &c, model)?,
        None => crate::chain::connectivity_objective(&transition_matrix(&ctx.graph, &ctx.weights)?, &c)?,
    };
    let report = format!("expected_objective = {value:?}\n");
    print!("{report}");
    let mut m = ctx.manifest("expected")?;
    write_out(&opts.out, &mut m, "expected.txt", &report)?;
    m.write(&opts.out)
}
