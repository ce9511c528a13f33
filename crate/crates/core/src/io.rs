//! File formats: graph documents (JSON), run configuration (TOML), weight
//! vectors and traces (delimited text), and run manifests (JSON).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain::ConnectivityWeights;
use crate::error::{Error, Result};
use crate::graph::{Graph, WeightVector};
use crate::random_support::{Correlation, FailureModel};
use crate::spsa::{OptimizationTrace, Preset, SpsaConfig};
use crate::surveillance::SimulationSpec;

/// On-disk graph. Node indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub nodes: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub risky_edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub correlation: Option<Correlation>,
}

/// A parsed graph with its failure model, if it has risky edges.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub failures: Option<FailureModel>,
}

fn zero_based(i: usize, j: usize, n: usize) -> Result<(usize, usize)> {
    if i == 0 || j == 0 || i > n || j > n {
        return Err(Error::InvalidNode(i, j, n));
    }
    Ok((i - 1, j - 1))
}

impl GraphDocument {
    pub fn into_graph(&self) -> Result<LoadedGraph> {
        let n = self.nodes;
        let edges = self.edges.iter().map(|&[i, j]| zero_based(i, j, n)).collect::<Result<Vec<_>>>()?;
        let risky = self.risky_edges.iter().map(|&(i, j, _)| zero_based(i, j, n)).collect::<Result<Vec<_>>>()?;
        let graph = Graph::new(n, &edges, &risky)?;
        let failures = if risky.is_empty() {
            None
        } else {
            let with_q = risky
                .iter()
                .zip(&self.risky_edges)
                .map(|(&(i, j), &(_, _, q))| graph.edge_id(i, j).map(|e| (e, q)).ok_or(Error::UnknownEdge(i + 1, j + 1)))
                .collect::<Result<Vec<_>>>()?;
            Some(FailureModel::new(&graph, &with_q, self.correlation.unwrap_or(Correlation::Independent))?)
        };
        Ok(LoadedGraph { graph, failures })
    }

    /// Restriction to edges whose reverse is also present.
    pub fn bidirectional(&self) -> Self {
        let has = |i: usize, j: usize| self.edges.iter().any(|&[a, b]| a == i && b == j);
        Self {
            nodes: self.nodes,
            edges: self.edges.iter().copied().filter(|&[i, j]| has(j, i)).collect(),
            risky_edges: self.risky_edges.iter().copied().filter(|&(i, j, _)| has(j, i)).collect(),
            correlation: self.correlation,
        }
    }

    pub fn from_graph(g: &Graph, q: f64, correlation: Option<Correlation>) -> Self {
        Self {
            nodes: g.node_count(),
            edges: g.edges().iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
            risky_edges: g.risky_edges().iter().map(|&e| (g.edge(e).0 + 1, g.edge(e).1 + 1, q)).collect(),
            correlation,
        }
    }
}

pub fn parse_graph(text: &str) -> Result<LoadedGraph> {
    parse_document(text)?.into_graph()
}

pub fn parse_document(text: &str) -> Result<GraphDocument> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn load_document(path: &Path) -> Result<GraphDocument> {
    parse_document(&fs::read_to_string(path)?)
}

pub fn load_graph(path: &Path) -> Result<LoadedGraph> {
    parse_graph(&fs::read_to_string(path)?)
}

/// SHA-256 of the node count and sorted edge list.
pub fn graph_hash(g: &Graph) -> String {
    let mut canon = format!("{}", g.node_count());
    for &(i, j) in g.edges() {
        let _ = write!(canon, ";{},{}", i + 1, j + 1);
    }
    hex::encode(Sha256::digest(canon.as_bytes()))
}

pub fn file_hash(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// `# graph sha256:<hash>` header, then `tail,head,weight` rows in edge order.
pub fn format_weights(g: &Graph, x: &WeightVector) -> String {
    let mut out = format!("# graph sha256:{}\ntail,head,weight\n", graph_hash(g));
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", i + 1, j + 1, x[e]);
    }
    out
}

pub fn parse_weights(g: &Graph, text: &str) -> Result<WeightVector> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let hash = header
        .strip_prefix("# graph sha256:")
        .ok_or_else(|| Error::Parse("weights file lacks the graph hash header".into()))?;
    if hash.trim() != graph_hash(g) {
        return Err(Error::Parse("weights were written for a different graph".into()));
    }
    let mut x = DVector::from_element(g.edge_count(), f64::NAN);
    for line in lines.filter(|l| !l.trim().is_empty() && !l.starts_with("tail")) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::Parse(format!("bad weights row `{line}`"));
        if f.len() != 3 {
            return Err(bad());
        }
        let i: usize = f[0].parse().map_err(|_| bad())?;
        let j: usize = f[1].parse().map_err(|_| bad())?;
        let (a, b) = zero_based(i, j, g.node_count())?;
        let e = g.edge_id(a, b).ok_or(Error::UnknownEdge(i, j))?;
        x[e] = f[2].parse().map_err(|_| bad())?;
    }
    if let Some(e) = x.iter().position(|v| v.is_nan()) {
        let (i, j) = g.edge(e);
        return Err(Error::Parse(format!("no weight for edge ({}, {})", i + 1, j + 1)));
    }
    Ok(x)
}

pub fn write_weights(path: &Path, g: &Graph, x: &WeightVector) -> Result<()> {
    Ok(fs::write(path, format_weights(g, x))?)
}

pub fn read_weights(path: &Path, g: &Graph) -> Result<WeightVector> {
    parse_weights(g, &fs::read_to_string(path)?)
}

/// Objective selection in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    #[default]
    Unit,
    Kemeny,
    /// `C = target target^T`.
    Target,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub objective: ObjectiveKind,
    /// Target stationary distribution; uniform when absent.
    pub target: Option<Vec<f64>>,
    pub explicit: Option<Vec<Vec<f64>>>,
    /// Realizations per iteration in online mode.
    pub samples: usize,
    /// Size of the fixed realization set in random mode.
    pub saa_samples: usize,
    /// Sample size for online checkpoints when enumeration is not possible.
    pub checkpoint_samples: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveKind::Unit,
            target: None,
            explicit: None,
            samples: 1,
            saa_samples: 1_000,
            checkpoint_samples: 10_000,
        }
    }
}

impl ProblemConfig {
    pub fn target_for(&self, n: usize) -> Result<DVector<f64>> {
        match &self.target {
            Some(t) if t.len() != n => Err(Error::Dimension { expected: n, got: t.len() }),
            Some(t) => Ok(DVector::from_vec(t.clone())),
            None => Ok(DVector::from_element(n, 1.0 / n as f64)),
        }
    }

    pub fn weights_for(&self, n: usize) -> Result<ConnectivityWeights> {
        match self.objective {
            ObjectiveKind::Unit => Ok(ConnectivityWeights::Unit),
            ObjectiveKind::Kemeny => Ok(ConnectivityWeights::Kemeny),
            ObjectiveKind::Target => Ok(ConnectivityWeights::target(&self.target_for(n)?)),
            ObjectiveKind::Explicit => {
                let rows = self.explicit.as_ref().ok_or_else(|| Error::InvalidConfig("explicit objective needs `explicit`".into()))?;
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Dimension { expected: n, got: rows.len() });
                }
                ConnectivityWeights::explicit(nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

/// Everything a run reads from `--config`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub spsa: SpsaConfig,
    pub problem: ProblemConfig,
    pub simulation: SimulationSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<Preset>,
    #[serde(default)]
    spsa: toml::Table,
    #[serde(default)]
    problem: ProblemConfig,
    #[serde(default)]
    simulation: SimulationSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { spsa: SpsaConfig::default(), problem: ProblemConfig::default(), simulation: SimulationSpec::default() }
    }
}

/// Parses a TOML config. `preset` picks the base hyperparameters; keys in
/// `[spsa]` override them.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let base = SpsaConfig::preset(raw.preset.unwrap_or(Preset::Scalability));
    let mut table = toml::Table::try_from(&base).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    for (k, v) in raw.spsa {
        table.insert(k, v);
    }
    let spsa: SpsaConfig = table.try_into().map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
    Ok(RunConfig { spsa, problem: raw.problem, simulation: raw.simulation })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&fs::read_to_string(path)?)
}

/// Header of [`format_trace`].
pub const TRACE_HEADER: &str = "restart,iteration,objective,proxy_norm,residual,wall_clock_secs";

/// One row per checkpoint of every restart.
pub fn format_trace(traces: &[OptimizationTrace]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for t in traces {
        for c in &t.checkpoints {
            let _ = writeln!(
                out,
                "{},{},{},{},{:e},{:.6}",
                t.restart, c.iteration, c.objective, c.proxy_norm, c.residual, c.elapsed_secs
            );
        }
    }
    out
}

/// Provenance of a CLI run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// `(path, sha256)` of every input file.
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value, inputs: &[&Path]) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), file_hash(p)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config,
            inputs,
            outputs: Vec::new(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(fs::write(dir.join("manifest.json"), text + "\n")?)
    }
}
