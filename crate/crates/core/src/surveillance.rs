//! Discrete-time intruder capture simulation.
//!
//! Intruder `m` appears at time `m * tau` on a random node and stays for the
//! `tau` integer times `m*tau .. m*tau + tau - 1`. A single agent moves one
//! step of the policy per time unit. The intruder is caught if the agent
//! occupies its node at one of those times.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{transition_matrix, Graph, StochasticMatrix, WeightVector};
use crate::random_support::{realized_chain, sample_edge_sets, FailureModel};
use crate::spsa::restart_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub intruders: usize,
    pub residence: usize,
    /// Intruder location distribution; uniform when absent.
    pub intruder_distribution: Option<Vec<f64>>,
    /// Agent start distribution; uniform when absent.
    pub start_distribution: Option<Vec<f64>>,
    pub replications: usize,
    pub seed: u64,
    /// Count the agent standing on the node at the appearance instant. When
    /// off, the window is the `tau` positions after the agent's next moves.
    pub capture_on_arrival: bool,
    /// Redraw the agent position for every intruder.
    pub reinitialize_agent: bool,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            intruders: 500,
            residence: 45,
            intruder_distribution: None,
            start_distribution: None,
            replications: 500,
            seed: 0,
            capture_on_arrival: true,
            reinitialize_agent: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaptureStats {
    /// Capture percentage of every replication.
    pub percentages: Vec<f64>,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    /// Sample standard deviation.
    pub sd: f64,
}

impl CaptureStats {
    pub fn from_percentages(percentages: Vec<f64>) -> Self {
        let n = percentages.len() as f64;
        let mean = percentages.iter().sum::<f64>() / n;
        let var = if percentages.len() > 1 {
            percentages.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let min = percentages.iter().copied().fold(f64::INFINITY, f64::min);
        let max = percentages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { percentages, min, mean, max, sd: var.sqrt() }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.sd / (self.percentages.len() as f64).sqrt()
    }
}

fn distribution(spec: &Option<Vec<f64>>, n: usize, what: &str) -> Result<WeightedIndex<f64>> {
    let w = spec.clone().unwrap_or_else(|| vec![1.0; n]);
    if w.len() != n {
        return Err(Error::Dimension { expected: n, got: w.len() });
    }
    WeightedIndex::new(&w).map_err(|e| Error::InvalidConfig(format!("{what} distribution: {e}")))
}

fn row_samplers(p: &StochasticMatrix) -> Result<Vec<WeightedIndex<f64>>> {
    (0..p.dim())
        .map(|i| {
            WeightedIndex::new(p.matrix().row(i).iter().copied())
                .map_err(|e| Error::InvalidConfig(format!("policy row {}: {e}", i + 1)))
        })
        .collect()
}

fn one_replication<R: Rng>(
    rows: &[WeightedIndex<f64>],
    intruder: &WeightedIndex<f64>,
    start: &WeightedIndex<f64>,
    spec: &SimulationSpec,
    rng: &mut R,
) -> f64 {
    let mut agent = start.sample(rng);
    let mut caught = 0usize;
    for _ in 0..spec.intruders {
        if spec.reinitialize_agent {
            agent = start.sample(rng);
        }
        let target = intruder.sample(rng);
        let mut hit = spec.capture_on_arrival && agent == target;
        for _ in 1..spec.residence {
            agent = rows[agent].sample(rng);
            hit |= agent == target;
        }
        // Step into the next window.
        agent = rows[agent].sample(rng);
        if !spec.capture_on_arrival {
            hit |= agent == target;
        }
        caught += hit as usize;
    }
    100.0 * caught as f64 / spec.intruders as f64
}

/// Runs `spec.replications` independent replications of the policy `P(x)`.
/// With a failure model, each replication draws one realization and uses
/// the redistributed policy on it.
pub fn simulate(g: &Graph, x: &WeightVector, spec: &SimulationSpec, failures: Option<&FailureModel>) -> Result<CaptureStats> {
    if spec.residence == 0 || spec.intruders == 0 || spec.replications == 0 {
        return Err(Error::InvalidConfig("residence, intruders and replications must be positive".into()));
    }
    let n = g.node_count();
    let intruder = distribution(&spec.intruder_distribution, n, "intruder")?;
    let start = distribution(&spec.start_distribution, n, "start")?;
    let base_rows = row_samplers(&transition_matrix(g, x)?)?;
    let percentages: Result<Vec<f64>> = (0..spec.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = restart_rng(spec.seed, rep);
            match failures {
                Some(model) if !model.is_empty() => {
                    let realization = sample_edge_sets(model, 1, &mut rng).pop().expect("one sample");
                    let rows = row_samplers(&realized_chain(g, x, &realization)?)?;
                    Ok(one_replication(&rows, &intruder, &start, spec, &mut rng))
                }
                _ => Ok(one_replication(&base_rows, &intruder, &start, spec, &mut rng)),
            }
        })
        .collect();
    Ok(CaptureStats::from_percentages(percentages?))
}
