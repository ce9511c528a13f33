//! Random edge failures: realizations, redistribution of probability mass,
//! exact expectations by enumeration, sampling, and sample-average
//! objectives.
//!
//! Removing an edge and renormalizing the row is the same as zeroing its
//! weight before building `P(x)`, so `S(Q(P(x), E), C)` is evaluated as
//! `S(P(x * mask), C)` and all fixed-support derivative code applies.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chain::{connectivity_objective, ChainAnalytics, ConnectivityWeights};
use crate::directions::basis_derivatives;
use crate::error::{Error, Result};
use crate::graph::{transition_matrix, Graph, StochasticMatrix, WeightVector};

/// Largest number of independent failure units that may be enumerated.
pub const ENUMERATION_CAP: usize = 20;

/// How the risky edges fail jointly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Correlation {
    /// Independent Bernoulli failures.
    Independent,
    /// Edges `(i, j)` and `(j, i)` fail together.
    Reciprocal,
    /// Thresholded Gaussian latent vector with exchangeable correlation
    /// `rho`. Edge `e` fails iff its latent coordinate is below the `q_e`
    /// quantile.
    Correlated { rho: f64 },
}

/// Failure-prone edges of a graph with their marginal failure probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureModel {
    edge_count: usize,
    /// Groups of edge ids that fail together, each with its probability.
    units: Vec<(Vec<usize>, f64)>,
    correlation: Correlation,
}

impl FailureModel {
    /// `risky` pairs edge ids with failure probabilities. Validates the
    /// probabilities, `rho`, and strong connectivity of the backbone.
    pub fn new(g: &Graph, risky: &[(usize, f64)], correlation: Correlation) -> Result<Self> {
        let mut mask = vec![true; g.edge_count()];
        for &(e, q) in risky {
            if e >= g.edge_count() {
                return Err(Error::Dimension { expected: g.edge_count(), got: e });
            }
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidConfig(format!("failure probability {q} outside [0, 1]")));
            }
            mask[e] = false;
        }
        if !g.is_strongly_connected(&mask) {
            return Err(Error::NotStronglyConnected("backbone without risky edges".into()));
        }
        let units = match correlation {
            Correlation::Correlated { rho } if !(0.0..1.0).contains(&rho) => {
                return Err(Error::InvalidConfig(format!("correlation {rho} outside [0, 1)")));
            }
            Correlation::Reciprocal => {
                let mut units: Vec<(Vec<usize>, f64)> = Vec::new();
                for &(e, q) in risky {
                    let (i, j) = g.edge(e);
                    let partner = g.edge_id(j, i).filter(|r| *r != e && risky.iter().any(|(f, _)| f == r));
                    match partner {
                        Some(r) if r < e => {
                            let qr = risky.iter().find(|(f, _)| *f == r).unwrap().1;
                            if (qr - q).abs() > 1e-12 {
                                return Err(Error::InvalidConfig(format!(
                                    "reciprocal edges ({}, {}) have different failure probabilities",
                                    i + 1,
                                    j + 1
                                )));
                            }
                        }
                        Some(r) => units.push((vec![e, r], q)),
                        None => units.push((vec![e], q)),
                    }
                }
                units
            }
            _ => risky.iter().map(|&(e, q)| (vec![e], q)).collect(),
        };
        Ok(Self { edge_count: g.edge_count(), units, correlation })
    }

    /// Every risky edge of `g` fails with the same probability `q`.
    pub fn uniform(g: &Graph, q: f64, correlation: Correlation) -> Result<Self> {
        let risky: Vec<_> = g.risky_edges().iter().map(|&e| (e, q)).collect();
        Self::new(g, &risky, correlation)
    }

    pub fn correlation(&self) -> Correlation {
        self.correlation
    }

    /// Number of independent failure units (edges, or reciprocal pairs).
    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    /// Edge count of the underlying graph.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Realization where unit `k` fails iff `failed[k]`.
    fn realization_from_units(&self, failed: impl Fn(usize) -> bool) -> EdgeRealization {
        let mut alive = vec![true; self.edge_count];
        for (k, (edges, _)) in self.units.iter().enumerate() {
            if failed(k) {
                for &e in edges {
                    alive[e] = false;
                }
            }
        }
        EdgeRealization { alive }
    }
}

/// Which edges are accessible in one draw. Non-risky edges are always
/// alive.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeRealization {
    pub alive: Vec<bool>,
}

impl EdgeRealization {
    pub fn full(edge_count: usize) -> Self {
        Self { alive: vec![true; edge_count] }
    }

    pub fn failed_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.alive.iter().enumerate().filter(|(_, &a)| !a).map(|(e, _)| e)
    }

    /// `x` with failed edges set to zero.
    pub fn mask(&self, x: &WeightVector) -> WeightVector {
        x.map_with_location(|e, _, v| if self.alive[e] { v } else { 0.0 })
    }
}

/// `Q_ij = P_ij / (1 - failed mass of row i)` on surviving edges, zero on
/// failed ones.
pub fn redistribute(g: &Graph, p: &StochasticMatrix, realization: &EdgeRealization) -> Result<StochasticMatrix> {
    let mut q = p.matrix().clone();
    for i in 0..g.node_count() {
        let lost: f64 = g.out_block(i).filter(|&e| !realization.alive[e]).map(|e| p[g.edge(e)]).sum();
        if lost == 0.0 {
            continue;
        }
        if !(1.0 - lost > 0.0) {
            return Err(Error::RowMassLost(i + 1));
        }
        for e in g.out_block(i) {
            let (_, j) = g.edge(e);
            q[(i, j)] = if realization.alive[e] { p[(i, j)] / (1.0 - lost) } else { 0.0 };
        }
    }
    Ok(StochasticMatrix::new_unchecked(q))
}

/// `Q(P(x), E)` built directly from the masked weights.
pub fn realized_chain(g: &Graph, x: &WeightVector, realization: &EdgeRealization) -> Result<StochasticMatrix> {
    transition_matrix(g, &realization.mask(x)).map_err(|e| match e {
        Error::ZeroRowSum(i) => Error::RowMassLost(i),
        other => other,
    })
}

/// Product of `q` over failed units and `1 - q` over surviving ones.
pub fn realization_probability(model: &FailureModel, realization: &EdgeRealization) -> Result<f64> {
    if let Correlation::Correlated { .. } = model.correlation {
        return Err(Error::CorrelatedNoClosedForm);
    }
    Ok(model
        .units
        .iter()
        .map(|(edges, q)| if realization.alive[edges[0]] { 1.0 - q } else { *q })
        .product())
}

/// Every realization with its probability, in unit-mask order.
pub fn enumerate_realizations(model: &FailureModel) -> Result<Vec<(EdgeRealization, f64)>> {
    if let Correlation::Correlated { .. } = model.correlation {
        return Err(Error::CorrelatedNoClosedForm);
    }
    let k = model.unit_count();
    if k > ENUMERATION_CAP {
        return Err(Error::EnumerationCap(k, ENUMERATION_CAP));
    }
    (0..1usize << k)
        .map(|mask| {
            let r = model.realization_from_units(|u| mask >> u & 1 == 1);
            let prob = realization_probability(model, &r)?;
            Ok((r, prob))
        })
        .collect()
}

/// `E[S(Q(P(x), E), C)]` by enumeration. Realizations with zero probability
/// are skipped.
pub fn expected_objective_enumerate(
    g: &Graph,
    x: &WeightVector,
    c: &ConnectivityWeights,
    model: &FailureModel,
) -> Result<f64> {
    let mut total = 0.0;
    for (r, prob) in enumerate_realizations(model)? {
        if prob > 0.0 {
            total += prob * connectivity_objective(&realized_chain(g, x, &r)?, c)?;
        }
    }
    Ok(total)
}

/// Draws `count` realizations.
pub fn sample_edge_sets<R: Rng + ?Sized>(model: &FailureModel, count: usize, rng: &mut R) -> Vec<EdgeRealization> {
    match model.correlation {
        Correlation::Correlated { rho } => {
            let std = Normal::standard();
            let thresholds: Vec<f64> = model
                .units
                .iter()
                .map(|(_, q)| match *q {
                    q if q <= 0.0 => f64::NEG_INFINITY,
                    q if q >= 1.0 => f64::INFINITY,
                    q => std.inverse_cdf(q),
                })
                .collect();
            let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
            (0..count)
                .map(|_| {
                    let common: f64 = rng.sample(StandardNormal);
                    let fails: Vec<bool> = thresholds
                        .iter()
                        .map(|&t| {
                            let own: f64 = rng.sample(StandardNormal);
                            a * common + b * own < t
                        })
                        .collect();
                    model.realization_from_units(|u| fails[u])
                })
                .collect()
        }
        _ => (0..count)
            .map(|_| {
                let fails: Vec<bool> = model.units.iter().map(|(_, q)| rng.random::<f64>() < *q).collect();
                model.realization_from_units(|u| fails[u])
            })
            .collect(),
    }
}

/// Realizations with weights summing to one, used as a discrete measure.
#[derive(Debug, Clone)]
pub struct WeightedRealizations {
    pub items: Vec<(EdgeRealization, f64)>,
}

impl WeightedRealizations {
    /// The single full realization.
    pub fn fixed(edge_count: usize) -> Self {
        Self { items: vec![(EdgeRealization::full(edge_count), 1.0)] }
    }

    /// Equal weights `1 / L`.
    pub fn sample(realizations: Vec<EdgeRealization>) -> Self {
        let w = 1.0 / realizations.len() as f64;
        Self { items: realizations.into_iter().map(|r| (r, w)).collect() }
    }

    /// Exact distribution, dropping zero-probability realizations.
    pub fn enumerate(model: &FailureModel) -> Result<Self> {
        Ok(Self { items: enumerate_realizations(model)?.into_iter().filter(|(_, p)| *p > 0.0).collect() })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `sum_l w_l S(Q(P(x), E_l), C)`, accumulated in list order.
    pub fn objective(&self, g: &Graph, x: &WeightVector, c: &ConnectivityWeights) -> Result<f64> {
        let mut total = 0.0;
        for (r, w) in &self.items {
            total += w * connectivity_objective(&realized_chain(g, x, r)?, c)?;
        }
        Ok(total)
    }

    /// Derivatives of [`Self::objective`] along each column of `basis`.
    pub fn basis_gradient(
        &self,
        g: &Graph,
        x: &WeightVector,
        c: &ConnectivityWeights,
        basis: &DMatrix<f64>,
    ) -> Result<DVector<f64>> {
        let mut total = DVector::zeros(basis.ncols());
        let mut masked_basis = basis.clone();
        for (r, w) in &self.items {
            let xm = r.mask(x);
            for (e, &alive) in r.alive.iter().enumerate() {
                let src = if alive { basis.row(e).into_owned() } else { basis.row(e) * 0.0 };
                masked_basis.set_row(e, &src);
            }
            let analytics = ChainAnalytics::new(&realized_chain(g, x, r)?)?;
            total += basis_derivatives(g, &xm, &analytics, c, &masked_basis)? * *w;
        }
        Ok(total)
    }
}

/// `(1 / L) sum_l S(Q(P(x), E_l), C)`.
pub fn sample_average_objective(
    g: &Graph,
    x: &WeightVector,
    c: &ConnectivityWeights,
    realizations: &[EdgeRealization],
) -> Result<f64> {
    let mut total = 0.0;
    for r in realizations {
        total += connectivity_objective(&realized_chain(g, x, r)?, c)?;
    }
    Ok(total / realizations.len() as f64)
}

/// Two-point estimate with common random numbers: the same realizations are
/// used at `x - eta B D` and `x + eta B D`.
pub fn spsa_direction_random(
    g: &Graph,
    x: &WeightVector,
    c: &ConnectivityWeights,
    basis: &DMatrix<f64>,
    delta: &DVector<f64>,
    eta: f64,
    realizations: &[EdgeRealization],
) -> Result<DVector<f64>> {
    let step = basis * delta;
    let lo = sample_average_objective(g, &(x - &step * eta), c, realizations)?;
    let hi = sample_average_objective(g, &(x + &step * eta), c, realizations)?;
    Ok(step * ((lo - hi) / (2.0 * eta)))
}
