//! Constrained SPSA.
//!
//! Perturbations live in the null space of the equality constraints: a
//! Rademacher vector `D` of length `|E| - r` is mapped to `B D`, so both
//! evaluation points keep every block sum (and every other equality) intact.
//! Bounds are handled by projecting each new iterate.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::ConnectivityWeights;
use crate::directions::{equality_system, stationary_system, symmetric_system, ConstraintSystem};
use crate::error::{Error, Result};
use crate::graph::{Graph, WeightVector};
use crate::projection::FeasibleRegion;
use crate::random_support::{sample_edge_sets, FailureModel, WeightedRealizations};

/// Hyperparameter sets used for the experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Scalability,
    CorrelatedFailures,
    SurveillanceFixed,
    SurveillanceRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpsaConfig {
    pub alpha: f64,
    pub alpha0: f64,
    pub gamma_alpha: f64,
    pub eta: f64,
    pub gamma_eta: f64,
    pub epsilon: f64,
    /// When set, the margin shrinks as `epsilon / (k + 1)^decay`.
    pub epsilon_decay: Option<f64>,
    pub seed: u64,
    /// Iterations between checkpoints.
    pub eval_interval: usize,
    /// Stop when successive checkpoint objectives differ by less than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Caps the Euclidean length of a single step `alpha_k * direction`.
    pub max_step_norm: Option<f64>,
    pub restarts: usize,
    pub estimator: Estimator,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self::preset(Preset::Scalability)
    }
}

/// How the descent direction is obtained at each iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Two-point simultaneous perturbation.
    Spsa,
    /// Exact `-B B^T grad J`, the expectation of the SPSA direction as
    /// `eta -> 0`. Deterministic apart from online sampling.
    Gradient,
}

impl SpsaConfig {
    pub fn preset(preset: Preset) -> Self {
        let (alpha, alpha0) = match preset {
            Preset::Scalability | Preset::CorrelatedFailures => (0.01, 100_000.0),
            Preset::SurveillanceFixed => (1.0, 500_000.0),
            Preset::SurveillanceRandom => (0.001, 50_000.0),
        };
        Self {
            alpha,
            alpha0,
            gamma_alpha: 0.602,
            eta: 1e-8,
            gamma_eta: 0.2,
            epsilon: 1e-4,
            epsilon_decay: None,
            seed: 0,
            eval_interval: 1_000,
            tolerance: 1e-3,
            max_iterations: 5_000_000,
            max_step_norm: None,
            restarts: 1,
            estimator: Estimator::Spsa,
        }
    }

    /// Checks the gain-sequence conditions and the bound on `eta` for a
    /// search space of dimension `free_dim`.
    pub fn validate(&self, free_dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0) || !(self.alpha0 >= 0.0) {
            return bad("alpha must be positive and alpha0 non-negative".into());
        }
        if !(self.gamma_alpha > 0.5 && self.gamma_alpha <= 1.0) {
            return bad(format!("gamma_alpha = {} must lie in (1/2, 1]", self.gamma_alpha));
        }
        if !(self.gamma_eta > (1.0 - self.gamma_alpha) / 2.0) {
            return bad(format!("gamma_eta = {} must exceed (1 - gamma_alpha)/2", self.gamma_eta));
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if free_dim > 0 && !(self.eta > 0.0 && self.eta < self.epsilon / (free_dim as f64).sqrt()) {
            return bad(format!(
                "eta = {} must lie in (0, epsilon / sqrt({free_dim})) = (0, {})",
                self.eta,
                self.epsilon / (free_dim as f64).sqrt()
            ));
        }
        if let Some(decay) = self.epsilon_decay {
            if !(decay > 0.0 && decay <= self.gamma_eta) {
                return bad(format!("epsilon_decay = {decay} must lie in (0, gamma_eta]"));
            }
        }
        if self.eval_interval == 0 || self.restarts == 0 {
            return bad("eval_interval and restarts must be positive".into());
        }
        Ok(())
    }

    /// `(alpha / (alpha0 + k + 1)^gamma_alpha, eta / (k + 1)^gamma_eta)`.
    pub fn gains(&self, k: usize) -> (f64, f64) {
        let k = k as f64;
        (
            self.alpha / (self.alpha0 + k + 1.0).powf(self.gamma_alpha),
            self.eta / (k + 1.0).powf(self.gamma_eta),
        )
    }

    fn epsilon_at(&self, k: usize) -> f64 {
        match self.epsilon_decay {
            Some(decay) => self.epsilon / (k as f64 + 1.0).powf(decay),
            None => self.epsilon,
        }
    }
}

/// I.i.d. Rademacher vector.
pub fn sample_perturbation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

/// `[J(x - eta B D) - J(x + eta B D)] / (2 eta) * B D`. The two evaluations
/// run on the rayon pool when `parallel` is set.
pub fn spsa_direction<F>(
    j: F,
    x: &DVector<f64>,
    basis: &DMatrix<f64>,
    delta: &DVector<f64>,
    eta: f64,
    parallel: bool,
) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64> + Sync,
{
    let step = basis * delta;
    let minus = x - &step * eta;
    let plus = x + &step * eta;
    let (lo, hi) = if parallel { rayon::join(|| j(&minus), || j(&plus)) } else { (j(&minus), j(&plus)) };
    let wrap = |side: &str, e: Error| Error::Evaluation(format!("{side} point with eta = {eta}: {e}"));
    let lo = lo.map_err(|e| wrap("minus", e))?;
    let hi = hi.map_err(|e| wrap("plus", e))?;
    Ok(step * ((lo - hi) / (2.0 * eta)))
}

/// Mean of `iterates[k]` for `k = floor(l i / 2) ..= l i`.
pub fn polyak_ruppert_average(iterates: &[DVector<f64>], checkpoint: usize, interval: usize) -> Result<DVector<f64>> {
    let end = checkpoint * interval;
    if iterates.len() <= end {
        return Err(Error::InsufficientHistory { needed: end + 1, have: iterates.len() });
    }
    let start = end / 2;
    let mut sum = DVector::zeros(iterates[0].len());
    for x in &iterates[start..=end] {
        sum += x;
    }
    Ok(sum / (end - start + 1) as f64)
}

/// Streaming version of [`polyak_ruppert_average`]: keeps the running sum
/// and the prefix sums needed by upcoming checkpoints.
#[derive(Debug, Clone)]
struct AverageWindow {
    interval: usize,
    cumulative: DVector<f64>,
    seen: usize,
    next_snapshot: usize,
    snapshots: std::collections::VecDeque<(usize, DVector<f64>)>,
}

impl AverageWindow {
    fn new(dim: usize, interval: usize) -> Self {
        let mut w = Self {
            interval,
            cumulative: DVector::zeros(dim),
            seen: 0,
            next_snapshot: 1,
            snapshots: Default::default(),
        };
        w.take_snapshots();
        w
    }

    fn start_of(&self, checkpoint: usize) -> usize {
        checkpoint * self.interval / 2
    }

    // Stores the prefix sum over iterates 0..start for every checkpoint
    // whose window starts right after what has been seen so far.
    fn take_snapshots(&mut self) {
        while self.start_of(self.next_snapshot) == self.seen {
            self.snapshots.push_back((self.next_snapshot, self.cumulative.clone()));
            self.next_snapshot += 1;
        }
    }

    fn push(&mut self, x: &DVector<f64>) {
        self.cumulative += x;
        self.seen += 1;
        self.take_snapshots();
    }

    /// Average for `checkpoint`, valid once iterate `checkpoint * interval`
    /// has been pushed.
    fn average(&mut self, checkpoint: usize) -> DVector<f64> {
        while self.snapshots.front().is_some_and(|(c, _)| *c < checkpoint) {
            self.snapshots.pop_front();
        }
        let (c, prefix) = self.snapshots.front().expect("snapshot taken");
        debug_assert_eq!(*c, checkpoint);
        let start = self.start_of(checkpoint);
        let end = checkpoint * self.interval;
        (&self.cumulative - prefix) / (end - start + 1) as f64
    }
}

/// Which equality constraints accompany the block-sum constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    Simplex,
    Stationary(DVector<f64>),
    Symmetric,
}

/// Edge availability during optimization.
#[derive(Debug, Clone)]
pub enum Support {
    /// All edges always present.
    Fixed,
    /// A fixed list of realizations, used both for directions and
    /// checkpoints.
    SampleAverage(WeightedRealizations),
    /// Fresh realizations every iteration. Checkpoints use `checkpoint`.
    Online { model: FailureModel, per_iteration: usize, checkpoint: WeightedRealizations },
}

/// An optimization instance: graph, objective, constraints and support.
#[derive(Debug, Clone)]
pub struct Problem {
    pub graph: Graph,
    pub weights: ConnectivityWeights,
    pub system: ConstraintSystem,
    pub region: FeasibleRegion,
    pub support: Support,
    fixed: WeightedRealizations,
}

impl Problem {
    pub fn new(
        graph: Graph,
        weights: ConnectivityWeights,
        kind: &ConstraintKind,
        epsilon: f64,
        support: Support,
    ) -> Result<Self> {
        let (system, region) = match kind {
            ConstraintKind::Simplex => {
                let sys = equality_system(&graph)?;
                (sys, FeasibleRegion::Blocks { eps: epsilon })
            }
            ConstraintKind::Stationary(target) => {
                let sys = stationary_system(&graph, target)?;
                (sys.clone(), FeasibleRegion::affine(sys, epsilon))
            }
            ConstraintKind::Symmetric => {
                let sys = symmetric_system(&graph)?;
                (sys.clone(), FeasibleRegion::affine(sys, epsilon))
            }
        };
        let fixed = WeightedRealizations::fixed(graph.edge_count());
        Ok(Self { graph, weights, system, region, support, fixed })
    }

    /// Objective used at checkpoints: exact for fixed support, the stored
    /// measure otherwise.
    pub fn objective(&self, x: &WeightVector) -> Result<f64> {
        self.checkpoint_measure().objective(&self.graph, x, &self.weights)
    }

    fn checkpoint_measure(&self) -> &WeightedRealizations {
        match &self.support {
            Support::Fixed => &self.fixed,
            Support::SampleAverage(m) => m,
            Support::Online { checkpoint, .. } => checkpoint,
        }
    }

    /// Realizations for one direction estimate.
    fn direction_measure<R: Rng>(&self, rng: &mut R) -> std::borrow::Cow<'_, WeightedRealizations> {
        use std::borrow::Cow;
        match &self.support {
            Support::Fixed => Cow::Borrowed(&self.fixed),
            Support::SampleAverage(m) => Cow::Borrowed(m),
            Support::Online { model, per_iteration, .. } => {
                Cow::Owned(WeightedRealizations::sample(sample_edge_sets(model, *per_iteration, rng)))
            }
        }
    }

    /// Uniform weights projected onto the feasible set.
    pub fn uniform_start(&self) -> Result<WeightVector> {
        Ok(self.region.project(&self.graph, &self.graph.uniform_weights())?.point)
    }

    /// Random positive weights, block-normalized, then projected.
    pub fn random_start<R: Rng>(&self, rng: &mut R) -> Result<WeightVector> {
        let g = &self.graph;
        let mut x = WeightVector::from_fn(g.edge_count(), |_, _| rng.random_range(0.01..1.0));
        for i in 0..g.node_count() {
            let block = g.out_block(i);
            let s: f64 = x.as_slice()[block.clone()].iter().sum();
            x.as_mut_slice()[block].iter_mut().for_each(|v| *v /= s);
        }
        Ok(self.region.project(g, &x)?.point)
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Successive checkpoint objectives agreed within the tolerance.
    Converged,
    MaxIterations,
    /// The constraints leave no free direction.
    NoFreeDirections,
}

/// One row of the trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub iteration: usize,
    /// Objective at the projected Polyak-Ruppert average.
    pub objective: f64,
    /// Norm of the most recent direction estimate.
    pub proxy_norm: f64,
    /// Constraint violation of the averaged point after projection.
    pub residual: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationTrace {
    pub restart: usize,
    pub initial: WeightVector,
    pub checkpoints: Vec<Checkpoint>,
    /// Projected average at the last checkpoint (or the start point when no
    /// checkpoint was reached).
    pub final_weights: WeightVector,
    pub final_objective: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Projections that hit the Dykstra iteration cap.
    pub unconverged_projections: usize,
    /// Largest constraint violation over all iterates.
    pub max_residual: f64,
}

/// Runs the projected recursion from `start`.
pub fn run_from(problem: &Problem, cfg: &SpsaConfig, start: &WeightVector, rng: &mut ChaCha8Rng, restart: usize) -> Result<OptimizationTrace> {
    let g = &problem.graph;
    let basis = &problem.system.basis;
    let dim = basis.ncols();
    cfg.validate(dim)?;
    let clock = Instant::now();
    let mut unconverged = 0;
    let mut project = |region: &FeasibleRegion, x: &WeightVector| -> Result<WeightVector> {
        let p = region.project(g, x)?;
        if !p.converged {
            unconverged += 1;
        }
        Ok(p.point)
    };

    let mut x = project(&problem.region.with_eps(cfg.epsilon_at(0)), start)?;
    let initial = x.clone();
    let start_objective = problem.objective(&x)?;
    let mut trace = OptimizationTrace {
        restart,
        initial: initial.clone(),
        checkpoints: Vec::new(),
        final_weights: initial,
        final_objective: start_objective,
        iterations: 0,
        termination: Termination::NoFreeDirections,
        unconverged_projections: 0,
        max_residual: problem.region.residual(g, &x),
    };
    if dim == 0 {
        trace.unconverged_projections = unconverged;
        return Ok(trace);
    }

    let parallel = g.node_count() >= 32;
    let mut window = AverageWindow::new(x.len(), cfg.eval_interval);
    window.push(&x);
    let mut last_norm = 0.0;
    let mut previous: Option<f64> = None;
    trace.termination = Termination::MaxIterations;
    for k in 0..cfg.max_iterations {
        let (a_k, eta_k) = cfg.gains(k);
        let measure = problem.direction_measure(rng);
        let j = |y: &DVector<f64>| measure.objective(g, y, &problem.weights);
        let direction = match cfg.estimator {
            Estimator::Spsa => {
                let delta = sample_perturbation(dim, rng);
                spsa_direction(j, &x, basis, &delta, eta_k, parallel)?
            }
            Estimator::Gradient => -(basis * measure.basis_gradient(g, &x, &problem.weights, basis)?),
        };
        last_norm = direction.norm();
        let mut step = direction * a_k;
        if let Some(cap) = cfg.max_step_norm {
            let n = step.norm();
            if n > cap {
                step *= cap / n;
            }
        }
        let region = problem.region.with_eps(cfg.epsilon_at(k + 1));
        x = project(&region, &(&x + step))?;
        trace.max_residual = trace.max_residual.max(region.residual(g, &x));
        window.push(&x);
        trace.iterations = k + 1;

        if (k + 1) % cfg.eval_interval == 0 {
            let i = (k + 1) / cfg.eval_interval;
            let avg = project(&region, &window.average(i))?;
            let objective = problem.objective(&avg)?;
            trace.checkpoints.push(Checkpoint {
                iteration: k + 1,
                objective,
                proxy_norm: last_norm,
                residual: region.residual(g, &avg),
                elapsed_secs: clock.elapsed().as_secs_f64(),
            });
            trace.final_weights = avg;
            trace.final_objective = objective;
            if previous.is_some_and(|p| (p - objective).abs() < cfg.tolerance) {
                trace.termination = Termination::Converged;
                break;
            }
            previous = Some(objective);
        }
    }
    if trace.checkpoints.is_empty() || trace.checkpoints.last().unwrap().iteration != trace.iterations {
        // Run ended between checkpoints: report the last iterate.
        trace.final_objective = problem.objective(&x)?;
        trace.final_weights = x;
        trace.checkpoints.push(Checkpoint {
            iteration: trace.iterations,
            objective: trace.final_objective,
            proxy_norm: last_norm,
            residual: problem.region.residual(g, &trace.final_weights),
            elapsed_secs: clock.elapsed().as_secs_f64(),
        });
    }
    trace.unconverged_projections = unconverged;
    Ok(trace)
}

/// Generator for restart `r`: the master seed with stream `r`.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Runs `cfg.restarts` independent restarts in parallel. Restart 0 starts
/// from the projected uniform weights, the others from seeded random
/// interior points. Traces come back in restart order.
pub fn run_spsa(problem: &Problem, cfg: &SpsaConfig) -> Result<Vec<OptimizationTrace>> {
    cfg.validate(problem.system.free_dim())?;
    (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(cfg.seed, r);
            let start = if r == 0 { problem.uniform_start()? } else { problem.random_start(&mut rng)? };
            run_from(problem, cfg, &start, &mut rng, r)
        })
        .collect()
}

/// Index of the restart with the lowest final objective.
pub fn best_restart(traces: &[OptimizationTrace]) -> Option<usize> {
    (0..traces.len()).min_by(|&a, &b| traces[a].final_objective.total_cmp(&traces[b].final_objective))
}

/// What happens when a plain coordinate perturbation is applied to a
/// stochastic matrix instead of a null-space one.
#[derive(Debug, Clone)]
pub struct InfeasibilityReport {
    /// Row sums of the perturbed weights placed as a matrix.
    pub naive_row_sums: Vec<f64>,
    pub naive_min_entry: f64,
    pub naive_in_simplex: bool,
    /// Row sums at `x - eta B D` and `x + eta B D`.
    pub constrained_row_sums: [Vec<f64>; 2],
    pub constrained_min_entry: f64,
    pub constrained_in_simplex: bool,
}

fn matrix_row_sums(g: &Graph, x: &WeightVector) -> Vec<f64> {
    (0..g.node_count()).map(|i| x.as_slice()[g.out_block(i)].iter().sum()).collect()
}

fn in_simplex(g: &Graph, x: &WeightVector) -> bool {
    x.iter().all(|&v| v >= 0.0) && matrix_row_sums(g, x).iter().all(|s| (s - 1.0).abs() <= 1e-12)
}

/// Perturbs `x` by `eta * naive` and by `+- eta * B * reduced`, where `B`
/// spans the block-sum null space. The perturbed weights are read as matrix
/// entries without renormalization.
pub fn infeasibility_demo(
    g: &Graph,
    x: &WeightVector,
    naive: &DVector<f64>,
    reduced: &DVector<f64>,
    eta: f64,
) -> Result<InfeasibilityReport> {
    let sys = equality_system(g)?;
    let xn = x + naive * eta;
    let step = &sys.basis * reduced * eta;
    let lo = x - &step;
    let hi = x + &step;
    Ok(InfeasibilityReport {
        naive_row_sums: matrix_row_sums(g, &xn),
        naive_min_entry: xn.min(),
        naive_in_simplex: in_simplex(g, &xn),
        constrained_row_sums: [matrix_row_sums(g, &lo), matrix_row_sums(g, &hi)],
        constrained_min_entry: lo.min().min(hi.min()),
        constrained_in_simplex: in_simplex(g, &lo) && in_simplex(g, &hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gains_at_zero() {
        let cfg = SpsaConfig::preset(Preset::Scalability);
        let (a, e) = cfg.gains(0);
        assert_abs_diff_eq!(a, 0.01 / 100_001f64.powf(0.602), epsilon = 1e-18);
        assert_eq!(e, 1e-8);
        let (a1, e1) = cfg.gains(1_000_000);
        assert!(a1 < a && e1 < e);
    }

    #[test]
    fn presets() {
        assert_eq!(SpsaConfig::preset(Preset::SurveillanceFixed).alpha0, 500_000.0);
        assert_eq!(SpsaConfig::preset(Preset::SurveillanceRandom).alpha, 0.001);
        assert_eq!(SpsaConfig::preset(Preset::CorrelatedFailures), SpsaConfig::preset(Preset::Scalability));
    }

    #[test]
    fn validation() {
        let mut cfg = SpsaConfig::default();
        assert!(cfg.validate(100).is_ok());
        cfg.gamma_alpha = 0.5;
        assert!(cfg.validate(1).is_err());
        cfg = SpsaConfig { gamma_alpha: 0.602, gamma_eta: 0.19, ..Default::default() };
        assert!(cfg.validate(1).is_err());
        cfg = SpsaConfig { eta: 1e-4, ..Default::default() };
        assert!(cfg.validate(1).is_err());
        cfg = SpsaConfig { eta: 0.9e-4, ..Default::default() };
        assert!(cfg.validate(1).is_ok());
        assert!(cfg.validate(2).is_err());
    }

    #[test]
    fn perturbations() {
        let mut rng = restart_rng(7, 0);
        let d = sample_perturbation(3, &mut rng);
        assert!(d.iter().all(|v| v.abs() == 1.0));
        let n = 100_000;
        let mut mean = DVector::zeros(4);
        for _ in 0..n {
            mean += sample_perturbation(4, &mut rng);
        }
        assert!((mean / n as f64).amax() < 0.02);
        let a: Vec<_> = (0..5).map(|_| sample_perturbation(6, &mut restart_rng(1, 2))).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn quadratic_direction() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let basis = DMatrix::from_column_slice(2, 1, &[s, -s]);
        let j = |v: &DVector<f64>| Ok(v.norm_squared());
        let one = DVector::from_element(1, 1.0);
        let d = spsa_direction(j, &DVector::from_vec(vec![0.5, 0.5]), &basis, &one, 0.01, false).unwrap();
        assert_abs_diff_eq!(d.amax(), 0.0, epsilon = 1e-14);
        let d = spsa_direction(j, &DVector::from_vec(vec![0.7, 0.3]), &basis, &one, 0.01, true).unwrap();
        assert_abs_diff_eq!(d[0], -0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn averaging_examples() {
        let trace: Vec<_> = (0..=10).map(|k| DVector::from_element(1, k as f64)).collect();
        assert_eq!(polyak_ruppert_average(&trace, 1, 10).unwrap()[0], 7.5);
        let flat = vec![DVector::from_element(2, 0.25); 21];
        assert_eq!(polyak_ruppert_average(&flat, 2, 10).unwrap(), DVector::from_element(2, 0.25));
        assert!(polyak_ruppert_average(&trace, 2, 10).is_err());
    }

    #[test]
    fn streaming_average_matches_batch() {
        for interval in [1, 2, 3, 7] {
            let xs: Vec<_> = (0..60).map(|k| DVector::from_vec(vec![k as f64, (k * k) as f64])).collect();
            let mut w = AverageWindow::new(2, interval);
            for (k, x) in xs.iter().enumerate() {
                w.push(x);
                if k > 0 && k % interval == 0 {
                    let i = k / interval;
                    let batch = polyak_ruppert_average(&xs, i, interval).unwrap();
                    assert!((w.average(i) - batch).amax() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn empty_basis_returns_start() {
        let g = instances::directed_cycle(3);
        let p = Problem::new(g, ConnectivityWeights::Unit, &ConstraintKind::Simplex, 1e-4, Support::Fixed).unwrap();
        let traces = run_spsa(&p, &SpsaConfig::default()).unwrap();
        assert_eq!(traces[0].iterations, 0);
        assert_eq!(traces[0].termination, Termination::NoFreeDirections);
        assert_eq!(traces[0].final_objective, 9.0);
    }

    #[test]
    fn two_node_descends() {
        let g = instances::two_node_full();
        let p = Problem::new(g, ConnectivityWeights::Unit, &ConstraintKind::Simplex, 1e-4, Support::Fixed).unwrap();
        let cfg = SpsaConfig { alpha: 0.05, alpha0: 10.0, eval_interval: 200, max_iterations: 5_000, ..Default::default() };
        let traces = run_spsa(&p, &cfg).unwrap();
        // Optimum is the two-cycle with S = 2; the margin keeps it slightly above.
        assert!(traces[0].final_objective < 2.01, "{}", traces[0].final_objective);
        assert!(traces[0].max_residual < 1e-8);
    }

    #[test]
    fn determinism() {
        let g = instances::complete(4);
        let p = Problem::new(g, ConnectivityWeights::Kemeny, &ConstraintKind::Simplex, 1e-4, Support::Fixed).unwrap();
        let cfg = SpsaConfig { alpha0: 100.0, eval_interval: 50, max_iterations: 500, restarts: 3, seed: 9, ..Default::default() };
        let a = run_spsa(&p, &cfg).unwrap();
        let b = run_spsa(&p, &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.final_weights, y.final_weights);
            let strip = |t: &OptimizationTrace| t.checkpoints.iter().map(|c| (c.iteration, c.objective.to_bits(), c.proxy_norm.to_bits())).collect::<Vec<_>>();
            assert_eq!(strip(x), strip(y));
        }
    }

    #[test]
    fn naive_perturbation_example() {
        let g = instances::complete(3);
        let x = g.uniform_weights();
        let naive = DVector::from_vec(vec![1.0, 1.0, -1.0, 1.0, 1.0, 1.0]);
        let reduced = DVector::from_vec(vec![1.0, -1.0, 1.0]);
        let r = infeasibility_demo(&g, &x, &naive, &reduced, 0.01).unwrap();
        assert_abs_diff_eq!(r.naive_row_sums[0], 1.02, epsilon = 1e-12);
        assert_abs_diff_eq!(r.naive_row_sums[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.naive_row_sums[2], 1.02, epsilon = 1e-12);
        assert!(r.naive_min_entry >= 0.0 && !r.naive_in_simplex);
        assert!(r.constrained_in_simplex);
        let zero = infeasibility_demo(&g, &x, &naive, &reduced, 0.0).unwrap();
        assert!(zero.naive_in_simplex);
    }
}
