//! Deterministic projected-gradient descent with Armijo backtracking.
//!
//! Used for the convex reversible baselines, where a reliable optimum matters
//! more than scalability. Works on any [`Problem`] whose support measure is
//! fixed (fixed support or a stored sample / enumeration).

use crate::error::{Error, Result};
use crate::graph::WeightVector;
use crate::spsa::{Problem, Support};

#[derive(Debug, Clone)]
pub struct DescentOptions {
    pub max_iterations: usize,
    /// Stop when the projected step `|x_new - x| / t` falls below this.
    pub tolerance: f64,
    pub initial_step: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { max_iterations: 20_000, tolerance: 1e-9, initial_step: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    pub x: WeightVector,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes the problem objective from `start`.
pub fn projected_gradient(problem: &Problem, start: &WeightVector, opts: &DescentOptions) -> Result<DescentResult> {
    if let Support::Online { .. } = problem.support {
        return Err(Error::InvalidConfig("projected gradient needs a fixed measure".into()));
    }
    let g = &problem.graph;
    let basis = &problem.system.basis;
    let mut x = problem.region.project(g, start)?.point;
    let mut f = problem.objective(&x)?;
    let mut t = opts.initial_step;
    if basis.ncols() == 0 {
        return Ok(DescentResult { x, objective: f, iterations: 0, converged: true });
    }
    for it in 0..opts.max_iterations {
        let grad = basis * gradient_coords(problem, &x)?;
        // Backtrack until the Armijo condition holds on the projection arc.
        let mut accepted = None;
        for _ in 0..60 {
            let cand = problem.region.project(g, &(&x - &grad * t))?.point;
            let diff = &cand - &x;
            let fc = match problem.objective(&cand) {
                Ok(v) => v,
                Err(_) => {
                    t *= 0.5;
                    continue;
                }
            };
            if fc <= f - 1e-4 / t * diff.norm_squared() {
                accepted = Some((cand, fc, diff.norm() / t));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc, gap)) = accepted else {
            return Ok(DescentResult { x, objective: f, iterations: it, converged: true });
        };
        x = cand;
        f = fc;
        if gap < opts.tolerance {
            return Ok(DescentResult { x, objective: f, iterations: it + 1, converged: true });
        }
        t *= 2.0;
    }
    Ok(DescentResult { x, objective: f, iterations: opts.max_iterations, converged: false })
}

fn gradient_coords(problem: &Problem, x: &WeightVector) -> Result<nalgebra::DVector<f64>> {
    let g = &problem.graph;
    let c = &problem.weights;
    let basis = &problem.system.basis;
    match &problem.support {
        Support::Fixed => {
            let full = crate::random_support::WeightedRealizations::fixed(g.edge_count());
            full.basis_gradient(g, x, c, basis)
        }
        Support::SampleAverage(m) => m.basis_gradient(g, x, c, basis),
        Support::Online { .. } => unreachable!(),
    }
}
