//! Euclidean projections onto the feasible weight sets.

use nalgebra::DVector;

use crate::directions::ConstraintSystem;
use crate::error::{Error, Result};
use crate::graph::{Graph, WeightVector};

pub const DYKSTRA_TOL: f64 = 1e-10;
pub const DYKSTRA_MAX_ITER: usize = 10_000;

/// Projection of `v` onto `{w : w >= eps, sum(w) = 1}`.
pub fn project_scaled_simplex(v: &[f64], eps: f64) -> Result<Vec<f64>> {
    let len = v.len();
    let mass = 1.0 - eps * len as f64;
    if len == 0 || eps < 0.0 || mass < -1e-15 {
        return Err(Error::Infeasible(format!("margin {eps} too large for a block of {len}")));
    }
    let mass = mass.max(0.0);
    let shifted: Vec<f64> = v.iter().map(|&vi| vi - eps).collect();
    let mut sorted = shifted.clone();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    // Largest k with sorted[k-1] > (cumsum_k - mass) / k.
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - mass) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    Ok(shifted.iter().map(|&u| (u - theta).max(0.0) + eps).collect())
}

/// Applies [`project_scaled_simplex`] to every out-edge block.
pub fn project_blocks(g: &Graph, x: &WeightVector, eps: f64) -> Result<WeightVector> {
    let mut out = x.clone();
    for i in 0..g.node_count() {
        let block = g.out_block(i);
        let projected = project_scaled_simplex(&x.as_slice()[block.clone()], eps)?;
        out.as_mut_slice()[block].copy_from_slice(&projected);
    }
    Ok(out)
}

/// Elementwise clamp to `[lo, hi]`.
pub fn project_box(x: &DVector<f64>, lo: f64, hi: f64) -> DVector<f64> {
    x.map(|v| v.clamp(lo, hi))
}

/// `B B^T (x - A^+ b) + A^+ b`.
pub fn project_affine(x: &DVector<f64>, sys: &ConstraintSystem) -> DVector<f64> {
    let offset = x - &sys.particular;
    let coords = sys.basis.transpose() * offset;
    &sys.basis * coords + &sys.particular
}

/// Result of [`dykstra_project`].
#[derive(Debug, Clone)]
pub struct DykstraOutcome {
    pub point: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Dykstra's alternating projection onto `{A x = b} ∩ [eps, 1 - eps]^n`.
///
/// The correction sequence of the affine step is identically zero, so only
/// the box correction is carried. Stops when both the change between
/// successive affine iterates and the gap between the two iterates fall
/// below `tol`; otherwise returns the last affine iterate with
/// `converged = false`.
pub fn dykstra_project(
    x: &DVector<f64>,
    sys: &ConstraintSystem,
    eps: f64,
    tol: f64,
    max_iter: usize,
) -> DykstraOutcome {
    let (lo, hi) = (eps, 1.0 - eps);
    let mut b_prev = x.clone();
    let mut p = DVector::zeros(x.len());
    for n in 1..=max_iter {
        let y = &b_prev + &p;
        let a = project_box(&y, lo, hi);
        p = y - &a;
        let b = project_affine(&a, sys);
        let step = (&b - &b_prev).amax();
        let gap = (&b - &a).amax();
        b_prev = b;
        if step < tol && gap < tol {
            return DykstraOutcome { point: b_prev, iterations: n, converged: true };
        }
    }
    DykstraOutcome { point: b_prev, iterations: max_iter, converged: false }
}

/// A closed convex feasible set for the optimizer.
#[derive(Debug, Clone)]
pub enum FeasibleRegion {
    /// Every out-edge block on the `eps`-shifted simplex.
    Blocks { eps: f64 },
    /// An affine system intersected with `[eps, 1 - eps]`, via Dykstra.
    Affine { sys: ConstraintSystem, eps: f64, tol: f64, max_iter: usize },
}

/// A projected point and whether the projection converged.
#[derive(Debug, Clone)]
pub struct Projected {
    pub point: WeightVector,
    pub converged: bool,
}

impl FeasibleRegion {
    pub fn affine(sys: ConstraintSystem, eps: f64) -> Self {
        Self::Affine { sys, eps, tol: DYKSTRA_TOL, max_iter: DYKSTRA_MAX_ITER }
    }

    pub fn eps(&self) -> f64 {
        match self {
            Self::Blocks { eps } | Self::Affine { eps, .. } => *eps,
        }
    }

    /// The same region with a different lower bound.
    pub fn with_eps(&self, new_eps: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Blocks { eps } | Self::Affine { eps, .. } => *eps = new_eps,
        }
        out
    }

    pub fn project(&self, g: &Graph, x: &WeightVector) -> Result<Projected> {
        match self {
            Self::Blocks { eps } => Ok(Projected { point: project_blocks(g, x, *eps)?, converged: true }),
            Self::Affine { sys, eps, tol, max_iter } => {
                let out = dykstra_project(x, sys, *eps, *tol, *max_iter);
                Ok(Projected { point: out.point, converged: out.converged })
            }
        }
    }

    /// Largest violation of the equality constraints and the lower bound.
    pub fn residual(&self, g: &Graph, x: &WeightVector) -> f64 {
        let below = x.iter().map(|&v| (self.eps() - v).max(0.0)).fold(0.0, f64::max);
        let eq = match self {
            Self::Blocks { .. } => g.block_sum_residual(x),
            Self::Affine { sys, .. } => sys.residual(x),
        };
        eq.max(below)
    }
}
