//! The projection operators: scaled simplex, affine subspace, Dykstra on
//! their intersection with a box, and the feasible regions used by SPSA.
//!
//! cargo run --example projections

use chainopt::directions::{stationary_system, symmetric_system, ConstraintSystem};
use chainopt::instances;
use chainopt::projection::{dykstra_project, project_affine, project_scaled_simplex, FeasibleRegion};
use nalgebra::{dmatrix, dvector, DVector};

fn main() -> chainopt::Result<()> {
    let v = [0.9, -0.2, 0.6, 0.1];
    println!("simplex, eps = 0.05: {:?}", project_scaled_simplex(&v, 0.05)?);

    let sys = ConstraintSystem::from_rows(dmatrix![1.0, 1.0, 0.0; 0.0, 1.0, 1.0], dvector![1.0, 1.0])?;
    let x = dvector![0.8, 0.8, -0.3];
    println!("affine: {:.4}", project_affine(&x, &sys).transpose());
    let d = dykstra_project(&x, &sys, 0.01, 1e-12, 100_000);
    println!("dykstra with box [0.01, 0.99]: {:.4} ({} iterations)", d.point.transpose(), d.iterations);

    let g = instances::grid(2, 3);
    let raw = DVector::from_fn(g.edge_count(), |e, _| 0.1 + (e % 4) as f64 * 0.3);
    let target = DVector::from_element(6, 1.0 / 6.0);
    for (name, region) in [
        ("row simplex", FeasibleRegion::Blocks { eps: 1e-4 }),
        ("stationary", FeasibleRegion::affine(stationary_system(&g, &target)?, 1e-4)),
        ("symmetric", FeasibleRegion::affine(symmetric_system(&g)?, 1e-4)),
    ] {
        let p = region.project(&g, &raw)?;
        println!(
            "{name:<12} distance {:.4}, residual {:.1e}, min weight {:.1e}",
            (&p.point - &raw).norm(),
            region.residual(&g, &p.point),
            p.point.min()
        );
    }
    Ok(())
}
