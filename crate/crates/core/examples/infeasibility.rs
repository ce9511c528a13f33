//! Why the perturbation must live in the null space: a naive coordinate
//! perturbation leaves the row-stochastic matrices, a null-space one does not.
//!
//! cargo run --example infeasibility

use chainopt::instances;
use chainopt::spsa::infeasibility_demo;
use nalgebra::DVector;

fn main() -> chainopt::Result<()> {
    let g = instances::complete(3);
    let x = g.uniform_weights();
    let naive = DVector::from_vec(vec![1.0, 1.0, -1.0, 1.0, 1.0, 1.0]);
    let reduced = DVector::from_vec(vec![1.0, 1.0, 1.0]);
    let r = infeasibility_demo(&g, &x, &naive, &reduced, 0.01)?;
    println!("naive perturbation: row sums {:?}, in simplex: {}", r.naive_row_sums, r.naive_in_simplex);
    println!("null-space perturbation: row sums {:?} / {:?}, in simplex: {}", r.constrained_row_sums[0], r.constrained_row_sums[1], r.constrained_in_simplex);
    Ok(())
}
