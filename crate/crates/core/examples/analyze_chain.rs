//! Stationary distribution, Kemeny constant, MFPTs and effective resistance
//! of a few small chains.
//!
//! cargo run --example analyze_chain

use chainopt::chain::{connectivity_objective, effective_resistance, ChainAnalytics, ConnectivityWeights};
use chainopt::graph::transition_matrix;
use chainopt::instances;

fn main() -> chainopt::Result<()> {
    for (name, g) in [
        ("directed 3-cycle", instances::directed_cycle(3)),
        ("undirected 5-cycle", instances::undirected_cycle(5)),
        ("complete K4", instances::complete(4)),
        ("star on 5 nodes", instances::star(5)),
    ] {
        let x = g.uniform_weights();
        let p = transition_matrix(&g, &x)?;
        let a = ChainAnalytics::new(&p)?;
        println!("{name}");
        println!("  pi = {:.4}", a.pi.transpose());
        println!("  K = {:.4}", a.kemeny());
        println!("  S(unit) = {:.4}", connectivity_objective(&p, &ConnectivityWeights::Unit)?);
        println!("  S(kemeny) = {:.4}", connectivity_objective(&p, &ConnectivityWeights::Kemeny)?);
        match effective_resistance(&g, &x) {
            Ok((_, total)) => println!("  R_tot = {total:.4}"),
            Err(e) => println!("  R_tot unavailable: {e}"),
        }
    }
    let g = instances::directed_cycle(3);
    let p = transition_matrix(&g, &g.uniform_weights())?;
    println!("MFPT matrix of the 3-cycle:{:.1}", ChainAnalytics::new(&p)?.mfpt);
    Ok(())
}
