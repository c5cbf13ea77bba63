//! Cluster-state stabilizers on small lattices.
//!
//! Builds the stabilizer generators `K_i = X_i ⊗_{j∼i} Z_j` of a few
//! lattices, checks that the entangled ground state is their joint `+1`
//! eigenstate, and shows how thermal occupation of the excited branch
//! weakens every stabilizer expectation uniformly.
//!
//! Run with `cargo run --release --example stabilizers`.

use clusterdyn::pauli::Lattice;
use clusterdyn::qcore::thermal_cluster_state;

fn main() -> clusterdyn::Result<()> {
    for (name, lattice) in [
        ("three-site line", Lattice::line(3)?),
        ("2x3 square patch", Lattice::square(2, 3)?),
    ] {
        println!(
            "{name}: {} sites, {} edges",
            lattice.n_sites(),
            lattice.edges().count()
        );
        for site in 0..lattice.n_sites() {
            println!("  K_{site} = {}", lattice.stabilizer(site)?);
        }

        // The ground cluster state: every stabilizer pinned to +1.
        let ground = thermal_cluster_state(&lattice, 0.0)?;
        let worst = lattice
            .stabilizers()
            .iter()
            .map(|k| (ground.expectation(k).unwrap().re - 1.0).abs())
            .fold(0.0f64, f64::max)
;
        println!("  ground state: max |<K_i> - 1| = {worst:.2e}");

        // A thermal state mixes in the excited branch per site: each
        // stabilizer expectation drops to 1 - 2 p_exc.
        let p_exc = 0.2;
        let thermal = thermal_cluster_state(&lattice, p_exc)?;
        print!("  thermal (p_exc = {p_exc}): <K_i> =");
        for k in lattice.stabilizers() {
            print!(" {:+.3}", thermal.expectation(&k)?.re);
        }
        println!("  (expected {:+.3})", 1.0 - 2.0 * p_exc);
        println!();
    }

    // Stabilizers always commute and square to the identity.
    let lattice = Lattice::square(3, 3)?;
    let ks = lattice.stabilizers();
    let all_commute = ks
        .iter()
        .enumerate()
        .all(|(i, a)| ks[i + 1..].iter().all(|b| a.commutes(b)));
    println!(
        "3x3 patch: {} stabilizers, pairwise commuting: {all_commute}",
        ks.len()
    );
    Ok(())
}
