//! Thermal cluster states across temperature.
//!
//! The Gibbs state of the cluster Hamiltonian factorizes site by site once
//! it is rotated out of the entangling frame: each site carries the mixture
//! `(1 − p)|+⟩⟨+| + p|−⟩⟨−|` with `p = 1/(1 + e^{Δ/kT})`. This example
//! sweeps the temperature and reports the excitation probability, the
//! fidelity against the zero-temperature cluster state, and the round trip
//! through the bath description.
//!
//! Run with `cargo run --release --example thermal_state`.

use clusterdyn::dynamics::BathSpec;
use clusterdyn::pauli::Lattice;
use clusterdyn::qcore::{excitation_probability, fidelity, thermal_cluster_state};

fn main() -> clusterdyn::Result<()> {
    let lattice = Lattice::line(4)?;
    let delta = 1.0;
    let ground = thermal_cluster_state(&lattice, 0.0)?;

    println!("four-site line, Delta = {delta}");
    println!("{:>8} {:>10} {:>12}", "kT/Delta", "p_exc", "F(ground)");
    for k_t in [0.0, 0.1, 0.2, 0.2857, 0.5, 1.0, 2.0] {
        let p_exc = excitation_probability(delta, k_t);
        let state = thermal_cluster_state(&lattice, p_exc)?;
        let f = fidelity(&state, &ground)?;
        println!("{k_t:>8.4} {p_exc:>10.6} {f:>12.6}");
    }

    // A bath in detailed balance at temperature kT drives the system to
    // exactly this thermal state: the bath's equilibrium excitation
    // probability closes the loop.
    let bath = BathSpec::single(0.02, 0.005)?;
    let p_eq = bath.excitation_probability();
    let k_t_eq = bath.temperature(delta);
    println!();
    println!(
        "bath (alpha, beta) = (0.02, 0.005): p_exc = {p_eq:.4}, kT/Delta = {k_t_eq:.4}, \
         round trip p_exc = {:.4}",
        excitation_probability(delta, k_t_eq)
    );
    Ok(())
}
