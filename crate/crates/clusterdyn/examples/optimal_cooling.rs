//! The cooling trade-off: stronger coupling prepares better blanks but
//! decoheres the stored qubit faster.
//!
//! With a cold bath at rate `α_bath` competing against a hot background at
//! rate `γ`, the wire fidelity against the ideal ground-state image is
//! `F = ½(1 + m²w)` with `m = α_bath/(α_bath + 2γ)` and
//! `w = e^{−(α_bath + 2γ)π/Δ}`: too little cooling leaves the blanks
//! thermal, too much kills the stored coherence. The interior optimum is
//! `α* = −γ + √(γ² + 4γ/π)`.
//!
//! Run with `cargo run --release --example optimal_cooling`.

use std::f64::consts::{FRAC_PI_2, PI};

use clusterdyn::mbqc::{cooling_scan, IdealOutput};

fn main() -> clusterdyn::Result<()> {
    let grid: Vec<f64> = (0..17).map(|i| 10f64.powf(-5.0 + (i as f64) / 4.0)).collect();

    println!("wire fidelity vs cooling coupling (ground-state image):");
    print!("{:>12}", "alpha_bath");
    let gammas = [1e-4, 1e-3];
    for gamma in gammas {
        print!(" {:>12}", format!("gamma={gamma:.0e}"));
    }
    println!();

    let scans: Vec<_> = gammas
        .iter()
        .map(|&gamma| cooling_scan(gamma, &grid, FRAC_PI_2, 1.0, IdealOutput::GroundImage))
        .collect::<Result<_, _>>()?;
    for (row, &alpha_bath) in grid.iter().enumerate() {
        print!("{alpha_bath:>12.2e}");
        for scan in &scans {
            print!(" {:>12.6}", scan[row].fidelity);
        }
        println!();
    }

    println!();
    for (scan, gamma) in scans.iter().zip(gammas) {
        let best = scan
            .iter()
            .max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
            .expect("non-empty scan");
        let predicted = -gamma + (gamma * gamma + 4.0 * gamma / PI).sqrt();
        println!(
            "gamma = {gamma:.0e}: peak F = {:.6} at alpha_bath = {:.2e} \
             (closed-form optimum {predicted:.2e})",
            best.fidelity, best.alpha_bath
        );
    }
    Ok(())
}
