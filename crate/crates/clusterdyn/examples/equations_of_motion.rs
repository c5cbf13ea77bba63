//! Closed observable equations for dissipative cluster dynamics.
//!
//! In the interaction frame, the expectation of a Pauli string obeys a
//! small closed linear system: each `X` or `Y` letter contributes a
//! half-integer multiple of `(α+β)` to the decay rate, and measured
//! neighbours source `(α−β)`-weighted partner observables. This example
//! prints the system for a readout step, solves it against dense Lindblad
//! integration, and shows the leg-count scaling on star lattices.
//!
//! Run with `cargo run --release --example equations_of_motion`.

use std::f64::consts::PI;

use clusterdyn::dynamics::{self, BathSpec, SystemParams};
use clusterdyn::eom::{build_eom, EomContext, MeasuredBasis, SiteRole};
use clusterdyn::pauli::{Lattice, PauliOp, PauliString};
use clusterdyn::qcore::DensityMatrix;

fn main() -> clusterdyn::Result<()> {
    let (alpha, beta) = (0.02, 0.005);

    // Readout step: site 0 already measured in the equatorial plane,
    // site 1 carries the logical state.
    let ctx = EomContext::new(
        Lattice::line(2)?,
        vec![SiteRole::Measured(MeasuredBasis::XyPlane), SiteRole::Logical],
    )?
    .with_site_bloch(1, [0.3, -0.2, 0.5])?;

    println!("readout step (site 0 measured, site 1 logical):");
    for op in [PauliOp::X, PauliOp::Y, PauliOp::Z] {
        let sys = build_eom(&PauliString::single(1, op), &ctx, alpha, beta)?;
        print!("{sys}");
    }

    // Solving the system matches dense Lindblad evolution of the full
    // lattice state, observable by observable.
    let lattice = Lattice::line(3)?;
    let blochs = [[0.3, -0.2, 0.5], [0.1, 0.4, -0.3], [-0.5, 0.2, 0.1]];
    let mut all = EomContext::all_logical(lattice.clone());
    for (site, r) in blochs.iter().enumerate() {
        all = all.with_site_bloch(site, *r)?;
    }
    let params = SystemParams::new(1.0, lattice)?;
    let bath = BathSpec::single(alpha, beta)?;
    let factors: Vec<_> = blochs
        .iter()
        .map(|r| DensityMatrix::from_bloch(*r).unwrap().into_matrix())
        .collect();
    let rho0 = DensityMatrix::product(&factors)?;

    println!();
    println!("three-site line vs dense integration at t = tau:");
    let t = 2.0 * PI;
    let rho_t = dynamics::exact_evolve(&params, &bath, &rho0, t)?;
    let sigma = dynamics::to_interaction_picture(&params, &rho_t, t)?;
    for m in [
        PauliString::single(0, PauliOp::X),
        PauliString::single(1, PauliOp::Y),
        PauliString::single(1, PauliOp::X).multiply(&PauliString::single(2, PauliOp::Z)),
    ] {
        let predicted = build_eom(&m, &all, alpha, beta)?.solve(t)?[0];
        let dense = sigma.expectation(&m)?.re;
        println!("  <{m}>: equations {predicted:+.9}, dense {dense:+.9}");
    }

    // Star lattices: the X decay rate grows as (k+2)/2 with the number of
    // measured legs, the Y rate as (k+1)/2.
    println!();
    println!("star lattices (center logical, k measured legs):");
    for k in 1..=4usize {
        let edges: Vec<_> = (1..=k).map(|j| (0, j)).collect();
        let mut roles = vec![SiteRole::Measured(MeasuredBasis::XyPlane); k + 1];
        roles[0] = SiteRole::Logical;
        let ctx = EomContext::new(Lattice::custom(k + 1, edges)?, roles)?
            .with_site_bloch(0, [0.4, 0.1, -0.2])?;
        let sys_x = build_eom(&PauliString::single(0, PauliOp::X), &ctx, alpha, beta)?;
        let sys_y = build_eom(&PauliString::single(0, PauliOp::Y), &ctx, alpha, beta)?;
        println!(
            "  k = {k}: X decays at {:.1}*(alpha+beta), Y at {:.1}*(alpha+beta), {} variables in the X closure",
            -sys_x.coefficient(0, 0).sum_rate,
            -sys_y.coefficient(0, 0).sum_rate,
            sys_x.n_vars()
        );
    }
    Ok(())
}
