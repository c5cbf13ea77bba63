//! Fault-tolerance budgets: how warm, how noisy, and how strongly cooled
//! the hardware may be.
//!
//! Preparation errors (thermal excitation of each site) and storage errors
//! (one clock step of the cubic-lattice channel) combine into a single
//! error weight `q = p_prep + (2/3) p_s`, which must stay below the
//! fault-tolerance threshold `q* = 0.0293`. This example evaluates the
//! budget at a few operating points, then solves for the three headline
//! thresholds.
//!
//! Run with `cargo run --release --example thresholds`.

use clusterdyn::dynamics::BathSpec;
use clusterdyn::faulttol::{
    combined_q, coupling_threshold, goldilocks, temperature_threshold, SolvedQuantity,
    THRESHOLD_Q,
};

fn main() -> clusterdyn::Result<()> {
    println!("error budgets (q* = {THRESHOLD_Q}):");
    println!(
        "{:>24} {:>10} {:>10} {:>10} {:>6}",
        "operating point", "p_prep", "p_s", "q", "ok?"
    );
    for (label, bath) in [
        ("cold, weak coupling", BathSpec::single(2e-3, 0.0)?),
        ("cold, strong coupling", BathSpec::single(8e-3, 0.0)?),
        ("warm bath", BathSpec::single(2e-3, 2.0e-4)?),
        ("cooled, small leak", BathSpec::two_bath(2.26e-3, 3.4e-5)?),
    ] {
        let budget = combined_q(&bath, 1.0)?;
        println!(
            "{label:>24} {:>10.5} {:>10.5} {:>10.5} {:>6}",
            budget.p_prep,
            budget.p_s,
            budget.q,
            if budget.q < THRESHOLD_Q { "yes" } else { "no" }
        );
    }

    // Threshold 1: preparation errors alone cap the temperature.
    let report = temperature_threshold();
    if let SolvedQuantity::Temperature { k_t_over_delta } = report.solved {
        println!();
        println!(
            "temperature threshold: kT*/Delta = {k_t_over_delta:.6} \
             (residual {:.1e}, {} iterations)",
            report.residual, report.iterations
        );
    }

    // Threshold 2: at zero temperature, storage errors alone cap the
    // coupling strength.
    let report = coupling_threshold();
    if let SolvedQuantity::Coupling { rate_over_delta } = report.solved {
        println!(
            "coupling threshold:    (alpha+beta)*/Delta = {rate_over_delta:.4e} \
             (residual {:.1e}, {} iterations)",
            report.residual, report.iterations
        );
    }

    // Threshold 3: with a cooling bath fighting a hot background, the
    // tolerable background is largest at one specific coupling.
    let report = goldilocks();
    if let SolvedQuantity::CoolingOptimum { gamma_over_delta, alpha_bath_over_delta } =
        report.solved
    {
        println!(
            "two-bath optimum:      gamma*/Delta = {gamma_over_delta:.3e} at \
             alpha_bath*/Delta = {alpha_bath_over_delta:.3e} (residual {:.1e})",
            report.residual
        );
    }
    Ok(())
}
