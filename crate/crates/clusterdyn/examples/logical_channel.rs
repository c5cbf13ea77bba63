//! The storage channel seen by an encoded qubit.
//!
//! One clock step of encoded storage acts on the logical qubit as a Pauli
//! channel whose eigenvalues are powers of a single decay factor
//! `w = e^{−(α+β)π/Δ}`: `(w³, w², w)` on a line and `(w⁷, w⁶, w)` on a
//! cubic lattice. This example tabulates the channel families, recovers
//! the line channel by process tomography of the dense three-site wire,
//! and composes steps into a multi-hop chain.
//!
//! Run with `cargo run --release --example logical_channel`.

use clusterdyn::dynamics::BathSpec;
use clusterdyn::mbqc::{
    clock_step_decay, extract_channel, logical_channel, one_timestep_logical, ChannelVariant,
    WireConfig,
};

fn main() -> clusterdyn::Result<()> {
    println!("channel probabilities [p_I, p_X, p_Y, p_Z]:");
    println!("{:>6} {:>34} {:>34}", "w", "line", "cubic");
    for w in [1.0, 0.9, 0.7, 0.5] {
        let line = logical_channel(w, ChannelVariant::Line)?;
        let cubic = logical_channel(w, ChannelVariant::Cubic)?;
        let fmt = |p: [f64; 4]| {
            format!("[{:.4}, {:.4}, {:.4}, {:.4}]", p[0], p[1], p[2], p[3])
        };
        println!(
            "{w:>6.2} {:>34} {:>34}",
            fmt(line.probabilities()),
            fmt(cubic.probabilities())
        );
    }

    // Tomography of the dense pipeline: strip the known hop gates from one
    // wire step and read off the remaining Pauli channel.
    let (alpha, beta) = (0.05, 0.0);
    let bath = BathSpec::single(alpha, beta)?;
    let w = clock_step_decay(alpha, beta, 1.0);
    let config = WireConfig::clock_step(bath);
    let estimate = extract_channel(|chi| one_timestep_logical(&config, (0, 0), chi))?;
    let expected = logical_channel(w, ChannelVariant::Line)?;
    println!();
    println!("tomography of one dense wire step at alpha = {alpha} (w = {w:.6}):");
    println!("  recovered   {:?}", estimate.channel.probabilities());
    println!("  closed form {:?}", expected.probabilities());
    println!("  residual    {:.2e}", estimate.residual);

    // Pauli channels compose by multiplying eigenvalues: k identical steps
    // give the single-step family evaluated at w^k.
    let step = logical_channel(w, ChannelVariant::Line)?;
    let mut chain = step.clone();
    for _ in 1..3 {
        chain = chain.compose(&step);
    }
    let direct = logical_channel(w.powi(3), ChannelVariant::Line)?;
    println!();
    println!("three composed steps vs closed form at w^3:");
    println!("  composed    {:?}", chain.eigenvalues());
    println!("  closed form {:?}", direct.eigenvalues());
    Ok(())
}
