//! Measurement-based computation on the noisy cluster.
//!
//! This module works at the *logical* level: Pauli channels describing one
//! clock step of encoded decoherence, the three-qubit wire experiment that
//! realizes a single-qubit X rotation by two adaptive measurements, general
//! measurement patterns with byproduct bookkeeping, process tomography for
//! recovering a channel from experiment outputs, and the cooling-rate scan
//! that trades preparation quality against storage noise.
//!
//! Conventions used throughout:
//! * An XY-plane measurement at angle `φ` projects outcome 0 onto
//!   `(|0⟩ + e^{iφ}|1⟩)/√2`.
//! * One measurement hop with outcome `s` at basis angle `η` applies the
//!   physical gate `X^s · X(−η) · H` to the encoded qubit, where
//!   `X(θ) = exp(−iθX/2)`.
//! * Byproducts are tracked as `Z^a X^b`; a hop with outcome `s` updates
//!   `(a, b) ← (b, (a + s) mod 2)`, and realizing an intended rotation
//!   `X(θ)` requires measuring at `η = −(−1)^b θ`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dynamics::{exact_evolve, BathSpec, LindbladSystem, Picture, SystemParams};
use crate::linalg::{self, CMat, C_ZERO};
use crate::pauli::{Lattice, PauliOp};
use crate::qcore::{
    excitation_probability, fidelity, plus_minus_mixture, CzEntangler, DensityMatrix, Measurement,
};
use crate::{Error, Result};

/// Tolerance on probability normalization for channel constructors.
pub const CHANNEL_NORMALIZATION_TOL: f64 = 1e-12;

/// Tomography residual above which a [`ChannelEstimate`] is flagged as not
/// well described by a Pauli channel.
pub const CHANNEL_RESIDUAL_FLAG: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Pauli channels
// ---------------------------------------------------------------------------

/// A single-qubit Pauli channel `ρ ↦ p_I ρ + p_X XρX + p_Y YρY + p_Z ZρZ`.
///
/// The channel is diagonal in the Pauli transfer representation with
/// eigenvalues `λ_x = p_I + p_X − p_Y − p_Z` (and cyclic analogues), each in
/// `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PauliChannel {
    p_identity: f64,
    p_x: f64,
    p_y: f64,
    p_z: f64,
}

impl PauliChannel {
    /// The identity channel.
    pub fn identity() -> Self {
        Self { p_identity: 1.0, p_x: 0.0, p_y: 0.0, p_z: 0.0 }
    }

    /// Build from the four conjugation probabilities `[p_I, p_X, p_Y, p_Z]`.
    ///
    /// Each probability must be non-negative and the sum must equal 1 within
    /// [`CHANNEL_NORMALIZATION_TOL`].
    pub fn from_probabilities(probs: [f64; 4]) -> Result<Self> {
        for (i, p) in probs.iter().enumerate() {
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "channel probability {i} is {p}; must be finite and non-negative"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > CHANNEL_NORMALIZATION_TOL {
            return Err(Error::InvalidParameter(format!(
                "channel probabilities sum to {sum}, expected 1 within {CHANNEL_NORMALIZATION_TOL:e}"
            )));
        }
        Ok(Self { p_identity: probs[0], p_x: probs[1], p_y: probs[2], p_z: probs[3] })
    }

    /// Build from the Bloch-axis eigenvalues `[λ_x, λ_y, λ_z]`.
    ///
    /// Fails if the eigenvalue triple does not correspond to a completely
    /// positive Pauli channel (some probability would be negative).
    pub fn from_eigenvalues(eigen: [f64; 3]) -> Result<Self> {
        let [lx, ly, lz] = eigen;
        let raw = [
            0.25 * (1.0 + lx + ly + lz),
            0.25 * (1.0 + lx - ly - lz),
            0.25 * (1.0 - lx + ly - lz),
            0.25 * (1.0 - lx - ly + lz),
        ];
        // Round-off from the affine transform may leave probabilities a hair
        // below zero; anything worse is a genuine CP violation.
        let mut probs = [0.0; 4];
        for (slot, p) in probs.iter_mut().zip(raw) {
            if p < -CHANNEL_NORMALIZATION_TOL {
                return Err(Error::InvalidParameter(format!(
                    "eigenvalues {eigen:?} give negative probability {p}; not completely positive"
                )));
            }
            *slot = p.max(0.0);
        }
        Self::from_probabilities(probs)
    }

    /// The probabilities `[p_I, p_X, p_Y, p_Z]`.
    pub fn probabilities(&self) -> [f64; 4] {
        [self.p_identity, self.p_x, self.p_y, self.p_z]
    }

    /// The Bloch-axis eigenvalues `[λ_x, λ_y, λ_z]`.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let [pi, px, py, pz] = self.probabilities();
        [pi + px - py - pz, pi - px + py - pz, pi - px - py + pz]
    }

    /// Apply the channel to a 2×2 density matrix.
    pub fn apply_matrix(&self, rho: &CMat) -> CMat {
        let mut out = rho * Complex64::new(self.p_identity, 0.0);
        for (p, op) in [(self.p_x, PauliOp::X), (self.p_y, PauliOp::Y), (self.p_z, PauliOp::Z)] {
            if p == 0.0 {
                continue;
            }
            let m = linalg::pauli_2x2(op);
            out = out + m.dot(rho).dot(&m) * Complex64::new(p, 0.0);
        }
        out
    }

    /// Apply the channel to a single-qubit state.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n_qubits() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "Pauli channel acts on one qubit, state has {}",
                rho.n_qubits()
            )));
        }
        DensityMatrix::from_matrix(1, self.apply_matrix(rho.matrix()))
    }

    /// Apply the channel to a Bloch vector (componentwise contraction).
    pub fn apply_bloch(&self, r: [f64; 3]) -> [f64; 3] {
        let [lx, ly, lz] = self.eigenvalues();
        [lx * r[0], ly * r[1], lz * r[2]]
    }

    /// Sequential composition (order-independent: Pauli channels commute).
    pub fn compose(&self, other: &Self) -> Self {
        // Index the Pauli group as I=0, X=1, Y=2, Z=3; conjugations compose
        // by the group product (phases drop out of conjugation).
        const PRODUCT: [[usize; 4]; 4] =
            [[0, 1, 2, 3], [1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 1, 0]];
        let a = self.probabilities();
        let b = other.probabilities();
        let mut out = [0.0; 4];
        for (i, pa) in a.iter().enumerate() {
            for (j, pb) in b.iter().enumerate() {
                out[PRODUCT[i][j]] += pa * pb;
            }
        }
        Self { p_identity: out[0], p_x: out[1], p_y: out[2], p_z: out[3] }
    }
}

/// Which lattice geometry's wire decay pattern a logical channel follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelVariant {
    /// Linear-cluster wire: eigenvalues `(λ_z, λ_y, λ_x) = (w, w², w³)`.
    Line,
    /// Cubic-lattice wire: eigenvalues `(λ_z, λ_y, λ_x) = (w, w⁶, w⁷)`.
    Cubic,
}

/// Per-clock-step decay factor `w = exp(−(α+β)·τ/2) = exp(−(α+β)π/Δ)`.
pub fn clock_step_decay(alpha: f64, beta: f64, delta: f64) -> f64 {
    (-(alpha + beta) * PI / delta).exp()
}

/// The logical Pauli channel for one clock step of encoded storage, as a
/// function of the decay factor `w ∈ (0, 1]`.
pub fn logical_channel(w: f64, variant: ChannelVariant) -> Result<PauliChannel> {
    if !w.is_finite() || w <= 0.0 || w > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "decay factor w must lie in (0, 1], got {w}"
        )));
    }
    let b = match variant {
        ChannelVariant::Line => w * w,
        ChannelVariant::Cubic => w.powi(6),
    };
    PauliChannel::from_probabilities([
        0.25 * (1.0 + w) * (1.0 + b),
        0.25 * (1.0 - w) * (1.0 - b),
        0.25 * (1.0 - w) * (1.0 + b),
        0.25 * (1.0 + w) * (1.0 - b),
    ])
}

// ---------------------------------------------------------------------------
// Closed-form predictions for the three-qubit wire
// ---------------------------------------------------------------------------

/// Closed-form Bloch vector of the corrected wire output after storing the
/// encoded qubit for time `t` between the two measurements.
///
/// `r` is the logical Bloch vector at the time of the first measurement.
/// The three components decay at rates `(α+β)/2`, `(α+β)`, and `3(α+β)/2`
/// while the stored coherences precess at `Δ`; the formula is exact for a
/// zero-temperature bath (`β = 0`), where the two blank sites are
/// stationary. For `β > 0` the finite-temperature blanks additionally damp
/// the signal (see `dense_pipeline_matches_bloch_formula` and the thermal
/// companion test for the exact behaviour).
pub fn xrot_output_bloch(r: [f64; 3], t: f64, alpha: f64, beta: f64, delta: f64) -> [f64; 3] {
    let rate = alpha + beta;
    let c = (delta * t).cos();
    let s = (delta * t).sin();
    let [x, y, z] = r;
    [
        x * (-0.5 * rate * t).exp() * c,
        (y * c + z * s) * (-rate * t).exp() * c,
        (z * c - y * s) * (-1.5 * rate * t).exp(),
    ]
}

/// Closed-form fidelity of the wire output against the ideal image of a
/// `|+⟩` input, for a zero-temperature bath (`β = 0`) with decay rate
/// `alpha`: `F = ½(1 + e^{−α t/2} cos Δt)`.
pub fn xrot_fidelity(alpha: f64, t: f64, delta: f64) -> f64 {
    0.5 * (1.0 + (-0.5 * alpha * t).exp() * (delta * t).cos())
}

// ---------------------------------------------------------------------------
// Evolution plumbing shared by the experiments
// ---------------------------------------------------------------------------

/// How to integrate the open-system dynamics between measurement events.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EvolutionMethod {
    /// Exact site-local Kraus channel (conjugated through the entangler).
    #[default]
    Exact,
    /// Fixed-step RK4 integration of the master equation; `step = None`
    /// uses the system default of τ/2000.
    Rk4 { step: Option<f64> },
}

pub(crate) fn evolve_state(
    params: &SystemParams,
    bath: &BathSpec,
    state: &DensityMatrix,
    t: f64,
    method: EvolutionMethod,
) -> Result<DensityMatrix> {
    if t == 0.0 {
        return Ok(state.clone());
    }
    match method {
        EvolutionMethod::Exact => exact_evolve(params, bath, state, t),
        EvolutionMethod::Rk4 { step } => {
            let system = LindbladSystem::new(params, bath, Picture::Original)?;
            system.evolve(state, t, step)
        }
    }
}

/// How measurement outcomes are chosen during a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutcomePolicy {
    /// Use the given outcomes in event order (error if any is impossible).
    Forced(Vec<u8>),
    /// Sample outcomes from the Born rule with a seeded generator.
    Sampled { seed: u64 },
}

enum OutcomeSource {
    Forced(Vec<u8>),
    Sampled(Box<StdRng>),
}

impl OutcomeSource {
    fn new(policy: &OutcomePolicy, n_events: usize) -> Result<Self> {
        match policy {
            OutcomePolicy::Forced(outcomes) => {
                if outcomes.len() != n_events {
                    return Err(Error::InvalidParameter(format!(
                        "{} forced outcomes supplied for {} measurement events",
                        outcomes.len(),
                        n_events
                    )));
                }
                if let Some(bad) = outcomes.iter().find(|s| **s > 1) {
                    return Err(Error::InvalidParameter(format!(
                        "outcomes must be 0 or 1, got {bad}"
                    )));
                }
                Ok(Self::Forced(outcomes.clone()))
            }
            OutcomePolicy::Sampled { seed } => {
                Ok(Self::Sampled(Box::new(StdRng::seed_from_u64(*seed))))
            }
        }
    }

    fn measure(
        &mut self,
        state: &DensityMatrix,
        measurement: &Measurement,
        event: usize,
    ) -> Result<(u8, f64, DensityMatrix)> {
        match self {
            Self::Forced(outcomes) => {
                let s = outcomes[event];
                let (p, post) = state.measure_forced(measurement, s)?;
                Ok((s, p, post))
            }
            Self::Sampled(rng) => state.measure_sampled(measurement, rng),
        }
    }
}

// ---------------------------------------------------------------------------
// The three-qubit X-rotation experiment
// ---------------------------------------------------------------------------

/// One gate of the intended logical circuit, in application order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalGate {
    Hadamard,
    XRotation { angle: f64 },
}

/// Classical record of a logical run: the outcome transcript, the byproduct
/// exponents `(a, b)` of the pending correction `Z^a X^b`, and the intended
/// gate sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalRecord {
    pub outcomes: Vec<u8>,
    pub probabilities: Vec<f64>,
    pub byproduct_z: u8,
    pub byproduct_x: u8,
    pub intended: Vec<LogicalGate>,
}

impl LogicalRecord {
    /// Joint probability of the recorded outcome branch.
    pub fn joint_probability(&self) -> f64 {
        self.probabilities.iter().product()
    }
}

/// Configuration of the three-qubit wire experiment: the intended rotation
/// angle, the wait before the first measurement, the storage time between
/// the measurements, the bath, and the preparation temperature of the two
/// blank sites.
#[derive(Debug, Clone)]
pub struct XRotConfig {
    pub theta: f64,
    pub t_before: f64,
    pub t_store: f64,
    pub delta: f64,
    pub bath: BathSpec,
    pub prep_k_t: f64,
    pub method: EvolutionMethod,
}

impl XRotConfig {
    /// A closed-system, zero-temperature configuration with `Δ = 1`,
    /// no initial wait, and the given rotation angle and storage time.
    pub fn new(theta: f64, t_store: f64) -> Self {
        Self {
            theta,
            t_before: 0.0,
            t_store,
            delta: 1.0,
            bath: BathSpec::closed(),
            prep_k_t: 0.0,
            method: EvolutionMethod::Exact,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rotation angle must be finite, got {}",
                self.theta
            )));
        }
        for (name, value) in [("t_before", self.t_before), ("t_store", self.t_store)] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        if self.prep_k_t < 0.0 || self.prep_k_t.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "preparation temperature must be non-negative, got {}",
                self.prep_k_t
            )));
        }
        Ok(())
    }
}

/// Result of one branch of the wire experiment.
#[derive(Debug, Clone)]
pub struct XRotOutcome {
    pub record: LogicalRecord,
    /// Byproduct-corrected single-qubit output state.
    pub output: DensityMatrix,
    /// Uhlmann fidelity against `X(θ) ρ_in X(θ)†`.
    pub fidelity: f64,
}

fn entangled_wire_state(
    input: &DensityMatrix,
    delta: f64,
    prep_k_t: f64,
) -> Result<(SystemParams, DensityMatrix)> {
    if input.n_qubits() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "wire input must be a single qubit, got {}",
            input.n_qubits()
        )));
    }
    let params = SystemParams::new(delta, Lattice::line(3)?)?;
    let blank = plus_minus_mixture(excitation_probability(delta, prep_k_t));
    let product =
        DensityMatrix::product(&[input.matrix().clone(), blank.clone(), blank])?;
    let entangler = CzEntangler::new(params.lattice())?;
    Ok((params, entangler.apply(&product)?))
}

fn byproduct_operator(z_exp: u8, x_exp: u8) -> CMat {
    let mut m = linalg::identity(2);
    if z_exp & 1 == 1 {
        m = m.dot(&linalg::pauli_2x2(PauliOp::Z));
    }
    if x_exp & 1 == 1 {
        m = m.dot(&linalg::pauli_2x2(PauliOp::X));
    }
    m
}

/// Basis angle that realizes an intended rotation `X(θ)` through the next
/// hop, given the current X-byproduct exponent.
fn adaptive_angle(theta: f64, x_byproduct: u8) -> f64 {
    if x_byproduct & 1 == 1 {
        theta
    } else {
        -theta
    }
}

/// Run the three-qubit wire experiment realizing `X(θ)`.
///
/// The input qubit is entangled with two thermally prepared sites into a
/// three-site line cluster, the system evolves for `t_before`, site 0 is
/// measured in the X basis, the system evolves for `t_store`, site 1 is
/// measured at the adaptive angle, and the byproduct `Z^{s₁} X^{s₂}` is
/// undone on the reduced site-2 output. The reported fidelity compares the
/// corrected output to `X(θ) ρ_in X(θ)†`.
pub fn run_xrot_experiment(
    input: &DensityMatrix,
    config: &XRotConfig,
    policy: &OutcomePolicy,
) -> Result<XRotOutcome> {
    config.validate()?;
    let (params, mut state) = entangled_wire_state(input, config.delta, config.prep_k_t)?;
    let mut source = OutcomeSource::new(policy, 2)?;

    state = evolve_state(&params, &config.bath, &state, config.t_before, config.method)?;

    let mut byproduct = (0u8, 0u8);
    let mut outcomes = Vec::with_capacity(2);
    let mut probabilities = Vec::with_capacity(2);
    let mut intended = Vec::with_capacity(4);

    for (event, (site, theta)) in [(0usize, 0.0), (1usize, config.theta)].into_iter().enumerate() {
        if event == 1 {
            state = evolve_state(&params, &config.bath, &state, config.t_store, config.method)?;
        }
        let angle = adaptive_angle(theta, byproduct.1);
        let measurement = Measurement::XY { site, angle };
        let (s, p, post) = source.measure(&state, &measurement, event)?;
        state = post;
        byproduct = (byproduct.1, (byproduct.0 + s) & 1);
        outcomes.push(s);
        probabilities.push(p);
        intended.push(LogicalGate::Hadamard);
        intended.push(LogicalGate::XRotation { angle: theta });
    }

    let reduced = state.partial_trace(&[2])?;
    let correction = linalg::dagger(&byproduct_operator(byproduct.0, byproduct.1));
    let output = reduced.apply_unitary(&correction)?;
    let target = input.apply_unitary(&linalg::rot_x(config.theta))?;
    let fid = fidelity(&output, &target)?;

    Ok(XRotOutcome {
        record: LogicalRecord {
            outcomes,
            probabilities,
            byproduct_z: byproduct.0,
            byproduct_x: byproduct.1,
            intended,
        },
        output,
        fidelity: fid,
    })
}

/// The outcome-averaged corrected output of the wire experiment: the state
/// `Σ_branches p(branch) · ρ_corrected(branch)`, i.e. the channel the
/// experiment implements when outcomes are forgotten after correction.
pub fn xrot_channel_average(input: &DensityMatrix, config: &XRotConfig) -> Result<DensityMatrix> {
    config.validate()?;
    let (params, prepared) = entangled_wire_state(input, config.delta, config.prep_k_t)?;
    let prepared = evolve_state(&params, &config.bath, &prepared, config.t_before, config.method)?;
    averaged_wire_output(&params, &config.bath, &prepared, config.theta, config.t_store, config.method)
}

/// Outcome-averaged corrected site-2 output of a prepared three-site wire:
/// measure site 0 in X, evolve `t_store`, measure site 1 at the adaptive
/// angle for `theta`, undo `Z^{s₁} X^{s₂}` on the reduced output, and sum
/// the corrected branches weighted by their joint probabilities.
fn averaged_wire_output(
    params: &SystemParams,
    bath: &BathSpec,
    prepared: &DensityMatrix,
    theta: f64,
    t_store: f64,
    method: EvolutionMethod,
) -> Result<DensityMatrix> {
    let mut accumulated = Array2::from_elem((2, 2), C_ZERO);
    let mut total = 0.0;
    for s1 in 0..2u8 {
        let first = Measurement::XY { site: 0, angle: 0.0 };
        let (p1, after_first) = match prepared.measure_forced(&first, s1) {
            Ok(v) => v,
            Err(Error::ImpossibleOutcome { .. }) => continue,
            Err(e) => return Err(e),
        };
        let stored = evolve_state(params, bath, &after_first, t_store, method)?;
        let angle = adaptive_angle(theta, s1);
        for s2 in 0..2u8 {
            let second = Measurement::XY { site: 1, angle };
            let (p2, after_second) = match stored.measure_forced(&second, s2) {
                Ok(v) => v,
                Err(Error::ImpossibleOutcome { .. }) => continue,
                Err(e) => return Err(e),
            };
            let reduced = after_second.partial_trace(&[2])?;
            let correction = linalg::dagger(&byproduct_operator(s1, s2));
            let corrected = reduced.apply_unitary(&correction)?;
            let weight = p1 * p2;
            accumulated += &(corrected.matrix() * Complex64::new(weight, 0.0));
            total += weight;
        }
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidState(format!(
            "branch probabilities sum to {total}; expected 1"
        )));
    }
    let mut averaged = DensityMatrix::from_matrix(1, accumulated)?;
    averaged.renormalize();
    Ok(averaged)
}

// ---------------------------------------------------------------------------
// Fixed-angle wire pipeline and one-timestep tomography
// ---------------------------------------------------------------------------

/// Configuration of the fixed-angle wire pipeline: both measurement bases
/// are given directly, with no adaptive sign flips and no byproduct
/// correction on the output.
#[derive(Debug, Clone)]
pub struct WireConfig {
    pub angles: (f64, f64),
    pub t_before: f64,
    pub t_store: f64,
    pub delta: f64,
    pub bath: BathSpec,
    pub prep_k_t: f64,
    pub method: EvolutionMethod,
}

impl WireConfig {
    /// One clock step on the wire: both angles zero, storage time τ,
    /// zero-temperature preparation, `Δ = 1`.
    pub fn clock_step(bath: BathSpec) -> Self {
        Self {
            angles: (0.0, 0.0),
            t_before: 0.0,
            t_store: 2.0 * PI,
            delta: 1.0,
            bath,
            prep_k_t: 0.0,
            method: EvolutionMethod::Exact,
        }
    }
}

/// Run the wire pipeline with fixed measurement angles and forced outcomes.
/// Returns the joint outcome probability and the *uncorrected* reduced
/// site-2 output state.
pub fn run_wire_pipeline(
    input: &DensityMatrix,
    config: &WireConfig,
    outcomes: (u8, u8),
) -> Result<(f64, DensityMatrix)> {
    let (params, state) = entangled_wire_state(input, config.delta, config.prep_k_t)?;
    let state = evolve_state(&params, &config.bath, &state, config.t_before, config.method)?;
    let first = Measurement::XY { site: 0, angle: config.angles.0 };
    let (p1, state) = state.measure_forced(&first, outcomes.0)?;
    let state = evolve_state(&params, &config.bath, &state, config.t_store, config.method)?;
    let second = Measurement::XY { site: 1, angle: config.angles.1 };
    let (p2, state) = state.measure_forced(&second, outcomes.1)?;
    Ok((p1 * p2, state.partial_trace(&[2])?))
}

/// The gate one measurement hop applies to the encoded qubit: outcome `s`
/// at basis angle `η` gives `X^s · X(−η) · H`.
pub fn hop_gate(angle: f64, outcome: u8) -> CMat {
    let core = linalg::rot_x(-angle).dot(&linalg::hadamard());
    if outcome & 1 == 1 {
        linalg::pauli_2x2(PauliOp::X).dot(&core)
    } else {
        core
    }
}

/// The logical map of one storage step, isolated from the wire pipeline by
/// stripping the two known hop gates: with `g_k` the hop gate of
/// measurement `k`, this computes `g₂† · pipeline(g₁† χ g₁) · g₂`, which
/// equals the bare storage channel acting on `χ`.
pub fn one_timestep_logical(
    config: &WireConfig,
    outcomes: (u8, u8),
    chi: &DensityMatrix,
) -> Result<DensityMatrix> {
    let g1 = hop_gate(config.angles.0, outcomes.0);
    let g2 = hop_gate(config.angles.1, outcomes.1);
    let prepared = chi.apply_unitary(&linalg::dagger(&g1))?;
    let (_prob, raw) = run_wire_pipeline(&prepared, config, outcomes)?;
    raw.apply_unitary(&linalg::dagger(&g2))
}

// ---------------------------------------------------------------------------
// Process tomography
// ---------------------------------------------------------------------------

/// A Pauli channel recovered from tomography, with the residual distance of
/// the reconstruction from an exact Pauli channel.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelEstimate {
    pub channel: PauliChannel,
    /// Aggregate of off-diagonal transfer-matrix weight, non-unital and
    /// trace-non-preserving components, and clamped negative probability.
    pub residual: f64,
    /// True when `residual > CHANNEL_RESIDUAL_FLAG`.
    pub flagged: bool,
}

/// Recover the nearest Pauli channel to a single-qubit process by running it
/// on the four states `|0⟩, |1⟩, |+⟩, |+i⟩` and reading off the Pauli
/// transfer matrix.
pub fn extract_channel<F>(process: F) -> Result<ChannelEstimate>
where
    F: Fn(&DensityMatrix) -> Result<DensityMatrix>,
{
    let zero = DensityMatrix::from_bloch([0.0, 0.0, 1.0])?;
    let one = DensityMatrix::from_bloch([0.0, 0.0, -1.0])?;
    let plus = DensityMatrix::from_bloch([1.0, 0.0, 0.0])?;
    let plus_i = DensityMatrix::from_bloch([0.0, 1.0, 0.0])?;

    let out_zero = process(&zero)?.into_matrix();
    let out_one = process(&one)?.into_matrix();
    let out_plus = process(&plus)?.into_matrix();
    let out_plus_i = process(&plus_i)?.into_matrix();

    // Images of the Hermitian basis {I, X, Y, Z} by linearity.
    let image_i = &out_zero + &out_one;
    let image_z = &out_zero - &out_one;
    let image_x = &out_plus * Complex64::new(2.0, 0.0) - &image_i;
    let image_y = &out_plus_i * Complex64::new(2.0, 0.0) - &image_i;

    let sigma = [
        linalg::identity(2),
        linalg::pauli_2x2(PauliOp::X),
        linalg::pauli_2x2(PauliOp::Y),
        linalg::pauli_2x2(PauliOp::Z),
    ];
    let images = [image_i, image_x, image_y, image_z];
    let mut transfer = [[0.0f64; 4]; 4];
    let mut imag_weight = 0.0;
    for (i, s) in sigma.iter().enumerate() {
        for (j, img) in images.iter().enumerate() {
            let entry = 0.5 * linalg::trace(&s.dot(img));
            transfer[i][j] = entry.re;
            imag_weight += entry.im * entry.im;
        }
    }

    let mut off_diagonal = imag_weight;
    for (i, row) in transfer.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            if i == j {
                continue;
            }
            off_diagonal += entry * entry;
        }
    }
    off_diagonal += (transfer[0][0] - 1.0).powi(2);

    let eigen = [transfer[1][1], transfer[2][2], transfer[3][3]];
    let raw = [
        0.25 * (1.0 + eigen[0] + eigen[1] + eigen[2]),
        0.25 * (1.0 + eigen[0] - eigen[1] - eigen[2]),
        0.25 * (1.0 - eigen[0] + eigen[1] - eigen[2]),
        0.25 * (1.0 - eigen[0] - eigen[1] + eigen[2]),
    ];
    let clamped_mass: f64 = raw.iter().map(|p| (-p).max(0.0)).sum();
    let mut probs = raw.map(|p| p.max(0.0));
    let sum: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= sum;
    }

    let residual = off_diagonal.sqrt() + clamped_mass;
    Ok(ChannelEstimate {
        channel: PauliChannel::from_probabilities(probs)?,
        residual,
        flagged: residual > CHANNEL_RESIDUAL_FLAG,
    })
}

// ---------------------------------------------------------------------------
// Logical processing chain
// ---------------------------------------------------------------------------

/// Evolve a single-qubit logical state through a chain of measurement steps
/// entirely at the logical level: step `j` applies the hop conjugation with
/// gate `H · X(φ_j) · Z^{s_j}` followed by one application of the line
/// storage channel with decay factor `w`.
///
/// At `w = 1` the chain is the unitary conjugation by the ordered product
/// of the hop gates (first step innermost).
pub fn apply_logical_chain(
    input: &DensityMatrix,
    angles: &[f64],
    outcomes: &[u8],
    w: f64,
) -> Result<DensityMatrix> {
    if input.n_qubits() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "logical chain acts on one qubit, state has {}",
            input.n_qubits()
        )));
    }
    if angles.len() != outcomes.len() {
        return Err(Error::InvalidParameter(format!(
            "{} angles but {} outcomes",
            angles.len(),
            outcomes.len()
        )));
    }
    let channel = logical_channel(w, ChannelVariant::Line)?;
    let mut rho = input.clone();
    for (angle, outcome) in angles.iter().zip(outcomes) {
        if *outcome > 1 {
            return Err(Error::InvalidParameter(format!(
                "outcomes must be 0 or 1, got {outcome}"
            )));
        }
        let mut gate = linalg::hadamard().dot(&linalg::rot_x(*angle));
        if *outcome == 1 {
            gate = gate.dot(&linalg::pauli_2x2(PauliOp::Z));
        }
        rho = channel.apply(&rho.apply_unitary(&gate)?)?;
    }
    Ok(rho)
}

// ---------------------------------------------------------------------------
// Measurement patterns
// ---------------------------------------------------------------------------

/// Measurement basis of one pattern event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventBasis {
    /// Computational-basis measurement.
    Z,
    /// XY-plane measurement at the given angle.
    Xy { angle: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EventBasisRepr {
    Named(String),
    Xy { xy: f64 },
}

impl Serialize for EventBasis {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EventBasis::Z => EventBasisRepr::Named("Z".to_string()).serialize(serializer),
            EventBasis::Xy { angle } => EventBasisRepr::Xy { xy: *angle }.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for EventBasis {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        match EventBasisRepr::deserialize(deserializer)? {
            EventBasisRepr::Named(name) if name == "Z" => Ok(EventBasis::Z),
            EventBasisRepr::Named(name) => Err(serde::de::Error::custom(format!(
                "unknown measurement basis {name:?}; expected \"Z\" or {{\"xy\": angle}}"
            ))),
            EventBasisRepr::Xy { xy } => Ok(EventBasis::Xy { angle: xy }),
        }
    }
}

/// Adaptive sign rule: negate this event's angle when the outcome of an
/// earlier event is 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptRule {
    #[serde(rename = "source-event")]
    pub source_event: usize,
    #[serde(rename = "sign-flip")]
    pub sign_flip: bool,
}

/// One measurement in a pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEvent {
    pub site: usize,
    pub basis: EventBasis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapt: Option<AdaptRule>,
}

fn default_round_delay() -> f64 {
    1.0
}

/// A measurement pattern: rounds of simultaneous events, separated by a
/// fixed delay which must be a whole number of clock periods τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub rounds: Vec<Vec<PatternEvent>>,
    /// Delay between consecutive rounds, in units of τ.
    #[serde(default = "default_round_delay")]
    pub round_delay: f64,
}

impl Pattern {
    /// Total number of measurement events.
    pub fn n_events(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    /// Largest site index referenced by any event, if the pattern is
    /// non-empty.
    pub fn max_site(&self) -> Option<usize> {
        self.rounds.iter().flatten().map(|e| e.site).max()
    }

    /// Check structural invariants against a lattice of `n_sites` sites.
    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if !self.round_delay.is_finite()
            || self.round_delay < 0.0
            || (self.round_delay - self.round_delay.round()).abs() > 1e-9
        {
            return Err(Error::InvalidParameter(format!(
                "round delay must be a whole number of clock periods, got {}",
                self.round_delay
            )));
        }
        let mut measured = std::collections::BTreeSet::new();
        let mut index = 0usize;
        for event in self.rounds.iter().flatten() {
            if event.site >= n_sites {
                return Err(Error::SiteOutOfRange { site: event.site, n_sites });
            }
            if !measured.insert(event.site) {
                return Err(Error::InvalidParameter(format!(
                    "site {} is measured more than once",
                    event.site
                )));
            }
            if let Some(adapt) = &event.adapt {
                if adapt.source_event >= index {
                    return Err(Error::InvalidParameter(format!(
                        "event {index} adapts on event {}, which is not earlier",
                        adapt.source_event
                    )));
                }
                if matches!(event.basis, EventBasis::Z) {
                    return Err(Error::InvalidParameter(format!(
                        "event {index} is a Z measurement and cannot adapt its angle"
                    )));
                }
            }
            if let EventBasis::Xy { angle } = event.basis {
                if !angle.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "event {index} has non-finite angle {angle}"
                    )));
                }
            }
            index += 1;
        }
        Ok(())
    }
}

/// The two-round pattern realizing `X(θ)` on a three-site wire: site 0 in
/// the X basis, then site 1 at `−θ` with an adaptive sign flip on the first
/// outcome.
pub fn xrot_pattern(theta: f64) -> Pattern {
    Pattern {
        rounds: vec![
            vec![PatternEvent { site: 0, basis: EventBasis::Xy { angle: 0.0 }, adapt: None }],
            vec![PatternEvent {
                site: 1,
                basis: EventBasis::Xy { angle: -theta },
                adapt: Some(AdaptRule { source_event: 0, sign_flip: true }),
            }],
        ],
        round_delay: 1.0,
    }
}

/// Result of running a measurement pattern.
#[derive(Debug, Clone)]
pub struct PatternRun {
    pub outcomes: Vec<u8>,
    pub probabilities: Vec<f64>,
    /// Full-register state after the last round under the noisy dynamics.
    pub final_state: DensityMatrix,
    /// Same-outcome closed-system run from the same initial state.
    pub reference_state: DensityMatrix,
    /// Sites never measured by the pattern, ascending.
    pub unmeasured: Vec<usize>,
    /// Fidelity between the noisy and reference states reduced onto the
    /// unmeasured sites (1 when every site was measured).
    pub fidelity: f64,
}

fn pattern_pass(
    params: &SystemParams,
    bath: &BathSpec,
    initial: &DensityMatrix,
    pattern: &Pattern,
    method: EvolutionMethod,
    source: &mut OutcomeSource,
    outcomes: &mut Vec<u8>,
    probabilities: &mut Vec<f64>,
) -> Result<DensityMatrix> {
    let mut state = initial.clone();
    let delay = pattern.round_delay * params.tau();
    let mut event_index = 0usize;
    for (round_index, round) in pattern.rounds.iter().enumerate() {
        if round_index > 0 && delay > 0.0 {
            state = evolve_state(params, bath, &state, delay, method)?;
        }
        for event in round {
            let angle = match event.basis {
                EventBasis::Z => None,
                EventBasis::Xy { angle } => {
                    let mut effective = angle;
                    if let Some(adapt) = &event.adapt {
                        if adapt.sign_flip && outcomes[adapt.source_event] == 1 {
                            effective = -effective;
                        }
                    }
                    Some(effective)
                }
            };
            let measurement = match angle {
                None => Measurement::Z { site: event.site },
                Some(angle) => Measurement::XY { site: event.site, angle },
            };
            let (s, p, post) = source.measure(&state, &measurement, event_index)?;
            state = post;
            if outcomes.len() > event_index {
                // Reference pass: outcomes already recorded, probabilities
                // belong to the noisy pass only.
                debug_assert_eq!(outcomes[event_index], s);
            } else {
                outcomes.push(s);
                probabilities.push(p);
            }
            event_index += 1;
        }
    }
    Ok(state)
}

/// Run a measurement pattern on an explicit initial state.
///
/// The noisy run uses the given bath and evolution method; a second,
/// closed-system run with the same outcomes provides the reference state.
/// The reported fidelity compares the two runs on the unmeasured sites, so
/// byproduct operators (identical in both runs) cancel and no correction is
/// applied.
pub fn run_pattern(
    params: &SystemParams,
    bath: &BathSpec,
    initial: &DensityMatrix,
    pattern: &Pattern,
    policy: &OutcomePolicy,
    method: EvolutionMethod,
) -> Result<PatternRun> {
    pattern.validate(params.n_sites())?;
    if initial.n_qubits() != params.n_sites() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} qubits, lattice has {} sites",
            initial.n_qubits(),
            params.n_sites()
        )));
    }
    let n_events = pattern.n_events();
    let mut source = OutcomeSource::new(policy, n_events)?;
    let mut outcomes = Vec::with_capacity(n_events);
    let mut probabilities = Vec::with_capacity(n_events);
    let final_state = pattern_pass(
        params,
        bath,
        initial,
        pattern,
        method,
        &mut source,
        &mut outcomes,
        &mut probabilities,
    )?;

    let mut reference_source = OutcomeSource::Forced(outcomes.clone());
    let mut reference_outcomes = outcomes.clone();
    let mut reference_probabilities = Vec::new();
    let reference_state = pattern_pass(
        params,
        &BathSpec::closed(),
        initial,
        pattern,
        EvolutionMethod::Exact,
        &mut reference_source,
        &mut reference_outcomes,
        &mut reference_probabilities,
    )?;

    let measured: std::collections::BTreeSet<usize> =
        pattern.rounds.iter().flatten().map(|e| e.site).collect();
    let unmeasured: Vec<usize> =
        (0..params.n_sites()).filter(|s| !measured.contains(s)).collect();
    let fid = if unmeasured.is_empty() {
        1.0
    } else {
        fidelity(
            &final_state.partial_trace(&unmeasured)?,
            &reference_state.partial_trace(&unmeasured)?,
        )?
    };

    Ok(PatternRun {
        outcomes,
        probabilities,
        final_state,
        reference_state,
        unmeasured,
        fidelity: fid,
    })
}

// ---------------------------------------------------------------------------
// Cooling-rate scan
// ---------------------------------------------------------------------------

/// Which ideal output the cooling scan compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdealOutput {
    /// Noiseless image of the equilibrium input: `X(θ) ρ_e X(θ)†` with
    /// `ρ_e` the single-site equilibrium mixture of the scanned bath.
    EquilibriumImage,
    /// Image of a ground-state input: `X(θ) |+⟩⟨+| X(θ)†`.
    GroundImage,
}

/// One point of a cooling scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoolingScanPoint {
    pub alpha_bath: f64,
    pub fidelity: f64,
}

/// Scan the wire-experiment fidelity over cooling couplings at a fixed
/// background rate `gamma`.
///
/// For each `α_bath` the three-site wire starts in the exact equilibrium of
/// the two-bath dynamics, site 0 is measured immediately, the system
/// evolves for one clock period, site 1 is measured at the adaptive angle,
/// and the outcome-averaged corrected output is compared against the
/// configured ideal.
pub fn cooling_scan(
    gamma: f64,
    alpha_bath_grid: &[f64],
    theta: f64,
    delta: f64,
    ideal: IdealOutput,
) -> Result<Vec<CoolingScanPoint>> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "background rate must be positive, got {gamma}"
        )));
    }
    if alpha_bath_grid.is_empty() {
        return Err(Error::InvalidParameter("empty cooling-coupling grid".into()));
    }
    let mut points = Vec::with_capacity(alpha_bath_grid.len());
    for &alpha_bath in alpha_bath_grid {
        let bath = BathSpec::two_bath(alpha_bath, gamma)?;
        let p_exc = bath.excitation_probability();
        let equilibrium = plus_minus_mixture(p_exc);
        let input = DensityMatrix::from_matrix(1, equilibrium.clone())?;

        let params = SystemParams::new(delta, Lattice::line(3)?)?;
        let product = DensityMatrix::product(&[
            equilibrium.clone(),
            equilibrium.clone(),
            equilibrium.clone(),
        ])?;
        let entangler = CzEntangler::new(params.lattice())?;
        let state = entangler.apply(&product)?;
        let output = averaged_wire_output(
            &params,
            &bath,
            &state,
            theta,
            params.tau(),
            EvolutionMethod::Exact,
        )?;

        let ideal_input = match ideal {
            IdealOutput::EquilibriumImage => input,
            IdealOutput::GroundImage => DensityMatrix::from_bloch([1.0, 0.0, 0.0])?,
        };
        let target = ideal_input.apply_unitary(&linalg::rot_x(theta))?;
        points.push(CoolingScanPoint {
            alpha_bath,
            fidelity: fidelity(&output, &target)?,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn generic_input() -> DensityMatrix {
        DensityMatrix::from_bloch([0.3, -0.45, 0.55]).unwrap()
    }

    #[test]
    fn channel_eigenvalue_families() {
        for w in [0.1, 0.37, 0.8, 0.999, 1.0] {
            let line = logical_channel(w, ChannelVariant::Line).unwrap();
            let [lx, ly, lz] = line.eigenvalues();
            assert_abs_diff_eq!(lz, w, epsilon = 1e-12);
            assert_abs_diff_eq!(ly, w * w, epsilon = 1e-12);
            assert_abs_diff_eq!(lx, w * w * w, epsilon = 1e-12);

            let cubic = logical_channel(w, ChannelVariant::Cubic).unwrap();
            let [cx, cy, cz] = cubic.eigenvalues();
            assert_abs_diff_eq!(cz, w, epsilon = 1e-12);
            assert_abs_diff_eq!(cy, w.powi(6), epsilon = 1e-12);
            assert_abs_diff_eq!(cx, w.powi(7), epsilon = 1e-12);
        }
    }

    #[test]
    fn channel_limits_and_validation() {
        let id = logical_channel(1.0, ChannelVariant::Line).unwrap();
        assert_abs_diff_eq!(id.probabilities()[0], 1.0, epsilon = 1e-15);

        let depol = logical_channel(1e-8, ChannelVariant::Line).unwrap();
        for p in depol.probabilities() {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-6);
        }

        assert!(logical_channel(0.0, ChannelVariant::Line).is_err());
        assert!(logical_channel(1.5, ChannelVariant::Line).is_err());
        assert!(logical_channel(f64::NAN, ChannelVariant::Cubic).is_err());
        assert!(PauliChannel::from_probabilities([0.5, 0.6, -0.05, -0.05]).is_err());
        assert!(PauliChannel::from_probabilities([0.3, 0.3, 0.3, 0.3]).is_err());
    }

    #[test]
    fn channel_eigenvalue_round_trip() {
        let original = logical_channel(0.63, ChannelVariant::Cubic).unwrap();
        let rebuilt = PauliChannel::from_eigenvalues(original.eigenvalues()).unwrap();
        for (a, b) in original.probabilities().iter().zip(rebuilt.probabilities()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn channel_composition_multiplies_eigenvalues() {
        let a = logical_channel(0.9, ChannelVariant::Line).unwrap();
        let b = logical_channel(0.7, ChannelVariant::Line).unwrap();
        let ab = a.compose(&b);
        for ((ea, eb), eab) in
            a.eigenvalues().iter().zip(b.eigenvalues()).zip(ab.eigenvalues())
        {
            assert_abs_diff_eq!(ea * eb, eab, epsilon = 1e-14);
        }
        let sum: f64 = ab.probabilities().iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn channel_application_matches_bloch_contraction() {
        let channel = logical_channel(0.6, ChannelVariant::Line).unwrap();
        let rho = generic_input();
        let out = channel.apply(&rho).unwrap();
        let predicted = channel.apply_bloch(rho.bloch_vector(0).unwrap());
        let got = out.bloch_vector(0).unwrap();
        for (p, g) in predicted.iter().zip(got) {
            assert_abs_diff_eq!(*p, g, epsilon = 1e-12);
        }
        assert!(out.physicality().unwrap().is_physical(1e-9));
    }

    #[test]
    fn fidelity_formula_values() {
        assert_abs_diff_eq!(xrot_fidelity(0.0, PI, 1.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(xrot_fidelity(0.0, 2.0 * PI, 1.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(xrot_fidelity(0.0, 4.0 * PI, 1.0), 1.0, epsilon = 1e-12);
        let expected = 0.5 * (1.0 + (-0.1 * PI).exp());
        assert_abs_diff_eq!(xrot_fidelity(0.1, 2.0 * PI, 1.0), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.865_201_346, epsilon = 5e-10);
    }

    #[test]
    fn bloch_formula_special_cases() {
        let r = [0.3, -0.5, 0.6];
        let at_zero = xrot_output_bloch(r, 0.0, 0.07, 0.02, 1.0);
        for (a, b) in r.iter().zip(at_zero) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let closed_clock = xrot_output_bloch(r, 2.0 * PI, 0.0, 0.0, 1.0);
        for (a, b) in r.iter().zip(closed_clock) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let decayed = xrot_output_bloch([1.0, 0.0, 0.0], 2.0 * PI, 0.1, 0.0, 1.0);
        assert_abs_diff_eq!(decayed[0], (-0.1 * PI).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(decayed[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(decayed[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ideal_experiment_is_deterministic_on_every_branch() {
        let input = generic_input();
        let mut config = XRotConfig::new(0.7, 2.0 * PI);
        config.t_before = 2.0 * PI;
        for s1 in 0..2u8 {
            for s2 in 0..2u8 {
                let out = run_xrot_experiment(
                    &input,
                    &config,
                    &OutcomePolicy::Forced(vec![s1, s2]),
                )
                .unwrap();
                assert!(
                    (out.fidelity - 1.0).abs() < 1e-12,
                    "branch ({s1},{s2}) fidelity {}",
                    out.fidelity
                );
                assert_abs_diff_eq!(out.record.joint_probability(), 0.25, epsilon = 1e-9);
                assert_eq!(out.record.byproduct_z, s1);
                assert_eq!(out.record.byproduct_x, s2);
            }
        }
        let sampled = run_xrot_experiment(&input, &config, &OutcomePolicy::Sampled { seed: 7 })
            .unwrap();
        assert!((sampled.fidelity - 1.0).abs() < 1e-12);
        let again = run_xrot_experiment(&input, &config, &OutcomePolicy::Sampled { seed: 7 })
            .unwrap();
        assert_eq!(sampled.record.outcomes, again.record.outcomes);
    }

    #[test]
    fn dense_pipeline_matches_fidelity_formula() {
        let plus = DensityMatrix::from_bloch([1.0, 0.0, 0.0]).unwrap();
        for alpha in [0.0, 0.05, 0.1] {
            for t in [PI, 2.0 * PI, 4.0 * PI] {
                let mut config = XRotConfig::new(0.0, t);
                config.bath = BathSpec::single(alpha, 0.0).unwrap();
                let averaged = xrot_channel_average(&plus, &config).unwrap();
                let target = DensityMatrix::from_bloch([1.0, 0.0, 0.0]).unwrap();
                let fid = fidelity(&averaged, &target).unwrap();
                let predicted = xrot_fidelity(alpha, t, 1.0);
                assert_abs_diff_eq!(fid, predicted, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn dense_pipeline_matches_bloch_formula() {
        // The closed form is exact for a zero-temperature bath, at clock
        // multiples and at generic storage times alike.
        let input = generic_input();
        let r_in = input.bloch_vector(0).unwrap();
        for alpha in [0.05, 0.02] {
            for t in [0.25 * PI, 0.5 * PI, PI, 2.0 * PI, 4.0 * PI] {
                let mut config = XRotConfig::new(0.0, t);
                config.bath = BathSpec::single(alpha, 0.0).unwrap();
                let averaged = xrot_channel_average(&input, &config).unwrap();
                let got = averaged.bloch_vector(0).unwrap();
                let predicted = xrot_output_bloch(r_in, t, alpha, 0.0, 1.0);
                for (axis, (p, g)) in predicted.iter().zip(got).enumerate() {
                    assert!(
                        (p - g).abs() < 1e-9,
                        "axis {axis} at t={t}, α={alpha}: formula {p} vs dense {g}"
                    );
                }
            }
        }
    }

    #[test]
    fn thermal_blanks_damp_the_wire_output() {
        // With a finite-temperature bath the blanks are imperfect even when
        // prepared in the bath's own equilibrium: the corrected output picks
        // up preparation-damping factors m = (α−β)/(α+β) on top of the
        // storage decay, component-wise (m, m², m) on (x, y, z).
        let (alpha, beta) = (0.02, 0.005);
        let bath = BathSpec::single(alpha, beta).unwrap();
        let m = (alpha - beta) / (alpha + beta);
        let w = clock_step_decay(alpha, beta, 1.0);
        let input = generic_input();
        let r_in = input.bloch_vector(0).unwrap();

        let mut config = XRotConfig::new(0.0, 2.0 * PI);
        config.bath = bath.clone();
        config.prep_k_t = bath.temperature(1.0);
        let got = xrot_channel_average(&input, &config).unwrap().bloch_vector(0).unwrap();
        let predicted = [
            r_in[0] * m * w,
            r_in[1] * m * m * w * w,
            r_in[2] * m * w * w * w,
        ];
        for (axis, (p, g)) in predicted.iter().zip(got).enumerate() {
            assert!(
                (p - g).abs() < 1e-9,
                "axis {axis}: predicted {p} vs dense {g}"
            );
        }

        // The stripped one-timestep map shows the same damping on its Pauli
        // eigenvalues and remains an exact Pauli channel.
        let mut wire = WireConfig::clock_step(bath.clone());
        wire.prep_k_t = bath.temperature(1.0);
        let estimate =
            extract_channel(|chi| one_timestep_logical(&wire, (0, 0), chi)).unwrap();
        assert!(!estimate.flagged, "residual {}", estimate.residual);
        let [lx, ly, lz] = estimate.channel.eigenvalues();
        assert_abs_diff_eq!(lx, m * w * w * w, epsilon = 1e-9);
        assert_abs_diff_eq!(ly, m * m * w * w, epsilon = 1e-9);
        assert_abs_diff_eq!(lz, m * w, epsilon = 1e-9);
    }

    #[test]
    fn one_timestep_tomography_recovers_line_channel() {
        // Exact recovery of the line channel requires a zero-temperature
        // bath, where the blank sites are stationary during storage.
        for (alpha, beta) in [(0.02, 0.0), (0.05, 0.0)] {
            let bath = BathSpec::single(alpha, beta).unwrap();
            let w = clock_step_decay(alpha, beta, 1.0);
            let expected = logical_channel(w, ChannelVariant::Line).unwrap();
            let mut recovered = Vec::new();
            for history in [(0u8, 0u8), (1u8, 1u8)] {
                let config = WireConfig::clock_step(bath.clone());
                let estimate = extract_channel(|chi| {
                    one_timestep_logical(&config, history, chi)
                })
                .unwrap();
                assert!(
                    !estimate.flagged,
                    "history {history:?} residual {}",
                    estimate.residual
                );
                for (e, g) in expected
                    .probabilities()
                    .iter()
                    .zip(estimate.channel.probabilities())
                {
                    assert!(
                        (e - g).abs() < 1e-5,
                        "history {history:?}: expected {e}, got {g}"
                    );
                }
                recovered.push(estimate.channel.probabilities());
            }
            for (a, b) in recovered[0].iter().zip(recovered[1]) {
                assert!((a - b).abs() < 1e-6, "history dependence: {a} vs {b}");
            }
        }
    }

    #[test]
    fn tomography_of_exact_channels() {
        let identity = extract_channel(|rho| Ok(rho.clone())).unwrap();
        assert!(identity.residual < 1e-10);
        assert!(!identity.flagged);
        assert_abs_diff_eq!(identity.channel.probabilities()[0], 1.0, epsilon = 1e-12);

        let known = logical_channel(0.8, ChannelVariant::Line).unwrap();
        let estimate = extract_channel(|rho| known.apply(rho)).unwrap();
        for (e, g) in known.probabilities().iter().zip(estimate.channel.probabilities()) {
            assert_abs_diff_eq!(*e, g, epsilon = 1e-10);
        }

        let not_pauli = extract_channel(|rho| {
            rho.apply_unitary(&linalg::rot_z(0.3))
        })
        .unwrap();
        assert!(not_pauli.flagged);
    }

    #[test]
    fn logical_chain_examples() {
        let input = generic_input();

        // Two ideal steps with angles (0, θ) compose to the conjugation by
        // H·X(θ)·H.
        let theta = 0.9;
        let chained = apply_logical_chain(&input, &[0.0, theta], &[0, 0], 1.0).unwrap();
        let gate = linalg::hadamard()
            .dot(&linalg::rot_x(theta))
            .dot(&linalg::hadamard());
        let direct = input.apply_unitary(&gate).unwrap();
        assert!(
            linalg::max_abs_diff(chained.matrix(), direct.matrix()) < 1e-12,
            "ideal chain should reduce to a unitary conjugation"
        );

        // Any ideal chain preserves purity.
        let long = apply_logical_chain(&input, &[0.3, -1.2, 2.2], &[1, 0, 1], 1.0).unwrap();
        assert_abs_diff_eq!(long.purity(), input.purity(), epsilon = 1e-12);

        assert!(apply_logical_chain(&input, &[0.1], &[0, 1], 0.9).is_err());
        assert!(apply_logical_chain(&input, &[0.1], &[2], 0.9).is_err());
    }

    #[test]
    fn logical_chain_one_step_matches_dense_up_to_hadamard_frame() {
        let (alpha, beta) = (0.04, 0.0);
        let bath = BathSpec::single(alpha, beta).unwrap();
        let w = clock_step_decay(alpha, beta, 1.0);
        let rho = generic_input();

        // Dense uncorrected clock step with both angles zero and outcomes
        // (0,0), as a map on the logical input.
        let config = WireConfig::clock_step(bath);
        let (_p, dense) = run_wire_pipeline(&rho, &config, (0, 0)).unwrap();

        // One chain step (hop conjugation followed by the line channel); the
        // second measurement closes the step with a Hadamard relabeling of
        // the axes, which the chain leaves implicit.
        let h = linalg::hadamard();
        let chain = apply_logical_chain(&rho, &[0.0], &[0], w).unwrap();
        let relabeled = chain.apply_unitary(&h).unwrap();

        assert!(
            linalg::max_abs_diff(dense.matrix(), relabeled.matrix()) < 1e-9,
            "max diff {}",
            linalg::max_abs_diff(dense.matrix(), relabeled.matrix())
        );
    }

    #[test]
    fn pattern_serialization_round_trip() {
        let pattern = xrot_pattern(1.1);
        let json = serde_json::to_string_pretty(&pattern).unwrap();
        let back: Pattern = serde_json::from_str(&json).unwrap();
        assert_eq!(pattern, back);

        let literal = r#"{
            "rounds": [
                [{"site": 0, "basis": "Z"}],
                [{"site": 1, "basis": {"xy": 0.5},
                  "adapt": {"source-event": 0, "sign-flip": true}}]
            ]
        }"#;
        let parsed: Pattern = serde_json::from_str(literal).unwrap();
        assert_eq!(parsed.round_delay, 1.0);
        assert_eq!(parsed.rounds[0][0].basis, EventBasis::Z);
        assert_eq!(parsed.rounds[1][0].basis, EventBasis::Xy { angle: 0.5 });
        assert_eq!(
            parsed.rounds[1][0].adapt,
            Some(AdaptRule { source_event: 0, sign_flip: true })
        );
    }

    #[test]
    fn pattern_validation_rejects_malformed_patterns() {
        let mut repeated = xrot_pattern(0.3);
        repeated.rounds[1][0].site = 0;
        assert!(repeated.validate(3).is_err());

        let out_of_range = xrot_pattern(0.3);
        assert!(out_of_range.validate(1).is_err());

        let mut forward = xrot_pattern(0.3);
        forward.rounds[0][0].adapt = Some(AdaptRule { source_event: 0, sign_flip: true });
        assert!(forward.validate(3).is_err());

        let mut z_adapt = xrot_pattern(0.3);
        z_adapt.rounds[1][0].basis = EventBasis::Z;
        assert!(z_adapt.validate(3).is_err());

        let mut fractional = xrot_pattern(0.3);
        fractional.round_delay = 0.5;
        assert!(fractional.validate(3).is_err());
    }

    #[test]
    fn pattern_run_on_ideal_wire() {
        let params = SystemParams::new(1.0, Lattice::line(3).unwrap()).unwrap();
        let initial = crate::qcore::cluster_state(params.lattice()).unwrap();
        let pattern = xrot_pattern(0.8);
        for seed in [1u64, 2, 3] {
            let run = run_pattern(
                &params,
                &BathSpec::closed(),
                &initial,
                &pattern,
                &OutcomePolicy::Sampled { seed },
                EvolutionMethod::Exact,
            )
            .unwrap();
            assert_eq!(run.unmeasured, vec![2]);
            assert!((run.fidelity - 1.0).abs() < 1e-12);
            let replay = run_pattern(
                &params,
                &BathSpec::closed(),
                &initial,
                &pattern,
                &OutcomePolicy::Sampled { seed },
                EvolutionMethod::Exact,
            )
            .unwrap();
            assert_eq!(run.outcomes, replay.outcomes);
        }
    }

    #[test]
    fn pattern_run_with_noise_degrades_gracefully() {
        let params = SystemParams::new(1.0, Lattice::line(3).unwrap()).unwrap();
        let initial = crate::qcore::cluster_state(params.lattice()).unwrap();
        let pattern = xrot_pattern(0.8);
        let bath = BathSpec::single(0.01, 0.0).unwrap();
        let run = run_pattern(
            &params,
            &bath,
            &initial,
            &pattern,
            &OutcomePolicy::Forced(vec![0, 0]),
            EvolutionMethod::Exact,
        )
        .unwrap();
        assert!(run.fidelity < 1.0);
        assert!(run.fidelity > 0.9, "fidelity {}", run.fidelity);
        assert!(run.final_state.physicality().unwrap().is_physical(1e-9));
    }

    #[test]
    fn cooling_scan_has_interior_maximum() {
        let grid: Vec<f64> =
            (0..13).map(|i| 10f64.powf(-5.0 + 4.0 * i as f64 / 12.0)).collect();
        let gamma = 1e-3;
        let points = cooling_scan(gamma, &grid, 0.5 * PI, 1.0, IdealOutput::GroundImage).unwrap();
        assert_eq!(points.len(), grid.len());
        let best = points
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.fidelity.total_cmp(&b.1.fidelity))
            .unwrap()
            .0;
        assert!(best > 0 && best < points.len() - 1, "peak at index {best}");

        // Against the pure ideal target at clock scheduling every point obeys
        // the closed form F = ½(1 + m² w) with m = α_b/(α_b+2γ) and
        // w = e^{−(α_b+2γ)π/Δ}.
        for p in &points {
            let m = p.alpha_bath / (p.alpha_bath + 2.0 * gamma);
            let w = (-(p.alpha_bath + 2.0 * gamma) * PI).exp();
            assert_abs_diff_eq!(p.fidelity, 0.5 * (1.0 + m * m * w), epsilon = 1e-9);
        }

        let replay = cooling_scan(gamma, &grid, 0.5 * PI, 1.0, IdealOutput::GroundImage).unwrap();
        for (a, b) in points.iter().zip(&replay) {
            assert_eq!(a.fidelity.to_bits(), b.fidelity.to_bits());
        }
    }

    #[test]
    fn cooling_scan_limit_is_flat_for_tiny_couplings() {
        // With negligible cooling the preparation is fully mixed and the
        // fidelity against the pure ideal target flattens out at ½.
        let points = cooling_scan(
            1e-3,
            &[1e-12, 1e-9],
            0.5 * PI,
            1.0,
            IdealOutput::GroundImage,
        )
        .unwrap();
        assert_abs_diff_eq!(points[0].fidelity, points[1].fidelity, epsilon = 1e-6);
        assert_abs_diff_eq!(points[0].fidelity, 0.5, epsilon = 1e-6);

        // The equilibrium-image convention instead compares mixed against
        // mixed and stays trivially high in the same limit.
        let eq_points = cooling_scan(
            1e-3,
            &[1e-12, 1e-9],
            0.5 * PI,
            1.0,
            IdealOutput::EquilibriumImage,
        )
        .unwrap();
        assert!(eq_points[0].fidelity > 0.999);
    }

    #[test]
    fn clock_step_decay_value() {
        assert_abs_diff_eq!(
            clock_step_decay(0.02, 0.005, 1.0),
            (-(0.025f64) * PI).exp(),
            epsilon = 1e-15
        );
    }
}
