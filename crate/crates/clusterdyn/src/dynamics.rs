//! Open-system dynamics of a cluster state coupled to bosonic baths.
//!
//! The cluster Hamiltonian `H = −(Δ/2) Σ_i K_i` is a commuting sum of
//! stabilizers. Conjugating by the controlled-Z layer maps it to the
//! *dual* picture `H̄ = −(Δ/2) Σ_i X_i`, in which thermalization acts
//! independently on every site with jump operators `|+⟩⟨−|` (cooling, rate
//! `α`) and `|−⟩⟨+|` (heating, rate `β`). That factorization yields an
//! exact closed-form channel ([`exact_evolve`]); a fixed-step RK4 Lindblad
//! integrator ([`LindbladSystem`]) provides the independent cross-check in
//! either picture.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat, C_ZERO};
use crate::pauli::Lattice;
use crate::qcore::{CzEntangler, DensityMatrix};
use crate::{Error, Result};

/// Stabilizer gap and lattice geometry of the system.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemParams {
    delta: f64,
    lattice: Lattice,
}

impl SystemParams {
    /// `delta` is the stabilizer energy gap Δ (must be positive).
    pub fn new(delta: f64, lattice: Lattice) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "the stabilizer gap must be positive and finite, got {delta}"
            )));
        }
        Ok(SystemParams { delta, lattice })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.n_sites()
    }

    /// Clock period `τ = 2π/Δ` of the free evolution.
    pub fn tau(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.delta
    }

    /// Default integrator step, `τ/2000`.
    pub fn default_step(&self) -> f64 {
        self.tau() / 2000.0
    }
}

/// Bath model attached identically to every site.
///
/// Rates are absolute (same units as Δ). `Single` prescribes the cooling
/// rate `α` and heating rate `β` directly; `TwoBath` models a
/// zero-temperature bath with coupling `alpha_bath` plus an
/// infinite-temperature bath with coupling `gamma`, which combine to the
/// effective rates `α = alpha_bath + γ`, `β = γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BathSpec {
    Single { alpha: f64, beta: f64 },
    TwoBath { alpha_bath: f64, gamma: f64 },
}

impl BathSpec {
    pub fn single(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bath rate {name} must be non-negative and finite, got {v}"
                )));
            }
        }
        Ok(BathSpec::Single { alpha, beta })
    }

    pub fn two_bath(alpha_bath: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("alpha_bath", alpha_bath), ("gamma", gamma)] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bath rate {name} must be non-negative and finite, got {v}"
                )));
            }
        }
        Ok(BathSpec::TwoBath { alpha_bath, gamma })
    }

    /// A closed system (both rates zero).
    pub fn closed() -> Self {
        BathSpec::Single { alpha: 0.0, beta: 0.0 }
    }

    /// Effective `(α, β)` cooling/heating rates.
    pub fn effective_rates(&self) -> (f64, f64) {
        match *self {
            BathSpec::Single { alpha, beta } => (alpha, beta),
            BathSpec::TwoBath { alpha_bath, gamma } => (alpha_bath + gamma, gamma),
        }
    }

    /// Total decoherence rate `α + β`.
    pub fn total_rate(&self) -> f64 {
        let (a, b) = self.effective_rates();
        a + b
    }

    /// Equilibrium excitation probability `β/(α+β)`; 0 for a closed system.
    pub fn excitation_probability(&self) -> f64 {
        let (a, b) = self.effective_rates();
        if a + b == 0.0 {
            0.0
        } else {
            b / (a + b)
        }
    }

    /// Equilibrium temperature in energy units: `kT = Δ/ln(α/β)`.
    ///
    /// Returns 0 for `β = 0`, infinity for `α = β`, and a negative value for
    /// inverted baths (`α < β`).
    pub fn temperature(&self, delta: f64) -> f64 {
        let (a, b) = self.effective_rates();
        if b == 0.0 {
            return 0.0;
        }
        if a == b {
            return f64::INFINITY;
        }
        delta / (a / b).ln()
    }

    /// Whether the weak-coupling assumption `α + β ≤ Δ/10` behind the
    /// Markovian model holds.
    pub fn is_weak_coupling(&self, delta: f64) -> bool {
        self.total_rate() <= 0.1 * delta
    }

    /// Single-site equilibrium state `(α|+⟩⟨+| + β|−⟩⟨−|)/(α+β)` in the
    /// dual picture (ground state `|+⟩⟨+|` for a closed system).
    pub fn equilibrium_site(&self) -> CMat {
        crate::qcore::plus_minus_mixture(self.excitation_probability())
    }
}

/// Which frame operators and states are expressed in.
///
/// `Original` uses the cluster Hamiltonian and the correlated jump
/// operators `(1 ± K_i)/2 · Z_i`; `Dual` is the picture reached by
/// conjugating with the controlled-Z layer, where every site decoheres
/// independently.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Picture {
    Original,
    Dual,
}

/// Map a state between the pictures (the conjugation is an involution).
pub fn dual_map(lattice: &Lattice, rho: &DensityMatrix) -> Result<DensityMatrix> {
    CzEntangler::new(lattice)?.apply(rho)
}

/// Dense cluster Hamiltonian `−(Δ/2) Σ_i K_i`.
pub fn hamiltonian(params: &SystemParams) -> Result<CMat> {
    let n = params.n_sites();
    linalg::check_register_size(n)?;
    let dim = 1usize << n;
    let mut h = Array2::from_elem((dim, dim), C_ZERO);
    for k in params.lattice().stabilizers() {
        h += &linalg::pauli_matrix(&k, n)?;
    }
    Ok(h.mapv(|v| v * Complex64::new(-0.5 * params.delta(), 0.0)))
}

/// Dense dual Hamiltonian `−(Δ/2) Σ_i X_i`.
pub fn dual_hamiltonian(params: &SystemParams) -> Result<CMat> {
    let n = params.n_sites();
    linalg::check_register_size(n)?;
    let dim = 1usize << n;
    let mut h = Array2::from_elem((dim, dim), C_ZERO);
    let x = linalg::pauli_2x2(crate::pauli::PauliOp::X);
    for site in 0..n {
        h += &linalg::embed_one_qubit(&x, site, n)?;
    }
    Ok(h.mapv(|v| v * Complex64::new(-0.5 * params.delta(), 0.0)))
}

/// Free propagator `e^{−iHt}` of the cluster Hamiltonian; since
/// `H = −(Δ/2) Σ K_i`, this is `Π_i (cos(Δt/2) I + i sin(Δt/2) K_i)`.
pub fn free_propagator(params: &SystemParams, t: f64) -> Result<CMat> {
    stabilizer_phase_product(params, 0.5 * params.delta() * t)
}

/// Frame rotation `e^{+iHt}` into the interaction picture.
pub fn interaction_frame(params: &SystemParams, t: f64) -> Result<CMat> {
    stabilizer_phase_product(params, -0.5 * params.delta() * t)
}

/// `Π_i e^{iθK_i} = Π_i (cos θ · I + i sin θ · K_i)`.
fn stabilizer_phase_product(params: &SystemParams, theta: f64) -> Result<CMat> {
    let n = params.n_sites();
    linalg::check_register_size(n)?;
    let dim = 1usize << n;
    let mut u = linalg::identity(dim);
    let cos = Complex64::new(theta.cos(), 0.0);
    let isin = Complex64::new(0.0, theta.sin());
    for k in params.lattice().stabilizers() {
        let km = linalg::pauli_matrix(&k, n)?;
        let factor = linalg::identity(dim).mapv(|v| v * cos) + km.mapv(|v| v * isin);
        u = u.dot(&factor);
    }
    Ok(u)
}

/// A state expressed in the interaction picture: `σ(t) = e^{+iHt} ρ(t) e^{−iHt}`.
pub fn to_interaction_picture(
    params: &SystemParams,
    rho: &DensityMatrix,
    t: f64,
) -> Result<DensityMatrix> {
    rho.apply_unitary(&interaction_frame(params, t)?)
}

/// The four Kraus operators of the exact single-site dual-picture channel
/// for evolution time `t`.
///
/// With `P_± = |±⟩⟨±|`, `r = α + β`, and `w = e^{−rt/2}`:
///
/// * `M₁ = √(α/r) · (e^{+iΔt} P₊ + w P₋)`
/// * `M₂ = √(β/r) · (e^{−iΔt} P₋ + w P₊)`
/// * `M₃ = √(α(1−w²)/r) · |+⟩⟨−|`
/// * `M₄ = √(β(1−w²)/r) · |−⟩⟨+|`
///
/// For a closed system (`r = 0`) the channel degenerates to the free dual
/// unitary `e^{iΔt/2} P₊ + e^{−iΔt/2} P₋`. Operators with zero weight are
/// omitted, and `Σ M†M = 1` holds exactly.
pub fn kraus_site_ops(alpha: f64, beta: f64, delta: f64, t: f64) -> Vec<CMat> {
    let half = Complex64::new(0.5, 0.0);
    let p_plus = ndarray::array![[half, half], [half, half]];
    let p_minus = ndarray::array![[half, -half], [-half, half]];
    let raise = ndarray::array![[half, -half], [half, -half]]; // |+⟩⟨−|
    let lower = ndarray::array![[half, half], [-half, -half]]; // |−⟩⟨+|

    let rate = alpha + beta;
    let phase = Complex64::new(0.0, delta * t).exp();
    if rate == 0.0 {
        let half_phase = Complex64::new(0.0, 0.5 * delta * t).exp();
        let u = p_plus.mapv(|v| v * half_phase) + p_minus.mapv(|v| v * half_phase.conj());
        return vec![u];
    }
    let w = (-0.5 * rate * t).exp();
    let jump_weight = 1.0 - w * w;
    let mut out = Vec::with_capacity(4);
    if alpha > 0.0 {
        let c = Complex64::new((alpha / rate).sqrt(), 0.0);
        let m1 = p_plus.mapv(|v| v * phase) + p_minus.mapv(|v| v * Complex64::new(w, 0.0));
        out.push(m1.mapv(|v| v * c));
        let c3 = Complex64::new((alpha * jump_weight / rate).sqrt(), 0.0);
        if c3.re > 0.0 {
            out.push(raise.mapv(|v| v * c3));
        }
    }
    if beta > 0.0 {
        let c = Complex64::new((beta / rate).sqrt(), 0.0);
        let m2 = p_minus.mapv(|v| v * phase.conj()) + p_plus.mapv(|v| v * Complex64::new(w, 0.0));
        out.push(m2.mapv(|v| v * c));
        let c4 = Complex64::new((beta * jump_weight / rate).sqrt(), 0.0);
        if c4.re > 0.0 {
            out.push(lower.mapv(|v| v * c4));
        }
    }
    out
}

/// Exact evolution of a *dual-picture* state for time `t`: the site-local
/// Kraus channel applied to every site.
pub fn exact_evolve_dual(
    params: &SystemParams,
    bath: &BathSpec,
    rho_dual: &DensityMatrix,
    t: f64,
) -> Result<DensityMatrix> {
    if rho_dual.n_qubits() != params.n_sites() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} qubits, lattice has {} sites",
            rho_dual.n_qubits(),
            params.n_sites()
        )));
    }
    let (alpha, beta) = bath.effective_rates();
    let ops = kraus_site_ops(alpha, beta, params.delta(), t);
    let n = rho_dual.n_qubits();
    let mut mat = rho_dual.matrix().clone();
    for site in 0..n {
        let mut next = Array2::from_elem(mat.dim(), C_ZERO);
        for m in &ops {
            let big = linalg::embed_one_qubit(m, site, n)?;
            next += &big.dot(&mat).dot(&linalg::dagger(&big));
        }
        mat = next;
    }
    DensityMatrix::from_matrix(n, mat)
}

/// Exact evolution of an *original-picture* state: conjugate into the dual
/// picture, apply the site-local channel, conjugate back.
pub fn exact_evolve(
    params: &SystemParams,
    bath: &BathSpec,
    rho: &DensityMatrix,
    t: f64,
) -> Result<DensityMatrix> {
    let entangler = CzEntangler::new(params.lattice())?;
    let dual = entangler.apply(rho)?;
    let evolved = exact_evolve_dual(params, bath, &dual, t)?;
    entangler.apply(&evolved)
}

struct JumpTerm {
    rate: f64,
    op: CMat,
    op_dag: CMat,
    opdag_op: CMat,
}

/// Dense Lindblad generator for a lattice + bath in a chosen picture,
/// integrated with fixed-step classical RK4.
pub struct LindbladSystem {
    n_qubits: usize,
    default_step: f64,
    hamiltonian: CMat,
    jumps: Vec<JumpTerm>,
}

impl LindbladSystem {
    pub fn new(params: &SystemParams, bath: &BathSpec, picture: Picture) -> Result<Self> {
        let n = params.n_sites();
        linalg::check_register_size(n)?;
        let h = match picture {
            Picture::Original => hamiltonian(params)?,
            Picture::Dual => dual_hamiltonian(params)?,
        };

        // Per-site (rate, 2×2 dual operator) pairs; `TwoBath` keeps its three
        // physical dissipators distinct rather than pre-summing the rates.
        let half = Complex64::new(0.5, 0.0);
        let raise = ndarray::array![[half, -half], [half, -half]]; // |+⟩⟨−|
        let lower = ndarray::array![[half, half], [-half, -half]]; // |−⟩⟨+|
        let dissipators: Vec<(f64, CMat)> = match *bath {
            BathSpec::Single { alpha, beta } => {
                vec![(alpha, raise.clone()), (beta, lower.clone())]
            }
            BathSpec::TwoBath { alpha_bath, gamma } => vec![
                (alpha_bath, raise.clone()),
                (gamma, raise.clone()),
                (gamma, lower.clone()),
            ],
        };

        let entangler = CzEntangler::new(params.lattice())?;
        let mut jumps = Vec::new();
        for site in 0..n {
            for (rate, local) in &dissipators {
                if *rate == 0.0 {
                    continue;
                }
                let embedded = linalg::embed_one_qubit(local, site, n)?;
                let op = match picture {
                    Picture::Dual => embedded,
                    // The original-picture jump operators are the dual ones
                    // conjugated by the controlled-Z layer.
                    Picture::Original => entangler.conjugate(&embedded)?,
                };
                let op_dag = linalg::dagger(&op);
                let opdag_op = op_dag.dot(&op);
                jumps.push(JumpTerm { rate: *rate, op, op_dag, opdag_op });
            }
        }

        Ok(LindbladSystem {
            n_qubits: n,
            default_step: params.default_step(),
            hamiltonian: h,
            jumps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Right-hand side of the master equation:
    /// `−i[H, ρ] + Σ_k r_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
    pub fn rhs(&self, rho: &CMat) -> CMat {
        let mut out = linalg::commutator(&self.hamiltonian, rho).mapv(|v| v * -linalg::C_I);
        for j in &self.jumps {
            let sandwich = j.op.dot(rho).dot(&j.op_dag);
            let anti = linalg::anticommutator(&j.opdag_op, rho);
            out += &(sandwich - anti.mapv(|v| v * Complex64::new(0.5, 0.0)))
                .mapv(|v| v * Complex64::new(j.rate, 0.0));
        }
        out
    }

    /// Integrate for time `t` with fixed-step RK4 (step `dt`, or the
    /// default `τ/2000` if `None`). The trace is renormalized every step.
    pub fn evolve(&self, rho: &DensityMatrix, t: f64, dt: Option<f64>) -> Result<DensityMatrix> {
        if rho.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "state has {} qubits, generator expects {}",
                rho.n_qubits(),
                self.n_qubits
            )));
        }
        if t < 0.0 {
            return Err(Error::InvalidParameter(format!("evolution time must be ≥ 0, got {t}")));
        }
        let dt = dt.unwrap_or(self.default_step);
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {dt}")));
        }
        let mut state = rho.clone();
        if t == 0.0 {
            return Ok(state);
        }
        let steps = (t / dt).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let ch = Complex64::new(h, 0.0);
        let half = Complex64::new(0.5, 0.0);
        let sixth = Complex64::new(1.0 / 6.0, 0.0);
        let two = Complex64::new(2.0, 0.0);
        for _ in 0..steps {
            let m = state.matrix();
            let k1 = self.rhs(m);
            let k2 = self.rhs(&(m + &k1.mapv(|v| v * ch * half)));
            let k3 = self.rhs(&(m + &k2.mapv(|v| v * ch * half)));
            let k4 = self.rhs(&(m + &k3.mapv(|v| v * ch)));
            let increment = (k1 + k2.mapv(|v| v * two) + k3.mapv(|v| v * two) + k4)
                .mapv(|v| v * ch * sixth);
            let next = m + &increment;
            state = DensityMatrix::from_matrix(self.n_qubits, next)?;
            state.renormalize();
        }
        Ok(state)
    }
}
