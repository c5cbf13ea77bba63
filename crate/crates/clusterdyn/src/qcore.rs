//! Density matrices, cluster-state preparation, and measurements.
//!
//! The central type is [`DensityMatrix`]: a dense `2^n × 2^n` complex matrix
//! with site 0 stored as the most significant bit of the basis index. On top
//! of it sit the controlled-Z entangling layer ([`CzEntangler`]), ideal and
//! thermal cluster-state constructors, projective single-site measurements in
//! the `Z` and equatorial `XY(φ)` bases, partial traces, Bloch-vector
//! conversions, and the state-comparison metrics (Uhlmann fidelity and trace
//! distance) used throughout the crate.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat, CVec, C_ONE, C_ZERO};
use crate::pauli::{Lattice, PauliString};
use crate::{Error, Result};

/// Probabilities below this floor are treated as impossible outcomes.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// A mixed state of `n_qubits` qubits as a dense density matrix.
///
/// Site 0 is the most significant bit of the basis index: the bit of site
/// `s` in basis index `b` is `(b >> (n_qubits − 1 − s)) & 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    mat: CMat,
}

impl DensityMatrix {
    /// Wrap an existing matrix, checking only the dimensions. Use
    /// [`DensityMatrix::physicality`] to audit trace and positivity.
    pub fn from_matrix(n_qubits: usize, mat: CMat) -> Result<Self> {
        linalg::check_register_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        if mat.dim() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!(
                "expected {dim}×{dim} matrix for {n_qubits} qubits, got {:?}",
                mat.dim()
            )));
        }
        Ok(DensityMatrix { n_qubits, mat })
    }

    /// Pure state `|ψ⟩⟨ψ|` from a ket, which is normalized first.
    pub fn from_pure(n_qubits: usize, psi: &CVec) -> Result<Self> {
        linalg::check_register_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        if psi.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "expected ket of length {dim} for {n_qubits} qubits, got {}",
                psi.len()
            )));
        }
        let norm = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::InvalidState("cannot normalize the zero ket".into()));
        }
        let mut mat = Array2::from_elem((dim, dim), C_ZERO);
        for i in 0..dim {
            for j in 0..dim {
                mat[(i, j)] = psi[i] * psi[j].conj() / Complex64::new(norm * norm, 0.0);
            }
        }
        Ok(DensityMatrix { n_qubits, mat })
    }

    /// Computational basis state `|index⟩⟨index|`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        linalg::check_register_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut mat = Array2::from_elem((dim, dim), C_ZERO);
        mat[(index, index)] = C_ONE;
        Ok(DensityMatrix { n_qubits, mat })
    }

    /// The product state `|+⟩^{⊗n}`.
    pub fn all_plus(n_qubits: usize) -> Result<Self> {
        linalg::check_register_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        let ket = CVec::from_elem(dim, amp);
        DensityMatrix::from_pure(n_qubits, &ket)
    }

    /// Product of single-qubit density matrices, site 0 first.
    pub fn product(factors: &[CMat]) -> Result<Self> {
        linalg::check_register_size(factors.len())?;
        let mut mat = linalg::identity(1);
        for f in factors {
            if f.dim() != (2, 2) {
                return Err(Error::DimensionMismatch(format!(
                    "product() expects 2×2 factors, got {:?}",
                    f.dim()
                )));
            }
            mat = linalg::kron(&mat, f);
        }
        DensityMatrix::from_matrix(factors.len(), mat)
    }

    /// Single-qubit state from a Bloch vector `(x, y, z)`; the vector must
    /// lie inside the unit ball.
    pub fn from_bloch(bloch: [f64; 3]) -> Result<Self> {
        let [x, y, z] = bloch;
        let r2 = x * x + y * y + z * z;
        if r2 > 1.0 + 1e-9 {
            return Err(Error::InvalidState(format!(
                "Bloch vector has length {:.6} > 1",
                r2.sqrt()
            )));
        }
        let mat = ndarray::array![
            [Complex64::new(0.5 * (1.0 + z), 0.0), Complex64::new(0.5 * x, -0.5 * y)],
            [Complex64::new(0.5 * x, 0.5 * y), Complex64::new(0.5 * (1.0 - z), 0.0)],
        ];
        DensityMatrix::from_matrix(1, mat)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.mat)
    }

    /// `tr(ρ²)`; 1 for pure states.
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Rescale so the trace is exactly 1 (guards drift in long evolutions).
    pub fn renormalize(&mut self) {
        let t = self.trace().re;
        if t > 1e-300 {
            self.mat.mapv_inplace(|v| v / Complex64::new(t, 0.0));
        }
    }

    /// Expectation value `tr(ρ P)` of a phased Pauli string.
    ///
    /// Works in `O(4^n)` time without materializing the operator: a Pauli
    /// string maps each basis ket to a phase times another basis ket.
    pub fn expectation(&self, obs: &PauliString) -> Result<Complex64> {
        if let Some(max) = obs.max_site() {
            if max >= self.n_qubits {
                return Err(Error::SiteOutOfRange { site: max, n_sites: self.n_qubits });
            }
        }
        let n = self.n_qubits;
        // Column action: P|b⟩ = coeff(b) |b ⊕ flip_mask⟩.
        let mut flip_mask = 0usize;
        for (site, op) in obs.iter() {
            if matches!(op, crate::pauli::PauliOp::X | crate::pauli::PauliOp::Y) {
                flip_mask |= 1 << (n - 1 - site);
            }
        }
        let mut total = C_ZERO;
        for b in 0..self.dim() {
            let mut coeff = obs.phase().value();
            for (site, op) in obs.iter() {
                let bit = (b >> (n - 1 - site)) & 1;
                match op {
                    crate::pauli::PauliOp::X => {}
                    // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩
                    crate::pauli::PauliOp::Y => {
                        coeff *= if bit == 0 { linalg::C_I } else { -linalg::C_I };
                    }
                    crate::pauli::PauliOp::Z => {
                        if bit == 1 {
                            coeff = -coeff;
                        }
                    }
                }
            }
            // ⟨b|ρP|b⟩ = coeff(b) · ⟨b|ρ|b ⊕ m⟩, summed over the basis.
            total += coeff * self.mat[(b, b ^ flip_mask)];
        }
        Ok(total)
    }

    /// Expectation value `tr(ρ M)` of an arbitrary dense operator.
    pub fn expectation_matrix(&self, m: &CMat) -> Result<Complex64> {
        if m.dim() != self.mat.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator is {:?}, state is {:?}",
                m.dim(),
                self.mat.dim()
            )));
        }
        Ok(linalg::trace(&self.mat.dot(m)))
    }

    /// Conjugate by a unitary: `ρ ↦ u ρ u†`.
    pub fn apply_unitary(&self, u: &CMat) -> Result<DensityMatrix> {
        if u.dim() != self.mat.dim() {
            return Err(Error::DimensionMismatch(format!(
                "unitary is {:?}, state is {:?}",
                u.dim(),
                self.mat.dim()
            )));
        }
        let mat = u.dot(&self.mat).dot(&linalg::dagger(u));
        Ok(DensityMatrix { n_qubits: self.n_qubits, mat })
    }

    /// Bloch vector `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` of one site (other sites traced out
    /// implicitly by the expectation values).
    pub fn bloch_vector(&self, site: usize) -> Result<[f64; 3]> {
        use crate::pauli::PauliOp::*;
        let mut out = [0.0; 3];
        for (slot, op) in [(0usize, X), (1, Y), (2, Z)] {
            out[slot] = self.expectation(&PauliString::single(site, op))?.re;
        }
        Ok(out)
    }

    /// Reduced state on `keep` (strictly ascending site list); the kept
    /// sites are renumbered `0..keep.len()` in order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::InvalidParameter("partial_trace must keep at least one site".into()));
        }
        if keep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "partial_trace expects strictly ascending site indices".into(),
            ));
        }
        let n = self.n_qubits;
        for &s in keep {
            if s >= n {
                return Err(Error::SiteOutOfRange { site: s, n_sites: n });
            }
        }
        let traced: Vec<usize> = (0..n).filter(|s| !keep.contains(s)).collect();
        let k = keep.len();
        let kd = 1usize << k;
        let td = 1usize << traced.len();
        // Bit position (from LSB) of each site in the full index.
        let pos = |site: usize| n - 1 - site;
        let scatter = |bits: usize, sites: &[usize]| -> usize {
            // bits are MSB-first over `sites` (preserving site order).
            let mut out = 0usize;
            for (rank, &site) in sites.iter().enumerate() {
                let bit = (bits >> (sites.len() - 1 - rank)) & 1;
                out |= bit << pos(site);
            }
            out
        };
        let mut mat = Array2::from_elem((kd, kd), C_ZERO);
        for a in 0..kd {
            for b in 0..kd {
                let mut sum = C_ZERO;
                for t in 0..td {
                    let row = scatter(a, keep) | scatter(t, &traced);
                    let col = scatter(b, keep) | scatter(t, &traced);
                    sum += self.mat[(row, col)];
                }
                mat[(a, b)] = sum;
            }
        }
        DensityMatrix::from_matrix(k, mat)
    }

    /// Measure one site, demanding a specific outcome. Returns the outcome
    /// probability and the renormalized post-measurement state; outcomes
    /// with probability below [`PROBABILITY_FLOOR`] are errors.
    pub fn measure_forced(
        &self,
        measurement: &Measurement,
        outcome: u8,
    ) -> Result<(f64, DensityMatrix)> {
        if outcome > 1 {
            return Err(Error::InvalidParameter(format!("outcome must be 0 or 1, got {outcome}")));
        }
        let site = measurement.site();
        if site >= self.n_qubits {
            return Err(Error::SiteOutOfRange { site, n_sites: self.n_qubits });
        }
        let proj = linalg::embed_one_qubit(&measurement.projector(outcome), site, self.n_qubits)?;
        let prob = linalg::trace(&proj.dot(&self.mat)).re;
        if prob < PROBABILITY_FLOOR {
            return Err(Error::ImpossibleOutcome {
                outcome,
                probability: prob,
                floor: PROBABILITY_FLOOR,
            });
        }
        let mut post = proj.dot(&self.mat).dot(&proj);
        post.mapv_inplace(|v| v / Complex64::new(prob, 0.0));
        Ok((prob, DensityMatrix { n_qubits: self.n_qubits, mat: post }))
    }

    /// Measure one site, sampling the outcome from the Born rule.
    pub fn measure_sampled<R: Rng + ?Sized>(
        &self,
        measurement: &Measurement,
        rng: &mut R,
    ) -> Result<(u8, f64, DensityMatrix)> {
        let site = measurement.site();
        if site >= self.n_qubits {
            return Err(Error::SiteOutOfRange { site, n_sites: self.n_qubits });
        }
        let proj0 = linalg::embed_one_qubit(&measurement.projector(0), site, self.n_qubits)?;
        let p0 = linalg::trace(&proj0.dot(&self.mat)).re.clamp(0.0, 1.0);
        let outcome = if rng.gen::<f64>() < p0 { 0u8 } else { 1u8 };
        let (prob, post) = self.measure_forced(measurement, outcome)?;
        Ok((outcome, prob, post))
    }

    /// Trace, Hermiticity, and positivity diagnostics.
    pub fn physicality(&self) -> Result<PhysicalityReport> {
        let trace_deviation = (self.trace() - C_ONE).norm();
        let hermiticity_deviation = linalg::max_abs_diff(&self.mat, &linalg::dagger(&self.mat));
        let (values, _) = linalg::eigh(&self.mat)?;
        let min_eigenvalue = values.first().copied().unwrap_or(0.0);
        Ok(PhysicalityReport { trace_deviation, hermiticity_deviation, min_eigenvalue })
    }

    /// Serializable snapshot of this state.
    pub fn snapshot(&self) -> StateSnapshot {
        let data = self.mat.iter().map(|v| [v.re, v.im]).collect();
        StateSnapshot { n_qubits: self.n_qubits, data }
    }

    /// Restore a state from a snapshot.
    pub fn from_snapshot(snap: &StateSnapshot) -> Result<Self> {
        let dim = 1usize
            .checked_shl(snap.n_qubits as u32)
            .ok_or_else(|| Error::CapacityExceeded(snap.n_qubits))?;
        if snap.data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "snapshot claims {} qubits but carries {} entries",
                snap.n_qubits,
                snap.data.len()
            )));
        }
        let mat = Array2::from_shape_vec(
            (dim, dim),
            snap.data.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
        )
        .expect("length checked above");
        DensityMatrix::from_matrix(snap.n_qubits, mat)
    }
}

/// Row-major serialized form of a [`DensityMatrix`]; each entry is
/// `[re, im]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub n_qubits: usize,
    pub data: Vec<[f64; 2]>,
}

/// Trace / Hermiticity / positivity audit of a density matrix.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhysicalityReport {
    /// `|tr ρ − 1|`.
    pub trace_deviation: f64,
    /// Largest entrywise deviation from `ρ = ρ†`.
    pub hermiticity_deviation: f64,
    /// Smallest eigenvalue (negative values signal unphysical states).
    pub min_eigenvalue: f64,
}

impl PhysicalityReport {
    /// All diagnostics within `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.trace_deviation <= tol
            && self.hermiticity_deviation <= tol
            && self.min_eigenvalue >= -tol
    }
}

/// A projective single-site measurement basis.
///
/// Outcomes are `0` (the `+1` eigenvector) and `1` (the `−1` eigenvector):
/// `Z` measures the computational basis; `XY { angle: φ }` measures
/// `cos φ · X + sin φ · Y`, whose `+1` eigenvector is
/// `(|0⟩ + e^{iφ}|1⟩)/√2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Measurement {
    Z { site: usize },
    XY { site: usize, angle: f64 },
}

impl Measurement {
    pub fn site(&self) -> usize {
        match self {
            Measurement::Z { site } => *site,
            Measurement::XY { site, .. } => *site,
        }
    }

    /// 2×2 projector onto the given outcome.
    pub fn projector(&self, outcome: u8) -> CMat {
        let sign = if outcome == 0 { 1.0 } else { -1.0 };
        match self {
            Measurement::Z { .. } => {
                let half = Complex64::new(0.5, 0.0);
                let s = Complex64::new(0.5 * sign, 0.0);
                ndarray::array![[half + s, C_ZERO], [C_ZERO, half - s]]
            }
            Measurement::XY { angle, .. } => {
                // ½(I ± (cos φ X + sin φ Y))
                let half = Complex64::new(0.5, 0.0);
                let off = Complex64::new(angle.cos(), -angle.sin()) * Complex64::new(0.5 * sign, 0.0);
                ndarray::array![[half, off], [off.conj(), half]]
            }
        }
    }
}

/// The controlled-Z entangling layer of a lattice: `U = Π_{(i,j)∈E} CZ_{ij}`.
///
/// `U` is diagonal with entries `±1`, Hermitian, and its own inverse, so
/// conjugation by it is simply `ρ ↦ U ρ U`.
#[derive(Clone, Debug)]
pub struct CzEntangler {
    n_qubits: usize,
    /// Sign of each diagonal entry: `(−1)^{#edges with both endpoints set}`.
    signs: Vec<f64>,
}

impl CzEntangler {
    pub fn new(lattice: &Lattice) -> Result<Self> {
        let n = lattice.n_sites();
        linalg::check_register_size(n)?;
        let dim = 1usize << n;
        let pos = |site: usize| n - 1 - site;
        let mut signs = vec![1.0; dim];
        for (b, sign) in signs.iter_mut().enumerate() {
            let mut parity = 0usize;
            for (i, j) in lattice.edges() {
                if (b >> pos(i)) & 1 == 1 && (b >> pos(j)) & 1 == 1 {
                    parity ^= 1;
                }
            }
            if parity == 1 {
                *sign = -1.0;
            }
        }
        Ok(CzEntangler { n_qubits: n, signs })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Dense matrix of the layer (diagonal `±1`).
    pub fn matrix(&self) -> CMat {
        let dim = self.signs.len();
        let mut m = Array2::from_elem((dim, dim), C_ZERO);
        for (b, &s) in self.signs.iter().enumerate() {
            m[(b, b)] = Complex64::new(s, 0.0);
        }
        m
    }

    /// Conjugate an operator or state: `m ↦ U m U`.
    pub fn conjugate(&self, m: &CMat) -> Result<CMat> {
        let dim = self.signs.len();
        if m.dim() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!(
                "entangler acts on {dim}×{dim}, got {:?}",
                m.dim()
            )));
        }
        let mut out = m.clone();
        for ((i, j), v) in out.indexed_iter_mut() {
            *v *= Complex64::new(self.signs[i] * self.signs[j], 0.0);
        }
        Ok(out)
    }

    /// Conjugate a density matrix: `ρ ↦ U ρ U`.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "entangler is for {} qubits, state has {}",
                self.n_qubits,
                rho.n_qubits()
            )));
        }
        DensityMatrix::from_matrix(self.n_qubits, self.conjugate(rho.matrix())?)
    }

    /// Apply to a ket: `|ψ⟩ ↦ U|ψ⟩`.
    pub fn apply_ket(&self, psi: &CVec) -> Result<CVec> {
        if psi.len() != self.signs.len() {
            return Err(Error::DimensionMismatch(format!(
                "entangler acts on dimension {}, ket has {}",
                self.signs.len(),
                psi.len()
            )));
        }
        Ok(CVec::from_iter(
            psi.iter().zip(&self.signs).map(|(&v, &s)| v * Complex64::new(s, 0.0)),
        ))
    }
}

/// The ideal (zero-temperature) cluster state of a lattice:
/// `U |+⟩^{⊗N}` with `U` the controlled-Z layer.
pub fn cluster_state(lattice: &Lattice) -> Result<DensityMatrix> {
    let n = lattice.n_sites();
    linalg::check_register_size(n)?;
    let dim = 1usize << n;
    let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
    let plus = CVec::from_elem(dim, amp);
    let ket = CzEntangler::new(lattice)?.apply_ket(&plus)?;
    DensityMatrix::from_pure(n, &ket)
}

/// Excitation probability of a single cluster qubit at temperature `k_t`
/// (in energy units) for stabilizer gap `delta`: `1/(1 + e^{Δ/kT})`.
///
/// `k_t = 0` gives the ground state (0); `k_t = ∞` gives ½.
pub fn excitation_probability(delta: f64, k_t: f64) -> f64 {
    if k_t <= 0.0 {
        return 0.0;
    }
    1.0 / (1.0 + (delta / k_t).exp())
}

/// Thermal cluster state with per-site excitation probability `p_exc`.
///
/// Built by entangling the product of single-site mixtures
/// `(1 − p)|+⟩⟨+| + p|−⟩⟨−|`; this equals the Gibbs state of the cluster
/// Hamiltonian at the matching temperature.
pub fn thermal_cluster_state(lattice: &Lattice, p_exc: f64) -> Result<DensityMatrix> {
    if !(0.0..=0.5 + 1e-12).contains(&p_exc) {
        return Err(Error::InvalidParameter(format!(
            "excitation probability must lie in [0, 1/2], got {p_exc}"
        )));
    }
    let n = lattice.n_sites();
    let site = plus_minus_mixture(p_exc);
    let factors = vec![site; n];
    let product = DensityMatrix::product(&factors)?;
    CzEntangler::new(lattice)?.apply(&product)
}

/// Single-qubit mixture `(1 − p)|+⟩⟨+| + p|−⟩⟨−|` as a 2×2 matrix.
pub fn plus_minus_mixture(p_exc: f64) -> CMat {
    let half = Complex64::new(0.5, 0.0);
    let off = Complex64::new(0.5 - p_exc, 0.0);
    ndarray::array![[half, off], [off, half]]
}

/// Uhlmann fidelity `F(ρ, σ) = (tr √(√ρ σ √ρ))²`.
///
/// Equals `tr(ρσ)` when either state is pure, and 1 iff the states match.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity of {}- and {}-qubit states",
            a.n_qubits(),
            b.n_qubits()
        )));
    }
    let overlap = linalg::trace(&a.matrix().dot(b.matrix())).re;
    // Pure shortcut: if either argument is (numerically) pure,
    // F = ⟨ψ|σ|ψ⟩ = tr(ρσ).
    if a.purity() > 1.0 - 1e-12 || b.purity() > 1.0 - 1e-12 {
        return Ok(overlap.clamp(0.0, 1.0));
    }
    if a.n_qubits() == 1 {
        // Closed form for qubits: tr(ρσ) + 2√(det ρ · det σ).
        let det = |m: &CMat| (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
        let d = (det(a.matrix()).max(0.0) * det(b.matrix()).max(0.0)).sqrt();
        return Ok((overlap + 2.0 * d).clamp(0.0, 1.0));
    }
    let root_a = linalg::sqrtm_psd(a.matrix())?;
    let inner = root_a.dot(b.matrix()).dot(&root_a);
    let (values, _) = linalg::eigh(&inner)?;
    let sum: f64 = values.iter().map(|&v| v.max(0.0).sqrt()).sum();
    Ok((sum * sum).clamp(0.0, 1.0))
}

/// Trace distance `½ ‖ρ − σ‖₁`; 0 for equal states, 1 for orthogonal ones.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance of {}- and {}-qubit states",
            a.n_qubits(),
            b.n_qubits()
        )));
    }
    let diff = a.matrix() - b.matrix();
    let (values, _) = linalg::eigh(&diff)?;
    Ok(0.5 * values.iter().map(|v| v.abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{PauliOp, Phase};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn all_plus_has_unit_x_expectations() {
        let rho = DensityMatrix::all_plus(3).unwrap();
        for site in 0..3 {
            let x = rho.expectation(&PauliString::single(site, PauliOp::X)).unwrap();
            assert_abs_diff_eq!(x.re, 1.0, epsilon = 1e-14);
            let z = rho.expectation(&PauliString::single(site, PauliOp::Z)).unwrap();
            assert_abs_diff_eq!(z.re, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn expectation_matches_dense_operator() {
        let lat = Lattice::line(3).unwrap();
        let rho = cluster_state(&lat).unwrap();
        for p in [
            "Z0 X1 Z2".parse::<PauliString>().unwrap(),
            "-i * Y0 X2".parse().unwrap(),
            "+1 * I".parse().unwrap(),
            "Y1".parse().unwrap(),
        ] {
            let fast = rho.expectation(&p).unwrap();
            let dense = rho
                .expectation_matrix(&linalg::pauli_matrix(&p, 3).unwrap())
                .unwrap();
            assert_abs_diff_eq!(fast.re, dense.re, epsilon = 1e-13);
            assert_abs_diff_eq!(fast.im, dense.im, epsilon = 1e-13);
        }
    }

    #[test]
    fn cz_on_two_qubits_is_standard() {
        let lat = Lattice::line(2).unwrap();
        let u = CzEntangler::new(&lat).unwrap().matrix();
        let diag: Vec<f64> = u.diag().iter().map(|v| v.re).collect();
        assert_eq!(diag, vec![1.0, 1.0, 1.0, -1.0]);
    }

    #[test]
    fn entangler_is_involution() {
        let lat = Lattice::square(2, 2).unwrap();
        let u = CzEntangler::new(&lat).unwrap();
        let m = u.matrix();
        assert!(linalg::max_abs_diff(&m.dot(&m), &linalg::identity(16)) < 1e-15);
    }

    #[test]
    fn cluster_state_is_stabilized() {
        for lat in [
            Lattice::line(4).unwrap(),
            Lattice::square(2, 2).unwrap(),
            Lattice::custom(4, [(0, 1), (0, 2), (0, 3)]).unwrap(),
        ] {
            let rho = cluster_state(&lat).unwrap();
            assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-12);
            for k in lat.stabilizers() {
                let val = rho.expectation(&k).unwrap();
                assert_abs_diff_eq!(val.re, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn entangler_maps_stabilizer_to_bare_x() {
        // U K_i U = X_i: conjugating the stabilizer by the entangling layer
        // strips the Z legs.
        let lat = Lattice::line(3).unwrap();
        let u = CzEntangler::new(&lat).unwrap();
        for site in 0..3 {
            let k = linalg::pauli_matrix(&lat.stabilizer(site).unwrap(), 3).unwrap();
            let x = linalg::pauli_matrix(&PauliString::single(site, PauliOp::X), 3).unwrap();
            assert!(linalg::max_abs_diff(&u.conjugate(&k).unwrap(), &x) < 1e-14);
        }
    }

    /// Gibbs state of the cluster Hamiltonian via the commuting product
    /// formula: exp(x Σ K_i) = Π (cosh x · I + sinh x · K_i).
    fn gibbs_oracle(lat: &Lattice, delta: f64, k_t: f64) -> DensityMatrix {
        let n = lat.n_sites();
        let dim = 1usize << n;
        let x = delta / (2.0 * k_t);
        let mut m = linalg::identity(dim);
        for k in lat.stabilizers() {
            let km = linalg::pauli_matrix(&k, n).unwrap();
            let factor = linalg::identity(dim).mapv(|v| v * Complex64::new(x.cosh(), 0.0))
                + km.mapv(|v| v * Complex64::new(x.sinh(), 0.0));
            m = m.dot(&factor);
        }
        let tr = linalg::trace(&m).re;
        DensityMatrix::from_matrix(n, m.mapv(|v| v / Complex64::new(tr, 0.0))).unwrap()
    }

    #[test]
    fn thermal_cluster_state_is_gibbs() {
        let delta = 1.0;
        for lat in [Lattice::line(3).unwrap(), Lattice::square(2, 2).unwrap()] {
            for k_t in [0.5, 1.0, 2.0] {
                let p = excitation_probability(delta, k_t);
                let built = thermal_cluster_state(&lat, p).unwrap();
                let oracle = gibbs_oracle(&lat, delta, k_t);
                assert!(
                    linalg::max_abs_diff(built.matrix(), oracle.matrix()) < 1e-12,
                    "thermal state deviates from Gibbs at kT = {k_t}"
                );
            }
        }
    }

    #[test]
    fn thermal_state_at_zero_temperature_is_pure_cluster() {
        let lat = Lattice::line(3).unwrap();
        let cold = thermal_cluster_state(&lat, 0.0).unwrap();
        let pure = cluster_state(&lat).unwrap();
        assert!(linalg::max_abs_diff(cold.matrix(), pure.matrix()) < 1e-14);
    }

    #[test]
    fn excitation_probability_limits() {
        assert_eq!(excitation_probability(1.0, 0.0), 0.0);
        assert_abs_diff_eq!(excitation_probability(1.0, f64::INFINITY), 0.5, epsilon = 1e-15);
        // kT = Δ/ln 3 → p = 1/4
        let kt = 1.0 / 3f64.ln();
        assert_abs_diff_eq!(excitation_probability(1.0, kt), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn z_measurement_on_plus_is_unbiased() {
        let rho = DensityMatrix::all_plus(1).unwrap();
        let m = Measurement::Z { site: 0 };
        let (p0, post0) = rho.measure_forced(&m, 0).unwrap();
        assert_abs_diff_eq!(p0, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(post0.matrix()[(0, 0)].re, 1.0, epsilon = 1e-14);
        let (p1, post1) = rho.measure_forced(&m, 1).unwrap();
        assert_abs_diff_eq!(p1, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(post1.matrix()[(1, 1)].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn xy_measurement_aligns_with_plus() {
        let rho = DensityMatrix::all_plus(1).unwrap();
        // φ = 0 measures X; |+⟩ gives outcome 0 with certainty.
        let m = Measurement::XY { site: 0, angle: 0.0 };
        let (p0, _) = rho.measure_forced(&m, 0).unwrap();
        assert_abs_diff_eq!(p0, 1.0, epsilon = 1e-14);
        assert!(matches!(
            rho.measure_forced(&m, 1),
            Err(Error::ImpossibleOutcome { outcome: 1, .. })
        ));
    }

    #[test]
    fn xy_projector_eigenvector_phase_convention() {
        // Outcome 0 of XY(φ) projects onto (|0⟩ + e^{iφ}|1⟩)/√2.
        let phi = 1.234f64;
        let m = Measurement::XY { site: 0, angle: phi };
        let p = m.projector(0);
        let ket = CVec::from_vec(vec![
            Complex64::new(0.5f64.sqrt(), 0.0),
            Complex64::new(0.0, phi).exp() * Complex64::new(0.5f64.sqrt(), 0.0),
        ]);
        let projected: CVec = p.dot(&ket);
        let err: f64 = projected
            .iter()
            .zip(ket.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-14);
    }

    #[test]
    fn sampled_measurement_is_reproducible() {
        let lat = Lattice::line(2).unwrap();
        let rho = cluster_state(&lat).unwrap();
        let m = Measurement::XY { site: 0, angle: 0.3 };
        let run = |seed: u64| {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            (0..10)
                .map(|_| rho.measure_sampled(&m, &mut rng).unwrap().0)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
    }

    #[test]
    fn partial_trace_of_product_recovers_factor() {
        let site0 = plus_minus_mixture(0.2);
        let site1 = DensityMatrix::basis(1, 1).unwrap().into_matrix();
        let rho = DensityMatrix::product(&[site0.clone(), site1]).unwrap();
        let red = rho.partial_trace(&[0]).unwrap();
        assert!(linalg::max_abs_diff(red.matrix(), &site0) < 1e-14);
    }

    #[test]
    fn partial_trace_of_cluster_pair_is_maximally_mixed() {
        let lat = Lattice::line(2).unwrap();
        let rho = cluster_state(&lat).unwrap();
        let red = rho.partial_trace(&[1]).unwrap();
        let mixed = linalg::identity(2).mapv(|v| v * Complex64::new(0.5, 0.0));
        assert!(linalg::max_abs_diff(red.matrix(), &mixed) < 1e-14);
    }

    #[test]
    fn partial_trace_keeps_trace() {
        let lat = Lattice::line(3).unwrap();
        let rho = thermal_cluster_state(&lat, 0.1).unwrap();
        let red = rho.partial_trace(&[0, 2]).unwrap();
        assert_abs_diff_eq!(red.trace().re, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn fidelity_of_pure_states_is_overlap() {
        let zero = DensityMatrix::basis(1, 0).unwrap();
        let plus = DensityMatrix::all_plus(1).unwrap();
        assert_abs_diff_eq!(fidelity(&zero, &plus).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(fidelity(&zero, &zero).unwrap(), 1.0, epsilon = 1e-14);
        let one = DensityMatrix::basis(1, 1).unwrap();
        assert_abs_diff_eq!(fidelity(&zero, &one).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn mixed_fidelity_routes_agree() {
        // Two distinct mixed qubit states: closed form vs. eigensolver route
        // (forced by embedding into two qubits with an uncorrelated spectator).
        let a1 = DensityMatrix::from_bloch([0.3, 0.1, -0.4]).unwrap();
        let b1 = DensityMatrix::from_bloch([-0.2, 0.5, 0.1]).unwrap();
        let f_closed = fidelity(&a1, &b1).unwrap();
        let spectator = plus_minus_mixture(0.25);
        let a2 = DensityMatrix::product(&[a1.matrix().clone(), spectator.clone()]).unwrap();
        let b2 = DensityMatrix::product(&[b1.matrix().clone(), spectator.clone()]).unwrap();
        let f_spec = fidelity(&spectator_state(&spectator), &spectator_state(&spectator)).unwrap();
        let f_general = fidelity(&a2, &b2).unwrap();
        // Fidelity is multiplicative over tensor products.
        assert_abs_diff_eq!(f_general, f_closed * f_spec, epsilon = 1e-10);
        assert_abs_diff_eq!(f_spec, 1.0, epsilon = 1e-12);
    }

    fn spectator_state(m: &CMat) -> DensityMatrix {
        DensityMatrix::from_matrix(1, m.clone()).unwrap()
    }

    #[test]
    fn trace_distance_extremes() {
        let zero = DensityMatrix::basis(1, 0).unwrap();
        let one = DensityMatrix::basis(1, 1).unwrap();
        assert_abs_diff_eq!(trace_distance(&zero, &one).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(trace_distance(&zero, &zero).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn snapshot_round_trip() {
        let lat = Lattice::line(2).unwrap();
        let rho = thermal_cluster_state(&lat, 0.15).unwrap();
        let json = serde_json::to_string(&rho.snapshot()).unwrap();
        let snap: StateSnapshot = serde_json::from_str(&json).unwrap();
        let back = DensityMatrix::from_snapshot(&snap).unwrap();
        assert!(linalg::max_abs_diff(rho.matrix(), back.matrix()) < 1e-15);
    }

    #[test]
    fn physicality_report_flags_good_state() {
        let lat = Lattice::line(3).unwrap();
        let rho = thermal_cluster_state(&lat, 0.2).unwrap();
        let report = rho.physicality().unwrap();
        assert!(report.is_physical(1e-9), "{report:?}");
    }

    #[test]
    fn bloch_round_trip() {
        let rho = DensityMatrix::from_bloch([0.2, -0.3, 0.4]).unwrap();
        let [x, y, z] = rho.bloch_vector(0).unwrap();
        assert_abs_diff_eq!(x, 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(y, -0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(z, 0.4, epsilon = 1e-14);
        assert!(DensityMatrix::from_bloch([1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn canonical_phase_split_matches_expectation() {
        let lat = Lattice::line(2).unwrap();
        let rho = cluster_state(&lat).unwrap();
        let p: PauliString = "-i * Y0 X1".parse().unwrap();
        let (phase, bare) = p.canonical();
        assert_eq!(bare.phase(), Phase::PlusOne);
        let full = rho.expectation(&p).unwrap();
        let split = phase * rho.expectation(&bare).unwrap();
        assert_abs_diff_eq!(full.re, split.re, epsilon = 1e-14);
        assert_abs_diff_eq!(full.im, split.im, epsilon = 1e-14);
    }
}
