//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Everything here works on `ndarray` matrices of [`Complex64`]. Dimensions
//! stay small (at most `2^MAX_QUBITS`), so simple dense algorithms are used
//! throughout: Kronecker products, a cyclic-Jacobi Hermitian eigensolver, a
//! scaling-and-squaring matrix exponential, and PSD square roots.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::pauli::{PauliOp, PauliString};
use crate::{Error, Result};

/// Dense complex matrix.
pub type CMat = Array2<Complex64>;
/// Dense complex vector.
pub type CVec = Array1<Complex64>;

pub(crate) const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const C_I: Complex64 = Complex64::new(0.0, 1.0);

/// `dim × dim` identity.
pub fn identity(dim: usize) -> CMat {
    Array2::eye(dim)
}

/// The 2×2 matrix of a single Pauli letter.
pub fn pauli_2x2(op: PauliOp) -> CMat {
    match op {
        PauliOp::X => ndarray::array![[C_ZERO, C_ONE], [C_ONE, C_ZERO]],
        PauliOp::Y => ndarray::array![[C_ZERO, -C_I], [C_I, C_ZERO]],
        PauliOp::Z => ndarray::array![[C_ONE, C_ZERO], [C_ZERO, -C_ONE]],
    }
}

/// The 2×2 Hadamard gate.
pub fn hadamard() -> CMat {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    ndarray::array![[h, h], [h, -h]]
}

/// The single-qubit rotation `exp(−i θ X / 2)`.
pub fn rot_x(theta: f64) -> CMat {
    let c = Complex64::new((0.5 * theta).cos(), 0.0);
    let s = Complex64::new(0.0, -(0.5 * theta).sin());
    ndarray::array![[c, s], [s, c]]
}

/// The single-qubit rotation `exp(−i θ Z / 2)`.
pub fn rot_z(theta: f64) -> CMat {
    let half = 0.5 * theta;
    let lower = Complex64::from_polar(1.0, half);
    ndarray::array![[lower.conj(), C_ZERO], [C_ZERO, lower]]
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::from_elem((ra * rb, ca * cb), C_ZERO);
    for ((ia, ja), &va) in a.indexed_iter() {
        if va == C_ZERO {
            continue;
        }
        for ((ib, jb), &vb) in b.indexed_iter() {
            out[(ia * rb + ib, ja * cb + jb)] = va * vb;
        }
    }
    out
}

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|v| v.conj())
}

/// `[a, b] = ab − ba`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

/// `{a, b} = ab + ba`.
pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) + b.dot(a)
}

pub fn trace(a: &CMat) -> Complex64 {
    a.diag().sum()
}

pub fn frobenius_norm(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise absolute difference between two matrices.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch in max_abs_diff");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest absolute value of any entry.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Hermitian part `(a + a†)/2`.
pub fn hermitize(a: &CMat) -> CMat {
    (a + &dagger(a)).mapv(|v| v * 0.5)
}

pub(crate) fn check_register_size(n_qubits: usize) -> Result<()> {
    if n_qubits > crate::MAX_QUBITS {
        return Err(Error::CapacityExceeded(n_qubits));
    }
    if n_qubits == 0 {
        return Err(Error::InvalidParameter("register needs at least one qubit".into()));
    }
    Ok(())
}

/// A single-qubit operator embedded into an `n_qubits` register.
///
/// Site 0 is the most significant bit of the basis index, so the result is
/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` in slot `site` of the Kronecker chain.
pub fn embed_one_qubit(op: &CMat, site: usize, n_qubits: usize) -> Result<CMat> {
    check_register_size(n_qubits)?;
    if op.dim() != (2, 2) {
        return Err(Error::DimensionMismatch(format!(
            "embed_one_qubit expects a 2×2 operator, got {:?}",
            op.dim()
        )));
    }
    if site >= n_qubits {
        return Err(Error::SiteOutOfRange { site, n_sites: n_qubits });
    }
    let mut out = identity(1);
    for s in 0..n_qubits {
        out = if s == site { kron(&out, op) } else { kron(&out, &identity(2)) };
    }
    Ok(out)
}

/// Dense matrix of a Pauli string on an `n_qubits` register, including its
/// phase. Site 0 is the most significant bit of the basis index.
pub fn pauli_matrix(p: &PauliString, n_qubits: usize) -> Result<CMat> {
    check_register_size(n_qubits)?;
    if let Some(max) = p.max_site() {
        if max >= n_qubits {
            return Err(Error::SiteOutOfRange { site: max, n_sites: n_qubits });
        }
    }
    let mut out = identity(1);
    for s in 0..n_qubits {
        out = match p.op_at(s) {
            Some(op) => kron(&out, &pauli_2x2(op)),
            None => kron(&out, &identity(2)),
        };
    }
    Ok(out.mapv(|v| v * p.phase().value()))
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as the columns of the second element, so that
/// `a = V · diag(λ) · V†`. The input is symmetrized first; callers should
/// only pass matrices that are Hermitian up to round-off.
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(Error::DimensionMismatch(format!(
            "eigh expects a square matrix, got {rows}×{cols}"
        )));
    }
    let n = rows;
    let mut m = hermitize(a);
    let mut v = identity(n);
    let scale = frobenius_norm(&m).max(1.0);
    let tol = 1e-15 * scale;
    const MAX_SWEEPS: usize = 100;

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| m[(p, q)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = m[(p, q)];
                let babs = beta.norm();
                if babs <= tol / (n as f64) {
                    continue;
                }
                let phase = beta / babs;
                let alpha = m[(p, p)].re;
                let gamma = m[(q, q)].re;
                // tan of the rotation angle that annihilates m[p][q]:
                // the small-magnitude root of t² − 2τt − 1 = 0.
                let tau = (gamma - alpha) / (2.0 * babs);
                let t = -tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Columns p and q of every row are mixed by the unitary
                // U = [[c, −s·phase], [s·conj(phase), c]] acting on (p, q).
                let (cs, sp, spc) = (
                    Complex64::new(c, 0.0),
                    phase * Complex64::new(s, 0.0),
                    phase.conj() * Complex64::new(s, 0.0),
                );
                for r in 0..n {
                    let mp = m[(r, p)];
                    let mq = m[(r, q)];
                    m[(r, p)] = cs * mp + spc * mq;
                    m[(r, q)] = -sp * mp + cs * mq;
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = cs * vp + spc * vq;
                    v[(r, q)] = -sp * vp + cs * vq;
                }
                for col in 0..n {
                    let mp = m[(p, col)];
                    let mq = m[(q, col)];
                    m[(p, col)] = cs * mp + sp * mq;
                    m[(q, col)] = -spc * mp + cs * mq;
                }
            }
        }
    }

    let mut pairs: Vec<(f64, usize)> =
        (0..n).map(|i| (m[(i, i)].re, i)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("eigenvalues are finite"));
    let values: Vec<f64> = pairs.iter().map(|&(lam, _)| lam).collect();
    let mut vectors = Array2::from_elem((n, n), C_ZERO);
    for (new_col, &(_, old_col)) in pairs.iter().enumerate() {
        for r in 0..n {
            vectors[(r, new_col)] = v[(r, old_col)];
        }
    }
    Ok((values, vectors))
}

/// Principal square root of a positive semi-definite Hermitian matrix.
///
/// Small negative eigenvalues from round-off are clamped to zero.
pub fn sqrtm_psd(a: &CMat) -> Result<CMat> {
    let (values, vectors) = eigh(a)?;
    let n = values.len();
    let mut out = Array2::from_elem((n, n), C_ZERO);
    for (k, &lam) in values.iter().enumerate() {
        let root = lam.max(0.0).sqrt();
        if root == 0.0 {
            continue;
        }
        let col = vectors.column(k);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += Complex64::new(root, 0.0) * col[i] * col[j].conj();
            }
        }
    }
    Ok(out)
}

/// Matrix exponential by scaling and squaring with a Taylor series.
///
/// Intended for the small, well-scaled generators used in this crate; the
/// series is summed to machine precision after scaling the norm below 1/2.
pub fn expm(a: &CMat) -> Result<CMat> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(Error::DimensionMismatch(format!(
            "expm expects a square matrix, got {rows}×{cols}"
        )));
    }
    let norm = frobenius_norm(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.mapv(|v| v / Complex64::new(2f64.powi(squarings as i32), 0.0));

    let mut sum = identity(rows);
    let mut term = identity(rows);
    for k in 1..=40 {
        term = term.dot(&scaled).mapv(|v| v / Complex64::new(k as f64, 0.0));
        sum += &term;
        if frobenius_norm(&term) < 1e-17 * frobenius_norm(&sum) {
            break;
        }
    }
    let mut out = sum;
    for _ in 0..squarings {
        out = out.dot(&out);
    }
    Ok(out)
}
