//! Symbolic interaction-picture equations of motion for Pauli observables.
//!
//! For the dissipative cluster dynamics, the Heisenberg derivative of a
//! Pauli observable `M` decomposes into independent per-site contributions
//! fixed by how `M` commutes with `Z_i` and with the site's (effective)
//! stabilizer `K_i`:
//!
//! * `{M, K_i} = 0` → decay at rate `(α+β)/2`;
//! * `{M, Z_i} = 0` and `[M, K_i] = 0` → decay at rate `(α+β)` plus a
//!   source `(α−β)⟨M K_i⟩`;
//! * `[M, Z_i] = 0` and `[M, K_i] = 0` → no contribution.
//!
//! Because each source strictly lowers the number of X/Y letters, the
//! closure is finite and triangular, and the system solves in closed form
//! as sums of `c · tᵖ · e^{rt}` terms ([`EomSystem::solve`]). A dense
//! matrix-exponential route ([`EomSystem::solve_via_expm`]) provides an
//! independent numerical cross-check.
//!
//! An [`EomContext`] classifies every lattice site as logical (carrying
//! quantum information), previously measured (`XY`-plane or `Z` basis), or
//! still at thermal equilibrium. Equilibrium sites sit at a fixed point of
//! their local dissipator, so they contribute nothing to the equations and
//! their `Z` legs drop out of the effective stabilizers.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::pauli::{Lattice, PauliOp, PauliString, Phase};
use crate::{Error, Result};

/// Hard cap on the closure size; finite lattices stay far below it, so
/// hitting the cap indicates a malformed context.
pub const CLOSURE_CAP: usize = 10_000;

/// How a previously measured site was read out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasuredBasis {
    /// Measured in the equatorial plane; `⟨Z⟩ = 0` exactly afterwards.
    XyPlane,
    /// Measured in the computational basis with the recorded outcome.
    ZBasis { outcome: u8 },
}

/// Classification of a lattice site within one computation step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteRole {
    /// Carries the logical state this step (the active qubits).
    Logical,
    /// Already measured in an earlier step.
    Measured(MeasuredBasis),
    /// Unmeasured and still in local thermal equilibrium.
    Equilibrium,
}

/// Per-site roles and known initial Bloch data for one computation step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EomContext {
    lattice: Lattice,
    roles: Vec<SiteRole>,
    /// Known single-site Bloch vectors `(x, y, z)` of logical sites whose
    /// initial state is a product factor.
    #[serde(default)]
    bloch: BTreeMap<usize, [f64; 3]>,
}

impl EomContext {
    pub fn new(lattice: Lattice, roles: Vec<SiteRole>) -> Result<Self> {
        if roles.len() != lattice.n_sites() {
            return Err(Error::InvalidParameter(format!(
                "{} roles supplied for a lattice of {} sites",
                roles.len(),
                lattice.n_sites()
            )));
        }
        Ok(EomContext { lattice, roles, bloch: BTreeMap::new() })
    }

    /// Every site logical; Bloch data can be attached afterwards.
    pub fn all_logical(lattice: Lattice) -> Self {
        let roles = vec![SiteRole::Logical; lattice.n_sites()];
        EomContext { lattice, roles, bloch: BTreeMap::new() }
    }

    /// Attach a known initial Bloch vector to a logical site.
    pub fn with_site_bloch(mut self, site: usize, bloch: [f64; 3]) -> Result<Self> {
        if site >= self.lattice.n_sites() {
            return Err(Error::SiteOutOfRange { site, n_sites: self.lattice.n_sites() });
        }
        if !matches!(self.roles[site], SiteRole::Logical) {
            return Err(Error::InvalidParameter(format!(
                "site {site} is not logical; only logical sites take Bloch data"
            )));
        }
        self.bloch.insert(site, bloch);
        Ok(self)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn role(&self, site: usize) -> Result<SiteRole> {
        self.roles
            .get(site)
            .copied()
            .ok_or(Error::SiteOutOfRange { site, n_sites: self.roles.len() })
    }

    pub fn site_bloch(&self, site: usize) -> Option<[f64; 3]> {
        self.bloch.get(&site).copied()
    }

    /// Effective stabilizer at `site`: `X_site` with `Z` legs on every
    /// neighbour that is *not* in equilibrium (equilibrium legs drop out).
    pub fn effective_stabilizer(&self, site: usize) -> Result<PauliString> {
        self.role(site)?;
        let mut ops = vec![(site, PauliOp::X)];
        for j in self.lattice.neighbors(site) {
            if !matches!(self.roles[j], SiteRole::Equilibrium) {
                ops.push((j, PauliOp::Z));
            }
        }
        Ok(PauliString::from_ops(Phase::PlusOne, ops))
    }
}

/// One site's additive contribution to `d⟨M⟩/dt`.
#[derive(Clone, Debug, PartialEq)]
pub enum SiteContribution {
    Zero,
    /// `−(α+β)/2 · ⟨M⟩`.
    Decay,
    /// `−(α+β)·⟨M⟩ + (α−β)·⟨product⟩` with `product = M·K_i` (its `±1`
    /// phase carries the source sign).
    Coupling { product: PauliString },
}

/// Classify how the dissipator at `site` drives observable `m`.
///
/// Equilibrium sites always return [`SiteContribution::Zero`]: they sit at
/// the fixed point of their local dissipator and are static.
pub fn site_contribution(
    m: &PauliString,
    site: usize,
    context: &EomContext,
) -> Result<SiteContribution> {
    if matches!(context.role(site)?, SiteRole::Equilibrium) {
        return Ok(SiteContribution::Zero);
    }
    let z = PauliString::single(site, PauliOp::Z);
    let k = context.effective_stabilizer(site)?;
    let commutes_z = m.commutes(&z);
    let commutes_k = m.commutes(&k);
    Ok(match (commutes_z, commutes_k) {
        (true, true) => SiteContribution::Zero,
        (_, false) => SiteContribution::Decay,
        (false, true) => SiteContribution::Coupling { product: m.multiply(&k) },
    })
}

/// A matrix entry in symbolic rate units:
/// `value = sum_rate·(α+β) + diff_rate·(α−β)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EomCoefficient {
    /// Multiples of `(α+β)`; decay entries are negative half-integers.
    pub sum_rate: f64,
    /// Multiples of `(α−β)`; source entries are integers.
    pub diff_rate: f64,
}

impl EomCoefficient {
    pub fn value(&self, alpha: f64, beta: f64) -> f64 {
        self.sum_rate * (alpha + beta) + self.diff_rate * (alpha - beta)
    }

    fn is_zero(&self) -> bool {
        self.sum_rate == 0.0 && self.diff_rate == 0.0
    }
}

/// One exponential term `coeff · t^power · e^{rate·t}` of a closed-form
/// solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolutionTerm {
    pub coeff: f64,
    pub power: u32,
    pub rate: f64,
}

impl SolutionTerm {
    pub fn eval(&self, t: f64) -> f64 {
        self.coeff * t.powi(self.power as i32) * (self.rate * t).exp()
    }
}

/// A closed linear ODE system `d v/dt = A v` over Pauli observables, with
/// initial values, produced by [`build_eom`].
///
/// Variables are canonical (`+1` phase) Pauli strings; entry `(i, j)` of
/// the coefficient matrix couples `d⟨V_i⟩/dt` to `⟨V_j⟩`. Sources strictly
/// lower the X/Y-letter count, so the system is triangular under that
/// grading.
#[derive(Clone, Debug)]
pub struct EomSystem {
    variables: Vec<PauliString>,
    rows: Vec<BTreeMap<usize, EomCoefficient>>,
    initial: Vec<f64>,
    alpha: f64,
    beta: f64,
    decoupled: bool,
}

impl EomSystem {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    /// The tracked observables; index 0 is the requested one.
    pub fn variables(&self) -> &[PauliString] {
        &self.variables
    }

    pub fn variable_index(&self, observable: &PauliString) -> Option<usize> {
        self.variables.iter().position(|v| v == observable)
    }

    pub fn initial_values(&self) -> &[f64] {
        &self.initial
    }

    /// Coefficient of `⟨V_col⟩` in `d⟨V_row⟩/dt` (zero if absent).
    pub fn coefficient(&self, row: usize, col: usize) -> EomCoefficient {
        self.rows
            .get(row)
            .and_then(|r| r.get(&col))
            .copied()
            .unwrap_or_default()
    }

    pub fn rates(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    /// Whether every logical qubit with measured neighbours has at least
    /// one `XY`-measured neighbour (the condition under which the logical
    /// state decouples from the measurement record).
    pub fn is_decoupled(&self) -> bool {
        self.decoupled
    }

    /// Indices ordered by ascending X/Y-letter count, so every source of a
    /// variable appears before it.
    fn solve_order(&self) -> Vec<usize> {
        let count = |p: &PauliString| {
            p.iter().filter(|(_, op)| matches!(op, PauliOp::X | PauliOp::Y)).count()
        };
        let mut order: Vec<usize> = (0..self.variables.len()).collect();
        order.sort_by_key(|&i| count(&self.variables[i]));
        order
    }

    /// Closed-form solutions, one term list per variable.
    ///
    /// Back-substitution in triangular order: each variable solves
    /// `v' = a·v + f(t)` with `f` a known sum of `c·tᵖ·e^{rt}` terms.
    /// Resonant terms (`r = a`) integrate to secular `tᵖ⁺¹` terms.
    pub fn solutions(&self) -> Vec<Vec<SolutionTerm>> {
        let n = self.variables.len();
        let mut sols: Vec<Vec<SolutionTerm>> = vec![Vec::new(); n];
        for &i in &self.solve_order() {
            let a = self.coefficient(i, i).value(self.alpha, self.beta);
            let mut terms: Vec<SolutionTerm> = Vec::new();
            for (&j, coeff) in &self.rows[i] {
                if j == i {
                    continue;
                }
                let c_ij = coeff.value(self.alpha, self.beta);
                if c_ij == 0.0 {
                    continue;
                }
                for src in &sols[j] {
                    let forcing = SolutionTerm {
                        coeff: c_ij * src.coeff,
                        power: src.power,
                        rate: src.rate,
                    };
                    if forcing.coeff == 0.0 {
                        continue;
                    }
                    terms.extend(particular_terms(a, forcing));
                }
            }
            // Homogeneous part fixes the initial value.
            let at_zero: f64 = terms.iter().filter(|t| t.power == 0).map(|t| t.coeff).sum();
            terms.push(SolutionTerm { coeff: self.initial[i] - at_zero, power: 0, rate: a });
            sols[i] = merge_terms(terms);
        }
        sols
    }

    /// Evaluate every variable at time `t` from the closed-form solutions.
    pub fn solve(&self, t: f64) -> Result<Vec<f64>> {
        if t < 0.0 {
            return Err(Error::InvalidParameter(format!("time must be ≥ 0, got {t}")));
        }
        Ok(self.solutions().iter().map(|terms| terms.iter().map(|x| x.eval(t)).sum()).collect())
    }

    /// Evaluate every variable at time `t` through a dense matrix
    /// exponential — an independent numerical route used to cross-check
    /// the closed-form solver.
    pub fn solve_via_expm(&self, t: f64) -> Result<Vec<f64>> {
        if t < 0.0 {
            return Err(Error::InvalidParameter(format!("time must be ≥ 0, got {t}")));
        }
        let n = self.variables.len();
        let mut gen = Array2::from_elem((n, n), Complex64::new(0.0, 0.0));
        for (i, row) in self.rows.iter().enumerate() {
            for (&j, coeff) in row {
                gen[(i, j)] = Complex64::new(coeff.value(self.alpha, self.beta) * t, 0.0);
            }
        }
        let propagator = linalg::expm(&gen)?;
        let v0 = Array1::from_iter(self.initial.iter().map(|&v| Complex64::new(v, 0.0)));
        Ok(propagator.dot(&v0).iter().map(|v| v.re).collect())
    }
}

/// Particular solution of `v' = a·v + c·tᵖ·e^{rt}` as term list.
fn particular_terms(a: f64, forcing: SolutionTerm) -> Vec<SolutionTerm> {
    let scale = a.abs().max(forcing.rate.abs()).max(1.0);
    if (forcing.rate - a).abs() <= 1e-12 * scale {
        // Resonant: the forcing integrates to a secular term.
        return vec![SolutionTerm {
            coeff: forcing.coeff / (forcing.power + 1) as f64,
            power: forcing.power + 1,
            rate: a,
        }];
    }
    // Polynomial ansatz d_p tᵖ + … + d_0, highest coefficient first.
    let gap = forcing.rate - a;
    let p = forcing.power as usize;
    let mut d = vec![0.0; p + 1];
    d[p] = forcing.coeff / gap;
    for q in (0..p).rev() {
        d[q] = -((q + 1) as f64) * d[q + 1] / gap;
    }
    d.into_iter()
        .enumerate()
        .filter(|&(_, c)| c != 0.0)
        .map(|(q, c)| SolutionTerm { coeff: c, power: q as u32, rate: forcing.rate })
        .collect()
}

/// Combine terms sharing a `(power, rate)` slot and drop zero coefficients.
fn merge_terms(terms: Vec<SolutionTerm>) -> Vec<SolutionTerm> {
    let mut merged: Vec<SolutionTerm> = Vec::new();
    for term in terms {
        if let Some(slot) = merged.iter_mut().find(|m| {
            m.power == term.power
                && (m.rate - term.rate).abs() <= 1e-12 * m.rate.abs().max(term.rate.abs()).max(1.0)
        }) {
            slot.coeff += term.coeff;
        } else {
            merged.push(term);
        }
    }
    merged.retain(|m| m.coeff != 0.0);
    merged.sort_by(|a, b| {
        a.rate
            .partial_cmp(&b.rate)
            .unwrap()
            .then(a.power.cmp(&b.power))
    });
    merged
}

/// Initial expectation of a single Pauli letter at `site` under the
/// context's product-state description.
fn initial_letter_value(
    context: &EomContext,
    alpha: f64,
    beta: f64,
    site: usize,
    op: PauliOp,
) -> Result<f64> {
    let undetermined = |reason: &str| Error::UndeterminedInitial {
        observable: format!("{op}{site}"),
        reason: reason.to_string(),
    };
    match context.role(site)? {
        SiteRole::Logical => {
            let bloch = context
                .site_bloch(site)
                .ok_or_else(|| undetermined("logical site has no Bloch data attached"))?;
            Ok(match op {
                PauliOp::X => bloch[0],
                PauliOp::Y => bloch[1],
                PauliOp::Z => bloch[2],
            })
        }
        SiteRole::Equilibrium => Ok(match op {
            // ⟨X⟩ of the single-site equilibrium state; 1 for a closed
            // (zero-rate) system, whose equilibrium is the ground state.
            PauliOp::X => {
                if alpha + beta == 0.0 {
                    1.0
                } else {
                    (alpha - beta) / (alpha + beta)
                }
            }
            PauliOp::Y | PauliOp::Z => 0.0,
        }),
        SiteRole::Measured(basis) => match (op, basis) {
            // Equatorial measurements leave no Z component, exactly.
            (PauliOp::Z, MeasuredBasis::XyPlane) => Ok(0.0),
            (PauliOp::Z, MeasuredBasis::ZBasis { outcome }) => {
                Ok(if outcome == 0 { 1.0 } else { -1.0 })
            }
            (PauliOp::X | PauliOp::Y, _) => Err(undetermined(
                "in-plane components of a measured site are not tracked by the context",
            )),
        },
    }
}

/// Build the closed equation system for observable `m0` (phase must be
/// `+1`) under the given context and rates.
///
/// The variable set is the transitive closure of `m0` under source
/// generation; initial values come from the context's product-state data.
pub fn build_eom(
    m0: &PauliString,
    context: &EomContext,
    alpha: f64,
    beta: f64,
) -> Result<EomSystem> {
    if m0.phase() != Phase::PlusOne {
        return Err(Error::InvalidParameter(format!(
            "observable must have +1 phase, got {}",
            m0.phase()
        )));
    }
    if let Some(max) = m0.max_site() {
        let n = context.lattice().n_sites();
        if max >= n {
            return Err(Error::SiteOutOfRange { site: max, n_sites: n });
        }
    }
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rate {name} must be non-negative and finite, got {v}"
            )));
        }
    }

    let n_sites = context.lattice().n_sites();
    let mut variables: Vec<PauliString> = vec![m0.clone()];
    let mut index: BTreeMap<PauliString, usize> = BTreeMap::new();
    index.insert(m0.clone(), 0);
    let mut rows: Vec<BTreeMap<usize, EomCoefficient>> = Vec::new();

    let mut cursor = 0usize;
    while cursor < variables.len() {
        let m = variables[cursor].clone();
        let mut row: BTreeMap<usize, EomCoefficient> = BTreeMap::new();
        if !m.is_identity_letters() {
            let mut diagonal = 0.0f64;
            for site in 0..n_sites {
                match site_contribution(&m, site, context)? {
                    SiteContribution::Zero => {}
                    SiteContribution::Decay => diagonal -= 0.5,
                    SiteContribution::Coupling { product } => {
                        diagonal -= 1.0;
                        let (phase, canonical) = product.canonical();
                        debug_assert!(phase.im.abs() < 1e-15, "source phase must be ±1");
                        let child = *index.entry(canonical.clone()).or_insert_with(|| {
                            variables.push(canonical);
                            variables.len() - 1
                        });
                        if variables.len() > CLOSURE_CAP {
                            return Err(Error::ClosureCapExceeded(variables.len()));
                        }
                        row.entry(child).or_default().diff_rate += phase.re;
                    }
                }
            }
            if diagonal != 0.0 {
                row.entry(cursor).or_default().sum_rate += diagonal;
            }
        }
        row.retain(|_, c| !c.is_zero());
        rows.push(row);
        cursor += 1;
    }

    let initial = variables
        .iter()
        .map(|v| {
            v.iter()
                .map(|(site, op)| initial_letter_value(context, alpha, beta, site, op))
                .product::<Result<f64>>()
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(EomSystem {
        variables,
        rows,
        initial,
        alpha,
        beta,
        decoupled: check_decoupling(context)?.decoupled,
    })
}

/// Outcome of the decoupling check: whether the logical state separates
/// from the measurement record, with the violating sites as witness.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub decoupled: bool,
    /// Logical sites that have measured neighbours but none measured in
    /// the `XY` plane.
    pub violations: Vec<usize>,
}

/// A logical site violates decoupling when it has at least one measured
/// neighbour but none of them was measured in the `XY` plane (a site with
/// no measured neighbours is vacuously fine: no coupling to the record
/// arises).
pub fn check_decoupling(context: &EomContext) -> Result<DecouplingReport> {
    let mut violations = Vec::new();
    for site in 0..context.lattice().n_sites() {
        if !matches!(context.role(site)?, SiteRole::Logical) {
            continue;
        }
        let measured: Vec<SiteRole> = context
            .lattice()
            .neighbors(site)
            .into_iter()
            .map(|j| context.role(j))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|r| matches!(r, SiteRole::Measured(_)))
            .collect();
        let any_xy = measured
            .iter()
            .any(|r| matches!(r, SiteRole::Measured(MeasuredBasis::XyPlane)));
        if !measured.is_empty() && !any_xy {
            violations.push(site);
        }
    }
    Ok(DecouplingReport { decoupled: violations.is_empty(), violations })
}

/// Render just the letters of a Pauli string (`"Z0 X1"`, identity `"I"`).
fn letters(p: &PauliString) -> String {
    if p.is_identity_letters() {
        return "I".to_string();
    }
    p.iter().map(|(s, op)| format!("{op}{s}")).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for EomSystem {
    /// One line per variable:
    /// `d/dt <X1> = -1.5*(alpha+beta)*<X1> + 1*(alpha-beta)*<Z0>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, var) in self.variables.iter().enumerate() {
            write!(f, "d/dt <{}> =", letters(var))?;
            let mut first = true;
            let mut emit = |f: &mut fmt::Formatter<'_>,
                            coeff: f64,
                            unit: &str,
                            target: &PauliString|
             -> fmt::Result {
                if coeff == 0.0 {
                    return Ok(());
                }
                if first {
                    write!(f, " {coeff}*{unit}*<{}>", letters(target))?;
                    first = false;
                } else if coeff < 0.0 {
                    write!(f, " - {}*{unit}*<{}>", -coeff, letters(target))?;
                } else {
                    write!(f, " + {coeff}*{unit}*<{}>", letters(target))?;
                }
                Ok(())
            };
            for (&j, c) in &self.rows[i] {
                emit(f, c.sum_rate, "(alpha+beta)", &self.variables[j])?;
                emit(f, c.diff_rate, "(alpha-beta)", &self.variables[j])?;
            }
            if first {
                write!(f, " 0")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{self, BathSpec, SystemParams};
    use crate::qcore::DensityMatrix;
    use approx::assert_abs_diff_eq;

    fn xs(site: usize) -> PauliString {
        PauliString::single(site, PauliOp::X)
    }
    fn ys(site: usize) -> PauliString {
        PauliString::single(site, PauliOp::Y)
    }
    fn zs(site: usize) -> PauliString {
        PauliString::single(site, PauliOp::Z)
    }

    /// Wire-step context: site 0 measured in the XY plane, site 1 logical.
    fn wire_step() -> EomContext {
        EomContext::new(
            Lattice::line(2).unwrap(),
            vec![SiteRole::Measured(MeasuredBasis::XyPlane), SiteRole::Logical],
        )
        .unwrap()
    }

    #[test]
    fn wire_step_coefficient_table() {
        let (a, b) = (0.02, 0.005);
        let ctx = wire_step().with_site_bloch(1, [0.3, -0.2, 0.5]).unwrap();

        let sys_x = build_eom(&xs(1), &ctx, a, b).unwrap();
        assert_eq!(sys_x.coefficient(0, 0), EomCoefficient { sum_rate: -1.5, diff_rate: 0.0 });
        let z0 = sys_x.variable_index(&zs(0)).expect("Z0 must be generated as the source");
        assert_eq!(sys_x.coefficient(0, z0), EomCoefficient { sum_rate: 0.0, diff_rate: 1.0 });
        assert_eq!(sys_x.coefficient(z0, z0), EomCoefficient { sum_rate: -0.5, diff_rate: 0.0 });
        assert_eq!(sys_x.n_vars(), 2);

        let sys_y = build_eom(&ys(1), &ctx, a, b).unwrap();
        assert_eq!(sys_y.n_vars(), 1);
        assert_eq!(sys_y.coefficient(0, 0), EomCoefficient { sum_rate: -1.0, diff_rate: 0.0 });

        let sys_z = build_eom(&zs(1), &ctx, a, b).unwrap();
        assert_eq!(sys_z.n_vars(), 1);
        assert_eq!(sys_z.coefficient(0, 0), EomCoefficient { sum_rate: -0.5, diff_rate: 0.0 });
    }

    #[test]
    fn wire_step_on_longer_chain_with_equilibrium_tail() {
        // Static chain of 4: site 0 measured, site 1 logical, sites 2-3
        // still in equilibrium. The equilibrium legs drop, so the table
        // matches the two-site wire step exactly.
        let ctx = EomContext::new(
            Lattice::line(4).unwrap(),
            vec![
                SiteRole::Measured(MeasuredBasis::XyPlane),
                SiteRole::Logical,
                SiteRole::Equilibrium,
                SiteRole::Equilibrium,
            ],
        )
        .unwrap()
        .with_site_bloch(1, [0.1, 0.2, 0.3])
        .unwrap();
        let sys = build_eom(&xs(1), &ctx, 0.02, 0.005).unwrap();
        assert_eq!(sys.coefficient(0, 0), EomCoefficient { sum_rate: -1.5, diff_rate: 0.0 });
        let z0 = sys.variable_index(&zs(0)).unwrap();
        assert_eq!(sys.coefficient(0, z0), EomCoefficient { sum_rate: 0.0, diff_rate: 1.0 });
        assert_eq!(sys.n_vars(), 2);
        // Effective stabilizer at the logical site has no equilibrium legs.
        assert_eq!(ctx.effective_stabilizer(1).unwrap().to_string(), "+1 * Z0 X1");
    }

    #[test]
    fn star_coefficient_table() {
        for k in 1..=4usize {
            let edges: Vec<(usize, usize)> = (1..=k).map(|j| (0, j)).collect();
            let lat = Lattice::custom(k + 1, edges).unwrap();
            let mut roles = vec![SiteRole::Measured(MeasuredBasis::XyPlane); k + 1];
            roles[0] = SiteRole::Logical;
            let ctx = EomContext::new(lat, roles)
                .unwrap()
                .with_site_bloch(0, [0.4, 0.1, -0.2])
                .unwrap();

            let sys_x = build_eom(&xs(0), &ctx, 0.02, 0.005).unwrap();
            assert_eq!(
                sys_x.coefficient(0, 0),
                EomCoefficient { sum_rate: -((k as f64) + 2.0) / 2.0, diff_rate: 0.0 },
                "X decay rate at k={k}"
            );
            let z_product =
                PauliString::from_ops(Phase::PlusOne, (1..=k).map(|j| (j, PauliOp::Z)));
            let src = sys_x.variable_index(&z_product).expect("Z-product source");
            assert_eq!(
                sys_x.coefficient(0, src),
                EomCoefficient { sum_rate: 0.0, diff_rate: 1.0 }
            );
            // Z-product of pairwise non-adjacent sites: pure decay at k/2.
            assert_eq!(
                sys_x.coefficient(src, src),
                EomCoefficient { sum_rate: -(k as f64) / 2.0, diff_rate: 0.0 }
            );

            let sys_y = build_eom(&ys(0), &ctx, 0.02, 0.005).unwrap();
            assert_eq!(
                sys_y.coefficient(0, 0),
                EomCoefficient { sum_rate: -((k as f64) + 1.0) / 2.0, diff_rate: 0.0 },
                "Y decay rate at k={k}"
            );

            let sys_z = build_eom(&zs(0), &ctx, 0.02, 0.005).unwrap();
            assert_eq!(
                sys_z.coefficient(0, 0),
                EomCoefficient { sum_rate: -0.5, diff_rate: 0.0 }
            );
        }
    }

    #[test]
    fn wire_step_solutions_are_powers_of_w() {
        // With the measured neighbour's ⟨Z⟩ pinned to 0, the logical
        // Bloch vector evolves as (x w³, y w², z w), w = e^{−(α+β)t/2}.
        let (alpha, beta) = (0.02, 0.005);
        let (x, y, z) = (0.3, -0.4, 0.5);
        let ctx = wire_step().with_site_bloch(1, [x, y, z]).unwrap();
        for t in [0.0f64, 3.0, 10.0, 40.0] {
            let w = (-0.5 * (alpha + beta) * t).exp();
            let vx = build_eom(&xs(1), &ctx, alpha, beta).unwrap().solve(t).unwrap()[0];
            assert_abs_diff_eq!(vx, x * w.powi(3), epsilon = 1e-13);
            let vy = build_eom(&ys(1), &ctx, alpha, beta).unwrap().solve(t).unwrap()[0];
            assert_abs_diff_eq!(vy, y * w.powi(2), epsilon = 1e-13);
            let vz = build_eom(&zs(1), &ctx, alpha, beta).unwrap().solve(t).unwrap()[0];
            assert_abs_diff_eq!(vz, z * w, epsilon = 1e-13);
        }
    }

    #[test]
    fn isolated_site_relaxes_to_equilibrium() {
        let ctx = EomContext::all_logical(Lattice::line(1).unwrap())
            .with_site_bloch(0, [0.9, 0.0, 0.0])
            .unwrap();
        let (alpha, beta) = (0.03, 0.01);
        let sys = build_eom(&xs(0), &ctx, alpha, beta).unwrap();
        // X on an isolated site couples to the identity: the closure holds
        // the constant variable and the solution relaxes exponentially.
        let id = sys.variable_index(&PauliString::identity()).expect("identity variable");
        assert_eq!(sys.initial_values()[id], 1.0);
        assert!(sys.coefficient(id, id).is_zero());
        let x_eq = (alpha - beta) / (alpha + beta);
        for t in [0.0, 5.0, 50.0, 500.0] {
            let got = sys.solve(t).unwrap()[0];
            let want = x_eq + (0.9 - x_eq) * (-(alpha + beta) * t).exp();
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_matrix_exponential() {
        let ctx = EomContext::all_logical(Lattice::square(2, 2).unwrap())
            .with_site_bloch(0, [0.3, 0.1, -0.2])
            .unwrap()
            .with_site_bloch(1, [-0.1, 0.4, 0.2])
            .unwrap()
            .with_site_bloch(2, [0.0, -0.3, 0.6])
            .unwrap()
            .with_site_bloch(3, [0.5, 0.2, 0.1])
            .unwrap();
        for m0 in [xs(0), ys(2), zs(3), xs(1).multiply(&zs(2)), xs(0).multiply(&ys(3))] {
            let sys = build_eom(&m0, &ctx, 0.02, 0.005).unwrap();
            for t in [0.7, 13.0] {
                let closed = sys.solve(t).unwrap();
                let dense = sys.solve_via_expm(t).unwrap();
                for (c, d) in closed.iter().zip(dense.iter()) {
                    assert_abs_diff_eq!(c, d, epsilon = 1e-10);
                }
            }
        }
    }

    /// Dense oracle: product initial state, exact channel evolution,
    /// interaction-picture expectation of the observable.
    fn dense_interaction_expectation(
        ctx: &EomContext,
        bath: &BathSpec,
        m: &PauliString,
        t: f64,
    ) -> f64 {
        let lat = ctx.lattice();
        let params = SystemParams::new(1.0, lat.clone()).unwrap();
        let factors: Vec<_> = (0..lat.n_sites())
            .map(|s| {
                let b = ctx.site_bloch(s).unwrap();
                DensityMatrix::from_bloch(b).unwrap().into_matrix()
            })
            .collect();
        let rho0 = DensityMatrix::product(&factors).unwrap();
        let rho_t = dynamics::exact_evolve(&params, bath, &rho0, t).unwrap();
        let sigma = dynamics::to_interaction_picture(&params, &rho_t, t).unwrap();
        sigma.expectation(m).unwrap().re
    }

    #[test]
    fn line3_matches_dense_lindblad_oracle() {
        let lat = Lattice::line(3).unwrap();
        let blochs = [[0.3, -0.2, 0.5], [0.1, 0.4, -0.3], [-0.5, 0.2, 0.1]];
        let mut ctx = EomContext::all_logical(lat);
        for (s, b) in blochs.iter().enumerate() {
            ctx = ctx.with_site_bloch(s, *b).unwrap();
        }
        let (alpha, beta) = (0.02, 0.005);
        let bath = BathSpec::single(alpha, beta).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        for site in 0..3 {
            for m in [xs(site), ys(site), zs(site)] {
                let sys = build_eom(&m, &ctx, alpha, beta).unwrap();
                for t in [0.25 * tau, tau] {
                    let predicted = sys.solve(t).unwrap()[0];
                    let dense = dense_interaction_expectation(&ctx, &bath, &m, t);
                    assert_abs_diff_eq!(predicted, dense, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn undetermined_initial_values_are_rejected() {
        let ctx = wire_step().with_site_bloch(1, [0.0, 0.0, 1.0]).unwrap();
        // X on the XY-measured site: the context does not track it.
        let err = build_eom(&xs(0), &ctx, 0.02, 0.005).unwrap_err();
        assert!(matches!(err, Error::UndeterminedInitial { .. }), "{err}");
        // Logical site without Bloch data.
        let bare = wire_step();
        let err = build_eom(&xs(1), &bare, 0.02, 0.005).unwrap_err();
        assert!(matches!(err, Error::UndeterminedInitial { .. }), "{err}");
    }

    #[test]
    fn z_measured_site_initial_value_uses_outcome() {
        let ctx = EomContext::new(
            Lattice::line(2).unwrap(),
            vec![SiteRole::Measured(MeasuredBasis::ZBasis { outcome: 1 }), SiteRole::Logical],
        )
        .unwrap()
        .with_site_bloch(1, [1.0, 0.0, 0.0])
        .unwrap();
        let sys = build_eom(&xs(1), &ctx, 0.02, 0.005).unwrap();
        let z0 = sys.variable_index(&zs(0)).unwrap();
        assert_eq!(sys.initial_values()[z0], -1.0);
    }

    #[test]
    fn decoupling_report_cases() {
        // Standard wire step: decoupled.
        let report = check_decoupling(&wire_step()).unwrap();
        assert!(report.decoupled);
        assert!(report.violations.is_empty());

        // Only measured neighbour read out in Z: violation at the logical site.
        let bad = EomContext::new(
            Lattice::line(2).unwrap(),
            vec![SiteRole::Measured(MeasuredBasis::ZBasis { outcome: 0 }), SiteRole::Logical],
        )
        .unwrap();
        let report = check_decoupling(&bad).unwrap();
        assert!(!report.decoupled);
        assert_eq!(report.violations, vec![1]);

        // First step of a line: no measured neighbours at all — vacuously fine.
        let first = EomContext::new(
            Lattice::line(2).unwrap(),
            vec![SiteRole::Logical, SiteRole::Equilibrium],
        )
        .unwrap();
        assert!(check_decoupling(&first).unwrap().decoupled);
    }

    #[test]
    fn decay_exponents_are_half_integer_multiples() {
        let ctx = EomContext::all_logical(Lattice::square(2, 2).unwrap());
        let mut ctx2 = ctx;
        for s in 0..4 {
            ctx2 = ctx2.with_site_bloch(s, [0.2, 0.1, 0.3]).unwrap();
        }
        for m0 in [xs(0), ys(1), zs(2), xs(0).multiply(&xs(3))] {
            let sys = build_eom(&m0, &ctx2, 0.02, 0.005).unwrap();
            for i in 0..sys.n_vars() {
                let diag = sys.coefficient(i, i);
                assert!(diag.sum_rate <= 0.0);
                let doubled = diag.sum_rate * 2.0;
                assert_abs_diff_eq!(doubled, doubled.round(), epsilon = 1e-12);
                assert_eq!(diag.diff_rate, 0.0);
            }
        }
    }

    /// Slowest decay exponent (units of (α+β)/2) of a solved observable.
    fn slowest_exponent(sys: &EomSystem, alpha: f64, beta: f64) -> f64 {
        let sols = sys.solutions();
        sols[0]
            .iter()
            .filter(|t| t.coeff.abs() > 1e-14)
            .map(|t| -2.0 * t.rate / (alpha + beta))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn product_observables_decay_no_slower_than_factor_sum() {
        let (alpha, beta) = (0.02, 0.005);
        let lat = Lattice::line(4).unwrap();
        let mut ctx = EomContext::all_logical(lat);
        for s in 0..4 {
            ctx = ctx.with_site_bloch(s, [0.3, 0.2, 0.4]).unwrap();
        }
        let cases = [
            (xs(0), zs(3), true),  // neighbour sets {1} and {2}: disjoint → equality
            (xs(0), zs(2), false), // neighbour sets {1} and {1,3}: shared
            (zs(1), zs(2), false),
        ];
        for (m1, m2, expect_equality) in cases {
            let q1 = slowest_exponent(&build_eom(&m1, &ctx, alpha, beta).unwrap(), alpha, beta);
            let q2 = slowest_exponent(&build_eom(&m2, &ctx, alpha, beta).unwrap(), alpha, beta);
            let prod = m1.multiply(&m2);
            let qp = slowest_exponent(&build_eom(&prod, &ctx, alpha, beta).unwrap(), alpha, beta);
            assert!(
                qp <= q1 + q2 + 1e-9,
                "product of {m1} and {m2} decays slower than the factor bound"
            );
            if expect_equality {
                assert_abs_diff_eq!(qp, q1 + q2, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn display_lists_the_wire_step_system() {
        let ctx = wire_step().with_site_bloch(1, [0.3, 0.0, 0.0]).unwrap();
        let sys = build_eom(&xs(1), &ctx, 0.02, 0.005).unwrap();
        let text = sys.to_string();
        assert!(
            text.contains("d/dt <X1> = -1.5*(alpha+beta)*<X1> + 1*(alpha-beta)*<Z0>"),
            "unexpected listing:\n{text}"
        );
        assert!(text.contains("d/dt <Z0> = -0.5*(alpha+beta)*<Z0>"), "unexpected listing:\n{text}");
    }

    #[test]
    fn context_round_trips_through_json() {
        let ctx = wire_step().with_site_bloch(1, [0.25, -0.5, 0.75]).unwrap();
        let json = serde_json::to_string(&ctx).unwrap();
        let back: EomContext = serde_json::from_str(&json).unwrap();
        assert_eq!(back.role(0).unwrap(), SiteRole::Measured(MeasuredBasis::XyPlane));
        assert_eq!(back.role(1).unwrap(), SiteRole::Logical);
        assert_eq!(back.site_bloch(1), Some([0.25, -0.5, 0.75]));
    }

    #[test]
    fn closure_is_triangular_under_letter_grading() {
        let mut ctx = EomContext::all_logical(Lattice::cubic(2, 2, 1).unwrap());
        for s in 0..4 {
            ctx = ctx.with_site_bloch(s, [0.1, 0.2, 0.3]).unwrap();
        }
        let xy_count = |p: &PauliString| {
            p.iter().filter(|(_, op)| matches!(op, PauliOp::X | PauliOp::Y)).count()
        };
        let sys = build_eom(&xs(0).multiply(&ys(3)), &ctx, 0.02, 0.005).unwrap();
        for i in 0..sys.n_vars() {
            for j in 0..sys.n_vars() {
                if i == j || sys.coefficient(i, j).is_zero() {
                    continue;
                }
                assert_eq!(
                    xy_count(&sys.variables()[j]) + 1,
                    xy_count(&sys.variables()[i]),
                    "source must carry exactly one fewer X/Y letter"
                );
            }
        }
    }
}
