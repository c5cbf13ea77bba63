//! Error budgets and fault-tolerance thresholds for encoded storage.
//!
//! A cluster-state computation running on thermally prepared resource states
//! suffers two independent error mechanisms per site: a preparation error
//! (the site starts in the excited stabilizer eigenstate with the thermal
//! probability) and a storage error (the encoded qubit decoheres while it
//! waits one clock step between measurement rounds). Both map onto local
//! Pauli noise, and topological error correction on the cubic lattice
//! tolerates a combined error weight `q = p_prep + (2/3)·p_s` up to a known
//! threshold.
//!
//! This module evaluates the two error probabilities, combines them into an
//! [`ErrorBudget`], and inverts the budget against the threshold in three
//! ways: the highest tolerable preparation temperature, the largest
//! tolerable total coupling, and the jointly optimal "goldilocks" operating
//! point of a cooling bath working against a fixed warm background.

use serde::{Deserialize, Serialize};

use crate::dynamics::BathSpec;
use crate::{Error, Result};

use std::f64::consts::PI;

/// Fault-tolerance threshold for the combined error parameter `q` of
/// independent local depolarizing noise under topological error correction.
///
/// The solvers take this as their default target; every solver has a
/// `*_with` variant accepting an explicit target for sensitivity studies.
pub const THRESHOLD_Q: f64 = 0.0293;

/// Width of the golden-section bracket, in log₁₀ units of `α_bath/Δ`, at
/// which the cooling-rate optimization stops refining.
const GOLDEN_SECTION_TOL: f64 = 1e-6;

/// Iteration budget for the bracketed bisections; 200 halvings reduce any
/// unit-scale bracket far below double precision.
const BISECTION_ITERS: usize = 200;

// ---------------------------------------------------------------------------
// Error probabilities
// ---------------------------------------------------------------------------

/// Probability that thermal preparation at temperature `kT` leaves a site's
/// stabilizer flipped: `p_prep = 1 / (1 + exp(Δ/kT))`.
///
/// `kT = 0` gives a perfect cluster state (`0`); `kT → ∞` gives a maximally
/// mixed stabilizer (`½`).
pub fn prep_error(k_t: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "level splitting must be positive and finite, got {delta}"
        )));
    }
    if k_t < 0.0 || k_t.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "temperature must be non-negative, got {k_t}"
        )));
    }
    if k_t == 0.0 {
        return Ok(0.0);
    }
    // exp(Δ/kT) overflows for tiny kT; the probability underflows to 0 there,
    // which is the correct limit.
    Ok(((delta / k_t).exp() + 1.0).recip())
}

/// Depolarizing-error weight accumulated by an encoded qubit stored for one
/// interval `τ` on a cubic-lattice wire: `p_s = ¼(1+w)(1−w⁶)` with
/// `w = exp(−(α+β)τ/2)`.
///
/// This equals the `Z`-error probability of the cubic-lattice storage
/// channel ([`crate::mbqc::logical_channel`] with
/// [`crate::mbqc::ChannelVariant::Cubic`]), which is the largest of its
/// three Pauli components and hence a per-axis bound.
pub fn storage_error(alpha: f64, beta: f64, tau: f64) -> Result<f64> {
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rate {name} must be non-negative and finite, got {v}"
            )));
        }
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "storage interval must be positive and finite, got {tau}"
        )));
    }
    let w = (-(alpha + beta) * tau / 2.0).exp();
    Ok(0.25 * (1.0 + w) * (1.0 - w.powi(6)))
}

// ---------------------------------------------------------------------------
// Combined budget
// ---------------------------------------------------------------------------

/// Preparation error, storage error, and their threshold combination for
/// one clock step, together with the physical inputs they came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// Thermal preparation error per site.
    pub p_prep: f64,
    /// Storage depolarizing weight per site per clock step.
    pub p_s: f64,
    /// Combined error parameter `q = p_prep + (2/3)·p_s`.
    pub q: f64,
    /// Preparation temperature implied by the bath.
    pub k_t: f64,
    /// Level splitting.
    pub delta: f64,
    /// Effective cooling rate.
    pub alpha: f64,
    /// Effective heating rate.
    pub beta: f64,
    /// Storage interval (one clock step, `2π/Δ`).
    pub tau: f64,
}

/// Evaluate the combined error budget for a bath at level splitting `delta`.
///
/// The preparation error is the bath's equilibrium excitation probability
/// (for the two-bath model `γ/(α_bath + 2γ)`, i.e. temperature
/// `kT = Δ/ln(1 + α_bath/γ)`); the storage error uses the effective rates
/// over one clock step `τ = 2π/Δ`.
pub fn combined_q(bath: &BathSpec, delta: f64) -> Result<ErrorBudget> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "level splitting must be positive and finite, got {delta}"
        )));
    }
    let (alpha, beta) = bath.effective_rates();
    if alpha + beta == 0.0 {
        return Err(Error::InvalidParameter(
            "error budget undefined for a fully decoupled bath (all rates zero)".into(),
        ));
    }
    let tau = 2.0 * PI / delta;
    let p_prep = bath.excitation_probability();
    let p_s = storage_error(alpha, beta, tau)?;
    Ok(ErrorBudget {
        p_prep,
        p_s,
        q: p_prep + (2.0 / 3.0) * p_s,
        k_t: bath.temperature(delta),
        delta,
        alpha,
        beta,
        tau,
    })
}

// ---------------------------------------------------------------------------
// Threshold inversion
// ---------------------------------------------------------------------------

/// Which operating-point question a [`ThresholdReport`] answers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolvedQuantity {
    /// Highest preparation temperature (in units of `Δ`) whose preparation
    /// error alone meets the target.
    Temperature { k_t_over_delta: f64 },
    /// Largest total coupling `(α+β)/Δ` whose storage error alone meets the
    /// target.
    Coupling { rate_over_delta: f64 },
    /// Jointly optimal cooling operating point: the largest tolerable
    /// background rate and the cooling rate that attains it.
    CoolingOptimum {
        gamma_over_delta: f64,
        alpha_bath_over_delta: f64,
    },
}

/// Result of one threshold inversion: the solved quantity, the work it
/// took, and the residual of the defining equation at the solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub solved: SolvedQuantity,
    pub iterations: usize,
    pub residual: f64,
    pub q_target: f64,
}

fn check_target(q_target: f64) -> Result<f64> {
    if !(q_target > 0.0) || q_target >= 1.0 || !q_target.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "threshold target must lie in (0, 1), got {q_target}"
        )));
    }
    Ok(q_target)
}

/// Bisect `f` on `[lo, hi]` (where `f(lo)` and `f(hi)` have opposite signs)
/// for a fixed iteration budget; returns the midpoint and iterations used.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> Result<(f64, usize)> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok((lo, 0));
    }
    if f_hi == 0.0 {
        return Ok((hi, 0));
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::InvalidParameter(format!(
            "bisection bracket [{lo}, {hi}] does not straddle a root"
        )));
    }
    let mut used = 0;
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break; // bracket exhausted at double precision
        }
        let f_mid = f(mid);
        used += 1;
        if f_mid == 0.0 {
            return Ok((mid, used));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), used))
}

/// Solve `p_prep(kT) = q` for the temperature bound, using the default
/// target [`THRESHOLD_Q`].
pub fn temperature_threshold() -> ThresholdReport {
    temperature_threshold_with(THRESHOLD_Q).expect("default target is valid")
}

/// Solve `p_prep(kT) = q_target` for `kT/Δ`.
///
/// The equation inverts in closed form: `kT*/Δ = 1 / ln((1−q)/q)`. Targets
/// at or above ½ are rejected (preparation error never exceeds ½).
pub fn temperature_threshold_with(q_target: f64) -> Result<ThresholdReport> {
    let q = check_target(q_target)?;
    if q >= 0.5 {
        return Err(Error::InvalidParameter(format!(
            "preparation error is bounded by ½; no temperature solves p_prep = {q}"
        )));
    }
    let k_t_over_delta = ((1.0 - q) / q).ln().recip();
    let residual = (prep_error(k_t_over_delta, 1.0)? - q).abs();
    Ok(ThresholdReport {
        solved: SolvedQuantity::Temperature { k_t_over_delta },
        iterations: 0,
        residual,
        q_target: q,
    })
}

/// Solve `(2/3)·p_s = q` for the total-coupling bound, using the default
/// target [`THRESHOLD_Q`].
pub fn coupling_threshold() -> ThresholdReport {
    coupling_threshold_with(THRESHOLD_Q).expect("default target is valid")
}

/// Solve `(2/3)·¼(1+w)(1−w⁶) = q_target` for the decay factor `w`, and
/// report `(α+β)/Δ = −ln(w)/π`.
///
/// The left side is monotone decreasing in `w`, so a bracketed bisection on
/// `w ∈ [10⁻⁶, 1−10⁻⁹]` is exact to double precision.
pub fn coupling_threshold_with(q_target: f64) -> Result<ThresholdReport> {
    let q = check_target(q_target)?;
    let weight = |w: f64| (2.0 / 3.0) * 0.25 * (1.0 + w) * (1.0 - w.powi(6));
    let (w_lo, w_hi) = (1e-6, 1.0 - 1e-9);
    if q >= weight(w_lo) {
        return Err(Error::InvalidParameter(format!(
            "storage error weight is bounded by ~1/6; no coupling solves (2/3)·p_s = {q}"
        )));
    }
    let (w_star, iterations) = bisect(|w| weight(w) - q, w_lo, w_hi, BISECTION_ITERS)?;
    let rate_over_delta = -w_star.ln() / PI;
    let residual = (weight(w_star) - q).abs();
    Ok(ThresholdReport {
        solved: SolvedQuantity::Coupling { rate_over_delta },
        iterations,
        residual,
        q_target: q,
    })
}

/// Largest background rate `γ/Δ` whose combined budget still meets
/// `q_target` at cooling rate `alpha_bath` (both in units of `Δ`).
///
/// Returns `None` when even an arbitrarily cold background exceeds the
/// target, i.e. when the cooling coupling alone stores too noisily.
pub fn tolerable_background(alpha_bath: f64, q_target: f64) -> Result<Option<f64>> {
    if alpha_bath < 0.0 || !alpha_bath.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cooling rate must be non-negative and finite, got {alpha_bath}"
        )));
    }
    let q = check_target(q_target)?;
    let budget = |gamma: f64| -> Result<f64> {
        Ok(combined_q(&BathSpec::two_bath(alpha_bath, gamma)?, 1.0)?.q)
    };
    // q(γ) is monotone increasing: both the preparation error γ/(α_bath+2γ)
    // and the storage error (through the total rate α_bath+2γ) grow with γ.
    let q_floor = if alpha_bath == 0.0 {
        // Any γ > 0 at α_bath = 0 prepares infinitely hot: p_prep = ½ > q.
        return Ok(None);
    } else {
        budget(0.0)?
    };
    if q_floor >= q {
        return Ok(None);
    }
    let gamma_hi = 1.0;
    if budget(gamma_hi)? <= q {
        return Err(Error::InvalidParameter(format!(
            "background bracket exhausted at γ/Δ = {gamma_hi}"
        )));
    }
    let (gamma, _) = bisect(
        |g| budget(g).expect("rates in bracket are valid") - q,
        0.0,
        gamma_hi,
        BISECTION_ITERS,
    )?;
    Ok(Some(gamma))
}

/// Find the cooling rate that maximizes the tolerable background, using the
/// default target [`THRESHOLD_Q`].
pub fn goldilocks() -> ThresholdReport {
    goldilocks_with(THRESHOLD_Q).expect("default target is valid")
}

/// Maximize [`tolerable_background`] over the cooling rate.
///
/// Too little cooling prepares the sites hot; too much cooling decoheres
/// storage; the optimum sits between. The search runs golden-section on
/// `log₁₀(α_bath/Δ) ∈ [−5, −1]` (the tolerable background is unimodal
/// there) down to a bracket width of 10⁻⁶ decades.
pub fn goldilocks_with(q_target: f64) -> Result<ThresholdReport> {
    let q = check_target(q_target)?;
    let gamma_at = |log_alpha: f64| -> Result<f64> {
        Ok(tolerable_background(10f64.powf(log_alpha), q)?.unwrap_or(0.0))
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-5.0, -1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut g_c = gamma_at(c)?;
    let mut g_d = gamma_at(d)?;
    let mut iterations = 0;
    while b - a > GOLDEN_SECTION_TOL {
        if g_c > g_d {
            b = d;
            d = c;
            g_d = g_c;
            c = b - inv_phi * (b - a);
            g_c = gamma_at(c)?;
        } else {
            a = c;
            c = d;
            g_c = g_d;
            d = a + inv_phi * (b - a);
            g_d = gamma_at(d)?;
        }
        iterations += 1;
    }

    let alpha_bath = 10f64.powf(0.5 * (a + b));
    let gamma = tolerable_background(alpha_bath, q)?.ok_or_else(|| {
        Error::InvalidParameter("cooling optimum collapsed to an infeasible point".into())
    })?;
    let residual = (combined_q(&BathSpec::two_bath(alpha_bath, gamma)?, 1.0)?.q - q).abs();
    Ok(ThresholdReport {
        solved: SolvedQuantity::CoolingOptimum {
            gamma_over_delta: gamma,
            alpha_bath_over_delta: alpha_bath,
        },
        iterations,
        residual,
        q_target: q,
    })
}
