//! Closed-form quantum Fisher matrices and per-shot variance bounds.
//!
//! Four probes are covered: product coherent states (the classical
//! benchmark), the loss-optimized maximum QFIM (the ultimate quantum limit,
//! attained by Fock states), and a single two-mode squeezed vacuum split
//! across both arms, at finite and infinite brightness.
//!
//! Degenerate denominators (`t_j = 0`, `eta_j t_j = 1`, empty budgets)
//! produce `f64::INFINITY` instead of an error so that sweeps over the full
//! unit square never abort.

use crate::error::{Error, Result};
use crate::model::{var_tcd, Arm, Fisher2, PhotonBudget, Scenario, DEFAULT_SUPPORT_TOL};

/// `num / den` for non-negative operands with `0 / x = 0` and `x / 0 = inf`.
fn safe_div(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// `1 / (1 + sqrt(num / den))` written so that both limits are exact.
fn split_ratio(num: f64, den: f64) -> f64 {
    let (a, b) = (num.sqrt(), den.sqrt());
    if a + b == 0.0 {
        return 0.5;
    }
    b / (a + b)
}

/// Optimal left fraction `1 / (1 + sqrt(x))` as a function of the
/// loss-weighted transmittance ratio `x`.
pub fn ratio_from_x(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / (1.0 + x.sqrt())
    }
}

/// QFIM of product coherent states, `diag(η_j N_j / T_j)`.
pub fn qfim_coherent(s: &Scenario, b: &PhotonBudget) -> Fisher2 {
    let entry = |arm| safe_div(s.eta(arm) * b.n(arm), s.t(arm));
    Fisher2::from_gram(entry(Arm::Left), 0.0, entry(Arm::Right))
}

/// `T_L / (η_L N_L) + T_R / (η_R N_R)`.
pub fn var_coherent(s: &Scenario, b: &PhotonBudget) -> f64 {
    [Arm::Left, Arm::Right]
        .iter()
        .map(|&arm| safe_div(s.t(arm), s.eta(arm) * b.n(arm)))
        .sum()
}

/// Left fraction of the photon budget minimizing [`var_coherent`].
pub fn optimal_ratio_classical(s: &Scenario) -> f64 {
    split_ratio(s.eta_l() * s.t_r(), s.eta_r() * s.t_l())
}

/// Classical benchmark: [`var_coherent`] at the optimal split of `n_tot`.
pub fn classical_benchmark(s: &Scenario, n_tot: f64) -> f64 {
    let term = |arm| safe_div(s.t(arm), s.eta(arm)).sqrt();
    let root = term(Arm::Left) + term(Arm::Right);
    safe_div(root * root, n_tot)
}

fn loss_factor(s: &Scenario, arm: Arm) -> f64 {
    // clamp keeps 1 - ηT exactly zero at the lossless boundary
    (1.0 - s.effective(arm)).max(0.0)
}

/// Maximum QFIM under loss, `diag(η_j N_j / (T_j (1 - η_j T_j)))`.
pub fn qfim_max(s: &Scenario, b: &PhotonBudget) -> Fisher2 {
    let entry = |arm| safe_div(s.eta(arm) * b.n(arm), s.t(arm) * loss_factor(s, arm));
    Fisher2::from_gram(entry(Arm::Left), 0.0, entry(Arm::Right))
}

/// Ultimate quantum limit for a given budget.
pub fn var_uql(s: &Scenario, b: &PhotonBudget) -> f64 {
    [Arm::Left, Arm::Right]
        .iter()
        .map(|&arm| safe_div(s.t(arm) * loss_factor(s, arm), s.eta(arm) * b.n(arm)))
        .sum()
}

/// Left fraction minimizing [`var_uql`].
pub fn optimal_ratio_uql(s: &Scenario) -> f64 {
    split_ratio(
        s.eta_l() * s.t_r() * loss_factor(s, Arm::Right),
        s.eta_r() * s.t_l() * loss_factor(s, Arm::Left),
    )
}

/// The `x` variable whose `1/(1+sqrt x)` is [`optimal_ratio_uql`].
pub fn uql_ratio_variable(s: &Scenario) -> f64 {
    safe_div(
        s.eta_l() * s.t_r() * loss_factor(s, Arm::Right),
        s.eta_r() * s.t_l() * loss_factor(s, Arm::Left),
    )
}

/// The `x` variable whose `1/(1+sqrt x)` is [`optimal_ratio_classical`].
pub fn classical_ratio_variable(s: &Scenario) -> f64 {
    safe_div(s.eta_l() * s.t_r(), s.eta_r() * s.t_l())
}

/// Ultimate quantum limit at the optimal split of `n_tot`.
pub fn uql_optimal(s: &Scenario, n_tot: f64) -> f64 {
    let term = |arm| safe_div(s.t(arm) * loss_factor(s, arm), s.eta(arm)).sqrt();
    let root = term(Arm::Left) + term(Arm::Right);
    safe_div(root * root, n_tot)
}

/// Classical benchmark over ultimate quantum limit.
///
/// Equals one when both vanish or both diverge (no photons survive, or the
/// sample is opaque in both arms).
pub fn enhancement_factor(s: &Scenario, n_tot: f64) -> f64 {
    let cb = classical_benchmark(s, n_tot);
    let uql = uql_optimal(s, n_tot);
    if (cb == 0.0 && uql == 0.0) || (cb.is_infinite() && uql.is_infinite()) {
        return 1.0;
    }
    safe_div(cb, uql)
}

#[cfg(debug_assertions)]
fn chi_debug_offset() -> f64 {
    use std::sync::OnceLock;
    static OFFSET: OnceLock<f64> = OnceLock::new();
    *OFFSET.get_or_init(|| {
        std::env::var("CDSENSE_DEBUG_CHI_OFFSET")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0.0)
    })
}

#[cfg(not(debug_assertions))]
fn chi_debug_offset() -> f64 {
    0.0
}

/// Correlation factor χ that suppresses the diagonal of the twin-beam QFIM
/// in arm `j` relative to the maximum QFIM. Always in `[0, 1]`.
pub fn chi_factor(s: &Scenario, n: f64, arm: Arm) -> f64 {
    let a = s.effective(arm);
    let b = s.effective(arm.other());
    let cross_a = a * (1.0 - b);
    let cross_b = b * (1.0 - a);
    let num = 1.0 - cross_a + cross_b * n;
    let den = 1.0 + cross_a * n + cross_b * n;
    let chi = num / den;
    debug_assert!(
        (-1e-9..=1.0 + 1e-9).contains(&chi),
        "chi = {chi} outside [0, 1] beyond rounding"
    );
    chi.clamp(0.0, 1.0) + chi_debug_offset()
}

/// QFIM of the lossy twin beam with `n` mean photons per signal mode.
pub fn qfim_tmsv_direct(s: &Scenario, n: f64) -> Fisher2 {
    let diag = |arm| {
        safe_div(
            chi_factor(s, n, arm) * s.eta(arm) * n,
            s.t(arm) * loss_factor(s, arm),
        )
    };
    let a = s.effective(Arm::Left);
    let b = s.effective(Arm::Right);
    let den = 1.0 + a * (1.0 - b) * n + b * (1.0 - a) * n;
    let off = -s.eta_l() * s.eta_r() * n * (n + 1.0) / den;
    // avoid a signed zero in the output
    let off = if off == 0.0 { 0.0 } else { off };
    Fisher2::from_gram(diag(Arm::Left), off, diag(Arm::Right))
}

/// QCR bound of the direct twin-beam probe,
/// `(H_LL + H_RR + 2 H_LR) / (H_LL H_RR - H_LR²)`.
pub fn var_tmsv_direct(s: &Scenario, n: f64) -> Result<f64> {
    let h = qfim_tmsv_direct(s, n);
    if !h.is_finite() {
        return var_tcd(&h);
    }
    let scale = h.ll() * h.rr();
    let det = scale - h.lr() * h.rl();
    if scale <= 0.0 || det <= DEFAULT_SUPPORT_TOL * scale {
        return Err(Error::Unestimable);
    }
    Ok((h.ll() + h.rr() + h.lr() + h.rl()) / det)
}

/// Limit of [`var_tmsv_direct`] as the squeezing grows without bound,
/// `(T_L - T_R)² (1 - a)(1 - b) / (1 - a(1 - b) - b(1 - a))` with
/// `a = η_L T_L`, `b = η_R T_R`.
///
/// The leading `O(N²)` terms of the QFIM determinant cancel, so the limit is
/// set by the subleading order. The denominator equals `(1 - a)(1 - b) + ab`
/// and is positive on the whole domain.
pub fn var_tmsv_large_n(s: &Scenario) -> f64 {
    let a = s.effective(Arm::Left);
    let b = s.effective(Arm::Right);
    let dt = s.t_l() - s.t_r();
    let num = dt * dt * (1.0 - a) * (1.0 - b);
    safe_div(num, (1.0 - a) * (1.0 - b) + a * b)
}

/// Upper bound `Γ₋² / Var` on the signal-to-noise ratio; zero for an
/// infinite variance bound.
pub fn snr_upper_bound(gamma_minus: f64, var_qcr: f64) -> f64 {
    let sq = gamma_minus * gamma_minus;
    if var_qcr.is_infinite() {
        0.0
    } else {
        safe_div(sq, var_qcr)
    }
}

/// [`snr_upper_bound`] fed directly by a bound that may be unestimable.
pub fn snr_from_bound(gamma_minus: f64, var_qcr: Result<f64>) -> f64 {
    snr_upper_bound(gamma_minus, var_qcr.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundLabel {
    Coherent,
    Uql,
    TmsvDirect,
    TmsvLargeN,
}

impl BoundLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundLabel::Coherent => "CB",
            BoundLabel::Uql => "UQL",
            BoundLabel::TmsvDirect => "TMSV-direct",
            BoundLabel::TmsvLargeN => "TMSV-largeN",
        }
    }
}

/// One probe's QFIM and bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub label: BoundLabel,
    pub qfim: Fisher2,
    /// Per-shot variance bound, `+inf` when unestimable.
    pub var_gamma: f64,
    pub optimal_ratio: Option<f64>,
}

/// Reports for every probe with `n_tot` photons in the signal modes.
///
/// When `ratio` is given, the coherent and UQL rows use that split instead
/// of their optimal one. The twin beam always splits evenly. The large-N
/// row's QFIM grows without bound and is reported as infinite.
pub fn bound_reports(s: &Scenario, n_tot: f64, ratio: Option<f64>) -> Result<Vec<BoundReport>> {
    let r_cb = optimal_ratio_classical(s);
    let r_uql = optimal_ratio_uql(s);
    let b_cb = PhotonBudget::from_ratio(n_tot, ratio.unwrap_or(r_cb))?;
    let b_uql = PhotonBudget::from_ratio(n_tot, ratio.unwrap_or(r_uql))?;
    let (var_cb, var_u) = match ratio {
        Some(_) => (var_coherent(s, &b_cb), var_uql(s, &b_uql)),
        None => (classical_benchmark(s, n_tot), uql_optimal(s, n_tot)),
    };
    let n = 0.5 * n_tot;
    Ok(vec![
        BoundReport {
            label: BoundLabel::Coherent,
            qfim: qfim_coherent(s, &b_cb),
            var_gamma: var_cb,
            optimal_ratio: Some(r_cb),
        },
        BoundReport {
            label: BoundLabel::Uql,
            qfim: qfim_max(s, &b_uql),
            var_gamma: var_u,
            optimal_ratio: Some(r_uql),
        },
        BoundReport {
            label: BoundLabel::TmsvDirect,
            qfim: qfim_tmsv_direct(s, n),
            var_gamma: var_tmsv_direct(s, n).unwrap_or(f64::INFINITY),
            optimal_ratio: None,
        },
        BoundReport {
            label: BoundLabel::TmsvLargeN,
            qfim: Fisher2::from_gram(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            var_gamma: var_tmsv_large_n(s),
            optimal_ratio: None,
        },
    ])
}
