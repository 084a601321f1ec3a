//! Photon-number-resolving detection (PNRD) statistics.
//!
//! Each probe yields a joint distribution over the photon counts
//! `(m_L, m_R)` together with its analytic derivatives in `T_L` and `T_R`.
//! The classical Fisher matrix of that distribution, compared against the
//! QFIM of the same probe, tells whether PNRD is an optimal measurement.

use crate::error::{Error, Result};
use crate::model::{var_gamma, Arm, CombinationVector, Fisher2, PhotonBudget, Scenario, DEFAULT_SUPPORT_TOL};

/// Outcomes with probability below this are left out of Fisher sums.
pub const MIN_PROBABILITY: f64 = 1e-300;
/// Default truncated-mass tolerance for infinite supports.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Joint PNRD distribution over a finite support of outcome pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PnrdDistribution {
    support: Vec<(usize, usize)>,
    prob: Vec<f64>,
    dprob_dtl: Vec<f64>,
    dprob_dtr: Vec<f64>,
    tail_mass: f64,
}

impl PnrdDistribution {
    pub fn support(&self) -> &[(usize, usize)] {
        &self.support
    }

    pub fn prob(&self) -> &[f64] {
        &self.prob
    }

    pub fn dprob(&self, arm: Arm) -> &[f64] {
        match arm {
            Arm::Left => &self.dprob_dtl,
            Arm::Right => &self.dprob_dtr,
        }
    }

    /// Probability outside the stored support.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.prob.iter().sum()
    }

    /// `(Σ ∂p/∂T_L, Σ ∂p/∂T_R)`; both vanish for a complete support.
    pub fn derivative_sums(&self) -> (f64, f64) {
        (self.dprob_dtl.iter().sum(), self.dprob_dtr.iter().sum())
    }

    /// Mean photon count on one arm over the stored support.
    pub fn mean(&self, arm: Arm) -> f64 {
        self.support
            .iter()
            .zip(&self.prob)
            .map(|(&(l, r), p)| {
                let m = if arm == Arm::Left { l } else { r };
                m as f64 * p
            })
            .sum()
    }

    /// Probability of `(m_l, m_r)`, zero off the support.
    pub fn prob_of(&self, m_l: usize, m_r: usize) -> f64 {
        self.support
            .iter()
            .position(|&o| o == (m_l, m_r))
            .map_or(0.0, |i| self.prob[i])
    }

    /// Product distribution from per-arm marginals on `0..len`.
    fn product(left: &Marginal, right: &Marginal, tail_mass: f64) -> Self {
        let size = left.p.len() * right.p.len();
        let mut d = PnrdDistribution {
            support: Vec::with_capacity(size),
            prob: Vec::with_capacity(size),
            dprob_dtl: Vec::with_capacity(size),
            dprob_dtr: Vec::with_capacity(size),
            tail_mass,
        };
        for (l, (&pl, &dl)) in left.p.iter().zip(&left.dp).enumerate() {
            for (r, (&pr, &dr)) in right.p.iter().zip(&right.dp).enumerate() {
                d.support.push((l, r));
                d.prob.push(pl * pr);
                d.dprob_dtl.push(dl * pr);
                d.dprob_dtr.push(pl * dr);
            }
        }
        d
    }
}

/// Single-arm distribution and its derivative in that arm's `T`.
struct Marginal {
    p: Vec<f64>,
    dp: Vec<f64>,
}

/// `ln m!` for `m = 0..=k`.
fn ln_factorials(k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for m in 1..=k {
        acc += (m as f64).ln();
        out.push(acc);
    }
    out
}

fn poisson_pmf(mu: f64, cutoff: usize) -> Vec<f64> {
    if mu == 0.0 {
        let mut p = vec![0.0; cutoff + 1];
        p[0] = 1.0;
        return p;
    }
    let lf = ln_factorials(cutoff);
    let ln_mu = mu.ln();
    (0..=cutoff)
        .map(|m| (-mu + m as f64 * ln_mu - lf[m]).exp())
        .collect()
}

/// `Σ_{m > cutoff} Pois(m; mu) w(m)`, summed directly to avoid the
/// cancellation in `1 - CDF`.
fn poisson_tail_sum(mu: f64, cutoff: usize, w: impl Fn(f64) -> f64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let ln_mu = mu.ln();
    let mut ln_fact: f64 = (1..=cutoff + 1).map(|m| (m as f64).ln()).sum();
    let mut tail = 0.0;
    let mut m = cutoff + 1;
    loop {
        let x = m as f64;
        let term = (-mu + x * ln_mu - ln_fact).exp() * w(x);
        tail += term;
        if x > mu + 1.0 && term <= tail * 1e-17 {
            return tail;
        }
        m += 1;
        ln_fact += (m as f64).ln();
    }
}

/// `P(M > cutoff)` for `M ~ Poisson(mu)`.
pub fn poisson_tail(mu: f64, cutoff: usize) -> f64 {
    poisson_tail_sum(mu, cutoff, |_| 1.0)
}

/// Share of the Fisher information `1/mu` about the Poisson mean carried
/// by counts above `cutoff`: `Σ_{m > cutoff} Pois(m) (m - mu)² / mu`.
pub fn poisson_fisher_tail(mu: f64, cutoff: usize) -> f64 {
    poisson_tail_sum(mu, cutoff, |m| (m - mu) * (m - mu) / mu)
}

/// Smallest cutoff `K ≥ 1` whose Poisson mass tail and relative Fisher
/// tail are both below `tol`.
pub fn poisson_cutoff(mu: f64, tol: f64) -> usize {
    let fails = |k: usize| poisson_tail(mu, k) >= tol || poisson_fisher_tail(mu, k) >= tol;
    let mut k = mu.ceil() as usize;
    while fails(k) {
        k += 1 + k / 8;
    }
    while k > 1 && !fails(k - 1) {
        k -= 1;
    }
    k.max(1)
}

/// Cutoff for [`coherent_pnrd`] leaving at most `tol` of total mass, and of
/// each diagonal Fisher entry in relative terms, out.
pub fn coherent_cutoff(s: &Scenario, b: &PhotonBudget, tol: f64) -> usize {
    [Arm::Left, Arm::Right]
        .iter()
        .map(|&arm| poisson_cutoff(s.effective(arm) * b.n(arm), 0.5 * tol))
        .max()
        .unwrap_or(1)
}

/// Product-Poisson statistics of coherent probes with means `η_j T_j N_j`,
/// truncated to `{0..=cutoff}²`.
pub fn coherent_pnrd(s: &Scenario, b: &PhotonBudget, cutoff: usize) -> PnrdDistribution {
    let marginal = |arm: Arm| {
        let rate = s.eta(arm) * b.n(arm);
        let p = poisson_pmf(s.t(arm) * rate, cutoff);
        // ∂/∂T Pois(m; T·rate) = rate (Pois(m - 1) - Pois(m))
        let dp = (0..=cutoff)
            .map(|m| rate * (if m > 0 { p[m - 1] } else { 0.0 } - p[m]))
            .collect();
        Marginal { p, dp }
    };
    let tl = poisson_tail(s.effective(Arm::Left) * b.n(Arm::Left), cutoff);
    let tr = poisson_tail(s.effective(Arm::Right) * b.n(Arm::Right), cutoff);
    PnrdDistribution::product(&marginal(Arm::Left), &marginal(Arm::Right), tl + tr - tl * tr)
}

/// Binomial rows `B(k, ·; tau)` for `k = 0..=max_k`, built by repeated
/// convolution with a single Bernoulli trial.
struct BinomialRows {
    tau: f64,
    row: Vec<f64>,
}

impl BinomialRows {
    fn new(tau: f64) -> Self {
        BinomialRows { tau, row: vec![1.0] }
    }

    fn k(&self) -> usize {
        self.row.len() - 1
    }

    /// Advances from row `k` to row `k + 1`.
    fn step(&mut self) {
        let k = self.k();
        let mut next = vec![0.0; k + 2];
        for (m, &b) in self.row.iter().enumerate() {
            next[m] += (1.0 - self.tau) * b;
            next[m + 1] += self.tau * b;
        }
        self.row = next;
    }

    /// `∂/∂tau` of row `k + 1` from row `k`:
    /// `(k + 1) (B(k, m - 1) - B(k, m))`.
    fn next_derivative(&self) -> Vec<f64> {
        let k1 = (self.k() + 1) as f64;
        (0..=self.k() + 1)
            .map(|m| {
                let lo = if m > 0 { self.row[m - 1] } else { 0.0 };
                let hi = self.row.get(m).copied().unwrap_or(0.0);
                k1 * (lo - hi)
            })
            .collect()
    }
}

fn binomial_marginal(tau: f64, eta: f64, k: usize) -> Marginal {
    let mut rows = BinomialRows::new(tau);
    for _ in 1..k {
        rows.step();
    }
    let dp = if k == 0 {
        vec![0.0]
    } else {
        rows.next_derivative().into_iter().map(|d| eta * d).collect()
    };
    if k > 0 {
        rows.step();
    }
    Marginal { p: rows.row, dp }
}

/// Product-binomial statistics of Fock probes `|n_l⟩|n_r⟩` through the
/// lossy channels. Exact: the support is `{0..=n_l}×{0..=n_r}`.
pub fn fock_pnrd(s: &Scenario, n_l: usize, n_r: usize) -> PnrdDistribution {
    let left = binomial_marginal(s.effective(Arm::Left), s.eta_l(), n_l);
    let right = binomial_marginal(s.effective(Arm::Right), s.eta_r(), n_r);
    PnrdDistribution::product(&left, &right, 0.0)
}

/// Smallest cutoff `K ≥ 1` with thermal tail `(n/(n+1))^(K+1) < tol`.
pub fn tmsv_cutoff(n: f64, tol: f64) -> usize {
    if n <= 0.0 {
        return 1;
    }
    let ln_q = (n / (n + 1.0)).ln();
    // q^(K+1) < tol  ⇔  K + 1 > ln(tol) / ln(q)
    let mut k = ((tol.ln() / ln_q).floor() as usize).max(1);
    while tmsv_tail(n, k) >= tol {
        k += 1;
    }
    while k > 1 && tmsv_tail(n, k - 1) < tol {
        k -= 1;
    }
    k
}

fn tmsv_tail(n: f64, cutoff: usize) -> f64 {
    (n / (n + 1.0)).powi(cutoff as i32 + 1)
}

/// PNRD statistics of a twin beam split directly into the two arms.
///
/// The total photon number `k` is thermal with weight `n^k/(n+1)^(k+1)` and
/// each arm thins it binomially with `η_j T_j`. The sum over `k` stops at
/// `cutoff`, leaving `(n/(n+1))^(cutoff+1)` of the mass out; a larger tail
/// than `tail_tol` is an error.
pub fn tmsv_direct_pnrd(s: &Scenario, n: f64, cutoff: usize, tail_tol: f64) -> Result<PnrdDistribution> {
    if !n.is_finite() || n < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "mean photon number must be finite and >= 0, got {n}"
        )));
    }
    if cutoff < 1 {
        return Err(Error::InvalidParameter("cutoff must be at least 1".into()));
    }
    let tail = tmsv_tail(n, cutoff);
    if tail > tail_tol {
        return Err(Error::CutoffTooSmall { tail, tol: tail_tol });
    }

    let dim = cutoff + 1;
    let mut p = vec![0.0; dim * dim];
    let mut dl = vec![0.0; dim * dim];
    let mut dr = vec![0.0; dim * dim];

    let (eta_l, eta_r) = (s.eta_l(), s.eta_r());
    let mut left = BinomialRows::new(s.effective(Arm::Left));
    let mut right = BinomialRows::new(s.effective(Arm::Right));
    let q = n / (n + 1.0);
    let mut weight = 1.0 / (n + 1.0);
    let mut dbl = vec![0.0];
    let mut dbr = vec![0.0];
    for k in 0..=cutoff {
        if k > 0 {
            dbl = left.next_derivative();
            dbr = right.next_derivative();
            left.step();
            right.step();
            weight *= q;
        }
        if weight == 0.0 {
            break;
        }
        for ml in 0..=k {
            let bl = weight * left.row[ml];
            let gl = weight * eta_l * dbl[ml];
            let row = ml * dim;
            for mr in 0..=k {
                p[row + mr] += bl * right.row[mr];
                dl[row + mr] += gl * right.row[mr];
                dr[row + mr] += bl * eta_r * dbr[mr];
            }
        }
    }

    let support = (0..dim).flat_map(|l| (0..dim).map(move |r| (l, r))).collect();
    Ok(PnrdDistribution {
        support,
        prob: p,
        dprob_dtl: dl,
        dprob_dtr: dr,
        tail_mass: tail,
    })
}

/// Classical Fisher matrix `F_jk = Σ_m (∂_j p)(∂_k p) / p` over the stored
/// support, skipping outcomes with `p < MIN_PROBABILITY`.
pub fn fim_from_distribution(d: &PnrdDistribution) -> Fisher2 {
    let (mut ll, mut lr, mut rr) = (0.0, 0.0, 0.0);
    for ((&p, &a), &b) in d.prob.iter().zip(&d.dprob_dtl).zip(&d.dprob_dtr) {
        if p < MIN_PROBABILITY {
            continue;
        }
        ll += a * a / p;
        lr += a * b / p;
        rr += b * b / p;
    }
    Fisher2::from_gram(ll, lr, rr)
}

/// Cramér–Rao bound on `Var(Γ₋)` per shot for this measurement.
pub fn cr_bound_gamma(d: &PnrdDistribution) -> Result<f64> {
    var_gamma(&fim_from_distribution(d), &CombinationVector::tcd(), DEFAULT_SUPPORT_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{
        qfim_coherent, qfim_max, qfim_tmsv_direct, uql_optimal, var_coherent, var_tmsv_direct, var_uql,
    };
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        (a - b).abs() / a.abs().max(b.abs())
    }

    fn fisher_rel(a: &Fisher2, b: &Fisher2) -> f64 {
        let scale = b.max_abs();
        [(a.ll(), b.ll()), (a.lr(), b.lr()), (a.rr(), b.rr())]
            .iter()
            .map(|&(x, y)| (x - y).abs() / scale)
            .fold(0.0, f64::max)
    }

    fn assert_basic_invariants(d: &PnrdDistribution) {
        assert!(d.prob().iter().all(|&p| p >= 0.0));
        assert!((d.total_probability() + d.tail_mass() - 1.0).abs() < 1e-10);
        let (sl, sr) = d.derivative_sums();
        assert!(sl.abs() < 1e-8 && sr.abs() < 1e-8, "{sl} {sr}");
    }

    /// Central differences of the probabilities in each `T_j`.
    fn check_derivatives(build: impl Fn(&Scenario) -> PnrdDistribution, s: &Scenario) {
        let h = 1e-6;
        let d = build(s);
        for arm in [Arm::Left, Arm::Right] {
            let shift = |sign: f64| {
                let (l, r) = match arm {
                    Arm::Left => (s.t_l() + sign * h, s.t_r()),
                    Arm::Right => (s.t_l(), s.t_r() + sign * h),
                };
                build(&s.with_t(l, r).unwrap())
            };
            let (up, down) = (shift(1.0), shift(-1.0));
            for i in 0..d.len() {
                if d.prob()[i] <= 1e-10 {
                    continue;
                }
                let fd = (up.prob()[i] - down.prob()[i]) / (2.0 * h);
                let exact = d.dprob(arm)[i];
                let err = (fd - exact).abs() / exact.abs().max(1e-3 * d.prob()[i]).max(1e-12);
                assert!(err < 1e-6, "{arm:?} outcome {:?}: {fd} vs {exact}", d.support()[i]);
            }
        }
    }

    #[test]
    fn coherent_vacuum_probability() {
        let s = Scenario::new(0.3, 0.7, 0.9, 0.6).unwrap();
        let b = PhotonBudget::new(1.5, 2.5).unwrap();
        let d = coherent_pnrd(&s, &b, coherent_cutoff(&s, &b, DEFAULT_TAIL_TOL));
        let expected = (-0.9 * 0.3 * 1.5 - 0.6f64 * 0.7 * 2.5).exp();
        assert!(rel(d.prob_of(0, 0), expected) < 1e-14);
        assert!(rel(d.mean(Arm::Left), 0.9 * 0.3 * 1.5) < 1e-10);
        assert!(rel(d.mean(Arm::Right), 0.6 * 0.7 * 2.5) < 1e-10);
        assert!(d.tail_mass() < DEFAULT_TAIL_TOL);
        assert_basic_invariants(&d);
    }

    #[test]
    fn poisson_tail_matches_complement() {
        for (mu, k) in [(0.5, 3), (3.0, 5), (10.0, 12)] {
            let head: f64 = poisson_pmf(mu, k).iter().sum();
            assert!((poisson_tail(mu, k) - (1.0 - head)).abs() < 1e-14);
        }
        assert_eq!(poisson_tail(0.0, 0), 0.0);
        let k = poisson_cutoff(4.0, 1e-12);
        assert!(poisson_tail(4.0, k) < 1e-12 && poisson_fisher_tail(4.0, k) < 1e-12);
        assert!(poisson_fisher_tail(4.0, k - 1) >= 1e-12);
        let mu = 0.7;
        let full: f64 = poisson_pmf(mu, 60).iter().enumerate().map(|(m, p)| p * (m as f64 - mu).powi(2) / mu).sum();
        assert!((poisson_fisher_tail(mu, 0) + poisson_pmf(mu, 0)[0] * mu - full).abs() < 1e-14);
    }

    #[test]
    fn coherent_cutoff_handles_large_means() {
        let s = Scenario::balanced(0.9, 0.8, 1.0).unwrap();
        let b = PhotonBudget::new(1000.0, 1000.0).unwrap();
        let d = coherent_pnrd(&s, &b, coherent_cutoff(&s, &b, DEFAULT_TAIL_TOL));
        assert_basic_invariants(&d);
        assert!(fisher_rel(&fim_from_distribution(&d), &qfim_coherent(&s, &b)) < 1e-9);
    }

    #[test]
    fn coherent_fim_is_qfim() {
        let s = Scenario::new(0.4, 0.65, 0.8, 0.9).unwrap();
        let b = PhotonBudget::new(1.2, 0.8).unwrap();
        let d = coherent_pnrd(&s, &b, coherent_cutoff(&s, &b, DEFAULT_TAIL_TOL));
        assert!(fisher_rel(&fim_from_distribution(&d), &qfim_coherent(&s, &b)) < 1e-10);
        assert!(rel(cr_bound_gamma(&d).unwrap(), var_coherent(&s, &b)) < 1e-10);
    }

    #[test]
    fn fock_fair_coins() {
        let s = Scenario::balanced(0.5, 0.5, 1.0).unwrap();
        let d = fock_pnrd(&s, 1, 1);
        assert_eq!(d.support(), &[(0, 0), (0, 1), (1, 0), (1, 1)]);
        for &p in d.prob() {
            assert_eq!(p, 0.25);
        }
        assert_eq!(d.tail_mass(), 0.0);
    }

    #[test]
    fn fock_binomial_entries() {
        let s = Scenario::new(0.7, 0.2, 0.9, 0.5).unwrap();
        let d = fock_pnrd(&s, 3, 2);
        let (a, b) = (0.63f64, 0.1f64);
        let choose = |n: u32, k: u32| -> f64 { (1..=k).map(|i| (n - k + i) as f64 / i as f64).product() };
        for &(l, r) in d.support() {
            let pl = choose(3, l as u32) * a.powi(l as i32) * (1.0 - a).powi(3 - l as i32);
            let pr = choose(2, r as u32) * b.powi(r as i32) * (1.0 - b).powi(2 - r as i32);
            assert!(rel(d.prob_of(l, r), pl * pr) < 1e-13);
        }
        assert!((d.total_probability() - 1.0).abs() < 1e-15);
        assert_eq!(d.len(), 12);
    }

    #[test]
    fn fock_vacuum_probe() {
        let s = Scenario::balanced(0.5, 0.3, 0.8).unwrap();
        let d = fock_pnrd(&s, 0, 2);
        assert_eq!(d.len(), 3);
        assert!(d.dprob(Arm::Left).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fock_fim_is_maximal_qfim() {
        let s = Scenario::new(0.45, 0.7, 0.85, 0.75).unwrap();
        for n in 1..=20usize {
            let d = fock_pnrd(&s, n, 21 - n);
            let b = PhotonBudget::new(n as f64, (21 - n) as f64).unwrap();
            assert!(fisher_rel(&fim_from_distribution(&d), &qfim_max(&s, &b)) < 1e-10, "n = {n}");
            assert!(rel(cr_bound_gamma(&d).unwrap(), var_uql(&s, &b)) < 1e-10);
        }
    }

    #[test]
    fn tmsv_cutoff_policy() {
        assert_eq!(tmsv_cutoff(0.0, 1e-12), 1);
        let k = tmsv_cutoff(1.0, 1e-12);
        assert!(0.5f64.powi(k as i32 + 1) < 1e-12);
        assert!(0.5f64.powi(k as i32) >= 1e-12);
        assert_eq!(k, 39);
    }

    #[test]
    fn tmsv_vacuum_probability_matches_geometric_sum() {
        let s = Scenario::new(0.3, 0.8, 0.9, 0.7).unwrap();
        let n = 1.5;
        let d = tmsv_direct_pnrd(&s, n, tmsv_cutoff(n, 1e-14), 1e-14).unwrap();
        let (a, b) = (0.27, 0.56);
        let expected = 1.0 / (n + 1.0 - n * (1.0 - a) * (1.0 - b));
        assert!(rel(d.prob_of(0, 0), expected) < 1e-12);
        assert!((d.mean(Arm::Left) - a * n).abs() < 1e-10);
        assert!((d.mean(Arm::Right) - b * n).abs() < 1e-10);
        assert_basic_invariants(&d);
    }

    #[test]
    fn tmsv_perfect_correlation() {
        let s = Scenario::balanced(1.0, 1.0, 1.0).unwrap();
        let n = 1.0;
        let d = tmsv_direct_pnrd(&s, n, 30, 1e-9).unwrap();
        for &(l, r) in d.support() {
            let p = d.prob_of(l, r);
            if l == r {
                assert!(rel(p, 0.5f64.powi(l as i32 + 1)) < 1e-14);
            } else {
                assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn tmsv_cutoff_too_small() {
        let s = Scenario::balanced(0.5, 0.5, 0.8).unwrap();
        assert!(matches!(
            tmsv_direct_pnrd(&s, 1.0, 10, 1e-12),
            Err(Error::CutoffTooSmall { .. })
        ));
        assert!(tmsv_direct_pnrd(&s, 1.0, 0, 1.0).is_err());
    }

    #[test]
    fn tmsv_cr_bound_on_the_diagonal() {
        for t in [0.2, 0.5, 0.8] {
            let s = Scenario::balanced(t, t, 0.8).unwrap();
            let d = tmsv_direct_pnrd(&s, 1.0, tmsv_cutoff(1.0, DEFAULT_TAIL_TOL), DEFAULT_TAIL_TOL).unwrap();
            let cr = cr_bound_gamma(&d).unwrap();
            let qcr = var_tmsv_direct(&s, 1.0).unwrap();
            assert!(rel(cr, qcr) < 1e-6, "{cr} {qcr}");
            assert!(rel(cr, uql_optimal(&s, 2.0)) < 1e-6);
        }
    }

    #[test]
    fn tmsv_cr_bound_off_the_diagonal_is_looser() {
        let s = Scenario::balanced(0.5, 0.3, 0.8).unwrap();
        let d = tmsv_direct_pnrd(&s, 1.0, tmsv_cutoff(1.0, DEFAULT_TAIL_TOL), DEFAULT_TAIL_TOL).unwrap();
        let cr = cr_bound_gamma(&d).unwrap();
        let qcr = var_tmsv_direct(&s, 1.0).unwrap();
        assert!(cr > qcr * (1.0 + 1e-4), "{cr} {qcr}");
    }

    #[test]
    fn tmsv_fim_converges_in_cutoff() {
        let s = Scenario::balanced(0.5, 0.6, 0.8).unwrap();
        let k = tmsv_cutoff(1.0, DEFAULT_TAIL_TOL);
        let a = fim_from_distribution(&tmsv_direct_pnrd(&s, 1.0, k, DEFAULT_TAIL_TOL).unwrap());
        let b = fim_from_distribution(&tmsv_direct_pnrd(&s, 1.0, 2 * k, DEFAULT_TAIL_TOL).unwrap());
        assert!(fisher_rel(&a, &b) < 1e-8);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let s = Scenario::new(0.42, 0.61, 0.85, 0.7).unwrap();
        let b = PhotonBudget::new(2.0, 1.3).unwrap();
        check_derivatives(|s| coherent_pnrd(s, &b, 30), &s);
        check_derivatives(|s| fock_pnrd(s, 4, 3), &s);
        check_derivatives(|s| tmsv_direct_pnrd(s, 1.2, 45, 1e-3).unwrap(), &s);
    }

    #[test]
    fn zero_transmittance_marginal() {
        let s = Scenario::balanced(0.0, 0.5, 0.8).unwrap();
        let b = PhotonBudget::new(1.0, 1.0).unwrap();
        let d = coherent_pnrd(&s, &b, 10);
        assert_eq!(d.prob_of(1, 0), 0.0);
        assert!(rel(d.dprob(Arm::Left)[0], -0.8 * d.prob()[0]) < 1e-14);
    }

    fn scenario_strategy() -> impl Strategy<Value = Scenario> {
        (0.05..0.95f64, 0.05..0.95f64, 0.3..=1.0f64, 0.3..=1.0f64)
            .prop_map(|(a, b, c, d)| Scenario::new(a, b, c, d).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn coherent_optimality(s in scenario_strategy(), nl in 0.1..5.0f64, nr in 0.1..5.0f64) {
            let b = PhotonBudget::new(nl, nr).unwrap();
            let d = coherent_pnrd(&s, &b, coherent_cutoff(&s, &b, DEFAULT_TAIL_TOL));
            let fim = fim_from_distribution(&d);
            prop_assert!(fisher_rel(&fim, &qfim_coherent(&s, &b)) < 1e-10);
            prop_assert!(qfim_coherent(&s, &b).dominates(&fim, 1e-8));
            prop_assert!(fim.min_eigenvalue() >= -1e-12);
            assert_basic_invariants(&d);
        }

        #[test]
        fn fock_optimality(s in scenario_strategy(), nl in 0usize..=20, nr in 0usize..=20) {
            let d = fock_pnrd(&s, nl, nr);
            let b = PhotonBudget::new(nl as f64, nr as f64).unwrap();
            let fim = fim_from_distribution(&d);
            let h = qfim_max(&s, &b);
            prop_assert!(fisher_rel(&fim, &h) < 1e-10 || h.max_abs() == 0.0);
            prop_assert!(h.dominates(&fim, 1e-8));
            assert_basic_invariants(&d);
        }

        #[test]
        fn tmsv_fim_below_qfim(s in scenario_strategy(), n in 0.05..3.0f64) {
            let k = tmsv_cutoff(n, DEFAULT_TAIL_TOL);
            let d = tmsv_direct_pnrd(&s, n, k, DEFAULT_TAIL_TOL).unwrap();
            let fim = fim_from_distribution(&d);
            prop_assert!(qfim_tmsv_direct(&s, n).dominates(&fim, 1e-8));
            prop_assert!(fim.min_eigenvalue() >= -1e-12);
            assert_basic_invariants(&d);
        }
    }
}
