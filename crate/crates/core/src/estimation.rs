//! Monte-Carlo estimation of `(T_L, T_R)` and `Γ₋` from simulated PNRD
//! counts, used to check that maximum likelihood reaches the Cramér–Rao
//! bound once the number of repetitions `ν` is large.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Arm, PhotonBudget, Scenario};
use crate::photon::{
    coherent_cutoff, coherent_pnrd, cr_bound_gamma, fock_pnrd, tmsv_cutoff, tmsv_direct_pnrd, PnrdDistribution,
    DEFAULT_TAIL_TOL,
};

/// Identifier of the random stream, written into report headers.
///
/// Each seed drives its own ChaCha20 stream, keyed through
/// `SeedableRng::seed_from_u64`; uniforms take the top 53 bits of each
/// `u64` output.
pub const RNG_ALGORITHM: &str = "chacha20/rand_chacha-0.9/seed_from_u64";

/// Largest truncated mass that [`sample`] folds into the last outcome.
pub const MAX_SAMPLING_TAIL: f64 = 1e-9;

/// Golden-section tolerance on `T` for [`mle_tmsv`].
pub const MLE_TOL: f64 = 1e-5;

/// `ν` i.i.d. PNRD outcomes drawn with one seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    outcomes: Vec<(usize, usize)>,
    seed: u64,
}

impl SampleBatch {
    pub fn new(outcomes: Vec<(usize, usize)>, seed: u64) -> Self {
        SampleBatch { outcomes, seed }
    }

    pub fn outcomes(&self) -> &[(usize, usize)] {
        &self.outcomes
    }

    pub fn nu(&self) -> usize {
        self.outcomes.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sample mean of the counts on one arm.
    pub fn mean(&self, arm: Arm) -> f64 {
        let total: usize = self
            .outcomes
            .iter()
            .map(|&(l, r)| if arm == Arm::Left { l } else { r })
            .sum();
        total as f64 / self.nu() as f64
    }

    fn max_count(&self) -> usize {
        self.outcomes.iter().map(|&(l, r)| l.max(r)).max().unwrap_or(0)
    }
}

fn uniform(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws `nu` outcomes by inverse CDF over the support of `d`.
///
/// A truncated tail up to [`MAX_SAMPLING_TAIL`] is folded into the last
/// outcome of the support (the largest counts); a larger tail is an error.
pub fn sample(d: &PnrdDistribution, nu: usize, seed: u64) -> Result<SampleBatch> {
    if d.tail_mass() > MAX_SAMPLING_TAIL {
        return Err(Error::TailTooLarge {
            tail: d.tail_mass(),
            tol: MAX_SAMPLING_TAIL,
        });
    }
    if d.is_empty() {
        return Err(Error::InvalidParameter("distribution has empty support".into()));
    }
    let mut cdf: Vec<f64> = d
        .prob()
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    *cdf.last_mut().unwrap() = f64::INFINITY;

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let support = d.support();
    let outcomes = (0..nu)
        .map(|_| {
            let u = uniform(&mut rng);
            support[cdf.partition_point(|&c| c <= u)]
        })
        .collect();
    Ok(SampleBatch { outcomes, seed })
}

/// Probes whose maximum-likelihood estimate is a rescaled sample mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductProbe {
    Coherent,
    Fock,
}

/// Closed-form MLE `T̂_j = mean(m_j) / (η_j N_j)`, clamped to `[0, 1]` for
/// Fock probes.
pub fn mle_product(batch: &SampleBatch, s: &Scenario, b: &PhotonBudget, probe: ProductProbe) -> Result<(f64, f64)> {
    if batch.nu() == 0 {
        return Err(Error::InvalidParameter("empty sample batch".into()));
    }
    let estimate = |arm: Arm| -> Result<f64> {
        let rate = s.eta(arm) * b.n(arm);
        if rate <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "eta * N must be positive on the {arm:?} arm"
            )));
        }
        let t = batch.mean(arm) / rate;
        Ok(match probe {
            ProductProbe::Coherent => t,
            ProductProbe::Fock => t.clamp(0.0, 1.0),
        })
    };
    Ok((estimate(Arm::Left)?, estimate(Arm::Right)?))
}

/// Counts per distinct outcome.
fn histogram(batch: &SampleBatch) -> Vec<((usize, usize), usize)> {
    let mut sorted = batch.outcomes.clone();
    sorted.sort_unstable();
    let mut out: Vec<((usize, usize), usize)> = Vec::new();
    for o in sorted {
        match out.last_mut() {
            Some((last, c)) if *last == o => *c += 1,
            _ => out.push((o, 1)),
        }
    }
    out
}

/// Log-likelihood of the batch under the direct twin-beam model at the
/// transmittances in `s`.
pub fn tmsv_log_likelihood(batch: &SampleBatch, s: &Scenario, n: f64) -> Result<f64> {
    let counts = histogram(batch);
    let cutoff = tmsv_cutoff(n, DEFAULT_TAIL_TOL).max(batch.max_count());
    let d = tmsv_direct_pnrd(s, n, cutoff, DEFAULT_TAIL_TOL)?;
    log_likelihood(&d, &counts, cutoff)
}

fn log_likelihood(d: &PnrdDistribution, counts: &[((usize, usize), usize)], cutoff: usize) -> Result<f64> {
    // tmsv_direct_pnrd stores the full square support in row-major order
    let dim = cutoff + 1;
    debug_assert_eq!(d.len(), dim * dim);
    Ok(counts
        .iter()
        .map(|&((l, r), c)| c as f64 * d.prob()[l * dim + r].ln())
        .sum())
}

fn golden_section(lo: f64, hi: f64, tol: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Numerical MLE of `(T_L, T_R)` for the direct twin-beam probe.
///
/// Scans a `grid × grid` lattice of cell centres in `(0, 1)²`, then refines
/// the best cell by alternating golden-section searches on each coordinate
/// until both move by less than [`MLE_TOL`]. `s` supplies the losses.
pub fn mle_tmsv(batch: &SampleBatch, s: &Scenario, n: f64, grid: usize) -> Result<(f64, f64)> {
    if batch.nu() == 0 {
        return Err(Error::InvalidParameter("empty sample batch".into()));
    }
    if grid == 0 {
        return Err(Error::InvalidParameter("grid resolution must be positive".into()));
    }
    if batch.outcomes.iter().all(|&o| o == (0, 0)) {
        return Err(Error::DegenerateLikelihood);
    }
    let counts = histogram(batch);
    let cutoff = tmsv_cutoff(n, DEFAULT_TAIL_TOL).max(batch.max_count());
    let ll = |t_l: f64, t_r: f64| -> Result<f64> {
        let d = tmsv_direct_pnrd(&s.with_t(t_l, t_r)?, n, cutoff, DEFAULT_TAIL_TOL)?;
        log_likelihood(&d, &counts, cutoff)
    };

    let cell = 1.0 / grid as f64;
    let mut best = (f64::NEG_INFINITY, 0.5, 0.5);
    for i in 0..grid {
        for j in 0..grid {
            let (tl, tr) = ((i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell);
            let v = ll(tl, tr)?;
            if v > best.0 {
                best = (v, tl, tr);
            }
        }
    }
    let (_, mut tl, mut tr) = best;
    let (mut lo_l, mut hi_l) = ((tl - cell).max(0.0), (tl + cell).min(1.0));
    let (mut lo_r, mut hi_r) = ((tr - cell).max(0.0), (tr + cell).min(1.0));
    for _ in 0..50 {
        let new_l = golden_section(lo_l, hi_l, MLE_TOL, |x| ll(x, tr))?;
        let new_r = golden_section(lo_r, hi_r, MLE_TOL, |x| ll(new_l, x))?;
        let moved = (new_l - tl).abs().max((new_r - tr).abs());
        tl = new_l;
        tr = new_r;
        if moved < MLE_TOL {
            break;
        }
        // the coupled optimum may sit outside the first bracket
        (lo_l, hi_l) = ((tl - cell).max(0.0), (tl + cell).min(1.0));
        (lo_r, hi_r) = ((tr - cell).max(0.0), (tr + cell).min(1.0));
    }
    Ok((tl, tr))
}

/// Probe and photon budget for a saturation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeSpec {
    Coherent(PhotonBudget),
    Fock { n_l: usize, n_r: usize },
    /// Direct twin beam with `n` photons per mode; `grid` seeds the MLE.
    Tmsv { n: f64, grid: usize },
}

impl ProbeSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProbeSpec::Coherent(_) => "coherent",
            ProbeSpec::Fock { .. } => "fock",
            ProbeSpec::Tmsv { .. } => "tmsv",
        }
    }

    pub fn distribution(&self, s: &Scenario) -> Result<PnrdDistribution> {
        Ok(match *self {
            ProbeSpec::Coherent(b) => coherent_pnrd(s, &b, coherent_cutoff(s, &b, DEFAULT_TAIL_TOL)),
            ProbeSpec::Fock { n_l, n_r } => fock_pnrd(s, n_l, n_r),
            ProbeSpec::Tmsv { n, .. } => tmsv_direct_pnrd(s, n, tmsv_cutoff(n, DEFAULT_TAIL_TOL), DEFAULT_TAIL_TOL)?,
        })
    }

    fn estimate(&self, batch: &SampleBatch, s: &Scenario) -> Result<(f64, f64)> {
        match *self {
            ProbeSpec::Coherent(b) => mle_product(batch, s, &b, ProductProbe::Coherent),
            ProbeSpec::Fock { n_l, n_r } => {
                let b = PhotonBudget::new(n_l as f64, n_r as f64)?;
                mle_product(batch, s, &b, ProductProbe::Fock)
            }
            ProbeSpec::Tmsv { n, grid } => mle_tmsv(batch, s, n, grid),
        }
    }
}

/// Estimate from one seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedEstimate {
    pub seed: u64,
    pub t_l: f64,
    pub t_r: f64,
    pub gamma: f64,
}

/// Spread of `Γ̂₋ = T̂_L - T̂_R` across seeds against the CR bound.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    pub nu: usize,
    pub gamma_true: f64,
    pub gamma_hat_mean: f64,
    /// Unbiased sample variance across seeds.
    pub gamma_hat_var: f64,
    /// `cr_bound_gamma / ν`.
    pub cr_bound_per_nu: f64,
    /// `gamma_hat_var / cr_bound_per_nu`.
    pub ratio: f64,
    /// Standard error of `ratio` for Gaussian estimates, `ratio sqrt(2/(S-1))`.
    pub ratio_std_error: f64,
    pub bias: f64,
    pub estimates: Vec<SeedEstimate>,
}

/// Runs one simulation per seed (in parallel) and compares the empirical
/// variance of `Γ̂₋` with the per-shot CR bound divided by `ν`.
pub fn saturation_report(probe: &ProbeSpec, s: &Scenario, nu: usize, seeds: &[u64]) -> Result<EstimationReport> {
    if nu == 0 {
        return Err(Error::InvalidParameter("nu must be positive".into()));
    }
    if seeds.len() < 2 {
        return Err(Error::InvalidParameter("at least two seeds are needed for a variance".into()));
    }
    let d = probe.distribution(s)?;
    let cr_bound_per_nu = cr_bound_gamma(&d)? / nu as f64;
    let estimates = seeds
        .par_iter()
        .map(|&seed| {
            let batch = sample(&d, nu, seed)?;
            let (t_l, t_r) = probe.estimate(&batch, s)?;
            Ok(SeedEstimate {
                seed,
                t_l,
                t_r,
                gamma: t_l - t_r,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let count = estimates.len() as f64;
    let mean = estimates.iter().map(|e| e.gamma).sum::<f64>() / count;
    let var = estimates.iter().map(|e| (e.gamma - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let ratio = var / cr_bound_per_nu;
    Ok(EstimationReport {
        nu,
        gamma_true: s.gamma_minus(),
        gamma_hat_mean: mean,
        gamma_hat_var: var,
        cr_bound_per_nu,
        ratio,
        ratio_std_error: ratio * (2.0 / (count - 1.0)).sqrt(),
        bias: mean - s.gamma_minus(),
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{invert_on_support, DEFAULT_SUPPORT_TOL};
    use crate::photon::fim_from_distribution;

    fn seeds(n: u64) -> Vec<u64> {
        (0..n).collect()
    }

    #[test]
    fn point_mass_sampling() {
        let s = Scenario::balanced(1.0, 1.0, 1.0).unwrap();
        let d = fock_pnrd(&s, 2, 3);
        let batch = sample(&d, 1000, 7).unwrap();
        assert!(batch.outcomes().iter().all(|&o| o == (2, 3)));
        assert_eq!(batch.nu(), 1000);
        assert_eq!(batch.seed(), 7);
    }

    #[test]
    fn fair_outcomes_within_five_sigma() {
        let s = Scenario::balanced(0.5, 0.5, 1.0).unwrap();
        let d = fock_pnrd(&s, 1, 1);
        let nu = 100_000;
        let batch = sample(&d, nu, 11).unwrap();
        let sigma = (0.25f64 * 0.75 / nu as f64).sqrt();
        for &o in d.support() {
            let freq = batch.outcomes().iter().filter(|&&x| x == o).count() as f64 / nu as f64;
            assert!((freq - 0.25).abs() < 5.0 * sigma, "{o:?}: {freq}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = Scenario::new(0.4, 0.6, 0.8, 0.9).unwrap();
        let b = PhotonBudget::new(2.0, 1.0).unwrap();
        let d = coherent_pnrd(&s, &b, coherent_cutoff(&s, &b, DEFAULT_TAIL_TOL));
        assert_eq!(sample(&d, 500, 3).unwrap(), sample(&d, 500, 3).unwrap());
        assert_ne!(sample(&d, 500, 3).unwrap(), sample(&d, 500, 4).unwrap());
    }

    #[test]
    fn uniform_stream_is_pinned() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let u = uniform(&mut rng);
        let mut again = ChaCha20Rng::seed_from_u64(0);
        assert_eq!(u, (again.next_u64() >> 11) as f64 / 9_007_199_254_740_992.0);
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn heavy_tail_is_rejected() {
        let s = Scenario::balanced(0.9, 0.9, 1.0).unwrap();
        let b = PhotonBudget::new(5.0, 5.0).unwrap();
        let d = coherent_pnrd(&s, &b, 3);
        assert!(matches!(sample(&d, 10, 0), Err(Error::TailTooLarge { .. })));
    }

    #[test]
    fn mle_product_examples() {
        let s = Scenario::balanced(1.0, 1.0, 1.0).unwrap();
        let b = PhotonBudget::new(1.0, 1.0).unwrap();
        let batch = SampleBatch::new(vec![(1, 1); 20], 0);
        assert_eq!(mle_product(&batch, &s, &b, ProductProbe::Fock).unwrap(), (1.0, 1.0));

        let s = Scenario::balanced(0.5, 0.5, 0.8).unwrap();
        let b = PhotonBudget::new(1.0, 1.0).unwrap();
        // mean count 0.4 on each arm
        let batch = SampleBatch::new(vec![(1, 0), (0, 1), (1, 1), (0, 0), (0, 0)], 0);
        let (tl, tr) = mle_product(&batch, &s, &b, ProductProbe::Coherent).unwrap();
        assert!((tl - 0.5).abs() < 1e-15 && (tr - 0.5).abs() < 1e-15);

        let zero = PhotonBudget::new(0.0, 1.0).unwrap();
        assert!(mle_product(&batch, &s, &zero, ProductProbe::Coherent).is_err());
    }

    #[test]
    fn fock_estimate_is_clamped() {
        let s = Scenario::balanced(0.5, 0.5, 0.5).unwrap();
        let b = PhotonBudget::new(1.0, 1.0).unwrap();
        let batch = SampleBatch::new(vec![(1, 0); 4], 0);
        assert_eq!(mle_product(&batch, &s, &b, ProductProbe::Fock).unwrap(), (1.0, 0.0));
        assert_eq!(mle_product(&batch, &s, &b, ProductProbe::Coherent).unwrap(), (2.0, 0.0));
    }

    #[test]
    fn coherent_mle_is_unbiased() {
        let s = Scenario::new(0.6, 0.3, 0.8, 0.8).unwrap();
        let b = PhotonBudget::new(1.0, 1.0).unwrap();
        let nu = 2000;
        let report = saturation_report(&ProbeSpec::Coherent(b), &s, nu, &seeds(200)).unwrap();
        let mean_l = report.estimates.iter().map(|e| e.t_l).sum::<f64>() / 200.0;
        // Var(T̂_L) = T_L / (η_L N_L ν)
        let se = (0.6 / (0.8 * nu as f64) / 200.0).sqrt();
        assert!((mean_l - 0.6).abs() < 3.0 * se, "{mean_l}");
    }

    #[test]
    fn tmsv_mle_recovers_truth() {
        let s = Scenario::new(0.55, 0.35, 0.8, 0.8).unwrap();
        let n = 1.0;
        let d = ProbeSpec::Tmsv { n, grid: 10 }.distribution(&s).unwrap();
        let cov = invert_on_support(&fim_from_distribution(&d), DEFAULT_SUPPORT_TOL);
        let nu = 20_000;
        let batch = sample(&d, nu, 5).unwrap();
        let (tl, tr) = mle_tmsv(&batch, &s, n, 10).unwrap();
        let se_l = (cov.ll() / nu as f64).sqrt();
        let se_r = (cov.rr() / nu as f64).sqrt();
        assert!((tl - 0.55).abs() < 3.0 * se_l, "{tl} ± {se_l}");
        assert!((tr - 0.35).abs() < 3.0 * se_r, "{tr} ± {se_r}");
    }

    #[test]
    fn tmsv_likelihood_peaks_near_truth() {
        let s = Scenario::new(0.5, 0.4, 0.8, 0.8).unwrap();
        let far = s.with_t(0.6, 0.5).unwrap();
        let d = ProbeSpec::Tmsv { n: 1.0, grid: 10 }.distribution(&s).unwrap();
        let wins = (0..20)
            .filter(|&seed| {
                let batch = sample(&d, 5000, seed).unwrap();
                tmsv_log_likelihood(&batch, &s, 1.0).unwrap() >= tmsv_log_likelihood(&batch, &far, 1.0).unwrap()
            })
            .count();
        assert!(wins > 10, "{wins}");
    }

    #[test]
    fn all_zero_counts_are_degenerate() {
        let s = Scenario::balanced(0.5, 0.5, 0.8).unwrap();
        let batch = SampleBatch::new(vec![(0, 0); 5], 0);
        assert_eq!(mle_tmsv(&batch, &s, 1.0, 10), Err(Error::DegenerateLikelihood));
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let x = golden_section(0.0, 1.0, 1e-8, |x| Ok(-(x - 0.3141).powi(2))).unwrap();
        assert!((x - 0.3141).abs() < 1e-8);
    }

    #[test]
    fn fock_saturates_bound() {
        let s = Scenario::new(0.5, 0.45, 0.8, 0.8).unwrap();
        let r = saturation_report(&ProbeSpec::Fock { n_l: 1, n_r: 1 }, &s, 10_000, &seeds(200)).unwrap();
        assert!((0.9..=1.1).contains(&r.ratio), "{}", r.ratio);
        assert!(r.ratio >= 1.0 - 5.0 * r.ratio_std_error);
        assert!(r.gamma_hat_var >= 0.0);
    }

    #[test]
    fn coherent_saturates_bound() {
        let s = Scenario::new(0.5, 0.45, 0.8, 0.8).unwrap();
        let b = PhotonBudget::new(1.0, 1.0).unwrap();
        // with 2000 seeds the band is about three standard errors wide
        let r = saturation_report(&ProbeSpec::Coherent(b), &s, 10_000, &seeds(2000)).unwrap();
        assert!((0.9..=1.1).contains(&r.ratio), "{}", r.ratio);
        assert!(r.ratio >= 1.0 - 5.0 * r.ratio_std_error);
    }

    #[test]
    fn reports_are_reproducible() {
        let s = Scenario::new(0.3, 0.7, 0.9, 0.8).unwrap();
        let probe = ProbeSpec::Fock { n_l: 2, n_r: 1 };
        let a = saturation_report(&probe, &s, 300, &seeds(16)).unwrap();
        let b = saturation_report(&probe, &s, 300, &seeds(16)).unwrap();
        assert_eq!(a, b);
        assert!(a.estimates.windows(2).all(|w| w[0].seed < w[1].seed));
    }

    #[test]
    fn variance_scales_inversely_with_nu() {
        let s = Scenario::new(0.6, 0.4, 0.8, 0.8).unwrap();
        let probe = ProbeSpec::Fock { n_l: 1, n_r: 1 };
        // 4000 seeds put the ratio's relative spread near 3%
        let short = saturation_report(&probe, &s, 500, &seeds(4000)).unwrap();
        let long_seeds: Vec<u64> = (10_000..14_000).collect();
        let long = saturation_report(&probe, &s, 1000, &long_seeds).unwrap();
        let halving = short.gamma_hat_var / long.gamma_hat_var;
        assert!((halving / 2.0 - 1.0).abs() < 0.1, "{halving}");
    }

    #[test]
    fn rejects_bad_run_parameters() {
        let s = Scenario::balanced(0.5, 0.5, 0.8).unwrap();
        let probe = ProbeSpec::Fock { n_l: 1, n_r: 1 };
        assert!(saturation_report(&probe, &s, 0, &seeds(4)).is_err());
        assert!(saturation_report(&probe, &s, 10, &seeds(1)).is_err());
    }
}
