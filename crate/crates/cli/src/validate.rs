//! Oracle cross-checks run by `cdsense validate`.
//!
//! Every check compares two independent routes to the same number (closed
//! form against numerics, or a property that must hold exactly) and reports
//! the worst deviation against its tolerance.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use cdsense::bounds::{
    chi_factor, enhancement_factor, qfim_coherent, qfim_max, qfim_tmsv_direct, uql_optimal, var_tmsv_direct,
    var_tmsv_large_n,
};
use cdsense::gaussian::{
    fidelity_two_mode, lossy_tmsv, qfim_from_fidelity, qfim_tmsv_ancilla, tmsv_state, GaussianState,
    DEFAULT_FD_STEP,
};
use cdsense::photon::{
    coherent_cutoff, coherent_pnrd, cr_bound_gamma, fim_from_distribution, fock_pnrd, tmsv_cutoff, tmsv_direct_pnrd,
    PnrdDistribution, DEFAULT_TAIL_TOL,
};
use cdsense::{Arm, Fisher2, PhotonBudget, Result, Scenario};

use crate::csv::fmt_g;

const SEED: u64 = 20_240_611;

/// Outcome of one check.
#[derive(Debug, Clone)]
pub struct Check {
    pub id: &'static str,
    pub name: &'static str,
    pub cases: usize,
    /// Worst deviation, or the number of violations for property suites.
    pub worst: f64,
    pub tolerance: f64,
    pub elapsed: Duration,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {:<4} {:<42} cases={:<5} worst={:<14} tol={:<8} {:.2}s",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.cases,
            fmt_g(self.worst),
            fmt_g(self.tolerance),
            self.elapsed.as_secs_f64()
        )
    }
}

fn timed(id: &'static str, name: &'static str, tolerance: f64, f: impl FnOnce() -> (usize, f64)) -> Check {
    let start = Instant::now();
    let (cases, worst) = f();
    Check {
        id,
        name,
        cases,
        // a NaN deviation must fail
        worst: if worst.is_nan() { f64::INFINITY } else { worst },
        tolerance,
        elapsed: start.elapsed(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / b.abs()
}

/// Per-entry relative error; entries whose reference is zero are measured
/// against the largest reference entry.
fn fisher_rel(a: &Fisher2, b: &Fisher2) -> f64 {
    let scale = b.max_abs();
    [(a.ll(), b.ll()), (a.lr(), b.lr()), (a.rr(), b.rr())]
        .iter()
        .map(|&(x, y)| {
            if x == y {
                0.0
            } else if y != 0.0 {
                (x - y).abs() / y.abs()
            } else if scale > 0.0 {
                (x - y).abs() / scale
            } else {
                (x - y).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn fail_count(results: impl Iterator<Item = Result<bool>>) -> (usize, f64) {
    let mut cases = 0;
    let mut bad = 0;
    for r in results {
        cases += 1;
        if !matches!(r, Ok(true)) {
            bad += 1;
        }
    }
    (cases, bad as f64)
}

fn random_scenario(rng: &mut ChaCha20Rng, t: (f64, f64), eta: (f64, f64)) -> Scenario {
    Scenario::new(
        rng.random_range(t.0..=t.1),
        rng.random_range(t.0..=t.1),
        rng.random_range(eta.0..=eta.1),
        rng.random_range(eta.0..=eta.1),
    )
    .expect("sampled inside the unit box")
}

pub fn qfim_oracle() -> Check {
    timed("1", "analytic vs fidelity QFIM", 1e-6, || {
        let mut rng = ChaCha20Rng::seed_from_u64(SEED);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let s = random_scenario(&mut rng, (0.1, 0.9), (0.5, 1.0));
            let n = [0.5, 1.0, 2.0][rng.random_range(0..3)];
            worst = worst.max(match qfim_from_fidelity(&s, n, DEFAULT_FD_STEP) {
                Ok(h) => fisher_rel(&h, &qfim_tmsv_direct(&s, n)),
                Err(_) => f64::INFINITY,
            });
        }
        (50, worst)
    })
}

pub fn coherent_optimality() -> Check {
    timed("2", "coherent counting FIM = QFIM", 1e-10, || {
        let mut rng = ChaCha20Rng::seed_from_u64(SEED + 2);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let s = random_scenario(&mut rng, (0.05, 0.95), (0.3, 1.0));
            let b = PhotonBudget::new(rng.random_range(0.1..5.0), rng.random_range(0.1..5.0)).unwrap();
            let d = coherent_pnrd(&s, &b, coherent_cutoff(&s, &b, DEFAULT_TAIL_TOL));
            worst = worst.max(fisher_rel(&fim_from_distribution(&d), &qfim_coherent(&s, &b)));
        }
        (100, worst)
    })
}

pub fn fock_optimality() -> Check {
    timed("3", "Fock counting FIM = max QFIM", 1e-10, || {
        let mut worst: f64 = 0.0;
        let mut cases = 0;
        for (tl, tr, el, er) in [(0.5, 0.45, 0.8, 0.8), (0.2, 0.9, 0.6, 1.0), (0.95, 0.1, 1.0, 0.5)] {
            let s = Scenario::new(tl, tr, el, er).unwrap();
            for n_l in 0..=20 {
                for n_r in 0..=20 {
                    let b = PhotonBudget::new(n_l as f64, n_r as f64).unwrap();
                    let fim = fim_from_distribution(&fock_pnrd(&s, n_l, n_r));
                    worst = worst.max(fisher_rel(&fim, &qfim_max(&s, &b)));
                    cases += 1;
                }
            }
        }
        (cases, worst)
    })
}

pub fn ancilla_uql() -> Check {
    timed("4", "ancilla-assisted twin beam at UQL", 1e-5, || {
        let mut worst: f64 = 0.0;
        let mut cases = 0;
        for t in [0.3, 0.5, 0.7] {
            for eta in [0.8, 1.0] {
                for n in [1.0, 2.0] {
                    let expect = eta * n / (t * (1.0 - eta * t));
                    worst = worst.max(match qfim_tmsv_ancilla(t, eta, n, DEFAULT_FD_STEP) {
                        Ok(h) => rel(h, expect),
                        Err(_) => f64::INFINITY,
                    });
                    cases += 1;
                }
            }
        }
        (cases, worst)
    })
}

fn tmsv_distribution(s: &Scenario, n: f64) -> Result<PnrdDistribution> {
    tmsv_direct_pnrd(s, n, tmsv_cutoff(n, DEFAULT_TAIL_TOL), DEFAULT_TAIL_TOL)
}

pub fn diagonal_coincidence() -> Check {
    timed("5", "twin beam = counting CR = UQL on T_L=T_R", 1e-6, || {
        let mut worst: f64 = 0.0;
        let mut cases = 0;
        for i in 1..=9 {
            let t = i as f64 / 10.0;
            let s = Scenario::balanced(t, t, 0.8).unwrap();
            let uql = uql_optimal(&s, 2.0);
            let tmsv = var_tmsv_direct(&s, 1.0).unwrap_or(f64::NAN);
            let cr = tmsv_distribution(&s, 1.0).and_then(|d| cr_bound_gamma(&d)).unwrap_or(f64::NAN);
            worst = worst.max(rel(tmsv, uql)).max(rel(cr, uql)).max(rel(cr, tmsv));
            cases += 1;
        }
        (cases, worst)
    })
}

pub fn enhancement() -> Check {
    timed("6", "enhancement = 1/(1 - eta T)", 1e-9, || {
        let spot = |t: f64, eta: f64| enhancement_factor(&Scenario::balanced(t, t, eta).unwrap(), 2.0);
        let mut worst = (spot(1.0, 0.5) - 2.0).abs().max((spot(0.5, 0.8) - 5.0 / 3.0).abs());
        let mut cases = 2;
        for eta in [0.3, 0.5, 0.8, 0.95] {
            for i in 1..=20 {
                let t = i as f64 / 20.0;
                worst = worst.max(rel(spot(t, eta), 1.0 / (1.0 - eta * t)));
                cases += 1;
            }
        }
        (cases, worst)
    })
}

/// Scenarios for the large-N comparison. The finite-N bound approaches the
/// limit as `C/N` while the limit itself scales like `(T_L - T_R)²`, so the
/// arms are kept at least 0.3 apart for `n = 1e6` to sit inside 1e-4.
fn separated_scenarios(rng: &mut ChaCha20Rng, count: usize, gap: (f64, f64)) -> Vec<Scenario> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let s = random_scenario(rng, (0.1, 0.9), (0.5, 1.0));
        let d = (s.t_l() - s.t_r()).abs();
        if d >= gap.0 && d <= gap.1 {
            out.push(s);
        }
    }
    out
}

pub fn large_n_limit() -> Check {
    timed("7", "twin beam at n=1e6 vs large-N limit", 1e-4, || {
        let mut rng = ChaCha20Rng::seed_from_u64(SEED + 7);
        let worst = separated_scenarios(&mut rng, 20, (0.3, 1.0))
            .iter()
            .map(|s| rel(var_tmsv_direct(s, 1e6).unwrap_or(f64::NAN), var_tmsv_large_n(s)))
            .fold(0.0, f64::max);
        (20, worst)
    })
}

/// Near the diagonal the gap to the limit at `n = 1e6` can exceed 1e-4;
/// there it must still shrink as `1/n`.
pub fn large_n_rate() -> Check {
    timed("7b", "gap to large-N limit scales as 1/n", 1e-2, || {
        let mut rng = ChaCha20Rng::seed_from_u64(SEED + 8);
        let worst = separated_scenarios(&mut rng, 20, (0.02, 0.3))
            .iter()
            .map(|s| {
                let limit = var_tmsv_large_n(s);
                let gap = |n: f64| n * (var_tmsv_direct(s, n).unwrap_or(f64::NAN) - limit);
                rel(gap(1e7), gap(1e6))
            })
            .fold(0.0, f64::max);
        (20, worst)
    })
}

pub fn first_order_flatness() -> Check {
    timed("8", "slope of Var_TMSV - UQL at dT = 0", 1e-6, || {
        let h = 1e-4;
        let gap = |dt: f64| {
            let s = Scenario::balanced(0.5, 0.5 + dt, 0.8).unwrap();
            var_tmsv_direct(&s, 1.0).unwrap_or(f64::NAN) - uql_optimal(&s, 2.0)
        };
        (1, ((gap(h) - gap(-h)) / (2.0 * h)).abs())
    })
}

pub fn chi_range() -> Check {
    timed("10a", "chi in [0, 1]", 0.0, || {
        let mut rng = ChaCha20Rng::seed_from_u64(SEED + 10);
        fail_count((0..10_000).map(|i| {
            // every tenth draw pins the transmittances to the boundary
            let s = if i % 10 == 0 {
                let edge = [0.0, 1.0];
                Scenario::new(
                    edge[rng.random_range(0..2)],
                    edge[rng.random_range(0..2)],
                    rng.random_range(0.0..=1.0),
                    rng.random_range(0.0..=1.0),
                )
                .unwrap()
            } else {
                random_scenario(&mut rng, (0.0, 1.0), (0.0, 1.0))
            };
            let n = 10f64.powf(rng.random_range(-3.0..3.0));
            Ok([Arm::Left, Arm::Right]
                .iter()
                .all(|&arm| (0.0..=1.0).contains(&chi_factor(&s, n, arm))))
        }))
    })
}

fn random_state(rng: &mut ChaCha20Rng) -> GaussianState {
    let s = random_scenario(rng, (0.0, 1.0), (0.0, 1.0));
    let g = lossy_tmsv(&s, rng.random_range(0.0..3.0)).unwrap();
    let mut cov = g.cov().clone();
    let (n1, n2) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
    for (i, extra) in [n1, n1, n2, n2].into_iter().enumerate() {
        cov[(i, i)] += extra;
    }
    GaussianState::new(cov, g.disp().clone()).unwrap()
}

pub fn fidelity_axioms() -> Check {
    timed("10b", "fidelity symmetry, range, F(V,V)=1", 0.0, || {
        let mut rng = ChaCha20Rng::seed_from_u64(SEED + 11);
        fail_count((0..300).map(|_| {
            let a = random_state(&mut rng);
            let b = random_state(&mut rng);
            let fab = fidelity_two_mode(&a, &b)?;
            let fba = fidelity_two_mode(&b, &a)?;
            let faa = fidelity_two_mode(&a, &a)?;
            Ok((fab - fba).abs() < 1e-12 && (0.0..=1.0).contains(&fab) && (faa - 1.0).abs() < 1e-9)
        }))
    })
}

pub fn pure_overlap() -> Check {
    timed("10c", "pure-state overlap 1/sqrt(det(V1+V2))", 1e-9, || {
        let mut rng = ChaCha20Rng::seed_from_u64(SEED + 12);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let a = tmsv_state(rng.random_range(0.0..3.0)).unwrap();
            let b = tmsv_state(rng.random_range(0.0..3.0)).unwrap();
            let oracle = 1.0 / (a.cov() + b.cov()).determinant().sqrt();
            worst = worst.max(match fidelity_two_mode(&a, &b) {
                Ok(f) => (f - oracle).abs(),
                Err(_) => f64::INFINITY,
            });
        }
        (200, worst)
    })
}

fn probe_distributions(rng: &mut ChaCha20Rng) -> Result<[(PnrdDistribution, Fisher2); 3]> {
    let s = random_scenario(rng, (0.05, 0.95), (0.3, 1.0));
    let b = PhotonBudget::new(rng.random_range(0.1..5.0), rng.random_range(0.1..5.0))?;
    let (n_l, n_r) = (rng.random_range(0..=10usize), rng.random_range(0..=10usize));
    let n = rng.random_range(0.05..3.0);
    Ok([
        (coherent_pnrd(&s, &b, coherent_cutoff(&s, &b, DEFAULT_TAIL_TOL)), qfim_coherent(&s, &b)),
        (
            fock_pnrd(&s, n_l, n_r),
            qfim_max(&s, &PhotonBudget::new(n_l as f64, n_r as f64)?),
        ),
        (tmsv_distribution(&s, n)?, qfim_tmsv_direct(&s, n)),
    ])
}

pub fn distribution_sums() -> Check {
    timed("10d", "normalization, derivative sums zero", 0.0, || {
        let mut rng = ChaCha20Rng::seed_from_u64(SEED + 13);
        fail_count((0..100).map(|_| {
            Ok(probe_distributions(&mut rng)?.iter().all(|(d, _)| {
                let (sl, sr) = d.derivative_sums();
                (d.total_probability() + d.tail_mass() - 1.0).abs() < 1e-10 && sl.abs() < 1e-8 && sr.abs() < 1e-8
            }))
        }))
    })
}

pub fn fisher_ordering() -> Check {
    timed("10e", "PSD, QFIM dominates FIM", 0.0, || {
        let mut rng = ChaCha20Rng::seed_from_u64(SEED + 14);
        fail_count((0..100).map(|_| {
            Ok(probe_distributions(&mut rng)?.iter().all(|(d, h)| {
                let f = fim_from_distribution(d);
                let tol = 1e-9 * h.max_abs().max(1.0);
                f.min_eigenvalue() >= -tol && h.min_eigenvalue() >= -tol && h.dominates(&f, tol)
            }))
        }))
    })
}

/// Every check in order.
pub fn run_all() -> Vec<Check> {
    vec![
        qfim_oracle(),
        coherent_optimality(),
        fock_optimality(),
        ancilla_uql(),
        diagonal_coincidence(),
        enhancement(),
        large_n_limit(),
        large_n_rate(),
        first_order_flatness(),
        chi_range(),
        fidelity_axioms(),
        pure_overlap(),
        distribution_sums(),
        fisher_ordering(),
    ]
}
