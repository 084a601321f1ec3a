//! Channel parameters, photon budgets and the 2×2 Fisher matrix.
//!
//! The two polarization arms are independent lossy channels. Arm `j` has a
//! sample transmittance `t_j` followed by an excess-loss transmittance
//! `eta_j`, so photons survive with probability `eta_j * t_j`.
//!
//! Every bound in this crate is per shot: the repetition count is factored
//! out and only reappears in [`crate::estimation`].

use crate::error::{Error, Result};

/// Default relative eigenvalue cutoff used when inverting on the support.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-12;

/// Absolute tolerance for the symmetry and PSD checks on [`Fisher2`].
pub const FISHER_CHECK_TOL: f64 = 1e-12;

/// Polarization arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Left,
    Right,
}

impl Arm {
    pub fn other(self) -> Arm {
        match self {
            Arm::Left => Arm::Right,
            Arm::Right => Arm::Left,
        }
    }
}

fn check_unit(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidParameter(format!(
            "{name} must lie in [0, 1], got {value}"
        )));
    }
    Ok(())
}

/// The four transmittances describing both arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    t_l: f64,
    t_r: f64,
    eta_l: f64,
    eta_r: f64,
}

impl Scenario {
    pub fn new(t_l: f64, t_r: f64, eta_l: f64, eta_r: f64) -> Result<Self> {
        check_unit("t_l", t_l)?;
        check_unit("t_r", t_r)?;
        check_unit("eta_l", eta_l)?;
        check_unit("eta_r", eta_r)?;
        Ok(Scenario {
            t_l,
            t_r,
            eta_l,
            eta_r,
        })
    }

    /// Both arms share the same excess loss.
    pub fn balanced(t_l: f64, t_r: f64, eta: f64) -> Result<Self> {
        Self::new(t_l, t_r, eta, eta)
    }

    pub fn t_l(&self) -> f64 {
        self.t_l
    }

    pub fn t_r(&self) -> f64 {
        self.t_r
    }

    pub fn eta_l(&self) -> f64 {
        self.eta_l
    }

    pub fn eta_r(&self) -> f64 {
        self.eta_r
    }

    pub fn t(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Left => self.t_l,
            Arm::Right => self.t_r,
        }
    }

    pub fn eta(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Left => self.eta_l,
            Arm::Right => self.eta_r,
        }
    }

    /// Survival probability `eta_j * t_j` of arm `j`.
    pub fn effective(&self, arm: Arm) -> f64 {
        self.eta(arm) * self.t(arm)
    }

    /// Transmission circular dichroism `t_l - t_r`.
    pub fn gamma_minus(&self) -> f64 {
        self.t_l - self.t_r
    }

    /// Same losses, new sample transmittances.
    pub fn with_t(&self, t_l: f64, t_r: f64) -> Result<Self> {
        Self::new(t_l, t_r, self.eta_l, self.eta_r)
    }

    /// Exchange the roles of the two arms.
    pub fn swapped(&self) -> Self {
        Scenario {
            t_l: self.t_r,
            t_r: self.t_l,
            eta_l: self.eta_r,
            eta_r: self.eta_l,
        }
    }
}

/// Mean photon numbers sent into the two signal modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonBudget {
    n_l: f64,
    n_r: f64,
}

impl PhotonBudget {
    pub fn new(n_l: f64, n_r: f64) -> Result<Self> {
        for (name, v) in [("n_l", n_l), ("n_r", n_r)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(PhotonBudget { n_l, n_r })
    }

    /// Split `n_tot` so that a fraction `ratio` goes to the left arm.
    pub fn from_ratio(n_tot: f64, ratio: f64) -> Result<Self> {
        check_unit("ratio", ratio)?;
        if !n_tot.is_finite() || n_tot < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "n_tot must be finite and >= 0, got {n_tot}"
            )));
        }
        Self::new(ratio * n_tot, (1.0 - ratio) * n_tot)
    }

    pub fn n_l(&self) -> f64 {
        self.n_l
    }

    pub fn n_r(&self) -> f64 {
        self.n_r
    }

    pub fn n(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Left => self.n_l,
            Arm::Right => self.n_r,
        }
    }

    pub fn n_tot(&self) -> f64 {
        self.n_l + self.n_r
    }

    /// `n_l / n_tot`, undefined for an empty budget.
    pub fn ratio(&self) -> Option<f64> {
        let tot = self.n_tot();
        (tot > 0.0).then(|| self.n_l / tot)
    }
}

/// Real vector `n` selecting the estimated combination `n · T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinationVector([f64; 2]);

impl CombinationVector {
    pub fn new(n_l: f64, n_r: f64) -> Self {
        CombinationVector([n_l, n_r])
    }

    /// `(1, -1)`, i.e. `t_l - t_r`.
    pub fn tcd() -> Self {
        CombinationVector([1.0, -1.0])
    }

    pub fn components(&self) -> [f64; 2] {
        self.0
    }

    pub fn negated(&self) -> Self {
        CombinationVector([-self.0[0], -self.0[1]])
    }

    fn norm(&self) -> f64 {
        self.0[0].hypot(self.0[1])
    }
}

impl Default for CombinationVector {
    fn default() -> Self {
        Self::tcd()
    }
}

/// Symmetric positive-semidefinite 2×2 Fisher matrix over `(t_l, t_r)`.
///
/// Diagonal entries may be `+inf` when the information diverges at a
/// boundary (for instance `t_j = 0`). Off-diagonal entries are then finite
/// unless both diagonals are infinite. NaN is never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fisher2 {
    ll: f64,
    lr: f64,
    rr: f64,
}

impl Fisher2 {
    /// Checked constructor from all four entries.
    pub fn new(h_ll: f64, h_lr: f64, h_rl: f64, h_rr: f64) -> Result<Self> {
        let asym = if h_lr == h_rl { 0.0 } else { (h_lr - h_rl).abs() };
        if asym.is_nan() || asym > FISHER_CHECK_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        Self::symmetric(h_ll, 0.5 * (h_lr + h_rl), h_rr)
    }

    /// Checked constructor from the three independent entries.
    pub fn symmetric(h_ll: f64, h_lr: f64, h_rr: f64) -> Result<Self> {
        if h_ll.is_nan() || h_lr.is_nan() || h_rr.is_nan() {
            return Err(Error::InvalidParameter("Fisher entry is NaN".into()));
        }
        let f = Fisher2 {
            ll: h_ll,
            lr: h_lr,
            rr: h_rr,
        };
        let min = f.min_eigenvalue();
        if min < -FISHER_CHECK_TOL {
            return Err(Error::NotPsd(min));
        }
        Ok(f)
    }

    /// Build without the PSD check; for Gram-type sums that are PSD by construction.
    pub(crate) fn from_gram(h_ll: f64, h_lr: f64, h_rr: f64) -> Self {
        Fisher2 {
            ll: h_ll,
            lr: h_lr,
            rr: h_rr,
        }
    }

    pub fn diagonal(h_ll: f64, h_rr: f64) -> Result<Self> {
        Self::symmetric(h_ll, 0.0, h_rr)
    }

    pub fn zero() -> Self {
        Fisher2 {
            ll: 0.0,
            lr: 0.0,
            rr: 0.0,
        }
    }

    pub fn ll(&self) -> f64 {
        self.ll
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn rl(&self) -> f64 {
        self.lr
    }

    pub fn rr(&self) -> f64 {
        self.rr
    }

    pub fn get(&self, j: Arm, k: Arm) -> f64 {
        match (j, k) {
            (Arm::Left, Arm::Left) => self.ll,
            (Arm::Right, Arm::Right) => self.rr,
            _ => self.lr,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.ll.is_finite() && self.lr.is_finite() && self.rr.is_finite()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.ll.abs().max(self.lr.abs()).max(self.rr.abs())
    }

    /// Eigenpairs in ascending eigenvalue order. Infinite diagonals are
    /// treated as their limit: an infinite eigenvalue along that axis and the
    /// Schur complement on the other.
    pub fn eigenpairs(&self) -> [(f64, [f64; 2]); 2] {
        match (self.ll.is_infinite(), self.rr.is_infinite()) {
            (true, true) => [
                (f64::INFINITY, [1.0, 0.0]),
                (f64::INFINITY, [0.0, 1.0]),
            ],
            (true, false) => [(self.rr, [0.0, 1.0]), (f64::INFINITY, [1.0, 0.0])],
            (false, true) => [(self.ll, [1.0, 0.0]), (f64::INFINITY, [0.0, 1.0])],
            (false, false) => sym2_eigen(self.ll, self.lr, self.rr),
        }
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        let [a, b] = self.eigenpairs();
        [a.0, b.0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// True when `self - other` is PSD up to `tol` (both matrices finite).
    pub fn dominates(&self, other: &Fisher2, tol: f64) -> bool {
        let diff = Fisher2 {
            ll: self.ll - other.ll,
            lr: self.lr - other.lr,
            rr: self.rr - other.rr,
        };
        diff.min_eigenvalue() >= -tol
    }

    /// Entrywise sum.
    pub fn add(&self, other: &Fisher2) -> Fisher2 {
        Fisher2 {
            ll: self.ll + other.ll,
            lr: self.lr + other.lr,
            rr: self.rr + other.rr,
        }
    }

    /// Quadratic form `nᵀ F n`.
    pub fn quadratic(&self, n: &CombinationVector) -> f64 {
        let [a, b] = n.components();
        self.ll * a * a + 2.0 * self.lr * a * b + self.rr * b * b
    }
}

/// Eigen-decomposition of `[[a, b], [b, c]]`, ascending.
fn sym2_eigen(a: f64, b: f64, c: f64) -> [(f64, [f64; 2]); 2] {
    let mean = 0.5 * (a + c);
    let half_gap = (0.5 * (a - c)).hypot(b);
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    let (s, co) = theta.sin_cos();
    let hi = mean + half_gap;
    // the smaller root loses precision to cancellation near singularity
    let det = a * c - b * b;
    let lo = if hi > 0.0 && half_gap > 0.0 {
        det / hi
    } else {
        mean - half_gap
    };
    [(lo, [-s, co]), (hi, [co, s])]
}

/// Moore–Penrose inverse restricted to eigenvalues above `tol * λ_max`.
///
/// An infinite eigenvalue maps to zero. The zero matrix maps to itself.
pub fn invert_on_support(f: &Fisher2, tol: f64) -> Fisher2 {
    let pairs = f.eigenpairs();
    let [(l0, _), (l1, _)] = pairs;
    if l0.is_finite() && l1.is_finite() && l0 > tol * l1 && l0 > 0.0 {
        let det = f.ll * f.rr - f.lr * f.lr;
        if det > 0.0 {
            return Fisher2 {
                ll: f.rr / det,
                lr: -f.lr / det,
                rr: f.ll / det,
            };
        }
    }
    let threshold = support_threshold(&pairs, tol);
    let mut out = Fisher2::zero();
    for (lambda, v) in pairs {
        if lambda.is_finite() && lambda > threshold {
            out.ll += v[0] * v[0] / lambda;
            out.lr += v[0] * v[1] / lambda;
            out.rr += v[1] * v[1] / lambda;
        }
    }
    out
}

fn support_threshold(pairs: &[(f64, [f64; 2]); 2], tol: f64) -> f64 {
    let max_finite = pairs
        .iter()
        .map(|p| p.0)
        .filter(|l| l.is_finite())
        .fold(0.0_f64, f64::max);
    (tol * max_finite).max(0.0)
}

/// Single-shot bound `nᵀ F⁺ n` on the variance of `n · T`.
///
/// Fails with [`Error::Unestimable`] when `n` has a component along the
/// kernel of `f`, where the bound is infinite.
pub fn var_gamma(f: &Fisher2, n: &CombinationVector, tol: f64) -> Result<f64> {
    let pairs = f.eigenpairs();
    let threshold = support_threshold(&pairs, tol);
    let [a, b] = n.components();
    let leak_tol = 1e-9 * n.norm();
    let mut var = 0.0;
    for (lambda, v) in pairs {
        let proj = v[0] * a + v[1] * b;
        if lambda.is_infinite() {
            continue;
        }
        if lambda > threshold && lambda > 0.0 {
            var += proj * proj / lambda;
        } else if proj.abs() > leak_tol {
            return Err(Error::Unestimable);
        }
    }
    Ok(var)
}

/// [`var_gamma`] with the default tolerance and `n = (1, -1)`.
pub fn var_tcd(f: &Fisher2) -> Result<f64> {
    var_gamma(f, &CombinationVector::tcd(), DEFAULT_SUPPORT_TOL)
}
