//! Gaussian states in the covariance-matrix picture.
//!
//! Quadratures are ordered `(x₁, p₁, x₂, p₂, …)` and the vacuum has variance
//! `1/2` per quadrature. The symplectic form is block diagonal with
//! `[[0, 1], [-1, 0]]` blocks. The determinant prefactors in the fidelity
//! formula (`16`, `I/4`) are tied to this convention.
//!
//! The fidelity-based QFIM here is an independent route to the twin-beam
//! Fisher matrix: it builds the lossy output state with the beam-splitter
//! map and differentiates the Bures distance numerically, without touching
//! the closed forms in [`crate::bounds`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::model::{Fisher2, Scenario};

/// Symmetry tolerance on covariance matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue of `V + iΩ/2`.
pub const PHYSICALITY_TOL: f64 = 1e-10;
/// Displacements below this are treated as zero.
pub const DISPLACEMENT_TOL: f64 = 1e-12;
/// Default finite-difference step in transmittance.
pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Largest accepted relative change between the `h` and `h/2` estimates.
pub const FD_RESIDUAL_TOL: f64 = 1e-4;
/// Residuals below this count as roundoff whatever the leading term.
const FD_ABSOLUTE_FLOOR: f64 = 1e-10;

/// Block-diagonal symplectic form on `modes` bosonic modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    omega: DMatrix<f64>,
}

impl SymplecticForm {
    pub fn new(modes: usize) -> Self {
        let dim = 2 * modes;
        let mut omega = DMatrix::zeros(dim, dim);
        for m in 0..modes {
            omega[(2 * m, 2 * m + 1)] = 1.0;
            omega[(2 * m + 1, 2 * m)] = -1.0;
        }
        SymplecticForm { omega }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn modes(&self) -> usize {
        self.omega.nrows() / 2
    }
}

/// Covariance matrix and displacement of a Gaussian state.
///
/// [`GaussianState::new`] checks shape and symmetry. Physicality (the
/// uncertainty principle `V + iΩ/2 ⪰ 0`) is reported by
/// [`GaussianState::physicality_margin`] and enforced where a routine needs
/// it. States produced by [`tmsv_state`] and [`apply_loss`] are physical by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    cov: DMatrix<f64>,
    disp: DVector<f64>,
}

impl GaussianState {
    pub fn new(cov: DMatrix<f64>, disp: DVector<f64>) -> Result<Self> {
        let dim = cov.nrows();
        if dim == 0 || dim % 2 != 0 || cov.ncols() != dim || disp.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "covariance must be 2n×2n with a length-2n displacement, got {}×{} and {}",
                cov.nrows(),
                cov.ncols(),
                disp.len()
            )));
        }
        let asym = (&cov - cov.transpose()).abs().max();
        if asym.is_nan() || asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(GaussianState { cov, disp })
    }

    /// `modes`-mode vacuum, `V = I/2`.
    pub fn vacuum(modes: usize) -> Self {
        let dim = 2 * modes;
        GaussianState {
            cov: DMatrix::identity(dim, dim) * 0.5,
            disp: DVector::zeros(dim),
        }
    }

    pub fn modes(&self) -> usize {
        self.cov.nrows() / 2
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn disp(&self) -> &DVector<f64> {
        &self.disp
    }

    /// `V + iΩ/2` as a complex Hermitian matrix.
    fn uncertainty_matrix(&self) -> DMatrix<Complex64> {
        let omega = SymplecticForm::new(self.modes());
        let dim = self.cov.nrows();
        DMatrix::from_fn(dim, dim, |i, j| {
            Complex64::new(self.cov[(i, j)], 0.5 * omega.matrix()[(i, j)])
        })
    }

    /// Smallest eigenvalue of `V + iΩ/2`; non-negative for physical states.
    pub fn physicality_margin(&self) -> f64 {
        self.uncertainty_matrix()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_physical(&self) -> bool {
        self.physicality_margin() >= -PHYSICALITY_TOL
    }

    /// `det(2V)`, equal to one exactly for pure states.
    pub fn purity_determinant(&self) -> f64 {
        (&self.cov * 2.0).determinant()
    }
}

/// Two-mode squeezed vacuum with `n` mean photons per mode and real
/// squeezing `r = asinh(sqrt n)`.
pub fn tmsv_state(n: f64) -> Result<GaussianState> {
    if !n.is_finite() || n < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "mean photon number must be finite and >= 0, got {n}"
        )));
    }
    let r = n.sqrt().asinh();
    let v = 0.5 + n;
    // sinh(2r)/2 = sqrt(n (n + 1))
    let c = 0.5 * (2.0 * r).sinh();
    #[rustfmt::skip]
    let cov = DMatrix::from_row_slice(4, 4, &[
        v,   0.0, -c,  0.0,
        0.0, v,   0.0, c,
        -c,  0.0, v,   0.0,
        0.0, c,   0.0, v,
    ]);
    Ok(GaussianState {
        cov,
        disp: DVector::zeros(4),
    })
}

/// Pure-loss channel of transmittance `tau` on one mode.
///
/// `V → X V Xᵀ + Y` with `X = sqrt(tau)` and `Y = (1 - tau)/2` on the chosen
/// mode, identity and zero elsewhere.
pub fn apply_loss(g: &GaussianState, mode: usize, tau: f64) -> Result<GaussianState> {
    if mode >= g.modes() {
        return Err(Error::ModeOutOfRange {
            mode,
            modes: g.modes(),
        });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!(
            "loss transmittance must lie in [0, 1], got {tau}"
        )));
    }
    let dim = g.cov.nrows();
    let amp = tau.sqrt();
    let in_mode = |i: usize| i / 2 == mode;
    // the lossy block is updated as tau (V - I/2) + I/2 so that vacuum
    // noise passes through without rounding
    let cov = DMatrix::from_fn(dim, dim, |i, j| {
        let v = g.cov[(i, j)];
        match (in_mode(i), in_mode(j)) {
            (true, true) if i == j => tau * (v - 0.5) + 0.5,
            (true, true) => tau * v,
            (true, false) | (false, true) => amp * v,
            (false, false) => v,
        }
    });
    let disp = DVector::from_fn(dim, |i, _| if in_mode(i) { amp * g.disp[i] } else { g.disp[i] });
    Ok(GaussianState { cov, disp })
}

/// Twin beam with `n` photons per mode after the loss `eta_j * t_j` on each arm.
pub fn lossy_tmsv(s: &Scenario, n: f64) -> Result<GaussianState> {
    use crate::model::Arm;
    let g = tmsv_state(n)?;
    let g = apply_loss(&g, 0, s.effective(Arm::Left))?;
    apply_loss(&g, 1, s.effective(Arm::Right))
}

fn complex_embed(m: &DMatrix<f64>, omega: &DMatrix<f64>, imag_scale: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        Complex64::new(m[(i, j)], imag_scale * omega[(i, j)])
    })
}

fn check_two_mode_input(g: &GaussianState) -> Result<()> {
    if g.modes() != 2 {
        return Err(Error::WrongModeCount {
            expected: 2,
            got: g.modes(),
        });
    }
    let d = g.disp.abs().max();
    if d > DISPLACEMENT_TOL {
        return Err(Error::NonzeroDisplacement(d));
    }
    let margin = g.physicality_margin();
    if margin < -PHYSICALITY_TOL {
        return Err(Error::NonPhysicalState(margin));
    }
    Ok(())
}

type Quad = [[TwoFloat; 4]; 4];

fn det2(a: TwoFloat, b: TwoFloat, c: TwoFloat, d: TwoFloat) -> TwoFloat {
    a * d - b * c
}

/// 4×4 determinant by Laplace expansion along the top two rows.
fn det4(m: &Quad) -> TwoFloat {
    let s0 = det2(m[0][0], m[0][1], m[1][0], m[1][1]);
    let s1 = det2(m[0][0], m[0][2], m[1][0], m[1][2]);
    let s2 = det2(m[0][0], m[0][3], m[1][0], m[1][3]);
    let s3 = det2(m[0][1], m[0][2], m[1][1], m[1][2]);
    let s4 = det2(m[0][1], m[0][3], m[1][1], m[1][3]);
    let s5 = det2(m[0][2], m[0][3], m[1][2], m[1][3]);
    let c5 = det2(m[2][2], m[2][3], m[3][2], m[3][3]);
    let c4 = det2(m[2][1], m[2][3], m[3][1], m[3][3]);
    let c3 = det2(m[2][1], m[2][2], m[3][1], m[3][2]);
    let c2 = det2(m[2][0], m[2][3], m[3][0], m[3][3]);
    let c1 = det2(m[2][0], m[2][2], m[3][0], m[3][2]);
    let c0 = det2(m[2][0], m[2][1], m[3][0], m[3][1]);
    s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0
}

fn quad_from(m: &DMatrix<f64>) -> Quad {
    let mut q = [[TwoFloat::from(0.0); 4]; 4];
    for (i, row) in q.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = TwoFloat::from(m[(i, j)]);
        }
    }
    q
}

/// `det(V + iΩ/2)` for a two-mode state through the symplectic invariants:
/// `∏(ν_k² - 1/4) = det V - Δ/4 + 1/16` with `Δ = det A + det B + 2 det C`.
fn uncertainty_det(v: &Quad) -> TwoFloat {
    let det_a = det2(v[0][0], v[0][1], v[1][0], v[1][1]);
    let det_b = det2(v[2][2], v[2][3], v[3][2], v[3][3]);
    let det_c = det2(v[0][2], v[0][3], v[1][2], v[1][3]);
    let delta = det_a + det_b + det_c * 2.0;
    det4(v) - delta * 0.25 + 0.0625
}

fn check_complex_residue(g: &GaussianState, om: &DMatrix<f64>) -> Result<()> {
    let d = complex_embed(&g.cov, om, 0.5).determinant();
    if d.im.abs() > 1e-10 * d.re.abs().max(1.0) {
        return Err(Error::ComplexResidue(d.im));
    }
    Ok(())
}

/// The fidelity formula before clamping, returning `1/F`.
///
/// The determinants are accumulated in double-double arithmetic. Near pure
/// states both `λ` and `γ - δ` are second order in the impurity, and plain
/// `f64` would leave a `sqrt(eps)` error after the square roots.
fn inverse_fidelity_raw(a: &GaussianState, b: &GaussianState) -> Result<TwoFloat> {
    let omega = SymplecticForm::new(2);
    let om = omega.matrix();
    check_complex_residue(a, om)?;
    check_complex_residue(b, om)?;

    let va = quad_from(&a.cov);
    let vb = quad_from(&b.cov);
    let mut sum = [[TwoFloat::from(0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            sum[i][j] = va[i][j] + vb[i][j];
        }
    }
    let delta = det4(&sum);

    // Ω V₁ and Ω V₂ only permute and negate rows
    let oa = quad_from(&(om * &a.cov));
    let ob = quad_from(&(om * &b.cov));
    let mut prod = [[TwoFloat::from(0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = TwoFloat::from(0.0);
            for k in 0..4 {
                acc += oa[i][k] * ob[k][j];
            }
            prod[i][j] = if i == j { acc - 0.25 } else { acc };
        }
    }
    let gamma = det4(&prod) * 16.0;
    let lambda = uncertainty_det(&va) * uncertainty_det(&vb) * 16.0;

    let zero = TwoFloat::from(0.0);
    let sg = gamma.max(zero).sqrt();
    let sl = lambda.max(zero).sqrt();
    let s = sg + sl;
    Ok(s - (s * s - delta).max(zero).sqrt())
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(ρ₁) ρ₂ sqrt(ρ₁)))²` of two zero-mean
/// two-mode Gaussian states.
pub fn fidelity_two_mode(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    check_two_mode_input(a)?;
    check_two_mode_input(b)?;
    let f = 1.0 / f64::from(inverse_fidelity_raw(a, b)?);
    if !(-1e-9..=1.0 + 1e-9).contains(&f) {
        return Err(Error::FidelityOutOfRange(f));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// Squared Bures distance scaled to the QFIM normalization:
/// `8 (1 - sqrt F)`, computed as `8 (sqrt(1/F) - 1) / sqrt(1/F)`.
fn bures_metric_term(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    let root = inverse_fidelity_raw(a, b)?.sqrt();
    Ok(f64::from((root - 1.0) / root * 8.0))
}

fn check_step(step: f64) -> Result<()> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    Ok(())
}

fn check_interior(name: &str, t: f64, step: f64) -> Result<()> {
    if t - step <= 0.0 || t + step >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} = {t} is not interior for step {step}"
        )));
    }
    Ok(())
}

/// One Richardson level over steps `h` and `h/2`, with the residual check.
fn richardson<const K: usize>(
    coarse: [f64; K],
    fine: [f64; K],
) -> Result<[f64; K]> {
    let mut out = [0.0; K];
    let mut residual: f64 = 0.0;
    let mut leading: f64 = 0.0;
    for i in 0..K {
        out[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
        residual = residual.max((fine[i] - coarse[i]).abs());
        leading = leading.max(out[i].abs());
    }
    if residual > FD_RESIDUAL_TOL * leading && residual > FD_ABSOLUTE_FLOOR {
        return Err(Error::StepTooLarge(residual / leading));
    }
    Ok(out)
}

/// QFIM of the lossy twin beam from second differences of the Bures
/// distance `Σ H_jk dT_j dT_k = 8 [1 - sqrt F(ρ_T, ρ_{T+dT})]`.
///
/// Diagonal entries use the central three-point stencil, the off-diagonal
/// the four-point mixed stencil. One Richardson level (steps `step` and
/// `step / 2`) cancels the `O(h²)` truncation.
pub fn qfim_from_fidelity(s: &Scenario, n: f64, step: f64) -> Result<Fisher2> {
    check_step(step)?;
    check_interior("t_l", s.t_l(), step)?;
    check_interior("t_r", s.t_r(), step)?;
    let base = lossy_tmsv(s, n)?;
    check_two_mode_input(&base)?;
    let metric = |dl: f64, dr: f64| -> Result<f64> {
        let shifted = lossy_tmsv(&s.with_t(s.t_l() + dl, s.t_r() + dr)?, n)?;
        bures_metric_term(&base, &shifted)
    };
    let estimate = |h: f64| -> Result<[f64; 3]> {
        let h2 = h * h;
        let ll = (metric(h, 0.0)? + metric(-h, 0.0)?) / (2.0 * h2);
        let rr = (metric(0.0, h)? + metric(0.0, -h)?) / (2.0 * h2);
        let lr = (metric(h, h)? - metric(h, -h)? - metric(-h, h)? + metric(-h, -h)?) / (8.0 * h2);
        Ok([ll, lr, rr])
    };
    let [ll, lr, rr] = richardson(estimate(step)?, estimate(0.5 * step)?)?;
    Fisher2::symmetric(ll, lr, rr)
}

/// Single-parameter QFIM for `t` when only the signal arm of a twin beam
/// passes through the sample (loss `eta * t`) and the ancilla is kept
/// lossless.
pub fn qfim_tmsv_ancilla(t: f64, eta: f64, n: f64, step: f64) -> Result<f64> {
    check_step(step)?;
    check_interior("t", t, step)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "eta must lie in [0, 1], got {eta}"
        )));
    }
    let source = tmsv_state(n)?;
    let state = |t: f64| apply_loss(&source, 0, eta * t);
    let base = state(t)?;
    check_two_mode_input(&base)?;
    let metric = |d: f64| -> Result<f64> { bures_metric_term(&base, &state(t + d)?) };
    let estimate = |h: f64| -> Result<[f64; 1]> {
        Ok([(metric(h)? + metric(-h)?) / (2.0 * h * h)])
    };
    let [h] = richardson(estimate(step)?, estimate(0.5 * step)?)?;
    Ok(h)
}
