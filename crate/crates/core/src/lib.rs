//! Cramér–Rao bounds for transmittance-difference (circular dichroism)
//! sensing with coherent, Fock and twin-beam probes.
//!
//! - [`model`]: scenarios, photon budgets and projected variance bounds.
//! - [`bounds`]: closed-form QFIMs and benchmark variances.
//! - [`gaussian`]: covariance-matrix states and a fidelity-based QFIM.
//! - [`photon`]: PNRD statistics and classical Fisher information.
//! - [`estimation`]: Monte-Carlo maximum-likelihood runs.

pub mod bounds;
pub mod error;
pub mod estimation;
pub mod gaussian;
pub mod model;
pub mod photon;

pub use error::{Error, Result};
pub use estimation::{ProbeSpec, SampleBatch, RNG_ALGORITHM};
pub use gaussian::GaussianState;
pub use model::{
    invert_on_support, var_gamma, var_tcd, Arm, CombinationVector, Fisher2, PhotonBudget,
    Scenario, DEFAULT_SUPPORT_TOL,
};
pub use photon::PnrdDistribution;
