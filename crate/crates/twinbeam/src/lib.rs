//! Simulator and analysis toolkit for the pair of field modes produced by
//! thermally seeded parametric downconversion.
//!
//! Three nonclassicality parameters of the two-mode output (sub-shot-noise
//! intensity correlation, P-function negativity, and entanglement) are
//! evaluated in closed form, together with the surfaces in
//! `(mu1, mu2, muk)` where each one switches on. Two independent oracles
//! cross-check the closed forms: a Gaussian covariance-matrix route with a
//! partial-transposition test ([`gaussian`]), and an exact truncated
//! Fock-space route with joint photon statistics and an event sampler
//! ([`fock`]). The detection layer ([`detection`]) models an overall loss
//! factor per channel and estimates the parameters from finite count
//! records; [`multimode`] extends moments, the sub-shot-noise condition,
//! and the entanglement witness to many pairs measured jointly.
//!
//! All analytic operations are pure functions; samplers and estimators are
//! deterministic for a given seed.

pub mod analytic;
pub mod detection;
mod error;
pub mod fock;
pub mod gaussian;
pub mod multimode;
pub mod tridiag;

pub use analytic::{
    classify_region, gamma_c, gamma_e, gamma_n, gamma_report, gammas_from_moments,
    output_moments, thresholds, GammaReport, PdcParams, Region, Thresholds, TwoModeMoments,
};
pub use detection::{
    add_dark_counts, estimate_gammas, estimate_gammas_seeded, gamma_with_loss, lossy_moments,
    thin_counts, CountRecord, GammaEstimate, LossModel,
};
pub use error::{Error, Result};
pub use fock::{
    auto_cutoff, joint_pmf, joint_pmf_auto, sample_counts, BlockUnitary, CountSampler,
    JointPhotonPmf,
};
pub use gaussian::{build_covariance, ppt_check, CovarianceMatrix, PptReport};
pub use multimode::{
    multimode_moments, multimode_negativity, multimode_snl_violation, multimode_witness,
    MultimodeParams, SnlCheck, WitnessCheck,
};
