//! Gaussian-state oracle: the 4x4 quadrature covariance matrix of the
//! two-mode output and the partial-transposition entanglement test.
//!
//! Conventions, fixed once: `hbar = 1`, vacuum quadrature variance `1/2`,
//! quadrature ordering `(x1, p1, x2, p2)`. A state is entangled iff the
//! smallest symplectic eigenvalue of the momentum-reversed (mode 2)
//! covariance matrix drops below the vacuum value `1/2`.
//!
//! This route never touches the photon-number formulas in
//! [`crate::analytic`]; agreement between `ppt_check` and the sign of
//! `gamma_e` is therefore a genuine cross-check.

use crate::analytic::PdcParams;
use crate::error::{Error, Result};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

/// Vacuum quadrature variance in the convention used throughout.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Entanglement verdict tolerance: `nu_minus` must undercut the vacuum
/// value by more than this to count as entangled.
const PPT_TOL: f64 = 1e-12;

/// Real symmetric 4x4 quadrature covariance matrix over `(x1, p1, x2, p2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    sigma: Matrix4<f64>,
}

/// Result of the partial-transposition test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PptReport {
    /// Smallest symplectic eigenvalue after momentum reversal on mode 2.
    pub nu_minus: f64,
    pub entangled: bool,
}

/// The standard symplectic form on two modes, block-diagonal `J (+) J`
/// with `J = [[0, 1], [-1, 0]]`.
fn symplectic_form() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    )
}

impl CovarianceMatrix {
    /// Wraps a raw matrix after checking symmetry.
    pub fn new(sigma: Matrix4<f64>) -> Result<Self> {
        let scale = 1.0 + sigma.amax();
        for i in 0..4 {
            for j in (i + 1)..4 {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParams(format!(
                        "covariance matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { sigma })
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.sigma
    }

    /// Photon mean of mode `j` (0 or 1) recovered from the diagonal:
    /// `(sigma_xx + sigma_pp - 1) / 2` for a zero-mean state.
    pub fn photon_mean(&self, mode: usize) -> f64 {
        let k = 2 * mode;
        0.5 * (self.sigma[(k, k)] + self.sigma[(k + 1, k + 1)] - 1.0)
    }

    /// Checks the bona fide uncertainty condition: every eigenvalue of the
    /// Hermitian matrix `sigma + (i/2) Omega` must be non-negative (within
    /// `1e-10`).
    pub fn validate_bona_fide(&self) -> Result<()> {
        let omega = symplectic_form();
        let mut h = Matrix4::<Complex64>::zeros();
        for i in 0..4 {
            for j in 0..4 {
                h[(i, j)] = Complex64::new(self.sigma[(i, j)], 0.5 * omega[(i, j)]);
            }
        }
        let eigs = nalgebra::SymmetricEigen::new(h).eigenvalues;
        if eigs.iter().any(|&v| v < -1e-10) {
            return Err(Error::NumericalFailure(format!(
                "uncertainty condition violated: min eigenvalue {:.3e}",
                eigs.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        Ok(())
    }

    /// Symplectic eigenvalues of the matrix itself (not partially
    /// transposed), as the sorted pair `(nu1, nu2)`.
    pub fn symplectic_eigenvalues(&self) -> Result<(f64, f64)> {
        let nus = symplectic_spectrum(&self.sigma)?;
        Ok((0.5 * (nus[0] + nus[1]), 0.5 * (nus[2] + nus[3])))
    }
}

/// Moduli of the eigenvalues of `i Omega sigma`, sorted ascending. For a
/// bona fide covariance matrix these come in two degenerate pairs, the
/// symplectic eigenvalues.
///
/// The spectrum of `Omega sigma` is `{+-(i nu1), +-(i nu2)}`, so the
/// squared matrix has eigenvalues `-nu^2`, each twice, and the pair
/// `(nu1^2, nu2^2)` is read off two exact invariants:
/// `nu1^2 + nu2^2 = -tr((Omega sigma)^2) / 2` and
/// `nu1^2 nu2^2 = det(sigma)`. No iterative eigensolver is involved.
fn symplectic_spectrum(sigma: &Matrix4<f64>) -> Result<[f64; 4]> {
    let m = symplectic_form() * sigma;
    let sum_sq = -(m * m).trace() / 2.0;
    let prod_sq = sigma.determinant();
    if !(sum_sq.is_finite() && prod_sq.is_finite()) {
        return Err(Error::NumericalFailure("symplectic invariants not finite".into()));
    }
    let scale = sum_sq.abs().max(1.0);
    let disc = sum_sq * sum_sq - 4.0 * prod_sq;
    if disc < -1e-10 * scale * scale {
        return Err(Error::NumericalFailure(format!(
            "symplectic spectrum not real (discriminant {disc:.3e})"
        )));
    }
    let root = disc.max(0.0).sqrt();
    let lo_sq = 0.5 * (sum_sq - root);
    let hi_sq = 0.5 * (sum_sq + root);
    if lo_sq < -1e-10 * scale || hi_sq <= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "non-positive symplectic eigenvalue (nu^2 = {lo_sq:.3e})"
        )));
    }
    let lo = lo_sq.max(0.0).sqrt();
    let hi = hi_sq.sqrt();
    if lo <= 0.0 {
        return Err(Error::NumericalFailure("non-positive symplectic eigenvalue".into()));
    }
    Ok([lo, lo, hi, hi])
}

/// Covariance matrix of the two-mode output for thermal seeds.
///
/// The input is the product thermal state with diagonal covariance
/// `diag(mu1 + 1/2, mu1 + 1/2, mu2 + 1/2, mu2 + 1/2)`; the two-mode
/// squeezing map `A_j = cosh(r) a_j + e^{i phi} sinh(r) a_j'^+` acts on it
/// as a symplectic congruence `sigma -> S sigma S^T`.
pub fn build_covariance(p: &PdcParams) -> CovarianceMatrix {
    let a = p.alpha();
    let b = p.beta();
    let (c, s) = (p.phi().cos(), p.phi().sin());
    #[rustfmt::skip]
    let sq = Matrix4::new(
        a,       0.0,     b * c,   b * s,
        0.0,     a,       b * s,  -b * c,
        b * c,   b * s,   a,       0.0,
        b * s,  -b * c,   0.0,     a,
    );
    let u1 = p.mu1() + VACUUM_VARIANCE;
    let u2 = p.mu2() + VACUUM_VARIANCE;
    let sigma_in = Matrix4::from_diagonal(&Vector4::new(u1, u1, u2, u2));
    let sigma = sq * sigma_in * sq.transpose();
    // Symmetrize away the last-bit asymmetry of the triple product.
    let sigma = 0.5 * (sigma + sigma.transpose());
    CovarianceMatrix { sigma }
}

/// Partial-transposition test: smallest symplectic eigenvalue of the
/// covariance matrix with the momentum of mode 2 reversed.
pub fn ppt_check(cm: &CovarianceMatrix) -> Result<PptReport> {
    let reversal = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1.0));
    let tilde = reversal * cm.sigma * reversal;
    let nus = symplectic_spectrum(&tilde)?;
    let nu_minus = nus[0];
    Ok(PptReport { nu_minus, entangled: nu_minus < VACUUM_VARIANCE - PPT_TOL })
}
