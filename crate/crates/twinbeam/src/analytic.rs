//! Closed-form model of two-mode parametric downconversion with thermal
//! seeds: output photon-number moments, the three nonclassicality
//! parameters, their threshold surfaces, and region classification.
//!
//! The operating point is `(mu1, mu2, muk, phi)`: the mean photon numbers
//! of the two thermal seeds, the mean photon number generated by the
//! spontaneous process, and the pump phase. Intensities are insensitive to
//! the pump phase, so `phi` enters none of the formulas here; it is kept on
//! [`PdcParams`] for the covariance-matrix construction in
//! [`crate::gaussian`].
//!
//! The three parameters share the same denominator and are all normalized
//! so that 1 is the twin-beam (vacuum-seeded) maximum and 0 the classical
//! boundary:
//!
//! ```text
//! gamma_c = 1 -  Var(n1 - n2) / (<n1> + <n2>)                  sub-shot-noise
//! gamma_n = 1 - [Var(n1 - n2) + (<n1> - <n2>)^2] / (<n1> + <n2>)   negativity
//! gamma_e = 1 - [Var(n1 - n2) - (<n1> - <n2>)^2] / (<n1> + <n2>)   entanglement
//! ```

use crate::error::{Error, Result};

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

/// Values of a nonclassicality parameter within `BOUNDARY_TOL` of zero are
/// classified on the classical side: the criteria are strict inequalities.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Operating point of the downconversion process.
///
/// All mean photon numbers are dimensionless and non-negative; the pump
/// phase is normalized to `[0, 2*pi)` on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdcParams {
    mu1: f64,
    mu2: f64,
    muk: f64,
    phi: f64,
}

impl PdcParams {
    /// Validates and normalizes an operating point.
    ///
    /// `mu1`, `mu2` are the seed mean photon numbers, `muk` the mean photon
    /// number of the spontaneous process (`sinh^2 r` for squeeze magnitude
    /// `r`), and `phi` the pump phase in radians.
    pub fn new(mu1: f64, mu2: f64, muk: f64, phi: f64) -> Result<Self> {
        for (name, v) in [("mu1", mu1), ("mu2", mu2), ("muk", muk)] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite, got {v}")));
            }
            if v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !phi.is_finite() {
            return Err(Error::InvalidParams(format!("phi must be finite, got {phi}")));
        }
        Ok(Self { mu1, mu2, muk, phi: phi.rem_euclid(TAU) })
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn muk(&self) -> f64 {
        self.muk
    }

    /// Pump phase, normalized to `[0, 2*pi)`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Squeeze magnitude `r = asinh(sqrt(muk))`, i.e. `sinh^2 r = muk`.
    pub fn squeeze_magnitude(&self) -> f64 {
        self.muk.sqrt().asinh()
    }

    /// `cosh r = sqrt(1 + muk)`.
    pub fn alpha(&self) -> f64 {
        (1.0 + self.muk).sqrt()
    }

    /// `sinh r = sqrt(muk)`.
    pub fn beta(&self) -> f64 {
        self.muk.sqrt()
    }

    /// True at the all-vacuum origin where every parameter is 0/0.
    pub fn is_origin(&self) -> bool {
        self.mu1 == 0.0 && self.mu2 == 0.0 && self.muk == 0.0
    }
}

/// First and second photon-number moments of the two output modes.
///
/// `var_diff` is the variance of the difference photocurrent `n1 - n2`;
/// it always equals `var1 + var2 - 2*cov12`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeMoments {
    pub n1: f64,
    pub n2: f64,
    pub var1: f64,
    pub var2: f64,
    pub cov12: f64,
    pub var_diff: f64,
}

impl TwoModeMoments {
    /// Builds moments from means, variances and the cross covariance;
    /// the difference variance is derived.
    pub fn from_covariance(n1: f64, n2: f64, var1: f64, var2: f64, cov12: f64) -> Self {
        Self { n1, n2, var1, var2, cov12, var_diff: var1 + var2 - 2.0 * cov12 }
    }

    /// Builds moments from means, variances and the difference variance;
    /// the cross covariance is derived.
    pub fn from_difference_variance(
        n1: f64,
        n2: f64,
        var1: f64,
        var2: f64,
        var_diff: f64,
    ) -> Self {
        Self { n1, n2, var1, var2, cov12: 0.5 * (var1 + var2 - var_diff), var_diff }
    }

    /// `<n1> + <n2>`, the shot-noise level of the difference photocurrent.
    pub fn sum_means(&self) -> f64 {
        self.n1 + self.n2
    }

    /// `<n1> - <n2>`.
    pub fn diff_means(&self) -> f64 {
        self.n1 - self.n2
    }
}

/// Nonclassicality classification of an operating point, nested from the
/// outermost (entanglement) to the innermost (negativity) criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// No criterion is violated.
    Separable,
    /// Entangled, but at or above the shot-noise limit.
    EntangledOnly,
    /// Entangled with sub-shot-noise intensity correlations.
    EntangledSubshot,
    /// Entangled, sub-shot-noise, and with a negative P-function.
    EntangledSubshotNegative,
    /// The all-vacuum origin: nothing to classify.
    Undefined,
}

impl Region {
    /// Classification from the three parameters, treating values within
    /// [`BOUNDARY_TOL`] of zero as non-violating.
    pub fn from_gammas(gamma_c: f64, gamma_n: f64, gamma_e: f64) -> Self {
        let entangled = gamma_e > BOUNDARY_TOL;
        let subshot = gamma_c > BOUNDARY_TOL;
        let negative = gamma_n > BOUNDARY_TOL;
        match (entangled, subshot, negative) {
            (false, _, _) => Region::Separable,
            (true, false, _) => Region::EntangledOnly,
            (true, true, false) => Region::EntangledSubshot,
            (true, true, true) => Region::EntangledSubshotNegative,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Region::Separable => "Separable",
            Region::EntangledOnly => "EntangledOnly",
            Region::EntangledSubshot => "EntangledSubshot",
            Region::EntangledSubshotNegative => "EntangledSubshotNegative",
            Region::Undefined => "Undefined",
        };
        f.write_str(name)
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Separable" => Ok(Region::Separable),
            "EntangledOnly" => Ok(Region::EntangledOnly),
            "EntangledSubshot" => Ok(Region::EntangledSubshot),
            "EntangledSubshotNegative" => Ok(Region::EntangledSubshotNegative),
            "Undefined" => Ok(Region::Undefined),
            other => Err(Error::InvalidParams(format!("unknown region name {other:?}"))),
        }
    }
}

/// The three nonclassicality parameters plus the region they select.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaReport {
    pub gamma_c: f64,
    pub gamma_n: f64,
    pub gamma_e: f64,
    pub region: Region,
}

/// Critical values of `muk` at which each parameter changes sign for fixed
/// seed intensities. Ordering is always `muk_n >= muk_c >= muk_e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub muk_n: f64,
    pub muk_c: f64,
    pub muk_e: f64,
}

/// Output photon-number moments for an operating point.
///
/// Each output mode separately is thermal:
/// `<n_j> = mu_j + muk*(1 + mu1 + mu2)` and `Var(n_j) = <n_j>(<n_j> + 1)`.
/// The difference photocurrent variance is
/// `Var(n1 - n2) = mu1*(1 + mu1) + mu2*(1 + mu2)`, independent of `muk`.
pub fn output_moments(p: &PdcParams) -> TwoModeMoments {
    let gain = p.muk() * (1.0 + p.mu1() + p.mu2());
    let n1 = p.mu1() + gain;
    let n2 = p.mu2() + gain;
    let var1 = n1 * (n1 + 1.0);
    let var2 = n2 * (n2 + 1.0);
    let var_diff = p.mu1() * (1.0 + p.mu1()) + p.mu2() * (1.0 + p.mu2());
    TwoModeMoments::from_difference_variance(n1, n2, var1, var2, var_diff)
}

/// Shared denominator of the three parameters:
/// `2*muk*(1 + mu1 + mu2) + mu1 + mu2`, which equals `<n1> + <n2>`.
fn denominator(p: &PdcParams) -> f64 {
    2.0 * p.muk() * (1.0 + p.mu1() + p.mu2()) + p.mu1() + p.mu2()
}

/// Sub-shot-noise parameter
/// `gamma_c = [2*muk*(1+mu1+mu2) - mu1^2 - mu2^2] / [2*muk*(1+mu1+mu2) + mu1 + mu2]`.
///
/// Positive values certify noise below the shot-noise limit; the twin beam
/// (`mu1 = mu2 = 0`) saturates the maximum `gamma_c = 1`.
pub fn gamma_c(p: &PdcParams) -> Result<f64> {
    if p.is_origin() {
        return Err(Error::UndefinedPoint);
    }
    let num = 2.0 * p.muk() * (1.0 + p.mu1() + p.mu2()) - p.mu1() * p.mu1() - p.mu2() * p.mu2();
    Ok(num / denominator(p))
}

/// P-function negativity parameter; as [`gamma_c`] with numerator
/// `2*[muk*(1+mu1+mu2) - mu1^2 - mu2^2 + mu1*mu2]`.
pub fn gamma_n(p: &PdcParams) -> Result<f64> {
    if p.is_origin() {
        return Err(Error::UndefinedPoint);
    }
    let num = 2.0
        * (p.muk() * (1.0 + p.mu1() + p.mu2()) - p.mu1() * p.mu1() - p.mu2() * p.mu2()
            + p.mu1() * p.mu2());
    Ok(num / denominator(p))
}

/// Entanglement parameter; as [`gamma_c`] with numerator
/// `2*[muk*(1+mu1+mu2) - mu1*mu2]`.
///
/// Positive iff the output state is entangled; in particular any point with
/// one vacuum seed and `muk > 0` is entangled.
pub fn gamma_e(p: &PdcParams) -> Result<f64> {
    if p.is_origin() {
        return Err(Error::UndefinedPoint);
    }
    let num = 2.0 * (p.muk() * (1.0 + p.mu1() + p.mu2()) - p.mu1() * p.mu2());
    Ok(num / denominator(p))
}

/// The three parameters recomputed from measured (or simulated) moments
/// instead of the closed forms. Errors at a zero shot-noise level.
pub fn gammas_from_moments(m: &TwoModeMoments) -> Result<(f64, f64, f64)> {
    let snl = m.sum_means();
    if snl <= 0.0 {
        return Err(Error::UndefinedPoint);
    }
    let diff_sq = m.diff_means() * m.diff_means();
    let gc = 1.0 - m.var_diff / snl;
    let gn = 1.0 - (m.var_diff + diff_sq) / snl;
    let ge = 1.0 - (m.var_diff - diff_sq) / snl;
    Ok((gc, gn, ge))
}

/// All three parameters and the region they select.
pub fn gamma_report(p: &PdcParams) -> Result<GammaReport> {
    let gc = gamma_c(p)?;
    let gn = gamma_n(p)?;
    let ge = gamma_e(p)?;
    Ok(GammaReport { gamma_c: gc, gamma_n: gn, gamma_e: ge, region: Region::from_gammas(gc, gn, ge) })
}

/// Critical `muk` values at which each parameter crosses zero:
///
/// ```text
/// muk_n = (mu1^2 + mu2^2 - mu1*mu2) / (1 + mu1 + mu2)
/// muk_c = (mu1^2 + mu2^2) / (2*(1 + mu1 + mu2))
/// muk_e =  mu1*mu2 / (1 + mu1 + mu2)
/// ```
///
/// The three collapse into one when `mu1 = mu2`; otherwise they are
/// strictly ordered `muk_n > muk_c > muk_e`, the gaps being
/// `(mu1 - mu2)^2 / (2*(1 + mu1 + mu2))` on both sides.
pub fn thresholds(mu1: f64, mu2: f64) -> Result<Thresholds> {
    if !(mu1.is_finite() && mu2.is_finite()) || mu1 < 0.0 || mu2 < 0.0 {
        return Err(Error::InvalidParams(format!(
            "seed intensities must be finite and non-negative, got ({mu1}, {mu2})"
        )));
    }
    let denom = 1.0 + mu1 + mu2;
    Ok(Thresholds {
        muk_n: (mu1 * mu1 + mu2 * mu2 - mu1 * mu2) / denom,
        muk_c: (mu1 * mu1 + mu2 * mu2) / (2.0 * denom),
        muk_e: mu1 * mu2 / denom,
    })
}

/// Region classification of an operating point; errors at the origin.
pub fn classify_region(p: &PdcParams) -> Result<Region> {
    gamma_report(p).map(|r| r.region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(mu1: f64, mu2: f64, muk: f64) -> PdcParams {
        PdcParams::new(mu1, mu2, muk, 0.0).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(PdcParams::new(-0.1, 0.0, 0.0, 0.0).is_err());
        assert!(PdcParams::new(0.0, f64::NAN, 0.0, 0.0).is_err());
        assert!(PdcParams::new(0.0, 0.0, f64::INFINITY, 0.0).is_err());
        assert!(PdcParams::new(0.0, 0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn phase_is_normalized() {
        let p = PdcParams::new(0.0, 0.0, 1.0, -1.0).unwrap();
        assert!((0.0..TAU).contains(&p.phi()));
        assert_relative_eq!(p.phi(), TAU - 1.0, max_relative = 1e-15);
    }

    #[test]
    fn squeeze_magnitude_inverts_muk() {
        for muk in [0.0, 1e-6, 0.3, 1.0, 5.0] {
            let p = params(0.0, 0.0, muk);
            let r = p.squeeze_magnitude();
            assert!((r.sinh().powi(2) - muk).abs() <= 1e-12 * (1.0 + muk));
        }
    }

    #[test]
    fn moments_match_hand_values() {
        // (1, 2, 0.5): n_j = mu_j + 0.5*4
        let m = output_moments(&params(1.0, 2.0, 0.5));
        assert_relative_eq!(m.n1, 3.0, max_relative = 1e-14);
        assert_relative_eq!(m.n2, 4.0, max_relative = 1e-14);

        // vacuum in, vacuum out
        let v = output_moments(&params(0.0, 0.0, 0.0));
        assert_eq!(v.n1, 0.0);
        assert_eq!(v.var1, 0.0);
        assert_eq!(v.cov12, 0.0);
        assert_eq!(v.var_diff, 0.0);

        // (2, 0, 1): difference variance 6, total mean 8
        let m = output_moments(&params(2.0, 0.0, 1.0));
        assert_relative_eq!(m.var_diff, 6.0, max_relative = 1e-14);
        assert_relative_eq!(m.sum_means(), 8.0, max_relative = 1e-14);
    }

    #[test]
    fn moment_invariants_hold() {
        for (mu1, mu2, muk) in [(0.3, 1.7, 0.2), (2.0, 0.0, 1.0), (1.0, 1.0, 1.0)] {
            let m = output_moments(&params(mu1, mu2, muk));
            assert!((m.var_diff - (m.var1 + m.var2 - 2.0 * m.cov12)).abs() < 1e-12);
            assert!(m.var1 >= 0.0 && m.var2 >= 0.0);
            assert!(m.cov12.abs() <= (m.var1 * m.var2).sqrt() + 1e-12);
            assert_relative_eq!(m.diff_means(), mu1 - mu2, max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma_c_values() {
        assert_relative_eq!(gamma_c(&params(0.0, 0.0, 0.7)).unwrap(), 1.0);
        assert_relative_eq!(gamma_c(&params(1.0, 1.0, 1.0)).unwrap(), 0.5);
        assert_relative_eq!(gamma_c(&params(2.0, 0.0, 1.0)).unwrap(), 0.25);
    }

    #[test]
    fn gamma_n_values() {
        assert_relative_eq!(gamma_n(&params(0.0, 0.0, 0.2)).unwrap(), 1.0);
        assert_relative_eq!(gamma_n(&params(1.0, 1.0, 1.0)).unwrap(), 0.5);
        assert_relative_eq!(gamma_n(&params(2.0, 0.0, 1.0)).unwrap(), -0.25);
    }

    #[test]
    fn gamma_e_values() {
        assert_relative_eq!(gamma_e(&params(0.0, 0.0, 0.2)).unwrap(), 1.0);
        assert_relative_eq!(gamma_e(&params(1.0, 0.0, 0.25)).unwrap(), 0.5);
        assert_relative_eq!(gamma_e(&params(2.0, 0.0, 1.0)).unwrap(), 0.75);
    }

    #[test]
    fn origin_is_undefined() {
        let origin = params(0.0, 0.0, 0.0);
        assert!(matches!(gamma_c(&origin), Err(Error::UndefinedPoint)));
        assert!(matches!(gamma_n(&origin), Err(Error::UndefinedPoint)));
        assert!(matches!(gamma_e(&origin), Err(Error::UndefinedPoint)));
        assert!(matches!(classify_region(&origin), Err(Error::UndefinedPoint)));
    }

    #[test]
    fn gamma_c_matches_moment_route() {
        for (mu1, mu2, muk) in [(0.5, 0.5, 0.1), (2.0, 0.0, 1.0), (3.0, 1.2, 0.4)] {
            let p = params(mu1, mu2, muk);
            let m = output_moments(&p);
            let via_moments = 1.0 - m.var_diff / m.sum_means();
            assert!((gamma_c(&p).unwrap() - via_moments).abs() < 1e-12);
        }
    }

    #[test]
    fn thresholds_match_hand_values() {
        let t = thresholds(1.0, 1.0).unwrap();
        assert_relative_eq!(t.muk_n, 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(t.muk_c, 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(t.muk_e, 1.0 / 3.0, max_relative = 1e-14);

        let t = thresholds(2.0, 0.0).unwrap();
        assert_relative_eq!(t.muk_n, 4.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(t.muk_c, 2.0 / 3.0, max_relative = 1e-14);
        assert_eq!(t.muk_e, 0.0);

        let t = thresholds(0.0, 0.0).unwrap();
        assert_eq!((t.muk_n, t.muk_c, t.muk_e), (0.0, 0.0, 0.0));
    }

    #[test]
    fn thresholds_are_sign_changes() {
        for (mu1, mu2) in [(1.0, 1.0), (2.0, 0.0), (0.7, 2.4), (3.0, 3.0)] {
            let t = thresholds(mu1, mu2).unwrap();
            for (muk, gamma) in [
                (t.muk_n, gamma_n as fn(&PdcParams) -> Result<f64>),
                (t.muk_c, gamma_c),
                (t.muk_e, gamma_e),
            ] {
                let g = gamma(&params(mu1, mu2, muk)).unwrap();
                assert!(g.abs() < 1e-12, "gamma at its threshold was {g}");
            }
        }
    }

    #[test]
    fn classification_examples() {
        assert_eq!(
            classify_region(&params(0.0, 0.0, 0.3)).unwrap(),
            Region::EntangledSubshotNegative
        );
        assert_eq!(classify_region(&params(2.0, 0.0, 1.0)).unwrap(), Region::EntangledSubshot);
        assert_eq!(classify_region(&params(1.0, 1.0, 0.1)).unwrap(), Region::Separable);
    }

    #[test]
    fn boundary_counts_as_classical() {
        // Exactly at the entanglement threshold the point is separable.
        let t = thresholds(1.0, 2.0).unwrap();
        let r = classify_region(&params(1.0, 2.0, t.muk_e)).unwrap();
        assert_eq!(r, Region::Separable);
    }

    #[test]
    fn region_names_round_trip() {
        for region in [
            Region::Separable,
            Region::EntangledOnly,
            Region::EntangledSubshot,
            Region::EntangledSubshotNegative,
            Region::Undefined,
        ] {
            assert_eq!(region.to_string().parse::<Region>().unwrap(), region);
        }
        assert!("Entangled".parse::<Region>().is_err());
    }
}
