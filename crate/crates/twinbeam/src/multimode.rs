//! Multimode generalization: many independently squeezed pairs measured
//! together on two arms.
//!
//! Correlations are strictly pairwise, so photon-number moments simply add
//! over pairs, and the sub-shot-noise condition becomes a sum of per-pair
//! terms. The entanglement witness keeps its two-mode form except that the
//! squared mean difference is divided by the number of pairs; for
//! homogeneous pairs its normalized margin reduces exactly to the
//! single-pair entanglement parameter, independent of the pair count. The
//! two-mode negativity criterion has no multimode counterpart (its
//! derivation assumes a single pair), so that surface reports
//! [`Error::NotApplicable`].

use crate::analytic::{output_moments, PdcParams, TwoModeMoments, BOUNDARY_TOL};
use crate::error::{Error, Result};

/// Parameter set for a collection of downconverted pairs measured jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodeParams {
    n_modes: usize,
    per_mode: PdcParams,
    heterogeneous: Option<Vec<PdcParams>>,
}

impl MultimodeParams {
    /// Every pair sees the same seeds and the same gain.
    pub fn homogeneous(n_modes: usize, per_mode: PdcParams) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidParams("n_modes must be >= 1".into()));
        }
        Ok(Self { n_modes, per_mode, heterogeneous: None })
    }

    /// Explicit per-pair parameters.
    pub fn heterogeneous(pairs: Vec<PdcParams>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidParams("need at least one pair".into()));
        }
        Ok(Self { n_modes: pairs.len(), per_mode: pairs[0], heterogeneous: Some(pairs) })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn is_homogeneous(&self) -> bool {
        self.heterogeneous.is_none()
    }

    pub fn pair(&self, xi: usize) -> &PdcParams {
        match &self.heterogeneous {
            Some(pairs) => &pairs[xi],
            None => &self.per_mode,
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = &PdcParams> {
        (0..self.n_modes).map(move |xi| self.pair(xi))
    }
}

/// Verdict of the multimode sub-shot-noise condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnlCheck {
    pub violated: bool,
    /// `1 - sum Var(H_xi) / sum (<n1_xi> + <n2_xi>)`; equals the
    /// single-pair sub-shot-noise parameter in the homogeneous case.
    pub margin: f64,
}

/// Verdict of the pair-count-corrected entanglement witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessCheck {
    pub entangled: bool,
    /// `1 - [Var(H) - (<n1> - <n2>)^2 / N] / (<n1> + <n2>)`; equals the
    /// single-pair entanglement parameter for homogeneous moments.
    pub margin: f64,
}

/// Total moments over all pairs: means, variances and covariance add
/// because distinct pairs are uncorrelated.
pub fn multimode_moments(mp: &MultimodeParams) -> TwoModeMoments {
    let mut n1 = 0.0;
    let mut n2 = 0.0;
    let mut var1 = 0.0;
    let mut var2 = 0.0;
    let mut cov12 = 0.0;
    for p in mp.pairs() {
        let m = output_moments(p);
        n1 += m.n1;
        n2 += m.n2;
        var1 += m.var1;
        var2 += m.var2;
        cov12 += m.cov12;
    }
    TwoModeMoments::from_covariance(n1, n2, var1, var2, cov12)
}

/// Multimode sub-shot-noise test:
/// `sum_xi (Var(H_xi) - <n1_xi> - <n2_xi>) < 0`, reported as a normalized
/// margin. Errors when every pair is at the vacuum origin.
pub fn multimode_snl_violation(mp: &MultimodeParams) -> Result<SnlCheck> {
    let m = multimode_moments(mp);
    let snl = m.sum_means();
    if snl <= 0.0 {
        return Err(Error::UndefinedPoint);
    }
    let margin = 1.0 - m.var_diff / snl;
    Ok(SnlCheck { violated: margin > BOUNDARY_TOL, margin })
}

/// Pair-count-corrected entanglement witness evaluated on measured (or
/// summed) two-arm moments:
/// entangled iff `Var(H) - (<n1> - <n2>)^2 / n_modes > <n1> + <n2>` fails,
/// i.e. iff the normalized margin is positive.
///
/// The moments must come from a homogeneous multimode state (equal seeds
/// and equal gain across pairs); the witness is not derived for generic
/// heterogeneous fields.
pub fn multimode_witness(m: &TwoModeMoments, n_modes: usize) -> Result<WitnessCheck> {
    if n_modes == 0 {
        return Err(Error::InvalidParams("n_modes must be >= 1".into()));
    }
    let snl = m.sum_means();
    if snl <= 0.0 {
        return Err(Error::UndefinedPoint);
    }
    let diff_sq = m.diff_means() * m.diff_means();
    let margin = 1.0 - (m.var_diff - diff_sq / n_modes as f64) / snl;
    Ok(WitnessCheck { entangled: margin > BOUNDARY_TOL, margin })
}

/// There is no multimode extension of the two-mode negativity criterion;
/// this surface exists so callers get a typed error instead of a number.
pub fn multimode_negativity(_mp: &MultimodeParams) -> Result<f64> {
    Err(Error::NotApplicable(
        "the two-mode negativity criterion assumes a single downconverted pair",
    ))
}
