//! Loss and detection layer: moment maps under an overall loss factor,
//! Bernoulli thinning of sampled counts, and plug-in estimators of the
//! nonclassicality parameters from finite count records.
//!
//! Losses during propagation and non-unit quantum efficiency are subsumed
//! by a single factor `tau` per channel, equal on both channels. Detector
//! moments map as `N(tau, 1) = tau n` and
//! `N(tau, 2) = tau^2 n^2 + tau (1 - tau) n`; inserted into the parameters
//! this is a pure rescaling `gamma_i(tau) = tau gamma_i(1)`, so the
//! classical-quantum thresholds do not move. Dark counts are assumed
//! already subtracted and are not modeled.

use crate::analytic::{
    gamma_report, gammas_from_moments, output_moments, GammaReport, PdcParams, Region,
    TwoModeMoments,
};
use crate::error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use std::collections::BTreeMap;

/// Default number of bootstrap resamples behind the standard errors.
pub const DEFAULT_BOOTSTRAP_RESAMPLES: u32 = 200;

/// Overall per-channel loss factor, equal on both channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    tau: f64,
}

impl LossModel {
    pub fn new(tau: f64) -> Result<Self> {
        if !tau.is_finite() || !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidParams(format!("tau must lie in [0, 1], got {tau}")));
        }
        Ok(Self { tau })
    }

    /// No loss (`tau = 1`).
    pub fn lossless() -> Self {
        Self { tau: 1.0 }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Photon-number moments seen through lossy detectors.
///
/// Means scale by `tau`, variances map to
/// `tau^2 var + tau (1 - tau) n`, the cross covariance to `tau^2 cov`
/// (the two channels thin independently). Identity at `tau = 1`.
pub fn lossy_moments(m: &TwoModeMoments, loss: &LossModel) -> TwoModeMoments {
    let t = loss.tau();
    if t == 1.0 {
        return *m;
    }
    TwoModeMoments::from_covariance(
        t * m.n1,
        t * m.n2,
        t * t * m.var1 + t * (1.0 - t) * m.n1,
        t * t * m.var2 + t * (1.0 - t) * m.n2,
        t * t * m.cov12,
    )
}

/// Nonclassicality parameters in the presence of loss, computed from the
/// lossy moments. Equals `tau` times the lossless parameters; the region
/// uses the rescaled values, whose signs (and hence the thresholds) are
/// unchanged for `tau > 0`.
pub fn gamma_with_loss(p: &PdcParams, loss: &LossModel) -> Result<GammaReport> {
    if p.is_origin() {
        return Err(Error::UndefinedPoint);
    }
    if loss.tau() == 1.0 {
        return gamma_report(p);
    }
    if loss.tau() == 0.0 {
        // Everything is thinned away; nothing left to classify.
        return Err(Error::UndefinedPoint);
    }
    let m = lossy_moments(&output_moments(p), loss);
    let (gc, gn, ge) = gammas_from_moments(&m)?;
    Ok(GammaReport {
        gamma_c: gc,
        gamma_n: gn,
        gamma_e: ge,
        region: Region::from_gammas(gc, gn, ge),
    })
}

/// Additive Poisson background: independent `Poisson(rate)` dark counts
/// added to each channel of each event. The standard analysis assumes
/// dark counts are already subtracted, so nothing in this crate applies
/// this by default; the hook exists for modeling raw records and is a
/// no-op at `rate = 0`.
pub fn add_dark_counts(events: &[(u32, u32)], rate: f64, seed: u64) -> Result<Vec<(u32, u32)>> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::InvalidParams(format!(
            "dark-count rate must be finite and non-negative, got {rate}"
        )));
    }
    if rate == 0.0 {
        return Ok(events.to_vec());
    }
    let dist = rand_distr::Poisson::new(rate)
        .map_err(|e| Error::InvalidParams(format!("bad dark-count rate {rate}: {e}")))?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok(events
        .iter()
        .map(|&(k, l)| {
            let dk = dist.sample(&mut rng) as u32;
            let dl = dist.sample(&mut rng) as u32;
            (k + dk, l + dl)
        })
        .collect())
}

/// Bernoulli thinning: each photon survives independently with probability
/// `tau` per channel. Deterministic for a given seed.
pub fn thin_counts(events: &[(u32, u32)], loss: &LossModel, seed: u64) -> Vec<(u32, u32)> {
    let t = loss.tau();
    if t == 1.0 {
        return events.to_vec();
    }
    if t == 0.0 {
        return vec![(0, 0); events.len()];
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    events
        .iter()
        .map(|&(k, l)| {
            let k_out = if k == 0 {
                0
            } else {
                Binomial::new(k as u64, t).expect("tau validated").sample(&mut rng) as u32
            };
            let l_out = if l == 0 {
                0
            } else {
                Binomial::new(l as u64, t).expect("tau validated").sample(&mut rng) as u32
            };
            (k_out, l_out)
        })
        .collect()
}

/// Accumulated photon-counting record: event count, integer moment sums,
/// and the joint histogram the bootstrap resamples from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountRecord {
    trials: u64,
    sum_k: u64,
    sum_l: u64,
    sum_k2: u64,
    sum_l2: u64,
    sum_kl: u64,
    hist: BTreeMap<(u32, u32), u64>,
}

impl CountRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: &[(u32, u32)]) -> Self {
        let mut rec = Self::new();
        for &(k, l) in events {
            rec.push(k, l);
        }
        rec
    }

    pub fn push(&mut self, k: u32, l: u32) {
        let (ku, lu) = (k as u64, l as u64);
        self.trials += 1;
        self.sum_k += ku;
        self.sum_l += lu;
        self.sum_k2 += ku * ku;
        self.sum_l2 += lu * lu;
        self.sum_kl += ku * lu;
        *self.hist.entry((k, l)).or_insert(0) += 1;
    }

    /// Merging records is associative and commutative.
    pub fn merge(&mut self, other: &CountRecord) {
        self.trials += other.trials;
        self.sum_k += other.sum_k;
        self.sum_l += other.sum_l;
        self.sum_k2 += other.sum_k2;
        self.sum_l2 += other.sum_l2;
        self.sum_kl += other.sum_kl;
        for (&key, &count) in &other.hist {
            *self.hist.entry(key).or_insert(0) += count;
        }
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    /// Sample means and unbiased variances/covariance of the record.
    /// `var_diff` obeys `var1 + var2 - 2 cov12` exactly.
    pub fn sample_moments(&self) -> Result<TwoModeMoments> {
        if self.trials < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 events for variance estimates, have {}",
                self.trials
            )));
        }
        let n = self.trials as f64;
        let mean_k = self.sum_k as f64 / n;
        let mean_l = self.sum_l as f64 / n;
        let var1 = (self.sum_k2 as f64 - n * mean_k * mean_k) / (n - 1.0);
        let var2 = (self.sum_l2 as f64 - n * mean_l * mean_l) / (n - 1.0);
        let cov12 = (self.sum_kl as f64 - n * mean_k * mean_l) / (n - 1.0);
        Ok(TwoModeMoments::from_covariance(mean_k, mean_l, var1, var2, cov12))
    }
}

/// Point estimates of the nonclassicality parameters with bootstrap
/// standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEstimate {
    pub gammas: GammaReport,
    pub stderr_gamma_c: f64,
    pub stderr_gamma_n: f64,
    pub stderr_gamma_e: f64,
    /// Sample mean of `k - l` and its standard error.
    pub mean_diff: f64,
    pub stderr_mean_diff: f64,
    pub trials: u64,
    pub resamples: u32,
}

/// Plug-in estimates from a count record with
/// [`DEFAULT_BOOTSTRAP_RESAMPLES`] bootstrap resamples and a fixed
/// bootstrap stream.
pub fn estimate_gammas(rec: &CountRecord, n_modes: u32) -> Result<GammaEstimate> {
    estimate_gammas_seeded(rec, n_modes, DEFAULT_BOOTSTRAP_RESAMPLES, 0)
}

/// Plug-in estimates with explicit bootstrap size and seed.
///
/// The point estimates use the unbiased sample moments; `n_modes` enters
/// the entanglement witness as the divisor of `(mean_k - mean_l)^2`. The
/// standard errors come from a nonparametric bootstrap over the event
/// histogram (multinomial resampling of the empirical distribution).
pub fn estimate_gammas_seeded(
    rec: &CountRecord,
    n_modes: u32,
    resamples: u32,
    seed: u64,
) -> Result<GammaEstimate> {
    if n_modes == 0 {
        return Err(Error::InvalidParams("n_modes must be >= 1".into()));
    }
    if resamples < 2 {
        return Err(Error::InvalidParams("need at least 2 bootstrap resamples".into()));
    }
    let moments = rec.sample_moments()?;
    let (gc, gn, ge) = estimate_from_moments(&moments, n_modes)?;

    let n = rec.trials as f64;
    let stderr_mean_diff = (moments.var_diff / n).sqrt();

    // Bootstrap: multinomial resampling of the histogram via sequential
    // conditional binomials, then re-evaluating the three estimators.
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let bins: Vec<((u32, u32), u64)> = rec.hist.iter().map(|(&key, &c)| (key, c)).collect();
    let mut samples: Vec<(f64, f64, f64)> = Vec::with_capacity(resamples as usize);
    for _ in 0..resamples {
        let mut remaining = rec.trials;
        let mut weight_left = rec.trials as f64;
        let mut boot = CountSums::default();
        for &((k, l), count) in &bins {
            if remaining == 0 {
                break;
            }
            let p = (count as f64 / weight_left).clamp(0.0, 1.0);
            let draw = if p >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, p).expect("valid probability").sample(&mut rng)
            };
            boot.add(k, l, draw);
            remaining -= draw;
            weight_left -= count as f64;
        }
        if let Ok(m) = boot.moments() {
            if let Ok(est) = estimate_from_moments(&m, n_modes) {
                samples.push(est);
            }
        }
    }
    if samples.len() < 2 {
        return Err(Error::InsufficientData(
            "bootstrap produced fewer than 2 valid resamples".into(),
        ));
    }
    let stderr = |f: fn(&(f64, f64, f64)) -> f64| -> f64 {
        let m = samples.iter().map(&f).sum::<f64>() / samples.len() as f64;
        let ss = samples.iter().map(|s| (f(s) - m).powi(2)).sum::<f64>();
        (ss / (samples.len() as f64 - 1.0)).sqrt()
    };

    Ok(GammaEstimate {
        gammas: GammaReport {
            gamma_c: gc,
            gamma_n: gn,
            gamma_e: ge,
            region: Region::from_gammas(gc, gn, ge),
        },
        stderr_gamma_c: stderr(|s| s.0),
        stderr_gamma_n: stderr(|s| s.1),
        stderr_gamma_e: stderr(|s| s.2),
        mean_diff: moments.diff_means(),
        stderr_mean_diff,
        trials: rec.trials,
        resamples,
    })
}

/// The three plug-in estimators evaluated on sample moments; the
/// `n_modes` divisor only affects the entanglement witness.
fn estimate_from_moments(m: &TwoModeMoments, n_modes: u32) -> Result<(f64, f64, f64)> {
    let snl = m.sum_means();
    if snl <= 0.0 {
        return Err(Error::UndefinedPoint);
    }
    let diff_sq = m.diff_means() * m.diff_means();
    let gc = 1.0 - m.var_diff / snl;
    let gn = 1.0 - (m.var_diff + diff_sq) / snl;
    let ge = 1.0 - (m.var_diff - diff_sq / n_modes as f64) / snl;
    Ok((gc, gn, ge))
}

/// Integer accumulators for one bootstrap replica.
#[derive(Default)]
struct CountSums {
    trials: u64,
    sum_k: u64,
    sum_l: u64,
    sum_k2: u64,
    sum_l2: u64,
    sum_kl: u64,
}

impl CountSums {
    fn add(&mut self, k: u32, l: u32, count: u64) {
        let (ku, lu) = (k as u64, l as u64);
        self.trials += count;
        self.sum_k += count * ku;
        self.sum_l += count * lu;
        self.sum_k2 += count * ku * ku;
        self.sum_l2 += count * lu * lu;
        self.sum_kl += count * ku * lu;
    }

    fn moments(&self) -> Result<TwoModeMoments> {
        if self.trials < 2 {
            return Err(Error::InsufficientData("empty bootstrap replica".into()));
        }
        let n = self.trials as f64;
        let mean_k = self.sum_k as f64 / n;
        let mean_l = self.sum_l as f64 / n;
        Ok(TwoModeMoments::from_covariance(
            mean_k,
            mean_l,
            (self.sum_k2 as f64 - n * mean_k * mean_k) / (n - 1.0),
            (self.sum_l2 as f64 - n * mean_l * mean_l) / (n - 1.0),
            (self.sum_kl as f64 - n * mean_k * mean_l) / (n - 1.0),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{gamma_c, gamma_e, gamma_n};
    use approx::assert_relative_eq;

    fn params(mu1: f64, mu2: f64, muk: f64) -> PdcParams {
        PdcParams::new(mu1, mu2, muk, 0.0).unwrap()
    }

    #[test]
    fn loss_model_bounds() {
        assert!(LossModel::new(-0.1).is_err());
        assert!(LossModel::new(1.1).is_err());
        assert!(LossModel::new(f64::NAN).is_err());
        assert_eq!(LossModel::lossless().tau(), 1.0);
    }

    #[test]
    fn lossless_moments_are_identity() {
        let m = output_moments(&params(1.3, 0.4, 0.8));
        assert_eq!(lossy_moments(&m, &LossModel::lossless()), m);
    }

    #[test]
    fn full_loss_kills_all_moments() {
        let m = lossy_moments(&output_moments(&params(1.3, 0.4, 0.8)), &LossModel::new(0.0).unwrap());
        assert_eq!((m.n1, m.n2, m.var1, m.var2, m.cov12, m.var_diff), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn half_loss_moment_values() {
        // (2, 0, 1) at tau = 0.5: n1 = 2.5, varH = 0.25*6 + 0.25*8 = 3.5.
        let m = lossy_moments(&output_moments(&params(2.0, 0.0, 1.0)), &LossModel::new(0.5).unwrap());
        assert_relative_eq!(m.n1, 2.5, max_relative = 1e-14);
        assert_relative_eq!(m.var_diff, 3.5, max_relative = 1e-12);
    }

    #[test]
    fn gamma_rescaling_examples() {
        let p = params(2.0, 0.0, 1.0);
        let half = gamma_with_loss(&p, &LossModel::new(0.5).unwrap()).unwrap();
        assert!((half.gamma_c - 0.125).abs() < 1e-12);

        let ideal = gamma_with_loss(&p, &LossModel::lossless()).unwrap();
        assert_eq!(ideal.gamma_c, gamma_c(&p).unwrap());
        assert_eq!(ideal.gamma_n, gamma_n(&p).unwrap());
        assert_eq!(ideal.gamma_e, gamma_e(&p).unwrap());

        let twb = gamma_with_loss(&params(0.0, 0.0, 0.3), &LossModel::new(0.5).unwrap()).unwrap();
        assert!((twb.gamma_c - 0.5).abs() < 1e-12);
        assert!((twb.gamma_n - 0.5).abs() < 1e-12);
        assert!((twb.gamma_e - 0.5).abs() < 1e-12);
        assert_eq!(twb.region, Region::EntangledSubshotNegative);
    }

    #[test]
    fn rescaling_law_is_exact() {
        for (i, &(mu1, mu2, muk, tau)) in [
            (0.7, 0.0, 0.2, 0.3),
            (1.5, 1.5, 0.4, 0.9),
            (2.0, 0.5, 1.2, 0.1),
            (0.0, 3.0, 0.6, 0.77),
        ]
        .iter()
        .enumerate()
        {
            let p = params(mu1, mu2, muk);
            let base = gamma_report(&p).unwrap();
            let lossy = gamma_with_loss(&p, &LossModel::new(tau).unwrap()).unwrap();
            assert!((lossy.gamma_c - tau * base.gamma_c).abs() < 1e-12, "case {i}");
            assert!((lossy.gamma_n - tau * base.gamma_n).abs() < 1e-12, "case {i}");
            assert!((lossy.gamma_e - tau * base.gamma_e).abs() < 1e-12, "case {i}");
        }
    }

    #[test]
    fn zero_tau_gamma_is_undefined() {
        let err = gamma_with_loss(&params(1.0, 0.0, 0.5), &LossModel::new(0.0).unwrap());
        assert!(matches!(err, Err(Error::UndefinedPoint)));
    }

    #[test]
    fn dark_count_hook_defaults_to_identity() {
        let events = vec![(3, 5), (0, 2)];
        assert_eq!(add_dark_counts(&events, 0.0, 1).unwrap(), events);
        assert!(add_dark_counts(&events, -0.5, 1).is_err());
        assert!(add_dark_counts(&events, f64::NAN, 1).is_err());
        // Deterministic and mean-shifting when switched on.
        let a = add_dark_counts(&events, 2.0, 7).unwrap();
        assert_eq!(a, add_dark_counts(&events, 2.0, 7).unwrap());
        let big = vec![(0u32, 0u32); 40_000];
        let shifted = add_dark_counts(&big, 2.0, 11).unwrap();
        let mean: f64 =
            shifted.iter().map(|&(k, _)| k as f64).sum::<f64>() / big.len() as f64;
        assert!((mean - 2.0).abs() < 3.0 * (2.0f64 / big.len() as f64).sqrt());
    }

    #[test]
    fn thinning_edge_cases() {
        let events = vec![(3, 5), (0, 2), (7, 0)];
        assert_eq!(thin_counts(&events, &LossModel::lossless(), 5), events);
        assert_eq!(
            thin_counts(&events, &LossModel::new(0.0).unwrap(), 5),
            vec![(0, 0); 3]
        );
        // Determinism.
        let loss = LossModel::new(0.6).unwrap();
        assert_eq!(thin_counts(&events, &loss, 5), thin_counts(&events, &loss, 5));
    }

    #[test]
    fn thinning_follows_binomial_law() {
        // Thin k = 10 at tau = 0.5 many times; chi^2 against Binomial(10, 1/2).
        let events = vec![(10u32, 0u32); 40_000];
        let loss = LossModel::new(0.5).unwrap();
        let thinned = thin_counts(&events, &loss, 2024);
        let mut counts = [0u64; 11];
        for (k, _) in thinned {
            counts[k as usize] += 1;
        }
        let n = events.len() as f64;
        let mean: f64 = counts.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum::<f64>() / n;
        assert!((mean - 5.0).abs() < 3.0 * (2.5f64 / n).sqrt());
        let mut chi2 = 0.0;
        for (k, &c) in counts.iter().enumerate() {
            let p = binomial_pmf(10, k as u64, 0.5);
            let expect = n * p;
            chi2 += (c as f64 - expect).powi(2) / expect;
        }
        // 10 degrees of freedom; 29.6 is the 0.1% point.
        assert!(chi2 < 29.6, "chi2 = {chi2}");
    }

    fn binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
        let mut coeff = 1.0f64;
        for i in 0..k {
            coeff *= (n - i) as f64 / (i + 1) as f64;
        }
        coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    }

    #[test]
    fn record_accumulators_are_consistent() {
        let rec = CountRecord::from_events(&[(1, 2), (3, 1), (0, 0), (2, 2)]);
        assert_eq!(rec.trials(), 4);
        let m = rec.sample_moments().unwrap();
        assert!((m.var_diff - (m.var1 + m.var2 - 2.0 * m.cov12)).abs() < 1e-12);

        // Merge equals building from the concatenation.
        let mut a = CountRecord::from_events(&[(1, 2), (3, 1)]);
        let b = CountRecord::from_events(&[(0, 0), (2, 2)]);
        a.merge(&b);
        assert_eq!(a, rec);
    }

    #[test]
    fn degenerate_record_estimates_perfect_correlation() {
        let rec = CountRecord::from_events(&vec![(1, 1); 100]);
        let est = estimate_gammas(&rec, 1).unwrap();
        assert_eq!(est.gammas.gamma_c, 1.0);
        assert_eq!(est.gammas.gamma_e, 1.0);
        assert_eq!(est.mean_diff, 0.0);
    }

    #[test]
    fn estimator_requires_data() {
        let rec = CountRecord::from_events(&[(1, 1)]);
        assert!(matches!(
            estimate_gammas(&rec, 1),
            Err(Error::InsufficientData(_))
        ));
        let empty = CountRecord::new();
        assert!(estimate_gammas(&empty, 1).is_err());
    }

    #[test]
    fn all_zero_record_is_undefined() {
        let rec = CountRecord::from_events(&vec![(0, 0); 50]);
        assert!(matches!(estimate_gammas(&rec, 1), Err(Error::UndefinedPoint)));
    }

    #[test]
    fn estimates_are_deterministic_per_seed() {
        let rec = CountRecord::from_events(&[(2, 1), (1, 1), (3, 2), (0, 1), (2, 2), (4, 3)]);
        let a = estimate_gammas_seeded(&rec, 1, 100, 9).unwrap();
        let b = estimate_gammas_seeded(&rec, 1, 100, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimator_recovers_analytic_gammas() {
        // 10^5 lossless samples at (2, 0, 1): gamma_c within 3 stderr of 0.25.
        let p = params(2.0, 0.0, 1.0);
        let events = crate::fock::sample_counts(&p, 100_000, 31_415).unwrap();
        let est = estimate_gammas_seeded(&CountRecord::from_events(&events), 1, 200, 1).unwrap();
        assert!(
            (est.gammas.gamma_c - 0.25).abs() < 3.0 * est.stderr_gamma_c,
            "gamma_c {} +- {}",
            est.gammas.gamma_c,
            est.stderr_gamma_c
        );
        assert!(
            (est.gammas.gamma_e - 0.75).abs() < 3.0 * est.stderr_gamma_e,
            "gamma_e {} +- {}",
            est.gammas.gamma_e,
            est.stderr_gamma_e
        );
    }

    #[test]
    fn estimator_recovers_rescaled_gammas_after_thinning() {
        // (0, 0, 0.3) at tau = 0.5: all gammas rescale to 0.5.
        let p = params(0.0, 0.0, 0.3);
        let loss = LossModel::new(0.5).unwrap();
        let ideal = crate::fock::sample_counts(&p, 100_000, 2_718).unwrap();
        let thinned = thin_counts(&ideal, &loss, 999);
        let est = estimate_gammas_seeded(&CountRecord::from_events(&thinned), 1, 200, 2).unwrap();
        assert!(
            (est.gammas.gamma_e - 0.5).abs() < 3.0 * est.stderr_gamma_e,
            "gamma_e {} +- {}",
            est.gammas.gamma_e,
            est.stderr_gamma_e
        );
    }
}
