//! Exact truncated Fock-space oracle for the two-mode downconversion
//! process with thermal-diagonal inputs.
//!
//! The interaction conserves the photon-number difference `n1 - n2`, so its
//! unitary is block-diagonal over subspaces `span{ |m+d, m> : m >= 0 }`,
//! one block per difference `d` (blocks for `d` and `-d` share the same
//! matrix with the mode roles mirrored). Within a block the generator is an
//! anti-Hermitian tridiagonal matrix with couplings
//! `sqrt((m + d + 1) * (m + 1))`; a diagonal phase similarity reduces its
//! exponential to `exp(-i r S)` with `S` real symmetric tridiagonal, which
//! is evaluated through the eigendecomposition in [`crate::tridiag`].
//! Probabilities are independent of the pump phase: it only dresses the
//! amplitudes with a diagonal phase.
//!
//! Since the inputs are Fock-diagonal, the output joint photon-number
//! distribution needs only squared block columns, never off-diagonal
//! bookkeeping. Truncation is validated after the fact: the joint pmf
//! carries its trace defect and construction fails if the defect exceeds
//! tolerance.

use crate::analytic::{output_moments, PdcParams, TwoModeMoments};
use crate::error::{Error, Result};
use crate::tridiag::eigh_tridiagonal;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};

/// Ignored thermal input tail mass per mode.
const INPUT_TAIL_TOL: f64 = 1e-10;

/// Maximum tolerated missing probability mass of a joint pmf.
pub const TRACE_DEFECT_TOL: f64 = 1e-8;

/// A block column whose mass near the truncation edge exceeds this is not
/// trusted (the pmf skips it, the sampler deepens the block).
const COLUMN_TAIL_TOL: f64 = 1e-9;

/// Hard ceiling on sampler block depth.
const MAX_SAMPLER_DEPTH: usize = 8192;

/// Thermal photon-number probability `mu^n / (1 + mu)^(n+1)`.
pub fn thermal_prob(mu: f64, n: u64) -> f64 {
    if mu <= 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    // Log form; direct powers overflow for large n.
    let q = mu / (1.0 + mu);
    ((n as f64) * q.ln()).exp() / (1.0 + mu)
}

/// Smallest depth whose thermal tail mass is below `tol`:
/// `sum_{n >= D} p(n) = (mu / (1 + mu))^D < tol`.
pub fn thermal_cutoff(mu: f64, tol: f64) -> usize {
    if mu <= 0.0 {
        return 1;
    }
    let q = mu / (1.0 + mu);
    let d = (tol.ln() / q.ln()).ceil() as usize;
    d.max(1)
}

/// Truncation depth policy for [`joint_pmf`]: the larger of the two
/// thermal input supports inflated for squeezing broadening, with a floor
/// covering the spontaneous output when the seeds are near vacuum.
pub fn auto_cutoff(p: &PdcParams) -> usize {
    let d_in = thermal_cutoff(p.mu1(), INPUT_TAIL_TOL).max(thermal_cutoff(p.mu2(), INPUT_TAIL_TOL));
    let inflation = (1.0 + 6.0 * (p.muk() + 1.0).sqrt()).ceil() as usize;
    let m = output_moments(p);
    let d_out = thermal_cutoff(m.n1.max(m.n2), INPUT_TAIL_TOL);
    (d_in * inflation).max(2 * d_out).max(16)
}

/// One block of the interaction unitary, restricted to the subspace with
/// photon-number difference `d` and truncated to `depth` basis states
/// `|m + |d|, m>` (mirrored for `d < 0`).
///
/// The stored decomposition reproduces an exactly unitary matrix on the
/// truncated space; whether its leading columns match the untruncated
/// operator is checked by the callers through tail masses.
#[derive(Debug, Clone)]
pub struct BlockUnitary {
    difference: u64,
    depth: usize,
    r: f64,
    phi: f64,
    eigvals: Vec<f64>,
    /// Column-major eigenvectors of the coupling matrix.
    eigvecs: Vec<f64>,
}

impl BlockUnitary {
    /// Builds the block for squeeze magnitude `r`, pump phase `phi` and
    /// photon-number difference `d` at truncation depth `depth >= 2`.
    pub fn new(r: f64, phi: f64, d: i64, depth: usize) -> Result<Self> {
        if !(r.is_finite() && phi.is_finite()) || r < 0.0 {
            return Err(Error::InvalidParams(format!(
                "squeeze magnitude must be finite and non-negative, got r={r}, phi={phi}"
            )));
        }
        if depth < 2 {
            return Err(Error::InvalidParams(format!("block depth must be >= 2, got {depth}")));
        }
        let difference = d.unsigned_abs();
        if r == 0.0 {
            // Identity block, exactly.
            let mut eigvecs = vec![0.0; depth * depth];
            for j in 0..depth {
                eigvecs[j * depth + j] = 1.0;
            }
            return Ok(Self { difference, depth, r, phi, eigvals: vec![0.0; depth], eigvecs });
        }
        let diag = vec![0.0f64; depth];
        let offdiag: Vec<f64> = (0..depth - 1)
            .map(|m| (((m as u64 + difference + 1) * (m as u64 + 1)) as f64).sqrt())
            .collect();
        let (eigvals, eigvecs) = eigh_tridiagonal(&diag, &offdiag)?;
        Ok(Self { difference, depth, r, phi, eigvals, eigvecs })
    }

    pub fn difference(&self) -> u64 {
        self.difference
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Transition probabilities `|<m + d, m | U | m0 + d, m0>|^2` for all
    /// `m` in `0..depth`. Pump-phase independent.
    ///
    /// Panics if `m0 >= depth`.
    pub fn column_probabilities(&self, m0: usize) -> Vec<f64> {
        assert!(m0 < self.depth, "column {m0} beyond block depth {}", self.depth);
        let n = self.depth;
        let mut re = vec![0.0f64; n];
        let mut im = vec![0.0f64; n];
        for j in 0..n {
            let y = self.eigvecs[j * n + m0];
            if y == 0.0 {
                continue;
            }
            let (sin, cos) = (self.r * self.eigvals[j]).sin_cos();
            let zr = y * cos;
            let zi = -y * sin;
            let col = &self.eigvecs[j * n..(j + 1) * n];
            for k in 0..n {
                re[k] += col[k] * zr;
                im[k] += col[k] * zi;
            }
        }
        (0..n).map(|k| re[k] * re[k] + im[k] * im[k]).collect()
    }

    /// Full complex amplitudes `<m + d, m | U | m0 + d, m0>`, including the
    /// pump-phase dressing `e^{i (m - m0) phi} i^{m - m0}`.
    pub fn column_amplitudes(&self, m0: usize) -> Vec<Complex64> {
        assert!(m0 < self.depth, "column {m0} beyond block depth {}", self.depth);
        let n = self.depth;
        let mut amp = vec![Complex64::default(); n];
        for j in 0..n {
            let y = self.eigvecs[j * n + m0];
            if y == 0.0 {
                continue;
            }
            let (sin, cos) = (self.r * self.eigvals[j]).sin_cos();
            let z = Complex64::new(y * cos, -y * sin);
            let col = &self.eigvecs[j * n..(j + 1) * n];
            for k in 0..n {
                amp[k] += col[k] * z;
            }
        }
        for (k, a) in amp.iter_mut().enumerate() {
            // e^{i t phi} i^t with t = k - m0.
            let t = k as f64 - m0 as f64;
            *a *= Complex64::from_polar(1.0, t * (self.phi + std::f64::consts::FRAC_PI_2));
        }
        amp
    }

    /// Probability mass of column `m0` sitting in the last
    /// `max(3, depth/32)` entries; large values mean the block is too
    /// shallow for this column.
    pub fn column_tail_mass(&self, m0: usize) -> f64 {
        let probs = self.column_probabilities(m0);
        let window = (self.depth / 32).max(3).min(self.depth);
        probs[self.depth - window..].iter().sum()
    }

    /// `max |(U^+ U - I)_{ij}|` over the leading `depth/2` columns.
    pub fn unitarity_defect(&self) -> f64 {
        let cols: Vec<Vec<Complex64>> =
            (0..self.depth / 2).map(|m| self.column_amplitudes(m)).collect();
        let mut worst = 0.0f64;
        for (i, ci) in cols.iter().enumerate() {
            for (j, cj) in cols.iter().enumerate().skip(i) {
                let dot: Complex64 = ci.iter().zip(cj).map(|(a, b)| a.conj() * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }
}

/// Exact (truncated) joint photon-number distribution of the output.
#[derive(Debug, Clone)]
pub struct JointPhotonPmf {
    probs: BTreeMap<(u32, u32), f64>,
    trace_defect: f64,
    cutoff: usize,
}

impl JointPhotonPmf {
    pub fn prob(&self, k: u32, l: u32) -> f64 {
        self.probs.get(&(k, l)).copied().unwrap_or(0.0)
    }

    /// `1 - sum(probs)`: mass lost to every truncation combined.
    pub fn trace_defect(&self) -> f64 {
        self.trace_defect
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, u32), &f64)> {
        self.probs.iter()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// First and second moments of the distribution.
    pub fn moments(&self) -> TwoModeMoments {
        let (mut n1, mut n2, mut k2, mut l2, mut kl) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&(k, l), &p) in &self.probs {
            let (kf, lf) = (k as f64, l as f64);
            n1 += p * kf;
            n2 += p * lf;
            k2 += p * kf * kf;
            l2 += p * lf * lf;
            kl += p * kf * lf;
        }
        TwoModeMoments::from_covariance(n1, n2, k2 - n1 * n1, l2 - n2 * n2, kl - n1 * n2)
    }
}

/// Exact joint output pmf at the given truncation depth.
///
/// `p_out(k, l) = sum over inputs (n, m) with n - m = k - l of
/// p1(n) p2(m) |<k, l | U | n, m>|^2`, evaluated block by block. Fails with
/// [`Error::Truncation`] when the accumulated mass misses 1 by more than
/// [`TRACE_DEFECT_TOL`].
pub fn joint_pmf(p: &PdcParams, cutoff: usize) -> Result<JointPhotonPmf> {
    if cutoff < 2 {
        return Err(Error::InvalidParams(format!("cutoff must be >= 2, got {cutoff}")));
    }
    let r = p.squeeze_magnitude();
    let d1 = thermal_cutoff(p.mu1(), INPUT_TAIL_TOL).min(cutoff);
    let d2 = thermal_cutoff(p.mu2(), INPUT_TAIL_TOL).min(cutoff);
    let ad_max = d1.max(d2) - 1;

    // Each |d| contributes disjoint pmf keys, so blocks parallelize cleanly.
    let per_block: Vec<Result<Vec<((u32, u32), f64)>>> = (0..=ad_max as u64)
        .into_par_iter()
        .map(|ad| {
            // Column counts for the two orientations of this difference.
            let pos_cols = if (ad as usize) < d1 { d2.min(d1 - ad as usize) } else { 0 };
            let neg_cols = if ad > 0 && (ad as usize) < d2 { d1.min(d2 - ad as usize) } else { 0 };
            if pos_cols == 0 && neg_cols == 0 {
                return Ok(Vec::new());
            }
            let block = BlockUnitary::new(r, p.phi(), ad as i64, cutoff)?;
            let n_out = cutoff - ad as usize;
            let mut pos_acc = vec![0.0f64; if pos_cols > 0 { n_out } else { 0 }];
            let mut neg_acc = vec![0.0f64; if neg_cols > 0 { n_out } else { 0 }];
            for m0 in 0..pos_cols.max(neg_cols) {
                let probs = block.column_probabilities(m0);
                let window = (cutoff / 32).max(3).min(cutoff);
                let tail: f64 = probs[cutoff - window..].iter().sum();
                if tail > COLUMN_TAIL_TOL {
                    // Untrustworthy column: leave its weight in the defect.
                    continue;
                }
                if m0 < pos_cols {
                    let w = thermal_prob(p.mu1(), m0 as u64 + ad) * thermal_prob(p.mu2(), m0 as u64);
                    for j in 0..n_out {
                        pos_acc[j] += w * probs[j];
                    }
                }
                if m0 < neg_cols {
                    let w = thermal_prob(p.mu1(), m0 as u64) * thermal_prob(p.mu2(), m0 as u64 + ad);
                    for j in 0..n_out {
                        neg_acc[j] += w * probs[j];
                    }
                }
            }
            let mut entries = Vec::new();
            for (j, &q) in pos_acc.iter().enumerate() {
                if q > 0.0 {
                    entries.push((((j as u64 + ad) as u32, j as u32), q));
                }
            }
            for (j, &q) in neg_acc.iter().enumerate() {
                if q > 0.0 {
                    entries.push(((j as u32, (j as u64 + ad) as u32), q));
                }
            }
            Ok(entries)
        })
        .collect();

    let mut probs = BTreeMap::new();
    let mut total = 0.0f64;
    for res in per_block {
        for (key, q) in res? {
            total += q;
            *probs.entry(key).or_insert(0.0) += q;
        }
    }
    let trace_defect = 1.0 - total;
    if trace_defect > TRACE_DEFECT_TOL {
        return Err(Error::Truncation { defect: trace_defect, depth: cutoff });
    }
    Ok(JointPhotonPmf { probs, trace_defect, cutoff })
}

/// [`joint_pmf`] at the [`auto_cutoff`] depth.
pub fn joint_pmf_auto(p: &PdcParams) -> Result<JointPhotonPmf> {
    joint_pmf(p, auto_cutoff(p))
}

/// One sampled detection event: the thermal input pair drawn and the
/// output pair it produced. `output.0 - output.1 == input.0 - input.1`
/// exactly, by block structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleEvent {
    pub input: (u32, u32),
    pub output: (u32, u32),
}

/// Ancestral sampler for ideal (lossless) photon-number events.
///
/// Inputs `(n, m)` are drawn from the two geometric thermal laws, the
/// output within block `d = n - m` from the squared block column of the
/// input. Block decompositions and per-column cumulative sums are cached;
/// the random stream never depends on cache state, so a given seed always
/// reproduces the same events.
pub struct CountSampler {
    params: PdcParams,
    r: f64,
    blocks: HashMap<u64, SamplerBlock>,
}

struct SamplerBlock {
    unitary: BlockUnitary,
    cdfs: HashMap<u32, Vec<f64>>,
}

impl CountSampler {
    pub fn new(p: &PdcParams) -> Self {
        Self { params: *p, r: p.squeeze_magnitude(), blocks: HashMap::new() }
    }

    pub fn params(&self) -> &PdcParams {
        &self.params
    }

    /// Draws `trials` events; deterministic for a given `seed`.
    pub fn sample(&mut self, trials: u64, seed: u64) -> Result<Vec<(u32, u32)>> {
        Ok(self.sample_detailed(trials, seed)?.into_iter().map(|ev| ev.output).collect())
    }

    /// As [`CountSampler::sample`], also reporting the drawn inputs.
    pub fn sample_detailed(&mut self, trials: u64, seed: u64) -> Result<Vec<SampleEvent>> {
        if trials == 0 {
            return Err(Error::InvalidParams("trials must be >= 1".into()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let g1 = geometric_for(self.params.mu1());
        let g2 = geometric_for(self.params.mu2());
        let mut events = Vec::with_capacity(trials as usize);
        for _ in 0..trials {
            let n = g1.as_ref().map_or(0, |g| g.sample(&mut rng));
            let m = g2.as_ref().map_or(0, |g| g.sample(&mut rng));
            let output = if self.r == 0.0 {
                // No interaction: outputs equal inputs.
                (n, m)
            } else {
                let ad = n.abs_diff(m);
                let m0 = n.min(m);
                self.ensure_cdf(ad, m0)?;
                let cdf = &self.blocks[&ad].cdfs[&(m0 as u32)];
                let u: f64 = rng.gen::<f64>() * cdf.last().copied().unwrap_or(1.0);
                let j = cdf.partition_point(|&c| c < u).min(cdf.len() - 1) as u64;
                if n >= m {
                    (j + ad, j)
                } else {
                    (j, j + ad)
                }
            };
            events.push(SampleEvent {
                input: (n as u32, m as u32),
                output: (output.0 as u32, output.1 as u32),
            });
        }
        Ok(events)
    }

    /// Guarantees a trusted cumulative column for `(|d|, m0)`, deepening
    /// the cached block until its tail mass passes or the ceiling is hit.
    fn ensure_cdf(&mut self, ad: u64, m0: u64) -> Result<()> {
        if m0 as usize >= MAX_SAMPLER_DEPTH / 2 {
            return Err(Error::Truncation { defect: f64::NAN, depth: MAX_SAMPLER_DEPTH });
        }
        loop {
            let needs_build = match self.blocks.get(&ad) {
                Some(b) => m0 as usize >= b.unitary.depth(),
                None => true,
            };
            if needs_build {
                let old_depth = self.blocks.get(&ad).map_or(0, |b| b.unitary.depth());
                let depth = initial_depth(self.params.muk(), ad, m0).max(2 * old_depth);
                if depth > MAX_SAMPLER_DEPTH {
                    return Err(Error::Truncation { defect: f64::NAN, depth });
                }
                let unitary = BlockUnitary::new(self.r, self.params.phi(), ad as i64, depth)?;
                self.blocks.insert(ad, SamplerBlock { unitary, cdfs: HashMap::new() });
            }
            let block = self.blocks.get_mut(&ad).expect("block just ensured");
            if block.cdfs.contains_key(&(m0 as u32)) {
                return Ok(());
            }
            if block.unitary.column_tail_mass(m0 as usize) > COLUMN_TAIL_TOL {
                // Too shallow for this column: rebuild twice as deep.
                let depth = 2 * block.unitary.depth();
                if depth > MAX_SAMPLER_DEPTH {
                    return Err(Error::Truncation { defect: f64::NAN, depth });
                }
                let unitary = BlockUnitary::new(self.r, self.params.phi(), ad as i64, depth)?;
                self.blocks.insert(ad, SamplerBlock { unitary, cdfs: HashMap::new() });
                continue;
            }
            let probs = block.unitary.column_probabilities(m0 as usize);
            let mut acc = 0.0;
            let cdf: Vec<f64> = probs
                .iter()
                .map(|&q| {
                    acc += q;
                    acc
                })
                .collect();
            block.cdfs.insert(m0 as u32, cdf);
            return Ok(());
        }
    }
}

/// Convenience wrapper: a fresh sampler, one batch of events.
pub fn sample_counts(p: &PdcParams, trials: u64, seed: u64) -> Result<Vec<(u32, u32)>> {
    CountSampler::new(p).sample(trials, seed)
}

fn geometric_for(mu: f64) -> Option<Geometric> {
    (mu > 0.0).then(|| {
        Geometric::new(1.0 / (1.0 + mu)).expect("valid geometric success probability")
    })
}

/// First-guess block depth for a sampled column: covers the broadened
/// output support with generous margin; validated by the tail check.
fn initial_depth(muk: f64, ad: u64, m0: u64) -> usize {
    let load = 1.0 + ad as f64 + 2.0 * m0 as f64;
    let mean = m0 as f64 + muk * load;
    let spread = (muk * (1.0 + muk) * load + m0 as f64 + 1.0).sqrt();
    (((mean + 12.0 * spread + 16.0) * 1.3).ceil() as usize).clamp(8, MAX_SAMPLER_DEPTH)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(mu1: f64, mu2: f64, muk: f64) -> PdcParams {
        PdcParams::new(mu1, mu2, muk, 0.0).unwrap()
    }

    #[test]
    fn thermal_law_normalizes() {
        for mu in [0.0, 0.3, 2.0] {
            let total: f64 = (0..400).map(|n| thermal_prob(mu, n)).sum();
            assert!((total - 1.0).abs() < 1e-10, "mu={mu} total={total}");
        }
        let d = thermal_cutoff(1.5, 1e-10);
        let tail = (1.5f64 / 2.5).powi(d as i32);
        assert!(tail < 1e-10);
        assert!((1.5f64 / 2.5).powi(d as i32 - 1) >= 1e-10);
    }

    #[test]
    fn zero_squeeze_block_is_identity() {
        let block = BlockUnitary::new(0.0, 0.4, 3, 16).unwrap();
        for m0 in 0..16 {
            let probs = block.column_probabilities(m0);
            for (k, &q) in probs.iter().enumerate() {
                assert_eq!(q, if k == m0 { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(block.unitarity_defect(), 0.0);
    }

    #[test]
    fn block_rejects_bad_arguments() {
        assert!(BlockUnitary::new(-0.1, 0.0, 0, 8).is_err());
        assert!(BlockUnitary::new(0.5, 0.0, 0, 1).is_err());
        assert!(BlockUnitary::new(f64::NAN, 0.0, 0, 8).is_err());
    }

    #[test]
    fn vacuum_column_reproduces_twin_beam_weights() {
        // d = 0, input |0,0>: |c_j|^2 = muk^j / (1 + muk)^(j+1).
        let muk = 0.5f64;
        let r = muk.sqrt().asinh();
        let block = BlockUnitary::new(r, 0.0, 0, 64).unwrap();
        let probs = block.column_probabilities(0);
        for j in 0..20 {
            let expect = muk.powi(j as i32) / (1.0 + muk).powi(j as i32 + 1);
            assert!((probs[j] - expect).abs() < 1e-12, "j={j}: {} vs {expect}", probs[j]);
        }
    }

    #[test]
    fn column_norms_are_unit() {
        let block = BlockUnitary::new(0.8, 1.3, 2, 48).unwrap();
        for m0 in 0..24 {
            let norm: f64 = block.column_probabilities(m0).iter().sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unitarity_defect_is_tiny() {
        let block = BlockUnitary::new(0.66, 0.9, 1, 96).unwrap();
        assert!(block.unitarity_defect() < 1e-8);
    }

    #[test]
    fn probabilities_are_phase_independent() {
        let r = 0.6;
        let a = BlockUnitary::new(r, 0.0, 2, 40).unwrap();
        let b = BlockUnitary::new(r, 1.234, 2, 40).unwrap();
        for m0 in [0usize, 3, 7] {
            let pa = a.column_probabilities(m0);
            let pb = b.column_probabilities(m0);
            for (x, y) in pa.iter().zip(&pb) {
                assert!((x - y).abs() < 1e-14);
            }
            // The amplitudes themselves do differ by phases only.
            let aa = a.column_amplitudes(m0);
            let ab = b.column_amplitudes(m0);
            for (x, y) in aa.iter().zip(&ab) {
                assert!((x.norm() - y.norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pmf_of_vacuum_is_point_mass() {
        let pmf = joint_pmf_auto(&params(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(pmf.len(), 1);
        assert_eq!(pmf.prob(0, 0), 1.0);
        assert!(pmf.trace_defect().abs() < 1e-12);
    }

    #[test]
    fn twin_beam_pmf_is_diagonal_geometric() {
        let muk = 0.5;
        let pmf = joint_pmf_auto(&params(0.0, 0.0, muk)).unwrap();
        for n in 0u32..12 {
            let expect = muk.powi(n as i32) / (1.0 + muk).powi(n as i32 + 1);
            assert!((pmf.prob(n, n) - expect).abs() < 1e-11);
        }
        for (&(k, l), _) in pmf.iter() {
            assert_eq!(k, l, "off-diagonal mass at ({k}, {l})");
        }
    }

    #[test]
    fn seeded_pmf_keeps_mean_difference() {
        let pmf = joint_pmf_auto(&params(1.0, 0.0, 0.3)).unwrap();
        let m = pmf.moments();
        assert!((m.diff_means() - 1.0).abs() < 1e-7);
        assert!(pmf.trace_defect() < TRACE_DEFECT_TOL);
    }

    #[test]
    fn pmf_moments_match_analytic() {
        for (mu1, mu2, muk) in [(0.5, 0.5, 0.2), (1.0, 0.3, 0.4), (0.0, 1.2, 0.5)] {
            let p = params(mu1, mu2, muk);
            let pmf = joint_pmf_auto(&p).unwrap();
            let got = pmf.moments();
            let want = output_moments(&p);
            let scale = |x: f64| x.abs().max(1e-9);
            assert!((got.n1 - want.n1).abs() / scale(want.n1) < 1e-6);
            assert!((got.n2 - want.n2).abs() / scale(want.n2) < 1e-6);
            assert!((got.var1 - want.var1).abs() / scale(want.var1) < 1e-6);
            assert!((got.var2 - want.var2).abs() / scale(want.var2) < 1e-6);
            assert!((got.var_diff - want.var_diff).abs() / scale(want.var_diff) < 1e-6);
        }
    }

    #[test]
    fn pmf_support_conserves_difference_range() {
        let pmf = joint_pmf_auto(&params(0.8, 0.2, 0.3)).unwrap();
        let d1 = thermal_cutoff(0.8, 1e-10) as i64;
        let d2 = thermal_cutoff(0.2, 1e-10) as i64;
        for (&(k, l), _) in pmf.iter() {
            let d = k as i64 - l as i64;
            assert!(d < d1 && -d < d2, "difference {d} outside input support");
        }
    }

    #[test]
    fn undersized_cutoff_is_reported() {
        let err = joint_pmf(&params(1.0, 1.0, 0.5), 4).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn sampler_is_deterministic() {
        let p = params(0.7, 0.2, 0.4);
        let a = sample_counts(&p, 500, 42).unwrap();
        let b = sample_counts(&p, 500, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_counts(&p, 500, 43).unwrap();
        assert_ne!(a, c);
        // A warmed cache must not change the stream.
        let mut sampler = CountSampler::new(&p);
        let _ = sampler.sample(200, 7).unwrap();
        let warm = sampler.sample(500, 42).unwrap();
        assert_eq!(a, warm);
    }

    #[test]
    fn zero_gain_sampler_passes_inputs_through() {
        let events = CountSampler::new(&params(1.0, 0.5, 0.0)).sample_detailed(400, 9).unwrap();
        for ev in events {
            assert_eq!(ev.input, ev.output);
        }
    }

    #[test]
    fn sampled_events_conserve_difference() {
        let events = CountSampler::new(&params(1.2, 0.6, 0.8)).sample_detailed(2000, 11).unwrap();
        for ev in events {
            let din = ev.input.0 as i64 - ev.input.1 as i64;
            let dout = ev.output.0 as i64 - ev.output.1 as i64;
            assert_eq!(din, dout);
        }
    }

    #[test]
    fn sample_mean_difference_tracks_seeds() {
        // (2, 0, 1): mean of k - l is 2, sd per event sqrt(varH) = sqrt(6).
        let trials = 100_000u64;
        let events = sample_counts(&params(2.0, 0.0, 1.0), trials, 1234).unwrap();
        let mean: f64 = events.iter().map(|&(k, l)| k as f64 - l as f64).sum::<f64>()
            / trials as f64;
        let stderr = (6.0f64 / trials as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * stderr, "mean {mean} vs 2 +- {stderr}");
    }

    #[test]
    fn sampler_rejects_zero_trials() {
        assert!(sample_counts(&params(0.0, 0.0, 0.1), 0, 1).is_err());
    }

    #[test]
    fn auto_cutoff_grows_with_occupation() {
        let small = auto_cutoff(&params(0.0, 0.0, 0.1));
        let large = auto_cutoff(&params(1.5, 1.5, 0.5));
        assert!(small >= 16);
        assert!(large > small);
    }

    #[test]
    fn sampled_moments_match_pmf_weights() {
        // Empirical pmf from the sampler against the enumerated pmf.
        let p = params(0.4, 0.1, 0.3);
        let pmf = joint_pmf_auto(&p).unwrap();
        let trials = 60_000u64;
        let events = sample_counts(&p, trials, 77).unwrap();
        let mut hist: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        for ev in events {
            *hist.entry(ev).or_insert(0) += 1;
        }
        // Check the few most likely cells at 5 sigma.
        for (&(k, l), &q) in pmf.iter().filter(|(_, &q)| q > 0.01) {
            let got = *hist.get(&(k, l)).unwrap_or(&0) as f64 / trials as f64;
            let sigma = (q * (1.0 - q) / trials as f64).sqrt();
            assert!(
                (got - q).abs() < 5.0 * sigma,
                "cell ({k},{l}): empirical {got} vs exact {q}"
            );
        }
    }
}
