//! Cross-spectra and locally stationary replicate-coherence between
//! trial pairs.
//!
//! Cross-periodograms are smoothed over shifted replicate pairs
//! `(r+s, r'+s)`, `s = -M..M`. Near the replicate edges the shift range
//! truncates so both members stay in range, and the same truncated window
//! is applied to the numerator and to both autospectral denominators;
//! identical windows are what make the Cauchy-Schwarz unit bound available
//! in the smooth-then-correct order.
//!
//! The full `J x T x R x R` coherence tensor is never materialized; the
//! public surface exposes per-reference-replicate slices, per-pair series,
//! and a streamed all-pairs visitor for Monte-Carlo scoring.

use crate::error::{Error, Result};
use crate::spectral::{apply_inverse, running_mean_axis};
use crate::transform::{ndwt_ensemble, CoefficientField, ReplicateEnsemble};
use crate::wavelet::{DiscreteWaveletSet, InnerProductMatrix};
use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

/// Order of bias correction relative to replicate smoothing.
///
/// The theory smooths raw cross-periodograms and then corrects;
/// correcting first (and truncating negative autospectra) is the practical
/// choice that keeps the denominators nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PipelineOrder {
    CorrectThenSmooth,
    SmoothThenCorrect,
}

impl PipelineOrder {
    pub fn label(&self) -> &'static str {
        match self {
            PipelineOrder::CorrectThenSmooth => "correct-then-smooth",
            PipelineOrder::SmoothThenCorrect => "smooth-then-correct",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "correct-then-smooth" => Ok(PipelineOrder::CorrectThenSmooth),
            "smooth-then-correct" => Ok(PipelineOrder::SmoothThenCorrect),
            other => Err(Error::Config(format!("unknown pipeline order `{other}`"))),
        }
    }
}

/// Normalization of the coherence ratio.
///
/// `Corrected` divides the corrected cross-spectrum by the corrected
/// autospectra. Its values are not confined to `[-1, 1]`: the inverse
/// inner-product matrix has mixed-sign rows, so the Cauchy-Schwarz bound
/// on the smoothed periodograms does not survive the correction (clamping
/// exists for this reason).
///
/// `PeriodogramLevel` normalizes the smoothed cross-periodogram by the
/// smoothed auto-periodograms; any per-scale correction factor cancels in
/// the ratio, the unit bound holds exactly, and no truncation is needed
/// (the denominators are sums of squares). This is the variant the
/// benchmark reference values correspond to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoherenceNormalization {
    Corrected,
    PeriodogramLevel,
}

impl CoherenceNormalization {
    pub fn label(&self) -> &'static str {
        match self {
            CoherenceNormalization::Corrected => "corrected",
            CoherenceNormalization::PeriodogramLevel => "periodogram-level",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "corrected" => Ok(CoherenceNormalization::Corrected),
            "periodogram-level" | "periodogram" => Ok(CoherenceNormalization::PeriodogramLevel),
            other => Err(Error::Config(format!("unknown normalization `{other}`"))),
        }
    }
}

/// Configuration of the coherence pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherencePipelineConfig {
    /// Replicate half-window `M`; the same window feeds the cross term
    /// and both autospectral denominators.
    pub replicate_half_window: usize,
    /// Time half-window `M_T`; 0 disables time smoothing.
    pub time_half_window: usize,
    pub order: PipelineOrder,
    /// Truncate negative corrected autospectra at zero (before smoothing
    /// in the correct-then-smooth order, after in smooth-then-correct).
    pub truncate_negative: bool,
    /// Clamp coherence values into `[-1, 1]`, recording the fraction.
    pub clamp_to_unit: bool,
    /// Denominator floor, relative to the largest denominator-field
    /// magnitude; points with a denominator at or below the floor are
    /// emitted as missing (NaN), not invented numbers.
    pub floor_epsilon_rel: f64,
    /// Correction truncation `J = floor(alpha * log2 T)`.
    pub alpha: f64,
    /// Ratio normalization; `order` and `truncate_negative` only affect
    /// the `Corrected` variant.
    pub normalization: CoherenceNormalization,
}

impl CoherencePipelineConfig {
    /// The practical pipeline: correct first, truncate negative
    /// autospectra, clamp into the unit interval.
    pub fn correct_then_smooth(m: usize) -> Self {
        CoherencePipelineConfig {
            replicate_half_window: m,
            time_half_window: 0,
            order: PipelineOrder::CorrectThenSmooth,
            truncate_negative: true,
            clamp_to_unit: true,
            floor_epsilon_rel: 1e-12,
            alpha: 1.0,
            normalization: CoherenceNormalization::Corrected,
        }
    }

    /// The theoretical pipeline: smooth raw periodograms, then correct.
    /// No truncation or clamping, so the unit bound is the estimator's own.
    pub fn smooth_then_correct(m: usize) -> Self {
        CoherencePipelineConfig {
            replicate_half_window: m,
            time_half_window: 0,
            order: PipelineOrder::SmoothThenCorrect,
            truncate_negative: false,
            clamp_to_unit: false,
            floor_epsilon_rel: 1e-12,
            alpha: 1.0,
            normalization: CoherenceNormalization::Corrected,
        }
    }

    /// The table-reproducing pipeline: the coherence ratio at the
    /// periodogram level, where the correction cancels and the unit bound
    /// is exact.
    pub fn periodogram_level(m: usize) -> Self {
        CoherencePipelineConfig {
            replicate_half_window: m,
            time_half_window: 0,
            order: PipelineOrder::SmoothThenCorrect,
            truncate_negative: false,
            clamp_to_unit: false,
            floor_epsilon_rel: 1e-12,
            alpha: 1.0,
            normalization: CoherenceNormalization::PeriodogramLevel,
        }
    }

    pub fn validate(&self, r_count: usize, t_len: usize) -> Result<()> {
        if 2 * self.replicate_half_window + 1 > r_count {
            return Err(Error::Config(format!(
                "replicate window 2*{}+1 exceeds R={r_count}",
                self.replicate_half_window
            )));
        }
        if 2 * self.time_half_window + 1 > t_len {
            return Err(Error::Config(format!(
                "time window 2*{}+1 exceeds T={t_len}",
                self.time_half_window
            )));
        }
        if self.floor_epsilon_rel <= 0.0 {
            return Err(Error::Config("floor epsilon must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0,1], got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn scale_count(&self, t_len: usize) -> usize {
        let j_t = t_len.trailing_zeros() as usize;
        ((self.alpha * j_t as f64).floor() as usize).clamp(1, j_t)
    }
}

/// A corrected cross-spectrum estimate for one replicate pair.
#[derive(Debug, Clone)]
pub struct CrossSpectrum {
    /// `J x T` corrected, replicate-smoothed cross-spectrum values.
    pub values: Array2<f64>,
    /// Whether the shift window was truncated at a replicate edge.
    pub edge_truncated: bool,
}

/// One coherence slice: all pairs `(r, r')` for a fixed scale and
/// reference replicate.
#[derive(Debug, Clone)]
pub struct CoherenceSlice {
    level: usize,
    reference: usize,
    /// `T x R` values `rho_hat_j(k/T, r/R, r'/R)`; NaN marks points whose
    /// denominator fell at or below the floor.
    values: Array2<f64>,
    clamp_fraction: f64,
    missing: usize,
}

impl CoherenceSlice {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn value(&self, k: usize, r_prime: usize) -> f64 {
        self.values[(k, r_prime)]
    }

    pub fn clamp_fraction(&self) -> f64 {
        self.clamp_fraction
    }

    pub fn missing_count(&self) -> usize {
        self.missing
    }
}

/// Shared state for coherence computations over one coefficient field:
/// the corrected (optionally truncated, optionally time-smoothed)
/// autospectra, their replicate prefix sums, and the denominator floor.
pub struct CoherenceEngine<'a> {
    coeffs: &'a CoefficientField,
    ipm: &'a InnerProductMatrix,
    cfg: CoherencePipelineConfig,
    auto_prefix: Array3<f64>,
    floor_abs: f64,
    j_max: usize,
    t_len: usize,
    r_count: usize,
}

impl<'a> CoherenceEngine<'a> {
    pub fn new(
        coeffs: &'a CoefficientField,
        ipm: &'a InnerProductMatrix,
        cfg: CoherencePipelineConfig,
    ) -> Result<Self> {
        let (j_max, t_len, r_count) = (
            coeffs.scale_count(),
            coeffs.series_len(),
            coeffs.replicate_count(),
        );
        cfg.validate(r_count, t_len)?;
        if ipm.j_max() != j_max {
            return Err(Error::Config(format!(
                "scale mismatch: coefficients have {} scales, matrix built for {}",
                j_max,
                ipm.j_max()
            )));
        }
        let raw_auto = coeffs.values().mapv(|v| v * v);
        let mut auto_work = match cfg.normalization {
            CoherenceNormalization::Corrected => {
                let mut corrected = apply_inverse(&raw_auto, ipm);
                if cfg.order == PipelineOrder::CorrectThenSmooth && cfg.truncate_negative {
                    corrected.mapv_inplace(|v| v.max(0.0));
                }
                corrected
            }
            CoherenceNormalization::PeriodogramLevel => raw_auto,
        };
        if cfg.time_half_window > 0 {
            auto_work = running_mean_axis(&auto_work, Axis(1), cfg.time_half_window);
        }
        let field_max = auto_work.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let floor_abs = cfg.floor_epsilon_rel * field_max;
        let mut auto_prefix = Array3::zeros((j_max, t_len, r_count + 1));
        for j in 0..j_max {
            for k in 0..t_len {
                let mut acc = 0.0;
                for r in 0..r_count {
                    acc += auto_work[(j, k, r)];
                    auto_prefix[(j, k, r + 1)] = acc;
                }
            }
        }
        Ok(CoherenceEngine {
            coeffs,
            ipm,
            cfg,
            auto_prefix,
            floor_abs,
            j_max,
            t_len,
            r_count,
        })
    }

    pub fn config(&self) -> &CoherencePipelineConfig {
        &self.cfg
    }

    pub fn floor_abs(&self) -> f64 {
        self.floor_abs
    }

    /// `(scale count, series length, replicate count)` of the field.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.j_max, self.t_len, self.r_count)
    }

    fn check_replicate(&self, r: usize) -> Result<()> {
        if r >= self.r_count {
            return Err(Error::IndexOutOfRange(format!(
                "replicate {r} outside 0..{}",
                self.r_count
            )));
        }
        Ok(())
    }

    /// Common truncated shift window for a pair: `s in [-lo, hi]`.
    fn pair_window(&self, r: usize, r_prime: usize) -> (usize, usize) {
        let m = self.cfg.replicate_half_window;
        let lo = m.min(r).min(r_prime);
        let hi = m.min(self.r_count - 1 - r).min(self.r_count - 1 - r_prime);
        (lo, hi)
    }

    /// Whether denominators are truncated after windowing (smooth-then-
    /// correct order only; periodogram-level denominators are nonnegative
    /// by construction).
    fn post_truncates(&self) -> bool {
        self.cfg.normalization == CoherenceNormalization::Corrected
            && self.cfg.order == PipelineOrder::SmoothThenCorrect
            && self.cfg.truncate_negative
    }

    /// Windowed mean of the working autospectra around replicate `r`,
    /// over shifts `[-lo, hi]`.
    fn auto_mean(&self, j: usize, k: usize, r: usize, lo: usize, hi: usize) -> f64 {
        let a = self.auto_prefix[(j - 1, k, r + hi + 1)] - self.auto_prefix[(j - 1, k, r - lo)];
        a / (lo + hi + 1) as f64
    }

    /// Smoothed raw cross-periodogram for a pair (time-smoothed when
    /// configured), before any correction.
    fn smoothed_cross(&self, r: usize, r_prime: usize) -> Array3<f64> {
        let (lo, hi) = self.pair_window(r, r_prime);
        let d = self.coeffs.values();
        let mut smoothed = Array3::zeros((self.j_max, self.t_len, 1));
        let inv_count = 1.0 / (lo + hi + 1) as f64;
        for l in 0..self.j_max {
            for k in 0..self.t_len {
                let mut s = 0.0;
                for off in 0..=(lo + hi) {
                    let base = r + off - lo;
                    let base_p = r_prime + off - lo;
                    s += d[(l, k, base)] * d[(l, k, base_p)];
                }
                smoothed[(l, k, 0)] = s * inv_count;
            }
        }
        if self.cfg.time_half_window > 0 {
            smoothed = running_mean_axis(&smoothed, Axis(1), self.cfg.time_half_window);
        }
        smoothed
    }

    /// Corrected, smoothed cross-spectrum for a pair, a `J x T` array.
    /// The correction and the smoothing are both linear, so the result is
    /// the same under either pipeline order.
    pub fn cross_spectrum(&self, r: usize, r_prime: usize) -> Result<CrossSpectrum> {
        self.check_replicate(r)?;
        self.check_replicate(r_prime)?;
        let (lo, hi) = self.pair_window(r, r_prime);
        let m = self.cfg.replicate_half_window;
        let corrected = apply_inverse(&self.smoothed_cross(r, r_prime), self.ipm);
        let values = corrected.index_axis(Axis(2), 0).to_owned();
        Ok(CrossSpectrum {
            values,
            edge_truncated: lo + hi < 2 * m,
        })
    }

    /// Coherence series over time for one pair at one scale. NaN marks
    /// missing points; the second return is the number of clamped values.
    pub fn pair_series(&self, j: usize, r: usize, r_prime: usize) -> Result<(Vec<f64>, usize)> {
        if j < 1 || j > self.j_max {
            return Err(Error::IndexOutOfRange(format!(
                "scale {j} outside 1..={}",
                self.j_max
            )));
        }
        self.check_replicate(r)?;
        self.check_replicate(r_prime)?;
        let (lo, hi) = self.pair_window(r, r_prime);
        let mut out = vec![f64::NAN; self.t_len];
        let post_truncate = self.post_truncates();
        if r == r_prime {
            // self-coherence: the "cross" term is the autospectrum itself,
            // truncation included, so the ratio is exactly 1 where defined
            for (k, slot) in out.iter_mut().enumerate() {
                let mut den = self.auto_mean(j, k, r, lo, hi);
                if post_truncate {
                    den = den.max(0.0);
                }
                if den > self.floor_abs {
                    *slot = 1.0;
                }
            }
            return Ok((out, 0));
        }
        let mut clamped = 0usize;
        let numerator = match self.cfg.normalization {
            CoherenceNormalization::Corrected => self.cross_spectrum(r, r_prime)?.values,
            CoherenceNormalization::PeriodogramLevel => self
                .smoothed_cross(r, r_prime)
                .index_axis(Axis(2), 0)
                .to_owned(),
        };
        for k in 0..self.t_len {
            let num = numerator[(j - 1, k)];
            let mut den_r = self.auto_mean(j, k, r, lo, hi);
            let mut den_rp = self.auto_mean(j, k, r_prime, lo, hi);
            if post_truncate {
                den_r = den_r.max(0.0);
                den_rp = den_rp.max(0.0);
            }
            if den_r <= self.floor_abs || den_rp <= self.floor_abs {
                continue;
            }
            let mut rho = num / (den_r * den_rp).sqrt();
            if self.cfg.normalization == CoherenceNormalization::PeriodogramLevel {
                // within [-1,1] by Cauchy-Schwarz; strip summation dust
                debug_assert!(rho.abs() <= 1.0 + 1e-6, "unit bound broken: {rho}");
                rho = rho.clamp(-1.0, 1.0);
            } else if self.cfg.clamp_to_unit && rho.abs() > 1.0 {
                rho = rho.clamp(-1.0, 1.0);
                clamped += 1;
            }
            out[k] = rho;
        }
        Ok((out, clamped))
    }

    /// All pairs `(r, r')` at one scale for a fixed reference replicate.
    pub fn slice(&self, j: usize, r: usize) -> Result<CoherenceSlice> {
        let mut values = Array2::from_elem((self.t_len, self.r_count), f64::NAN);
        let mut clamped = 0usize;
        for r_prime in 0..self.r_count {
            let (series, c) = self.pair_series(j, r, r_prime)?;
            clamped += c;
            for (k, v) in series.into_iter().enumerate() {
                values[(k, r_prime)] = v;
            }
        }
        let missing = values.iter().filter(|v| v.is_nan()).count();
        let defined = values.len() - missing;
        Ok(CoherenceSlice {
            level: j,
            reference: r,
            values,
            clamp_fraction: if defined > 0 {
                clamped as f64 / defined as f64
            } else {
                0.0
            },
            missing,
        })
    }
}

/// Per-run statistics from the all-pairs visitor.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllPairsStats {
    pub defined: u64,
    pub missing: u64,
    pub clamped: u64,
}

/// Stream the coherence estimate at one replicate offset `delta`, visiting
/// every base replicate `r = i`, scale and time point with the pair
/// `(r, r + delta)`. NaN marks missing points. Iteration order: base
/// replicate, then scale, then time.
///
/// Offsets partition the unordered pairs, so Monte-Carlo accumulators can
/// process offsets in parallel into disjoint storage.
pub fn for_delta_pair_coherence<F>(
    engine: &CoherenceEngine<'_>,
    delta: usize,
    mut visit: F,
) -> AllPairsStats
where
    F: FnMut(usize, usize, usize, f64),
{
    let (j_max, t_len, r_count) = (engine.j_max, engine.t_len, engine.r_count);
    let m = engine.cfg.replicate_half_window;
    let post_truncate = engine.post_truncates();
    let mut stats = AllPairsStats::default();
    assert!(delta < r_count, "offset {delta} outside 0..{r_count}");
    if delta == 0 {
        // diagonal pairs are self-coherences: 1 where defined
        for r in 0..r_count {
            let lo = m.min(r);
            let hi = m.min(r_count - 1 - r);
            for j in 1..=j_max {
                for k in 0..t_len {
                    let mut den = engine.auto_mean(j, k, r, lo, hi);
                    if post_truncate {
                        den = den.max(0.0);
                    }
                    if den > engine.floor_abs {
                        stats.defined += 1;
                        visit(j, k, r, 1.0);
                    } else {
                        stats.missing += 1;
                        visit(j, k, r, f64::NAN);
                    }
                }
            }
        }
        return stats;
    }
    let width = r_count - delta;
    let d = engine.coeffs.values();
    // cross products at replicate lag delta, corrected when the ratio is
    // normalized at the spectrum level
    let mut w = Array3::zeros((j_max, t_len, width));
    for l in 0..j_max {
        for k in 0..t_len {
            for i in 0..width {
                w[(l, k, i)] = d[(l, k, i)] * d[(l, k, i + delta)];
            }
        }
    }
    let mut x = match engine.cfg.normalization {
        CoherenceNormalization::Corrected => apply_inverse(&w, engine.ipm),
        CoherenceNormalization::PeriodogramLevel => w,
    };
    if engine.cfg.time_half_window > 0 {
        x = running_mean_axis(&x, Axis(1), engine.cfg.time_half_window);
    }
    // prefix sums over the pair-base index
    let mut prefix = Array3::zeros((j_max, t_len, width + 1));
    for j in 0..j_max {
        for k in 0..t_len {
            let mut acc = 0.0;
            for i in 0..width {
                acc += x[(j, k, i)];
                prefix[(j, k, i + 1)] = acc;
            }
        }
    }
    for i in 0..width {
        let (r, rp) = (i, i + delta);
        let lo = m.min(r);
        let hi = m.min(r_count - 1 - rp);
        let inv_count = 1.0 / (lo + hi + 1) as f64;
        for j in 1..=j_max {
            for k in 0..t_len {
                let num = (prefix[(j - 1, k, i + hi + 1)] - prefix[(j - 1, k, i - lo)]) * inv_count;
                let mut den_r = engine.auto_mean(j, k, r, lo, hi);
                let mut den_rp = engine.auto_mean(j, k, rp, lo, hi);
                if post_truncate {
                    den_r = den_r.max(0.0);
                    den_rp = den_rp.max(0.0);
                }
                if den_r <= engine.floor_abs || den_rp <= engine.floor_abs {
                    stats.missing += 1;
                    visit(j, k, i, f64::NAN);
                    continue;
                }
                let mut rho = num / (den_r * den_rp).sqrt();
                if engine.cfg.normalization == CoherenceNormalization::PeriodogramLevel {
                    // within [-1,1] by Cauchy-Schwarz; strip summation dust
                    debug_assert!(rho.abs() <= 1.0 + 1e-6, "unit bound broken: {rho}");
                    rho = rho.clamp(-1.0, 1.0);
                } else if engine.cfg.clamp_to_unit && rho.abs() > 1.0 {
                    rho = rho.clamp(-1.0, 1.0);
                    stats.clamped += 1;
                }
                stats.defined += 1;
                visit(j, k, i, rho);
            }
        }
    }
    stats
}

/// Stream the coherence estimate over every unordered pair `r' >= r`,
/// every scale and every time point, without materializing the tensor.
///
/// The visitor receives `(j, k, r, r_prime, rho_hat)` with `rho_hat` NaN
/// at missing points. Iteration order is deterministic: ascending pair
/// offset `delta = r' - r`, then `r`, then scale, then time.
pub fn for_each_pair_coherence<F>(
    engine: &CoherenceEngine<'_>,
    mut visit: F,
) -> Result<AllPairsStats>
where
    F: FnMut(usize, usize, usize, usize, f64),
{
    let mut stats = AllPairsStats::default();
    for delta in 0..engine.r_count {
        let s = for_delta_pair_coherence(engine, delta, |j, k, i, rho| {
            visit(j, k, i, i + delta, rho);
        });
        stats.defined += s.defined;
        stats.missing += s.missing;
        stats.clamped += s.clamped;
    }
    Ok(stats)
}

fn build_engine_parts(
    ensemble: &ReplicateEnsemble,
    basis: &DiscreteWaveletSet,
    cfg: &CoherencePipelineConfig,
) -> Result<(CoefficientField, InnerProductMatrix)> {
    let j_est = cfg.scale_count(ensemble.series_len());
    let coeffs = ndwt_ensemble(ensemble, basis, j_est)?;
    let ipm = crate::wavelet::inner_product_matrix(basis)?
        .truncated(j_est, &basis.family().label())?;
    Ok((coeffs, ipm))
}

/// Corrected, replicate-smoothed cross-spectrum between two replicates.
pub fn estimate_cross_spectrum(
    coeffs: &CoefficientField,
    r: usize,
    r_prime: usize,
    ipm: &InnerProductMatrix,
    cfg: &CoherencePipelineConfig,
) -> Result<CrossSpectrum> {
    let engine = CoherenceEngine::new(coeffs, ipm, cfg.clone())?;
    engine.cross_spectrum(r, r_prime)
}

/// Coherence slice for a scale and reference replicate, straight from an
/// ensemble.
pub fn estimate_coherence_slice(
    ensemble: &ReplicateEnsemble,
    basis: &DiscreteWaveletSet,
    j: usize,
    r: usize,
    cfg: &CoherencePipelineConfig,
) -> Result<CoherenceSlice> {
    let (coeffs, ipm) = build_engine_parts(ensemble, basis, cfg)?;
    let engine = CoherenceEngine::new(&coeffs, &ipm, cfg.clone())?;
    engine.slice(j, r)
}

/// Coherence series over time for one replicate pair.
pub fn coherence_pair_series(
    ensemble: &ReplicateEnsemble,
    basis: &DiscreteWaveletSet,
    j: usize,
    r: usize,
    r_prime: usize,
    cfg: &CoherencePipelineConfig,
) -> Result<Vec<f64>> {
    let (coeffs, ipm) = build_engine_parts(ensemble, basis, cfg)?;
    let engine = CoherenceEngine::new(&coeffs, &ipm, cfg.clone())?;
    Ok(engine.pair_series(j, r, r_prime)?.0)
}
