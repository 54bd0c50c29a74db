//! Periodogram smoothing, bias correction by the inverse inner-product
//! matrix, and the replicate local autocovariance.
//!
//! Smoothing windows truncate to the available indices at field edges and
//! renormalize by the actual window size. Scoring separately excludes the
//! replicate edges (see [`crate::evaluate`]); keeping the estimates defined
//! everywhere lets exports stay rectangular.

use crate::error::{Error, Result};
use crate::transform::{
    ndwt_ensemble, raw_periodogram, PeriodogramField, PeriodogramKind, ReplicateEnsemble,
};
use crate::wavelet::{AutocorrelationSet, DiscreteWaveletSet, InnerProductMatrix};
use ndarray::{Array3, Axis};
use serde::{Deserialize, Serialize};

/// Smoothing and correction parameters for spectral estimation.
///
/// `replicate_half_window` is the `M` of a `(2M+1)`-wide replicate window;
/// `time_half_window` (`M_T`) of 0 disables time smoothing. `alpha`
/// truncates the correction to `J = floor(alpha * log2 T)` scales.
/// Windows truncate and renormalize at the edges of the field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub replicate_half_window: usize,
    pub time_half_window: usize,
    pub alpha: f64,
    pub truncate_negative: bool,
}

impl SmoothingConfig {
    /// Replicate-only smoothing with the given half window, `alpha = 1`,
    /// no negative truncation.
    pub fn replicate_only(m: usize) -> Self {
        SmoothingConfig {
            replicate_half_window: m,
            time_half_window: 0,
            alpha: 1.0,
            truncate_negative: false,
        }
    }

    /// Time-and-replicate smoothing.
    pub fn time_replicate(m: usize, m_t: usize) -> Self {
        SmoothingConfig {
            time_half_window: m_t,
            ..Self::replicate_only(m)
        }
    }

    /// The rule-of-thumb replicate window: `(2M+1) = 0.15 R`.
    pub fn default_replicate_half_window(r_count: usize) -> usize {
        (((0.15 * r_count as f64) - 1.0) / 2.0).floor().max(0.0) as usize
    }

    /// Default time half-window when time smoothing is requested.
    pub fn default_time_half_window(t_len: usize) -> usize {
        (0.05 * t_len as f64).floor() as usize
    }

    /// Number of scales retained by the correction, `floor(alpha * log2 T)`.
    pub fn scale_count(&self, t_len: usize) -> usize {
        let j_t = t_len.trailing_zeros() as usize;
        ((self.alpha * j_t as f64).floor() as usize).min(j_t)
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
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0,1], got {}", self.alpha)));
        }
        if self.scale_count(t_len) < 1 {
            return Err(Error::Config(format!(
                "alpha={} leaves no scales at T={t_len}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// A corrected spectral estimate on the `(j, k/T, r/R)` grid, together
/// with the configuration that produced it.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    s_hat: Array3<f64>,
    config: SmoothingConfig,
    valid_replicate_range: (usize, usize),
    clamp_fraction: f64,
}

impl SpectralEstimate {
    pub fn scale_count(&self) -> usize {
        self.s_hat.shape()[0]
    }

    pub fn series_len(&self) -> usize {
        self.s_hat.shape()[1]
    }

    pub fn replicate_count(&self) -> usize {
        self.s_hat.shape()[2]
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.s_hat
    }

    pub fn value(&self, j: usize, k: usize, r: usize) -> f64 {
        self.s_hat[(j - 1, k, r)]
    }

    pub fn config(&self) -> &SmoothingConfig {
        &self.config
    }

    /// Replicates whose smoothing window was not truncated: `[M, R - M)`.
    pub fn valid_replicate_range(&self) -> (usize, usize) {
        self.valid_replicate_range
    }

    /// Fraction of entries clamped to zero by negative truncation.
    pub fn clamp_fraction(&self) -> f64 {
        self.clamp_fraction
    }
}

/// Mean over a truncated-renormalized sliding window along one axis.
pub(crate) fn running_mean_axis(values: &Array3<f64>, axis: Axis, half: usize) -> Array3<f64> {
    if half == 0 {
        return values.clone();
    }
    let mut out = values.clone();
    let n = values.shape()[axis.0];
    let mut prefix = vec![0.0f64; n + 1];
    for (lane_in, mut lane_out) in values.lanes(axis).into_iter().zip(out.lanes_mut(axis)) {
        for (i, v) in lane_in.iter().enumerate() {
            prefix[i + 1] = prefix[i] + v;
        }
        for i in 0..n {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            lane_out[i] = (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64;
        }
    }
    out
}

/// Average raw periodograms over a `(2M+1)`-replicate window.
pub fn smooth_over_replicates(raw: &PeriodogramField, m: usize) -> Result<PeriodogramField> {
    if raw.kind() != PeriodogramKind::Raw {
        return Err(Error::Config(format!(
            "expected a raw periodogram field, got {:?}",
            raw.kind()
        )));
    }
    if 2 * m + 1 > raw.replicate_count() {
        return Err(Error::Config(format!(
            "replicate window 2*{m}+1 exceeds R={}",
            raw.replicate_count()
        )));
    }
    Ok(PeriodogramField::new(
        running_mean_axis(raw.values(), Axis(2), m),
        PeriodogramKind::ReplicateSmoothed,
        Some(m),
        None,
    ))
}

/// Average raw periodograms over a `(2M+1) x (2M_T+1)` replicate-by-time
/// rectangle. The rectangle mean separates into two sliding passes.
pub fn smooth_over_time_and_replicates(
    raw: &PeriodogramField,
    m: usize,
    m_t: usize,
) -> Result<PeriodogramField> {
    if raw.kind() != PeriodogramKind::Raw {
        return Err(Error::Config(format!(
            "expected a raw periodogram field, got {:?}",
            raw.kind()
        )));
    }
    if 2 * m + 1 > raw.replicate_count() {
        return Err(Error::Config(format!(
            "replicate window 2*{m}+1 exceeds R={}",
            raw.replicate_count()
        )));
    }
    if 2 * m_t + 1 > raw.series_len() {
        return Err(Error::Config(format!(
            "time window 2*{m_t}+1 exceeds T={}",
            raw.series_len()
        )));
    }
    let over_r = running_mean_axis(raw.values(), Axis(2), m);
    Ok(PeriodogramField::new(
        running_mean_axis(&over_r, Axis(1), m_t),
        PeriodogramKind::TimeReplicateSmoothed,
        Some(m),
        Some(m_t),
    ))
}

/// Apply a row of the inverse inner-product matrix across scales:
/// `out_j = sum_l Ainv_{j,l} input_l`, elementwise over `(k, r)`.
pub(crate) fn apply_inverse(values: &Array3<f64>, ipm: &InnerProductMatrix) -> Array3<f64> {
    let j_max = values.shape()[0];
    let mut out = Array3::zeros(values.raw_dim());
    for j in 1..=j_max {
        let mut panel = out.index_axis_mut(Axis(0), j - 1);
        for l in 1..=j_max {
            panel.scaled_add(ipm.a_inv(j, l), &values.index_axis(Axis(0), l - 1));
        }
    }
    out
}

/// De-bias a smoothed periodogram by the inverse inner-product matrix.
///
/// With `truncate_negative` set, negative corrected values are clamped to
/// zero and the clamped fraction is recorded on the estimate.
pub fn correct_spectrum(
    smoothed: &PeriodogramField,
    ipm: &InnerProductMatrix,
    config: &SmoothingConfig,
) -> Result<SpectralEstimate> {
    if smoothed.scale_count() != ipm.j_max() {
        return Err(Error::Config(format!(
            "scale mismatch: field has {} scales, matrix built for {}",
            smoothed.scale_count(),
            ipm.j_max()
        )));
    }
    let mut s_hat = apply_inverse(smoothed.values(), ipm);
    let mut clamp_fraction = 0.0;
    if config.truncate_negative {
        let total = s_hat.len();
        let mut clamped = 0usize;
        for v in s_hat.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                clamped += 1;
            }
        }
        clamp_fraction = clamped as f64 / total as f64;
    }
    let m = smoothed.replicate_half_window().unwrap_or(0);
    let r_count = smoothed.replicate_count();
    Ok(SpectralEstimate {
        s_hat,
        config: config.clone(),
        valid_replicate_range: (m.min(r_count), r_count.saturating_sub(m).max(m.min(r_count))),
        clamp_fraction,
    })
}

/// Full estimation pipeline: transform, raw periodogram, replicate (and
/// optional time) smoothing, then correction. Deterministic given inputs.
pub fn estimate_rews(
    ensemble: &ReplicateEnsemble,
    basis: &DiscreteWaveletSet,
    config: &SmoothingConfig,
) -> Result<SpectralEstimate> {
    config.validate(ensemble.replicate_count(), ensemble.series_len())?;
    let j_est = config.scale_count(ensemble.series_len());
    let coeffs = ndwt_ensemble(ensemble, basis, j_est)?;
    let raw = raw_periodogram(&coeffs);
    let smoothed = if config.time_half_window > 0 {
        smooth_over_time_and_replicates(&raw, config.replicate_half_window, config.time_half_window)?
    } else {
        smooth_over_replicates(&raw, config.replicate_half_window)?
    };
    let ipm = crate::wavelet::inner_product_matrix(basis)?
        .truncated(j_est, &basis.family().label())?;
    correct_spectrum(&smoothed, &ipm, config)
}

/// Baseline estimator that ignores replicate evolution: each replicate's
/// periodogram is smoothed over time, corrected, and the corrected
/// estimates are averaged over all replicates (the average is broadcast
/// back to every replicate for grid-compatible scoring).
pub fn estimate_lsw(
    ensemble: &ReplicateEnsemble,
    basis: &DiscreteWaveletSet,
    config: &SmoothingConfig,
) -> Result<SpectralEstimate> {
    let m_t = if config.time_half_window > 0 {
        config.time_half_window
    } else {
        SmoothingConfig::default_time_half_window(ensemble.series_len())
    };
    let lsw_config = SmoothingConfig {
        replicate_half_window: 0,
        time_half_window: m_t,
        ..config.clone()
    };
    lsw_config.validate(ensemble.replicate_count(), ensemble.series_len())?;
    let j_est = lsw_config.scale_count(ensemble.series_len());
    let coeffs = ndwt_ensemble(ensemble, basis, j_est)?;
    let raw = raw_periodogram(&coeffs);
    let smoothed = PeriodogramField::new(
        running_mean_axis(raw.values(), Axis(1), m_t),
        PeriodogramKind::TimeReplicateSmoothed,
        Some(0),
        Some(m_t),
    );
    let ipm = crate::wavelet::inner_product_matrix(basis)?
        .truncated(j_est, &basis.family().label())?;
    let per_replicate = correct_spectrum(&smoothed, &ipm, &lsw_config)?;
    // average over replicates, broadcast back
    let mean = per_replicate.s_hat.mean_axis(Axis(2)).expect("non-empty");
    let r_count = ensemble.replicate_count();
    let mut s_hat = Array3::zeros(per_replicate.s_hat.raw_dim());
    for r in 0..r_count {
        s_hat.index_axis_mut(Axis(2), r).assign(&mean);
    }
    Ok(SpectralEstimate {
        s_hat,
        config: lsw_config,
        valid_replicate_range: (0, r_count),
        clamp_fraction: per_replicate.clamp_fraction,
    })
}

/// Anything that can be evaluated as a spectrum on the rescaled grid.
pub trait SpectralSurface {
    fn surface_scale_count(&self) -> usize;
    /// Spectrum value at scale `j` (1-based), rescaled time `z` and
    /// rescaled replicate `nu`.
    fn surface_value(&self, j: usize, z: f64, nu: f64) -> f64;
}

impl SpectralSurface for SpectralEstimate {
    fn surface_scale_count(&self) -> usize {
        self.scale_count()
    }

    fn surface_value(&self, j: usize, z: f64, nu: f64) -> f64 {
        let t_len = self.series_len();
        let r_count = self.replicate_count();
        let k = ((z * t_len as f64).floor() as usize).min(t_len - 1);
        let r = ((nu * r_count as f64).floor() as usize).min(r_count - 1);
        self.value(j, k, r)
    }
}

/// Replicate local autocovariance `c(z, nu; tau) = sum_j S_j(z, nu) Psi_j(tau)`
/// over lags `-max_lag ..= max_lag`, in ascending lag order.
pub fn rlacv(
    surface: &dyn SpectralSurface,
    acs: &AutocorrelationSet,
    z: f64,
    nu: f64,
    max_lag: usize,
) -> Vec<f64> {
    let j_max = surface.surface_scale_count().min(acs.max_scale());
    let mut out = vec![0.0; 2 * max_lag + 1];
    for j in 1..=j_max {
        let s = surface.surface_value(j, z, nu);
        if s == 0.0 {
            continue;
        }
        let psi = acs.psi(j);
        for (i, v) in out.iter_mut().enumerate() {
            *v += s * psi.value(i as i64 - max_lag as i64);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{build_discrete_wavelets, WaveletFamily};
    use approx::assert_abs_diff_eq;
    use ndarray::{Array2, Array3};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn field_from(values: Array3<f64>) -> PeriodogramField {
        PeriodogramField::new(values, PeriodogramKind::Raw, None, None)
    }

    #[test]
    fn constant_field_is_unchanged_by_smoothing() {
        let values = Array3::from_elem((2, 4, 6), 3.25);
        let f = field_from(values);
        let sm = smooth_over_replicates(&f, 2).unwrap();
        assert!(sm.values().iter().all(|&v| (v - 3.25).abs() < 1e-12));
        let sm2 = smooth_over_time_and_replicates(&f, 2, 1).unwrap();
        assert!(sm2.values().iter().all(|&v| (v - 3.25).abs() < 1e-12));
    }

    #[test]
    fn zero_half_window_is_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let values = Array3::from_shape_fn((2, 4, 5), |_| rng.gen::<f64>());
        let f = field_from(values.clone());
        let sm = smooth_over_replicates(&f, 0).unwrap();
        assert_eq!(sm.values(), &values);
        assert_eq!(sm.kind(), PeriodogramKind::ReplicateSmoothed);
    }

    #[test]
    fn truncated_window_means_match_hand_computation() {
        // column (1,2,3,4,5) with M=1: edges (1.5, 4.5), interior (2,3,4)
        let mut values = Array3::zeros((1, 1, 5));
        for r in 0..5 {
            values[(0, 0, r)] = (r + 1) as f64;
        }
        let sm = smooth_over_replicates(&field_from(values), 1).unwrap();
        let expect = [1.5, 2.0, 3.0, 4.0, 4.5];
        for (r, want) in expect.iter().enumerate() {
            assert_abs_diff_eq!(sm.value(1, 0, r), want, epsilon = 1e-14);
        }
    }

    #[test]
    fn rectangle_mean_matches_direct_enumeration() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let values = Array3::from_shape_fn((2, 6, 7), |_| rng.gen::<f64>());
        let sm = smooth_over_time_and_replicates(&field_from(values.clone()), 1, 1).unwrap();
        for j in 0..2usize {
            for k in 0..6usize {
                for r in 0..7usize {
                    let (klo, khi) = (k.saturating_sub(1), (k + 1).min(5));
                    let (rlo, rhi) = (r.saturating_sub(1), (r + 1).min(6));
                    let mut sum = 0.0;
                    let mut n = 0.0;
                    for kk in klo..=khi {
                        for rr in rlo..=rhi {
                            sum += values[(j, kk, rr)];
                            n += 1.0;
                        }
                    }
                    assert_abs_diff_eq!(sm.values()[(j, k, r)], sum / n, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn window_larger_than_field_is_config_error() {
        let f = field_from(Array3::zeros((1, 4, 3)));
        assert!(smooth_over_replicates(&f, 2).is_err());
        assert!(smooth_over_time_and_replicates(&f, 1, 2).is_err());
    }

    #[test]
    fn correct_spectrum_inverts_the_forward_map() {
        // Build I_l = sum_l' A_{l,l'} s_{l'} for a known s; correction must
        // recover s.
        let basis = build_discrete_wavelets(WaveletFamily::haar(), 5).unwrap();
        let ipm = crate::wavelet::inner_product_matrix(&basis).unwrap();
        let s_true = [0.7, 0.0, 2.1, 0.4, 1.3];
        let mut values = Array3::zeros((5, 3, 4));
        for l in 1..=5 {
            let beta: f64 = (1..=5).map(|lp| ipm.a(l, lp) * s_true[lp - 1]).sum();
            values.index_axis_mut(Axis(0), l - 1).fill(beta);
        }
        let field = PeriodogramField::new(values, PeriodogramKind::ReplicateSmoothed, Some(0), None);
        let config = SmoothingConfig::replicate_only(0);
        let est = correct_spectrum(&field, &ipm, &config).unwrap();
        for j in 1..=5 {
            for k in 0..3 {
                for r in 0..4 {
                    assert_abs_diff_eq!(est.value(j, k, r), s_true[j - 1], epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn negative_truncation_clamps_and_reports() {
        let basis = build_discrete_wavelets(WaveletFamily::haar(), 2).unwrap();
        let ipm = crate::wavelet::inner_product_matrix(&basis).unwrap();
        // a field that makes some corrected values negative
        let mut values = Array3::zeros((2, 1, 2));
        values[(0, 0, 0)] = 0.0;
        values[(1, 0, 0)] = 1.0;
        values[(0, 0, 1)] = 1.0;
        values[(1, 0, 1)] = 0.0;
        let field = PeriodogramField::new(values, PeriodogramKind::ReplicateSmoothed, Some(0), None);
        let mut config = SmoothingConfig::replicate_only(0);
        config.truncate_negative = true;
        let est = correct_spectrum(&field, &ipm, &config).unwrap();
        assert!(est.values().iter().all(|&v| v >= 0.0));
        assert!(est.clamp_fraction() > 0.0);
    }

    #[test]
    fn scale_mismatch_is_rejected() {
        let basis = build_discrete_wavelets(WaveletFamily::haar(), 3).unwrap();
        let ipm = crate::wavelet::inner_product_matrix(&basis).unwrap();
        let field = field_from(Array3::zeros((2, 4, 4)));
        let config = SmoothingConfig::replicate_only(0);
        assert!(correct_spectrum(&field, &ipm, &config).is_err());
    }

    #[test]
    fn zero_ensemble_estimates_to_zero() {
        let basis = build_discrete_wavelets(WaveletFamily::haar(), 4).unwrap();
        let ens = ReplicateEnsemble::from_array(Array2::zeros((8, 16))).unwrap();
        let est = estimate_rews(&ens, &basis, &SmoothingConfig::replicate_only(2)).unwrap();
        assert!(est.values().iter().all(|&v| v.abs() < 1e-12));
        assert_eq!(est.valid_replicate_range(), (2, 6));
    }

    #[test]
    fn replicate_reversal_commutes_with_estimation() {
        let basis = build_discrete_wavelets(WaveletFamily::haar(), 4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let data = Array2::from_shape_fn((8, 16), |_| rng.sample::<f64, _>(StandardNormal));
        let reversed_rows: Vec<f64> = (0..8)
            .rev()
            .flat_map(|r| data.row(r).to_vec())
            .collect();
        let rev = Array2::from_shape_vec((8, 16), reversed_rows).unwrap();
        let cfg = SmoothingConfig::replicate_only(2);
        let a = estimate_rews(&ReplicateEnsemble::from_array(data).unwrap(), &basis, &cfg).unwrap();
        let b = estimate_rews(&ReplicateEnsemble::from_array(rev).unwrap(), &basis, &cfg).unwrap();
        for j in 1..=4 {
            for k in 0..16 {
                for r in 0..8 {
                    assert_abs_diff_eq!(
                        a.value(j, k, r),
                        b.value(j, k, 7 - r),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn smoothing_preserves_the_mean_structure() {
        // constant field: every smoothed value equals the constant (above);
        // linear-in-r field: interior values are exact, and the global mean
        // of a symmetric window over a linear ramp is preserved on interior
        // points.
        let mut values = Array3::zeros((1, 2, 9));
        for k in 0..2 {
            for r in 0..9 {
                values[(0, k, r)] = 2.0 * r as f64 + 1.0;
            }
        }
        let sm = smooth_over_replicates(&field_from(values.clone()), 2).unwrap();
        for k in 0..2 {
            for r in 2..7 {
                assert_abs_diff_eq!(sm.values()[(0, k, r)], values[(0, k, r)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rlacv_reduces_to_the_autocorrelation_wavelet() {
        struct OneLevel;
        impl SpectralSurface for OneLevel {
            fn surface_scale_count(&self) -> usize {
                3
            }
            fn surface_value(&self, j: usize, _z: f64, _nu: f64) -> f64 {
                if j == 2 {
                    1.0
                } else {
                    0.0
                }
            }
        }
        let basis = build_discrete_wavelets(WaveletFamily::haar(), 3).unwrap();
        let acs = AutocorrelationSet::build(&basis).unwrap();
        let c = rlacv(&OneLevel, &acs, 0.3, 0.7, 5);
        for (i, v) in c.iter().enumerate() {
            let tau = i as i64 - 5;
            assert_abs_diff_eq!(*v, acs.psi(2).value(tau), epsilon = 1e-13);
        }

        struct Zero;
        impl SpectralSurface for Zero {
            fn surface_scale_count(&self) -> usize {
                3
            }
            fn surface_value(&self, _j: usize, _z: f64, _nu: f64) -> f64 {
                0.0
            }
        }
        assert!(rlacv(&Zero, &acs, 0.5, 0.5, 4).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_noise_rlacv_is_approximately_a_delta() {
        // s_j = 2^{-j}: sum_j 2^{-j} Psi_j(tau) approaches delta_0(tau)
        struct White;
        impl SpectralSurface for White {
            fn surface_scale_count(&self) -> usize {
                12
            }
            fn surface_value(&self, j: usize, _z: f64, _nu: f64) -> f64 {
                2f64.powi(-(j as i32))
            }
        }
        let basis = build_discrete_wavelets(WaveletFamily::haar(), 12).unwrap();
        let acs = AutocorrelationSet::build(&basis).unwrap();
        let c = rlacv(&White, &acs, 0.5, 0.5, 3);
        for (i, v) in c.iter().enumerate() {
            let expect = if i == 3 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 0.02, "lag {}: {v}", i as i64 - 3);
        }
    }
}
