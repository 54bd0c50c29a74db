//! Non-decimated wavelet transform of replicate ensembles and formation
//! of raw auto- and cross-periodograms.
//!
//! The transform uses periodic boundary treatment: the translated wavelet
//! `psi_{j,k}(t) = psi_j(k - t)` wraps modulo `T`, so each scale is a
//! circular convolution of the series with the folded wavelet vector.

use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::wavelet::DiscreteWaveletSet;
use ndarray::parallel::prelude::*;
use ndarray::{Array2, Array3, Axis};
use rustfft::num_complex::Complex;

/// An R x T array of replicate series plus provenance metadata.
#[derive(Debug, Clone)]
pub struct ReplicateEnsemble {
    data: Array2<f64>,
    meta: EnsembleMeta,
}

/// Provenance carried alongside ensemble data.
#[derive(Debug, Clone, Default)]
pub struct EnsembleMeta {
    /// Free-form source description (file path, simulation name, ...).
    pub source: String,
    /// Whether each replicate has been standardized to mean 0, variance 1.
    pub standardized: bool,
    /// Original replicate count before mirror-padding, if padding was
    /// applied; downstream reporting can discard the appended range.
    pub mirrored_from: Option<usize>,
}

impl ReplicateEnsemble {
    /// Wrap an R x T array (replicate-major). All values must be finite.
    pub fn new(data: Array2<f64>, meta: EnsembleMeta) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() < 2 {
            return Err(Error::Input(format!(
                "ensemble must have R >= 1 and T >= 2, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some((r, t)) = data
            .indexed_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(idx, _)| idx)
        {
            return Err(Error::Input(format!(
                "non-finite value at replicate {r}, time {t}"
            )));
        }
        Ok(ReplicateEnsemble { data, meta })
    }

    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        Self::new(data, EnsembleMeta::default())
    }

    pub fn replicate_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn series_len(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn meta(&self) -> &EnsembleMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut EnsembleMeta {
        &mut self.meta
    }

    pub fn replicate(&self, r: usize) -> ndarray::ArrayView1<'_, f64> {
        self.data.row(r)
    }

    /// Largest scale count supported by the series length, `log2 T`.
    pub fn natural_scale_count(&self) -> usize {
        self.series_len().trailing_zeros() as usize
    }
}

/// Empirical wavelet coefficients `d_{j,k}^r`, laid out scale-major as
/// a `J x T x R` array.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    d: Array3<f64>,
}

impl CoefficientField {
    pub fn scale_count(&self) -> usize {
        self.d.shape()[0]
    }

    pub fn series_len(&self) -> usize {
        self.d.shape()[1]
    }

    pub fn replicate_count(&self) -> usize {
        self.d.shape()[2]
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.d
    }

    pub fn value(&self, j: usize, k: usize, r: usize) -> f64 {
        self.d[(j - 1, k, r)]
    }
}

/// Periodogram provenance: which smoothing has been applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodogramKind {
    Raw,
    ReplicateSmoothed,
    TimeReplicateSmoothed,
    Corrected,
}

/// A `J x T x R` field of (cross-)periodogram values with the smoothing
/// parameters that produced it.
#[derive(Debug, Clone)]
pub struct PeriodogramField {
    pub(crate) values: Array3<f64>,
    kind: PeriodogramKind,
    replicate_half_window: Option<usize>,
    time_half_window: Option<usize>,
}

impl PeriodogramField {
    pub(crate) fn new(
        values: Array3<f64>,
        kind: PeriodogramKind,
        replicate_half_window: Option<usize>,
        time_half_window: Option<usize>,
    ) -> Self {
        PeriodogramField {
            values,
            kind,
            replicate_half_window,
            time_half_window,
        }
    }

    pub fn kind(&self) -> PeriodogramKind {
        self.kind
    }

    pub fn replicate_half_window(&self) -> Option<usize> {
        self.replicate_half_window
    }

    pub fn time_half_window(&self) -> Option<usize> {
        self.time_half_window
    }

    pub fn scale_count(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn series_len(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn replicate_count(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn value(&self, j: usize, k: usize, r: usize) -> f64 {
        self.values[(j - 1, k, r)]
    }
}

/// Precomputed circular-convolution kernels for one basis at one series
/// length: the FFT of each scale's wavelet vector folded modulo `T`.
pub struct NdwtPlan {
    t_len: usize,
    scale_count: usize,
    kernel_ffts: Vec<Vec<Complex<f64>>>,
    fft: FftPair,
}

impl NdwtPlan {
    pub fn new(basis: &DiscreteWaveletSet, t_len: usize, scale_count: usize) -> Result<Self> {
        if !t_len.is_power_of_two() || t_len < 2 {
            return Err(Error::Input(format!(
                "series length {t_len} is not dyadic; mirror or pad the input first \
                 (see io::mirror_to_dyadic for the replicate dimension)"
            )));
        }
        let j_t = t_len.trailing_zeros() as usize;
        if scale_count > j_t {
            return Err(Error::Config(format!(
                "requested {scale_count} scales but T={t_len} supports at most {j_t}"
            )));
        }
        if scale_count > basis.max_scale() {
            return Err(Error::Config(format!(
                "requested {scale_count} scales but the basis holds {}",
                basis.max_scale()
            )));
        }
        let fft = FftPair::new(t_len);
        let mut kernel_ffts = Vec::with_capacity(scale_count);
        for j in 1..=scale_count {
            let psi = basis.psi(j);
            let mut folded = vec![0.0; t_len];
            for (i, &v) in psi.iter().enumerate() {
                folded[i % t_len] += v;
            }
            kernel_ffts.push(fft.forward_real(&folded));
        }
        Ok(NdwtPlan {
            t_len,
            scale_count,
            kernel_ffts,
            fft,
        })
    }

    pub fn scale_count(&self) -> usize {
        self.scale_count
    }

    /// Transform one series; returns a `J x T` array with row `j-1`
    /// holding `d_{j,k} = sum_t x_t psi_j((k - t) mod T)`.
    pub fn transform(&self, x: &[f64]) -> Array2<f64> {
        assert_eq!(x.len(), self.t_len);
        let spectrum = self.fft.forward_real(x);
        let mut out = Array2::zeros((self.scale_count, self.t_len));
        let mut row = vec![0.0; self.t_len];
        for (ji, kernel) in self.kernel_ffts.iter().enumerate() {
            let prod: Vec<Complex<f64>> = spectrum
                .iter()
                .zip(kernel.iter())
                .map(|(a, b)| a * b)
                .collect();
            self.fft.inverse_into_real(prod, &mut row);
            out.row_mut(ji)
                .iter_mut()
                .zip(row.iter())
                .for_each(|(o, &v)| *o = v);
        }
        out
    }

    /// Frequency-domain kernel for scale `j` (used by the simulator for
    /// the adjoint synthesis step).
    pub(crate) fn kernel_fft(&self, j: usize) -> &[Complex<f64>] {
        &self.kernel_ffts[j - 1]
    }

    pub(crate) fn fft(&self) -> &FftPair {
        &self.fft
    }
}

/// Non-decimated wavelet transform of a single series at scales
/// `1..=scale_count`.
pub fn ndwt(x: &[f64], basis: &DiscreteWaveletSet, scale_count: usize) -> Result<Array2<f64>> {
    let plan = NdwtPlan::new(basis, x.len(), scale_count)?;
    Ok(plan.transform(x))
}

/// Transform every replicate of an ensemble. Replicates are processed
/// in parallel; the output does not depend on the worker count.
pub fn ndwt_ensemble(
    ensemble: &ReplicateEnsemble,
    basis: &DiscreteWaveletSet,
    scale_count: usize,
) -> Result<CoefficientField> {
    let plan = NdwtPlan::new(basis, ensemble.series_len(), scale_count)?;
    let (t_len, r_count) = (ensemble.series_len(), ensemble.replicate_count());
    let mut d = Array3::zeros((scale_count, t_len, r_count));
    d.axis_iter_mut(Axis(2))
        .into_par_iter()
        .enumerate()
        .for_each(|(r, mut panel)| {
            let x: Vec<f64> = ensemble.replicate(r).to_vec();
            panel.assign(&plan.transform(&x));
        });
    Ok(CoefficientField { d })
}

/// Raw wavelet periodogram: the elementwise square of the coefficients.
pub fn raw_periodogram(coeffs: &CoefficientField) -> PeriodogramField {
    PeriodogramField::new(
        coeffs.d.mapv(|v| v * v),
        PeriodogramKind::Raw,
        None,
        None,
    )
}

/// Raw wavelet cross-periodogram between two replicates: the elementwise
/// product of their coefficient panels, a `J x T` array (may be negative).
pub fn cross_periodogram(
    coeffs: &CoefficientField,
    r: usize,
    r_prime: usize,
) -> Result<Array2<f64>> {
    let r_count = coeffs.replicate_count();
    for idx in [r, r_prime] {
        if idx >= r_count {
            return Err(Error::IndexOutOfRange(format!(
                "replicate {idx} outside 0..{r_count}"
            )));
        }
    }
    let a = coeffs.d.index_axis(Axis(2), r);
    let b = coeffs.d.index_axis(Axis(2), r_prime);
    Ok(&a * &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{build_discrete_wavelets, FamilyId, WaveletFamily};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn haar_basis(j: usize) -> DiscreteWaveletSet {
        build_discrete_wavelets(WaveletFamily::haar(), j).unwrap()
    }

    // Brute-force oracle: inner products with explicitly wrapped translates.
    fn ndwt_oracle(x: &[f64], basis: &DiscreteWaveletSet, scale_count: usize) -> Array2<f64> {
        let t_len = x.len();
        let mut out = Array2::zeros((scale_count, t_len));
        for j in 1..=scale_count {
            let psi = basis.psi(j);
            for k in 0..t_len {
                let mut s = 0.0;
                for (t, &xv) in x.iter().enumerate() {
                    // psi_{j,k}(t) = psi_j(k - t), periodically wrapped
                    let mut lag = (k as i64 - t as i64).rem_euclid(t_len as i64);
                    while (lag as usize) < psi.len() {
                        s += xv * psi[lag as usize];
                        lag += t_len as i64;
                    }
                }
                out[(j - 1, k)] = s;
            }
        }
        out
    }

    #[test]
    fn zero_series_gives_zero_coefficients() {
        let basis = haar_basis(3);
        let d = ndwt(&[0.0; 8], &basis, 3).unwrap();
        assert!(d.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn ndwt_is_linear_in_the_input() {
        let basis = haar_basis(4);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..16).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let scaled: Vec<f64> = x.iter().map(|v| -2.5 * v).collect();
        let d = ndwt(&x, &basis, 4).unwrap();
        let ds = ndwt(&scaled, &basis, 4).unwrap();
        for (a, b) in d.iter().zip(ds.iter()) {
            assert_abs_diff_eq!(-2.5 * a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn haar_impulse_matches_direct_inner_products() {
        let basis = haar_basis(2);
        let x = [1.0, 0.0, 0.0, 0.0];
        let d = ndwt(&x, &basis, 2).unwrap();
        let c = std::f64::consts::FRAC_1_SQRT_2;
        // d_{1,k} = psi_1(k mod 4)
        assert_abs_diff_eq!(d[(0, 0)], c, epsilon = 1e-12);
        assert_abs_diff_eq!(d[(0, 1)], -c, epsilon = 1e-12);
        assert_abs_diff_eq!(d[(0, 2)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[(0, 3)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ndwt_matches_brute_force_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for fam in [
            WaveletFamily::haar(),
            WaveletFamily::new(FamilyId::DaubechiesExtremalPhase, 2).unwrap(),
        ] {
            let basis = build_discrete_wavelets(fam, 4).unwrap();
            for t_len in [4usize, 8, 16] {
                let scales = t_len.trailing_zeros().min(4) as usize;
                let x: Vec<f64> = (0..t_len)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let got = ndwt(&x, &basis, scales).unwrap();
                let want = ndwt_oracle(&x, &basis, scales);
                for (a, b) in got.iter().zip(want.iter()) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_dyadic_length_is_an_input_error() {
        let basis = haar_basis(2);
        let err = ndwt(&[0.0; 6], &basis, 2).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mirror"), "should direct the user to mirroring: {msg}");
    }

    #[test]
    fn raw_periodogram_is_the_elementwise_square() {
        let basis = haar_basis(3);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let data = Array2::from_shape_fn((4, 8), |_| rng.sample::<f64, _>(StandardNormal));
        let ens = ReplicateEnsemble::from_array(data).unwrap();
        let coeffs = ndwt_ensemble(&ens, &basis, 3).unwrap();
        let pgram = raw_periodogram(&coeffs);
        assert_eq!(pgram.kind(), PeriodogramKind::Raw);
        for ((idx, &i), &d) in pgram.values().indexed_iter().zip(coeffs.values().iter()) {
            assert_eq!(i, d * d, "exact square at {idx:?}");
            assert!(i >= 0.0);
        }
    }

    #[test]
    fn cross_periodogram_diagonal_and_symmetry() {
        let basis = haar_basis(3);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let data = Array2::from_shape_fn((6, 16), |_| rng.sample::<f64, _>(StandardNormal));
        let ens = ReplicateEnsemble::from_array(data).unwrap();
        let coeffs = ndwt_ensemble(&ens, &basis, 3).unwrap();
        let pgram = raw_periodogram(&coeffs);
        let diag = cross_periodogram(&coeffs, 2, 2).unwrap();
        for j in 1..=3 {
            for k in 0..16 {
                assert_eq!(diag[(j - 1, k)], pgram.value(j, k, 2));
            }
        }
        let ab = cross_periodogram(&coeffs, 1, 4).unwrap();
        let ba = cross_periodogram(&coeffs, 4, 1).unwrap();
        assert_eq!(ab, ba);
        assert!(cross_periodogram(&coeffs, 0, 6).is_err());
    }

    #[test]
    fn white_noise_periodogram_mean_is_near_one() {
        // E[I_{j,k}] = 1 for iid N(0,1) under a Haar basis (no folding
        // overlap), via the identity sum_l 2^{-l} A_{j,l} = 1.
        let basis = haar_basis(3);
        let (t_len, r_count, runs) = (64usize, 8usize, 200usize);
        let mut sums = [0.0f64; 3];
        let mut count = 0usize;
        for run in 0..runs {
            let mut rng = ChaCha12Rng::seed_from_u64(1000 + run as u64);
            let data =
                Array2::from_shape_fn((r_count, t_len), |_| rng.sample::<f64, _>(StandardNormal));
            let ens = ReplicateEnsemble::from_array(data).unwrap();
            let coeffs = ndwt_ensemble(&ens, &basis, 3).unwrap();
            let pgram = raw_periodogram(&coeffs);
            for j in 1..=3 {
                let mut s = 0.0;
                for k in 0..t_len {
                    for r in 0..r_count {
                        s += pgram.value(j, k, r);
                    }
                }
                sums[j - 1] += s;
            }
            count += t_len * r_count;
        }
        for (ji, s) in sums.iter().enumerate() {
            let mean = s / count as f64;
            assert!(
                (mean - 1.0).abs() < 0.1,
                "scale {}: mean periodogram {mean}",
                ji + 1
            );
        }
    }
}
