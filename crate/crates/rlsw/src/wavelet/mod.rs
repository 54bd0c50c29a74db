//! Discrete wavelet machinery: filter families, non-decimated discrete
//! wavelets, autocorrelation wavelets and the inner-product matrix `A`.
//!
//! Scale indexing follows the usual convention for locally stationary
//! wavelet processes: scale 1 is the finest, larger scales are coarser.
//! The scale-`j` wavelet vector has support `(2^j - 1)(N_h - 1) + 1`
//! where `N_h` is the filter length.

mod tables;

use crate::error::{Error, Result};
use crate::fft;
use nalgebra::DMatrix;

/// Wavelet family identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyId {
    Haar,
    DaubechiesExtremalPhase,
    DaubechiesLeastAsymmetric,
}

impl FamilyId {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyId::Haar => "haar",
            FamilyId::DaubechiesExtremalPhase => "daubechies-extremal-phase",
            FamilyId::DaubechiesLeastAsymmetric => "daubechies-least-asymmetric",
        }
    }
}

/// A compactly supported orthonormal wavelet filter family.
#[derive(Debug, Clone)]
pub struct WaveletFamily {
    family_id: FamilyId,
    vanishing_moments: usize,
    low_pass: Vec<f64>,
}

impl WaveletFamily {
    /// Look up a family by identifier and number of vanishing moments.
    ///
    /// Haar admits exactly one vanishing moment; the Daubechies families
    /// are tabulated for 2 to 10 vanishing moments.
    pub fn new(family_id: FamilyId, vanishing_moments: usize) -> Result<Self> {
        let low_pass: Vec<f64> = match (family_id, vanishing_moments) {
            (FamilyId::Haar, 1) => {
                let c = std::f64::consts::FRAC_1_SQRT_2;
                vec![c, c]
            }
            (FamilyId::Haar, n) => {
                return Err(Error::Config(format!(
                    "haar has exactly 1 vanishing moment, got {n}"
                )))
            }
            (FamilyId::DaubechiesExtremalPhase, n) => match n {
                2 => tables::DB2.to_vec(),
                3 => tables::DB3.to_vec(),
                4 => tables::DB4.to_vec(),
                5 => tables::DB5.to_vec(),
                6 => tables::DB6.to_vec(),
                7 => tables::DB7.to_vec(),
                8 => tables::DB8.to_vec(),
                9 => tables::DB9.to_vec(),
                10 => tables::DB10.to_vec(),
                _ => {
                    return Err(Error::Config(format!(
                        "daubechies-extremal-phase supports 2..=10 vanishing moments, got {n}"
                    )))
                }
            },
            (FamilyId::DaubechiesLeastAsymmetric, n) => match n {
                2 => tables::SYM2.to_vec(),
                3 => tables::SYM3.to_vec(),
                4 => tables::SYM4.to_vec(),
                5 => tables::SYM5.to_vec(),
                6 => tables::SYM6.to_vec(),
                7 => tables::SYM7.to_vec(),
                8 => tables::SYM8.to_vec(),
                9 => tables::SYM9.to_vec(),
                10 => tables::SYM10.to_vec(),
                _ => {
                    return Err(Error::Config(format!(
                        "daubechies-least-asymmetric supports 2..=10 vanishing moments, got {n}"
                    )))
                }
            },
        };
        Ok(WaveletFamily {
            family_id,
            vanishing_moments,
            low_pass,
        })
    }

    pub fn haar() -> Self {
        Self::new(FamilyId::Haar, 1).expect("haar is always valid")
    }

    pub fn family_id(&self) -> FamilyId {
        self.family_id
    }

    pub fn vanishing_moments(&self) -> usize {
        self.vanishing_moments
    }

    /// Low-pass (scaling) filter taps; sum sqrt(2), unit Euclidean norm.
    pub fn low_pass(&self) -> &[f64] {
        &self.low_pass
    }

    /// High-pass taps by the quadrature-mirror relation
    /// `g_k = (-1)^k h_{L-1-k}`, sign-fixed so the first tap is positive.
    pub fn high_pass(&self) -> Vec<f64> {
        let h = &self.low_pass;
        let n = h.len();
        let mut g: Vec<f64> = (0..n)
            .map(|k| if k % 2 == 0 { h[n - 1 - k] } else { -h[n - 1 - k] })
            .collect();
        if g[0] < 0.0 {
            for v in g.iter_mut() {
                *v = -*v;
            }
        }
        g
    }

    pub fn tap_count(&self) -> usize {
        self.low_pass.len()
    }

    /// Short label for error messages and sidecar metadata, e.g. `haar`
    /// or `daubechies-least-asymmetric(6)`.
    pub fn label(&self) -> String {
        match self.family_id {
            FamilyId::Haar => "haar".to_string(),
            _ => format!("{}({})", self.family_id.name(), self.vanishing_moments),
        }
    }
}

/// Discrete non-decimated wavelet vectors for scales `1..=max_scale`.
///
/// `vectors[j-1]` holds the scale-`j` wavelet; the translated wavelet
/// `psi_{j,k}(t)` used throughout equals `psi_j(k - t)`.
#[derive(Debug, Clone)]
pub struct DiscreteWaveletSet {
    family: WaveletFamily,
    max_scale: usize,
    vectors: Vec<Vec<f64>>,
}

/// Build the discrete non-decimated wavelet vectors by the cascade
/// recursion `psi_{j+1}(n) = sum_k h_{n-2k} psi_j(k)` starting from the
/// high-pass filter at scale 1.
pub fn build_discrete_wavelets(family: WaveletFamily, max_scale: usize) -> Result<DiscreteWaveletSet> {
    if max_scale == 0 || max_scale > 20 {
        return Err(Error::Config(format!(
            "max scale must lie in 1..=20, got {max_scale}"
        )));
    }
    let h = family.low_pass().to_vec();
    let n_h = h.len();
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(max_scale);
    vectors.push(family.high_pass());
    for _ in 1..max_scale {
        let prev = vectors.last().unwrap();
        let out_len = 2 * prev.len() + n_h - 2;
        let mut next = vec![0.0; out_len];
        for (k, &p) in prev.iter().enumerate() {
            let base = 2 * k;
            for (i, &hv) in h.iter().enumerate() {
                next[base + i] += hv * p;
            }
        }
        vectors.push(next);
    }
    Ok(DiscreteWaveletSet {
        family,
        max_scale,
        vectors,
    })
}

impl DiscreteWaveletSet {
    /// The scale-`j` wavelet vector, `1 <= j <= max_scale`.
    pub fn psi(&self, j: usize) -> &[f64] {
        assert!(j >= 1 && j <= self.max_scale, "scale {j} out of range");
        &self.vectors[j - 1]
    }

    pub fn max_scale(&self) -> usize {
        self.max_scale
    }

    pub fn family(&self) -> &WaveletFamily {
        &self.family
    }

    fn check_scale(&self, j: usize) -> Result<()> {
        if j < 1 || j > self.max_scale {
            return Err(Error::IndexOutOfRange(format!(
                "scale {j} outside 1..={}",
                self.max_scale
            )));
        }
        Ok(())
    }
}

/// Autocorrelation wavelet `Psi_j(tau) = sum_k psi_j(k) psi_j(k - tau)`,
/// stored for non-negative lags; symmetry in the lag is exact by
/// construction.
#[derive(Debug, Clone)]
pub struct AutocorrWavelet {
    scale: usize,
    nonneg: Vec<f64>,
}

impl AutocorrWavelet {
    pub fn scale(&self) -> usize {
        self.scale
    }

    /// Largest lag with a (possibly) nonzero value.
    pub fn max_lag(&self) -> i64 {
        self.nonneg.len() as i64 - 1
    }

    pub fn value(&self, tau: i64) -> f64 {
        let a = tau.unsigned_abs() as usize;
        if a < self.nonneg.len() {
            self.nonneg[a]
        } else {
            0.0
        }
    }

    /// Values at lags `0..=max_lag`.
    pub fn nonneg_lags(&self) -> &[f64] {
        &self.nonneg
    }
}

/// Cross-correlation wavelet `Psi_{j,l}(tau) = sum_k psi_j(k) psi_l(k - tau)`
/// with support `-(N_l - 1) ..= N_j - 1`.
#[derive(Debug, Clone)]
pub struct CrossCorrWavelet {
    scale_j: usize,
    scale_l: usize,
    min_lag: i64,
    values: Vec<f64>,
}

impl CrossCorrWavelet {
    pub fn scales(&self) -> (usize, usize) {
        (self.scale_j, self.scale_l)
    }

    pub fn min_lag(&self) -> i64 {
        self.min_lag
    }

    pub fn max_lag(&self) -> i64 {
        self.min_lag + self.values.len() as i64 - 1
    }

    pub fn value(&self, tau: i64) -> f64 {
        if tau < self.min_lag || tau > self.max_lag() {
            return 0.0;
        }
        self.values[(tau - self.min_lag) as usize]
    }
}

// Direct evaluation is exact and fast for short vectors; long vectors go
// through an FFT of the padded sequence.
const DIRECT_CORR_LIMIT: usize = 4096;

/// Compute the scale-`j` autocorrelation wavelet of a wavelet set.
pub fn autocorrelation_wavelet(ws: &DiscreteWaveletSet, j: usize) -> Result<AutocorrWavelet> {
    ws.check_scale(j)?;
    let psi = ws.psi(j);
    let n = psi.len();
    let nonneg = if n <= DIRECT_CORR_LIMIT {
        (0..n)
            .map(|tau| (tau..n).map(|k| psi[k] * psi[k - tau]).sum())
            .collect()
    } else {
        fft::autocorrelation(psi)
    };
    Ok(AutocorrWavelet { scale: j, nonneg })
}

/// Compute the cross-correlation wavelet between scales `j` and `l`.
pub fn cross_correlation_wavelet(
    ws: &DiscreteWaveletSet,
    j: usize,
    l: usize,
) -> Result<CrossCorrWavelet> {
    ws.check_scale(j)?;
    ws.check_scale(l)?;
    let pj = ws.psi(j);
    let pl = ws.psi(l);
    let min_lag = -(pl.len() as i64 - 1);
    let max_lag = pj.len() as i64 - 1;
    let values = if pj.len() + pl.len() <= 2 * DIRECT_CORR_LIMIT {
        (min_lag..=max_lag)
            .map(|tau| {
                let k_lo = 0.max(tau) as usize;
                let k_hi = pj.len().min((pl.len() as i64 + tau).max(0) as usize);
                (k_lo..k_hi).map(|k| pj[k] * pl[(k as i64 - tau) as usize]).sum()
            })
            .collect()
    } else {
        fft::cross_correlation(pj, pl)
    };
    Ok(CrossCorrWavelet {
        scale_j: j,
        scale_l: l,
        min_lag,
        values,
    })
}

/// Per-scale autocorrelation wavelets, optionally with every cross-scale
/// sequence cached.
#[derive(Debug, Clone)]
pub struct AutocorrelationSet {
    per_scale: Vec<AutocorrWavelet>,
    cross: Option<Vec<CrossCorrWavelet>>,
}

impl AutocorrelationSet {
    pub fn build(ws: &DiscreteWaveletSet) -> Result<Self> {
        let per_scale = (1..=ws.max_scale())
            .map(|j| autocorrelation_wavelet(ws, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(AutocorrelationSet {
            per_scale,
            cross: None,
        })
    }

    /// Build with all cross-scale sequences cached.
    pub fn build_with_cross(ws: &DiscreteWaveletSet) -> Result<Self> {
        let mut set = Self::build(ws)?;
        let j_max = set.max_scale();
        let mut cross = Vec::with_capacity(j_max * j_max);
        for j in 1..=j_max {
            for l in 1..=j_max {
                cross.push(cross_correlation_wavelet(ws, j, l)?);
            }
        }
        set.cross = Some(cross);
        Ok(set)
    }

    pub fn max_scale(&self) -> usize {
        self.per_scale.len()
    }

    pub fn psi(&self, j: usize) -> &AutocorrWavelet {
        assert!(j >= 1 && j <= self.per_scale.len(), "scale {j} out of range");
        &self.per_scale[j - 1]
    }

    /// Cached cross-correlation wavelet, when built with
    /// [`AutocorrelationSet::build_with_cross`].
    pub fn psi_cross(&self, j: usize, l: usize) -> Option<&CrossCorrWavelet> {
        let j_max = self.per_scale.len();
        assert!(j >= 1 && j <= j_max && l >= 1 && l <= j_max, "scales out of range");
        self.cross.as_ref().map(|c| &c[(j - 1) * j_max + (l - 1)])
    }
}

/// The autocorrelation-wavelet Gram matrix `A` with its inverse.
///
/// `A_{j,l} = sum_tau Psi_j(tau) Psi_l(tau)`; the inverse de-biases
/// smoothed periodograms. Indices are zero-based rows/columns for scales
/// `1..=j_max`.
#[derive(Debug, Clone)]
pub struct InnerProductMatrix {
    j_max: usize,
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    condition_estimate: f64,
}

const CONDITION_LIMIT: f64 = 1e12;

/// Build the inner-product matrix of the autocorrelation wavelets together
/// with its inverse (pivoted dense solve) and a 1-norm condition estimate.
pub fn inner_product_matrix(ws: &DiscreteWaveletSet) -> Result<InnerProductMatrix> {
    let acs = AutocorrelationSet::build(ws)?;
    inner_product_matrix_from(&acs, ws)
}

pub(crate) fn inner_product_matrix_from(
    acs: &AutocorrelationSet,
    ws: &DiscreteWaveletSet,
) -> Result<InnerProductMatrix> {
    let j_max = acs.max_scale();
    let mut a = DMatrix::zeros(j_max, j_max);
    for j in 1..=j_max {
        for l in j..=j_max {
            let pj = acs.psi(j);
            let pl = acs.psi(l);
            let m = pj.max_lag().min(pl.max_lag());
            let mut sum = pj.value(0) * pl.value(0);
            for tau in 1..=m {
                sum += 2.0 * pj.value(tau) * pl.value(tau);
            }
            a[(j - 1, l - 1)] = sum;
            a[(l - 1, j - 1)] = sum;
        }
    }
    let lu = a.clone().lu();
    let a_inv = lu.try_inverse().ok_or_else(|| {
        Error::LinAlg(format!(
            "inner-product matrix is singular at J={j_max} for family {}",
            ws.family().label()
        ))
    })?;
    let norm1 = |m: &DMatrix<f64>| -> f64 {
        (0..m.ncols())
            .map(|c| m.column(c).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let condition_estimate = norm1(&a) * norm1(&a_inv);
    if !condition_estimate.is_finite() || condition_estimate > CONDITION_LIMIT {
        return Err(Error::LinAlg(format!(
            "inner-product matrix too ill-conditioned at J={j_max} for family {} \
             (condition estimate {condition_estimate:.3e})",
            ws.family().label()
        )));
    }
    Ok(InnerProductMatrix {
        j_max,
        a,
        a_inv,
        condition_estimate,
    })
}

impl InnerProductMatrix {
    pub fn j_max(&self) -> usize {
        self.j_max
    }

    /// Entry `A_{j,l}` with one-based scale indices.
    pub fn a(&self, j: usize, l: usize) -> f64 {
        self.a[(j - 1, l - 1)]
    }

    /// Entry `A^{-1}_{j,l}` with one-based scale indices.
    pub fn a_inv(&self, j: usize, l: usize) -> f64 {
        self.a_inv[(j - 1, l - 1)]
    }

    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn a_inv_matrix(&self) -> &DMatrix<f64> {
        &self.a_inv
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    /// Restrict to the leading `j_trunc` scales, re-inverting the principal
    /// submatrix.
    pub fn truncated(&self, j_trunc: usize, family_label: &str) -> Result<InnerProductMatrix> {
        if j_trunc == 0 || j_trunc > self.j_max {
            return Err(Error::Config(format!(
                "truncation scale {j_trunc} outside 1..={}",
                self.j_max
            )));
        }
        if j_trunc == self.j_max {
            return Ok(self.clone());
        }
        let a = self.a.view((0, 0), (j_trunc, j_trunc)).into_owned();
        let a_inv = a.clone().lu().try_inverse().ok_or_else(|| {
            Error::LinAlg(format!(
                "inner-product matrix is singular at J={j_trunc} for family {family_label}"
            ))
        })?;
        let norm1 = |m: &DMatrix<f64>| -> f64 {
            (0..m.ncols())
                .map(|c| m.column(c).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        Ok(InnerProductMatrix {
            j_max: j_trunc,
            condition_estimate: norm1(&a) * norm1(&a_inv),
            a,
            a_inv,
        })
    }
}
