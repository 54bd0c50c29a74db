//! Small FFT helpers shared by the transform, simulator and wavelet
//! modules. All routines operate on real data via complex transforms.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Cached forward/inverse plans for one transform length.
pub(crate) struct FftPair {
    pub len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex<f64>> {
        debug_assert_eq!(x.len(), self.len);
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn forward(&self, buf: &mut [Complex<f64>]) {
        self.fwd.process(buf);
    }

    /// Inverse transform into a real output slice; applies the 1/len
    /// normalization that rustfft leaves out.
    pub fn inverse_into_real(&self, mut spec: Vec<Complex<f64>>, out: &mut [f64]) {
        debug_assert_eq!(spec.len(), self.len);
        self.inv.process(&mut spec);
        let scale = 1.0 / self.len as f64;
        for (o, s) in out.iter_mut().zip(spec.iter()) {
            *o = s.re * scale;
        }
    }
}

fn padded_len(min: usize) -> usize {
    min.next_power_of_two()
}

/// Autocorrelation of a real vector at non-negative lags `0..len`.
pub(crate) fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let p = padded_len(2 * n);
    let pair = FftPair::new(p);
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(p)
        .collect();
    pair.forward(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex::new(v.norm_sqr(), 0.0);
    }
    let mut out = vec![0.0; p];
    pair.inverse_into_real(buf, &mut out);
    out.truncate(n);
    out
}

/// Cross-correlation `c(tau) = sum_k a(k) b(k - tau)` over the full support
/// `tau = -(len_b - 1) ..= len_a - 1`, returned in ascending lag order.
pub(crate) fn cross_correlation(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (na, nb) = (a.len(), b.len());
    let p = padded_len(na + nb);
    let pair = FftPair::new(p);
    let pad = |x: &[f64]| -> Vec<Complex<f64>> {
        x.iter()
            .map(|&v| Complex::new(v, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(p)
            .collect()
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    pair.forward(&mut fa);
    pair.forward(&mut fb);
    for (va, vb) in fa.iter_mut().zip(fb.iter()) {
        *va *= vb.conj();
    }
    let mut full = vec![0.0; p];
    pair.inverse_into_real(fa, &mut full);
    // lags wrap: tau >= 0 at index tau, tau < 0 at index p + tau
    (-(nb as i64 - 1)..=(na as i64 - 1))
        .map(|tau| full[tau.rem_euclid(p as i64) as usize])
        .collect()
}
