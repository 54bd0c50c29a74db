use super::*;
use crate::spectral::rlacv;
use crate::transform::ndwt_ensemble;
use crate::wavelet::{build_discrete_wavelets, AutocorrelationSet, FamilyId, WaveletFamily};
use approx::assert_abs_diff_eq;

fn la10_basis(j: usize) -> DiscreteWaveletSet {
    let fam = WaveletFamily::new(FamilyId::DaubechiesLeastAsymmetric, 10).unwrap();
    build_discrete_wavelets(fam, j).unwrap()
}

#[test]
fn builtin_spectrum_point_values() {
    let sim1 = builtin_spectrum(BuiltinSpectrum::Sim1, 256, 128).unwrap();
    assert_abs_diff_eq!(sim1.value(4, 0.25, 0.5), 0.0, epsilon = 1e-12);
    assert!(sim1.value(4, 0.3, 0.5) > 0.0);
    assert_eq!(sim1.value(3, 0.3, 0.5), 0.0);

    let main = builtin_spectrum(BuiltinSpectrum::SimMain, 256, 256).unwrap();
    assert_abs_diff_eq!(main.value(3, 0.5, 0.0), 0.0, epsilon = 1e-12);
    assert!(main.value(3, 0.4, 0.0) > 0.0);
    assert_eq!(main.value(3, 0.1, 0.5), 0.0); // before the onset time
    assert!(main.value(2, 0.1, 0.3) > 0.0);
    assert_eq!(main.value(2, 0.6, 0.3), 0.0); // past half time

    let sim2 = builtin_spectrum(BuiltinSpectrum::Sim2, 256, 128).unwrap();
    assert_abs_diff_eq!(sim2.value(1, 0.0, 0.0), 0.0, epsilon = 1e-12);
    assert!(sim2.value(1, 0.2, 0.1) > 0.0);

    let white = builtin_spectrum(BuiltinSpectrum::WhiteNoise(1.0), 64, 8).unwrap();
    for j in 1..=6 {
        assert_abs_diff_eq!(white.value(j, 0.3, 0.9), 2f64.powi(-(j as i32)), epsilon = 1e-15);
    }
}

#[test]
fn builtin_coherence_block_entries() {
    let r_count = 128;
    let coh = builtin_coherence(BuiltinCoherence::Block997150, r_count, 256).unwrap();
    let j = COHERENCE_DESIGN_SCALE;
    // within first half (the (1,2) pair in either indexing base)
    assert_abs_diff_eq!(coh.rho(j, 0, 1, 2), 0.99, epsilon = 1e-15);
    // across halves
    assert_abs_diff_eq!(coh.rho(j, 10, 3, 100), -0.71, epsilon = 1e-15);
    // within second half
    assert_abs_diff_eq!(coh.rho(j, 10, 64, 127), 0.5, epsilon = 1e-15);
    // diagonal and off-block
    assert_eq!(coh.rho(j, 0, 5, 5), 1.0);
    assert_eq!(coh.rho(j, 128, 1, 2), 0.0); // second half of time
    assert_eq!(coh.rho(j + 1, 0, 1, 2), 0.0); // other scales

    let none = builtin_coherence(BuiltinCoherence::None, 8, 64).unwrap();
    assert!(none.is_identity());
    assert_eq!(none.rho(1, 0, 2, 3), 0.0);
    assert_eq!(none.rho(1, 0, 3, 3), 1.0);

    let c07 = builtin_coherence(BuiltinCoherence::Constant07, 8, 64).unwrap();
    assert_abs_diff_eq!(c07.rho(j, 0, 0, 7), 0.7, epsilon = 1e-15);
    assert_eq!(c07.rho(j, 32, 0, 7), 0.0);
}

#[test]
fn factorize_identity_is_identity() {
    let p = DMatrix::<f64>::identity(6, 6);
    let f = factorize_correlation(&p).unwrap();
    assert!(!f.clipped());
    assert!(f.reconstruction_error() < 1e-12);
    for i in 0..6 {
        for j in 0..6 {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(f.factor()[(i, j)], expect, epsilon = 1e-12);
        }
    }
}

#[test]
fn factorize_equicorrelated_reconstructs() {
    let p = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.7 });
    let f = factorize_correlation(&p).unwrap();
    assert!(!f.clipped());
    let recon = f.factor() * f.factor().transpose();
    for i in 0..4 {
        for j in 0..4 {
            assert_abs_diff_eq!(recon[(i, j)], p[(i, j)], epsilon = 1e-12);
        }
    }
}

#[test]
fn factorize_block_design_reconstructs_at_r8() {
    // at R=8 the block design is still positive definite, so the factor
    // reproduces it without clipping
    let pattern = CoherencePattern::TwoBlock {
        within_first: 0.99,
        cross: -0.71,
        within_second: 0.5,
    };
    let p = pattern.matrix(8);
    let f = factorize_correlation(&p).unwrap();
    assert!(f.reconstruction_error() < 1e-8);
    if !f.clipped() {
        let recon = f.factor() * f.factor().transpose();
        for i in 0..8 {
            for j in 0..8 {
                assert_abs_diff_eq!(recon[(i, j)], p[(i, j)], epsilon = 1e-8);
            }
        }
    }
}

#[test]
fn factorize_block_design_clips_at_r128() {
    // the half-block reduced 2x2 determinant goes negative once the halves
    // exceed ~55 replicates, so R=128 exercises the eigenvalue floor
    let pattern = CoherencePattern::TwoBlock {
        within_first: 0.99,
        cross: -0.71,
        within_second: 0.5,
    };
    let p = pattern.matrix(128);
    let f = factorize_correlation(&p).unwrap();
    assert!(f.clipped(), "the 0.99/-0.71/0.5 design is indefinite at R=128");
    assert!(f.min_eigenvalue() < 0.0);
    assert!(f.max_adjustment() > 0.0);
    assert!(f.reconstruction_error() < 1e-8);
    // repaired matrix still has unit diagonal
    let recon = f.factor() * f.factor().transpose();
    for i in 0..128 {
        assert_abs_diff_eq!(recon[(i, i)], 1.0, epsilon = 1e-10);
    }
}

#[test]
fn factorize_rejects_bad_inputs() {
    let mut p = DMatrix::<f64>::identity(3, 3);
    p[(0, 1)] = 0.5; // asymmetric
    assert!(factorize_correlation(&p).is_err());
    let mut q = DMatrix::<f64>::identity(3, 3);
    q[(1, 1)] = 0.9; // non-unit diagonal
    assert!(factorize_correlation(&q).is_err());
}

#[test]
fn zero_spectrum_simulates_to_zero() {
    let spec = SpectrumSpec::new("zero", 64, 8, |_, _, _| 0.0).unwrap();
    let coh = CoherenceSpec::identity(64, 8);
    let basis = la10_basis(6);
    let ens = simulate_ensemble(&spec, &coh, &basis, 42).unwrap();
    assert!(ens.data().iter().all(|&v| v.abs() < 1e-14));
}

#[test]
fn simulation_is_reproducible_across_worker_counts() {
    let spec = builtin_spectrum(BuiltinSpectrum::Sim1, 128, 32).unwrap();
    let coh = builtin_coherence(BuiltinCoherence::Constant07, 32, 128).unwrap();
    let basis = la10_basis(7);
    let base = simulate_ensemble(&spec, &coh, &basis, 7).unwrap();
    let again = simulate_ensemble(&spec, &coh, &basis, 7).unwrap();
    assert_eq!(base.data(), again.data());
    for threads in [1usize, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let there = pool.install(|| simulate_ensemble(&spec, &coh, &basis, 7).unwrap());
        assert_eq!(base.data(), there.data(), "threads={threads}");
    }
    let other = simulate_ensemble(&spec, &coh, &basis, 8).unwrap();
    assert_ne!(base.data(), other.data());
}

#[test]
fn white_noise_variance_matches_the_autocovariance_identity() {
    // var(X) = sum_{j<=J} 2^{-j} Psi_j(0) = 1 - 2^{-J}
    let (t_len, r_count, runs) = (64usize, 4usize, 500usize);
    let spec = builtin_spectrum(BuiltinSpectrum::WhiteNoise(1.0), t_len, r_count).unwrap();
    let coh = CoherenceSpec::identity(t_len, r_count);
    let basis = build_discrete_wavelets(WaveletFamily::haar(), 6).unwrap();
    let mut sum_sq = 0.0;
    for run in 0..runs {
        let ens = simulate_ensemble(&spec, &coh, &basis, derive_seed(99, run as u64)).unwrap();
        sum_sq += ens.data().iter().map(|v| v * v).sum::<f64>();
    }
    let var = sum_sq / (runs * t_len * r_count) as f64;
    let expect = 1.0 - 2f64.powi(-6);
    assert!(
        (var - expect).abs() < 0.05 * expect,
        "variance {var} vs {expect}"
    );
}

#[test]
fn sim1_sample_autocovariance_matches_rlacv() {
    // the oracle is the limit quantity of the local autocovariance, so the
    // check needs the asymptotic regime: Haar keeps the scale-4 support at
    // 16 samples and T=1024 makes the spectrum's oscillation slow across
    // it, leaving the approximation error far below the Monte-Carlo band
    let (t_len, r_count, runs) = (1024usize, 64usize, 300usize);
    let spec = builtin_spectrum(BuiltinSpectrum::Sim1, t_len, r_count).unwrap();
    let coh = CoherenceSpec::identity(t_len, r_count);
    let basis = build_discrete_wavelets(WaveletFamily::haar(), 10).unwrap();
    let (z, nu) = (0.5, 0.75);
    let (k, r) = ((z * t_len as f64) as usize, (nu * r_count as f64) as usize);
    let max_lag = 3usize;
    let mut prods = vec![Vec::with_capacity(runs); max_lag + 1];
    for run in 0..runs {
        let ens = simulate_ensemble(&spec, &coh, &basis, derive_seed(17, run as u64)).unwrap();
        for (tau, store) in prods.iter_mut().enumerate() {
            store.push(ens.data()[(r, k)] * ens.data()[(r, k + tau)]);
        }
    }
    let acs = AutocorrelationSet::build(&basis).unwrap();
    let truth = rlacv(&spec, &acs, z, nu, max_lag);
    for tau in 0..=max_lag {
        let n = prods[tau].len() as f64;
        let mean = prods[tau].iter().sum::<f64>() / n;
        let var = prods[tau].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let expect = truth[max_lag + tau];
        assert!(
            (mean - expect).abs() < 3.0 * se + 1e-9,
            "lag {tau}: sample {mean} vs rlacv {expect} (se {se})"
        );
    }
}

#[test]
fn uncorrelated_replicates_have_uncorrelated_coefficients() {
    let (t_len, r_count, runs) = (64usize, 8usize, 200usize);
    let spec = builtin_spectrum(BuiltinSpectrum::WhiteNoise(1.0), t_len, r_count).unwrap();
    let coh = CoherenceSpec::identity(t_len, r_count);
    let basis = build_discrete_wavelets(WaveletFamily::haar(), 6).unwrap();
    let (j, k, r, rp) = (2usize, 20usize, 1usize, 6usize);
    let mut prods = Vec::with_capacity(runs);
    for run in 0..runs {
        let ens = simulate_ensemble(&spec, &coh, &basis, derive_seed(5, run as u64)).unwrap();
        let coeffs = ndwt_ensemble(&ens, &basis, 6).unwrap();
        prods.push(coeffs.value(j, k, r) * coeffs.value(j, k, rp));
    }
    let n = prods.len() as f64;
    let mean = prods.iter().sum::<f64>() / n;
    let var = prods.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!(mean.abs() < 3.0 * se, "cross moment {mean} vs se {se}");
}

#[test]
fn constant07_coherent_half_shows_positive_dependence() {
    let (t_len, r_count, runs) = (64usize, 32usize, 100usize);
    let spec = builtin_spectrum(BuiltinSpectrum::Sim1, t_len, r_count).unwrap();
    let coh = builtin_coherence(BuiltinCoherence::Constant07, r_count, t_len).unwrap();
    let basis = la10_basis(6);
    let j = COHERENCE_DESIGN_SCALE;
    let mut positive = 0usize;
    for run in 0..runs {
        let ens = simulate_ensemble(&spec, &coh, &basis, derive_seed(23, run as u64)).unwrap();
        let coeffs = ndwt_ensemble(&ens, &basis, 6).unwrap();
        let mut s = 0.0;
        for k in (0..t_len / 2).step_by(4) {
            for r in 0..r_count - 1 {
                s += coeffs.value(j, k, r) * coeffs.value(j, k, r + 1);
            }
        }
        if s > 0.0 {
            positive += 1;
        }
    }
    assert!(positive >= 90, "positive-dependence sign test: {positive}/{runs}");
}
