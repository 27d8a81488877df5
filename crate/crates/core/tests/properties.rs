//! Property tests for the numerical invariants that must hold on arbitrary
//! inputs, not just the worked examples.

use ndarray::Array2;
use neuroband::attention::{self, AttentionMap, Outcome, KL_SMOOTHING_EPS};
use neuroband::features::{self, SessionFeatures};
use neuroband::metrics;
use neuroband::preprocess::Epoch;
use neuroband::spectral::{self, CANONICAL_BANDS};
use neuroband::wavelet::{self, WaveletSpec};
use proptest::prelude::*;

fn epoch_from(values: Vec<f64>, fs: f64) -> Epoch {
    let n = values.len();
    Epoch {
        subject_id: "p".into(),
        session_id: "p".into(),
        label: 0,
        sample_rate_hz: fs,
        data: Array2::from_shape_vec((1, n), values).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Periodized db4 analysis conserves energy and coefficient counts for
    /// arbitrary signals and lengths (odd lengths fall back to no splitting,
    /// which conserves trivially).
    #[test]
    fn wavelet_parseval_holds(
        len in 8usize..1200,
        seed in any::<u64>(),
    ) {
        let mut rng = neuroband::rng::Xoshiro256::seed_from(seed);
        let values: Vec<f64> = (0..len).map(|_| rng.next_gaussian() * 10.0).collect();
        let energy: f64 = values.iter().map(|v| v * v).sum();
        prop_assume!(energy > 1e-12);
        let ep = epoch_from(values, 256.0);
        let dec = wavelet::dwt(&ep, &WaveletSpec::db4()).unwrap();
        let e = wavelet::level_energies(&dec);
        let total = e.approx_energy[0] + e.detail_energies.row(0).sum();
        prop_assert!(((total - energy) / energy).abs() <= 1e-9);

        let count = dec.channels[0].approx.len()
            + dec.channels[0].details.iter().map(Vec::len).sum::<usize>();
        prop_assert_eq!(count, len);
    }

    /// Relative band powers are in [0,1] and sum to ≤ 1 (to 1 when the
    /// spectrum has non-negligible in-band power); spectral entropy respects
    /// its bounds; mean and median stay inside the summary range.
    #[test]
    fn spectral_feature_bounds(
        seed in any::<u64>(),
        tone_freq in 1.0f64..44.0,
        noise in 0.0f64..2.0,
    ) {
        let fs = 256.0;
        let mut rng = neuroband::rng::Xoshiro256::seed_from(seed);
        let values: Vec<f64> = (0..1024)
            .map(|i| {
                (2.0 * std::f64::consts::PI * tone_freq * i as f64 / fs).sin()
                    + noise * rng.next_gaussian()
            })
            .collect();
        let ep = epoch_from(values, fs);
        let psd = spectral::welch_psd(&ep, 512, 0.5).unwrap();
        let bp = spectral::band_powers(&psd, &CANONICAL_BANDS).unwrap();
        for &v in bp.relative.iter() {
            prop_assert!((0.0..=1.0 + 1e-9).contains(&v));
        }
        let row_sum: f64 = bp.relative.row(0).sum();
        prop_assert!(row_sum <= 1.0 + 1e-9);
        let total_abs: f64 = bp.absolute.row(0).sum();
        if total_abs >= 1e-6 {
            prop_assert!((row_sum - 1.0).abs() <= 1e-9);
        }

        let s = spectral::spectral_summaries(&psd).unwrap();
        let k = psd
            .freqs_hz
            .iter()
            .filter(|&&f| (0.5..=45.0).contains(&f))
            .count() as f64;
        prop_assert!(s.spectral_entropy_nats >= -1e-12);
        prop_assert!(s.spectral_entropy_nats <= k.ln() + 1e-9);
        prop_assert!((0.5..=45.0).contains(&s.mean_freq_hz));
        prop_assert!((0.5..=45.0).contains(&s.median_freq_hz));
    }

    /// Subject-disjoint splitting never leaks a subject and always covers
    /// every class in every partition.
    #[test]
    fn split_is_always_subject_disjoint(
        n_subjects in 6usize..40,
        sessions_per_subject in 1usize..4,
        n_classes in 2usize..4,
        seed in any::<u64>(),
    ) {
        // guarantee >= 3 subjects per class
        prop_assume!(n_subjects >= 3 * n_classes);
        let mut rows = Vec::new();
        for s in 0..n_subjects {
            for sess in 0..sessions_per_subject {
                rows.push(SessionFeatures {
                    subject_id: format!("s{s:03}"),
                    label: s % n_classes,
                    fft_bands: [0.2; 5],
                    dwt_bands: [0.2; 5],
                    mean_freq_hz: sess as f64,
                    median_freq_hz: 10.0,
                    spectral_entropy_nats: 1.0,
                });
            }
        }
        let split = features::split_by_subject(&rows, [0.6, 0.2, 0.2], seed).unwrap();
        prop_assert!(features::assert_subject_disjoint(&split).is_ok());
        prop_assert_eq!(
            split.train.len() + split.val.len() + split.test.len(),
            rows.len()
        );
        for part in [&split.train, &split.val, &split.test] {
            let mut classes: Vec<usize> = part.iter().map(|r| r.label).collect();
            classes.sort_unstable();
            classes.dedup();
            prop_assert_eq!(classes.len(), n_classes);
        }
    }

    /// AUROC and AUPRC stay in [0,1] on arbitrary score matrices; AUROC is
    /// invariant under strictly monotone transforms.
    #[test]
    fn ranking_metric_bounds(
        n in 4usize..40,
        seed in any::<u64>(),
    ) {
        let mut rng = neuroband::rng::Xoshiro256::seed_from(seed);
        let y: Vec<usize> = (0..n).map(|_| rng.next_below(2) as usize).collect();
        prop_assume!(y.iter().any(|&v| v == 0) && y.iter().any(|&v| v == 1));
        let scores = Array2::from_shape_fn((n, 2), |_| rng.next_f64());
        let auroc = metrics::auroc_ovr(&y, scores.view()).unwrap();
        let auprc = metrics::auprc_ovr(&y, scores.view()).unwrap();
        prop_assert!((0.0..=1.0).contains(&auroc.macro_value));
        prop_assert!((0.0..=1.0).contains(&auprc.macro_value));

        let transformed = scores.mapv(|v| (2.0 * v).exp() + 1.0);
        let auroc_t = metrics::auroc_ovr(&y, transformed.view()).unwrap();
        prop_assert!((auroc.macro_value - auroc_t.macro_value).abs() < 1e-12);
    }

    /// Smoothed KL is nonnegative and zero against itself.
    #[test]
    fn kl_gibbs_inequality(
        rows in 1usize..4,
        cols in 1usize..5,
        seed in any::<u64>(),
    ) {
        let mut rng = neuroband::rng::Xoshiro256::seed_from(seed);
        let a = AttentionMap {
            sample_id: "a".into(),
            outcome: Outcome::Correct,
            weights: Array2::from_shape_fn((rows, cols), |_| rng.next_f64() + 1e-6),
        };
        let b = AttentionMap {
            sample_id: "b".into(),
            outcome: Outcome::Incorrect,
            weights: Array2::from_shape_fn((rows, cols), |_| rng.next_f64() + 1e-6),
        };
        let p = attention::normalize_map(&a, KL_SMOOTHING_EPS).unwrap();
        let q = attention::normalize_map(&b, KL_SMOOTHING_EPS).unwrap();
        prop_assert!(attention::kl_divergence(&p, &q).unwrap() >= -1e-12);
        prop_assert!(attention::kl_divergence(&p, &p).unwrap().abs() <= 1e-12);
    }

    /// The EDF affine scaling is invertible to within half a digital unit —
    /// checked on the formula itself over arbitrary ranges.
    #[test]
    fn edf_scaling_affine_invertible(
        digital in -32768i32..=32767,
        phys_min in -500.0f64..0.0,
        phys_span in 1.0f64..1000.0,
    ) {
        let (dig_min, dig_max) = (-32768f64, 32767f64);
        let phys_max = phys_min + phys_span;
        let slope = (phys_max - phys_min) / (dig_max - dig_min);
        let physical = phys_min + slope * (digital as f64 - dig_min);
        let recovered = (physical - phys_min) / slope + dig_min;
        prop_assert!((recovered - digital as f64).abs() <= 0.5);
    }
}
