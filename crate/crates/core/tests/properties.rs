//! Property tests for the library's documented invariants, checked
//! against randomized inputs and, where one exists, a brute-force
//! oracle from `common`.

mod common;

use common::*;
use octseg::features::{
    balance_dataset, extract_dataset, extract_features, split_dataset, LabeledDataset, SplitSpec,
    FEATURE_NAMES,
};
use octseg::guidewire::{remove_shadow, ShadowBand};
use octseg::models::logreg::loss_and_gradient;
use octseg::models::metrics::{dice, evaluate};
use octseg::models::pca::pca_fit;
use octseg::models::svm::{decision_value, train_svm};
use octseg::noise::{local_variance_map, median_filter, salt_pepper_ratio};
use octseg::phantom::{generate_phantom, PhantomSpec};
use octseg::raster::{encode_pgm, parse_pgm, BinaryMask, GrayRaster, MASK_FOREGROUND};
use octseg::rng::SplitMix64;
use octseg::segmentation::{kmeans_segment, morph_refine, otsu_threshold};
use octseg::transform::{cartesian_to_polar, polar_to_cartesian, PolarGeometry};
use octseg::Error;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

/// Random raster with sides in the given ranges and arbitrary pixels.
fn raster(
    w: std::ops::RangeInclusive<usize>,
    h: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = GrayRaster> {
    (w, h).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h)
            .prop_map(move |px| GrayRaster::new(w, h, px).unwrap())
    })
}

/// Random 0/255 mask with sides in the given ranges.
fn mask(
    w: std::ops::RangeInclusive<usize>,
    h: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = BinaryMask> {
    (w, h).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<bool>(), w * h).prop_map(move |bits| {
            let px = bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
            BinaryMask::new(w, h, px).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pgm_codec_round_trips_every_raster(img in raster(1..=48, 1..=48)) {
        let back = parse_pgm(&encode_pgm(&img)).unwrap();
        prop_assert_eq!(back.width(), img.width());
        prop_assert_eq!(back.height(), img.height());
        prop_assert_eq!(back.pixels(), img.pixels());
    }

    #[test]
    fn pad_reflect_crop_recovers_and_adds_no_intensities(
        img in raster(2..=32, 2..=32),
        margin in 0usize..=6,
    ) {
        let margin = margin.min(img.width() - 1).min(img.height() - 1);
        let padded = img.pad_reflect(margin).unwrap();
        let cropped = padded
            .crop(margin, margin, img.width(), img.height())
            .unwrap();
        prop_assert_eq!(cropped.pixels(), img.pixels());

        let mut present = [false; 256];
        for &p in img.pixels() {
            present[p as usize] = true;
        }
        for &p in padded.pixels() {
            prop_assert!(present[p as usize], "padding invented intensity {}", p);
        }
    }

    #[test]
    fn median_filter_matches_the_full_sort_oracle(
        img in raster(1..=20, 1..=20),
        k in prop::sample::select(vec![3usize, 5, 7]),
    ) {
        // Reflect padding needs k/2 distinct pixels beyond each edge.
        prop_assume!(img.width().min(img.height()) > k / 2);
        let out = median_filter(&img, k).unwrap();
        for y in 0..img.height() {
            for x in 0..img.width() {
                let expected = median_oracle(&window_values(&img, x, y, k));
                prop_assert_eq!(out.get(x, y), expected, "pixel ({}, {})", x, y);
            }
        }
    }

    #[test]
    fn median_filter_fixes_constant_rasters(
        w in 3usize..=24,
        h in 3usize..=24,
        v in any::<u8>(),
        k in prop::sample::select(vec![3usize, 5]),
    ) {
        let img = GrayRaster::constant(w, h, v).unwrap();
        let filtered = median_filter(&img, k).unwrap();
        prop_assert_eq!(filtered.pixels(), img.pixels());
    }

    #[test]
    fn salt_pepper_ratio_ignores_pixel_order(
        img in raster(1..=32, 1..=32),
        seed in any::<u64>(),
        tau_min in 0u8..=30,
        tau_max in 220u8..=255,
    ) {
        let before = salt_pepper_ratio(&img, tau_min, tau_max).unwrap();
        let mut shuffled = img.pixels().to_vec();
        SplitMix64::new(seed).shuffle(&mut shuffled);
        let permuted = GrayRaster::new(img.width(), img.height(), shuffled).unwrap();
        let after = salt_pepper_ratio(&permuted, tau_min, tau_max).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn local_variance_matches_oracle_and_vanishes_on_constants(
        img in raster(3..=16, 3..=16),
        window in prop::sample::select(vec![3usize, 5]),
    ) {
        prop_assume!(img.width().min(img.height()) > window / 2);
        let map = local_variance_map(&img, window).unwrap();
        for y in 0..img.height() {
            for x in 0..img.width() {
                let got = map[y * img.width() + x];
                prop_assert!(got >= 0.0);
                let expected = variance_oracle(&window_values(&img, x, y, window));
                prop_assert_eq!(got, expected, "pixel ({}, {})", x, y);
            }
        }
        let flat = GrayRaster::constant(img.width(), img.height(), img.get(0, 0)).unwrap();
        prop_assert!(local_variance_map(&flat, window)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn shadow_removal_narrows_and_splices_exactly(
        img in raster(4..=40, 1..=12),
        start_frac in 0.0f64..1.0,
        width_frac in 0.0f64..1.0,
        blend_width in 0usize..=8,
    ) {
        let w = img.width();
        let width = 1 + (width_frac * (w - 2) as f64) as usize; // 1..=w-1
        let start = (start_frac * (w - width) as f64) as usize; // start+width <= w
        let band = ShadowBand { start_col: start, width, mean_intensity: 0.0 };
        let out = remove_shadow(&img, &band, blend_width).unwrap();

        let out_w = w - width;
        prop_assert_eq!(out.width(), out_w);
        prop_assert_eq!(out.height(), img.height());

        let s = start;
        let skip_blend = blend_width == 0 || s == 0 || s == out_w;
        let lo = s.saturating_sub(blend_width);
        let hi = (s + blend_width).min(out_w);
        for y in 0..img.height() {
            for j in 0..out_w {
                let src = if j < s { j } else { j + width };
                if skip_blend || j < lo || j >= hi {
                    prop_assert_eq!(out.get(j, y), img.get(src, y), "col {} row {}", j, y);
                } else {
                    let left = img.get(j.min(s - 1), y);
                    let right = img.get(j.max(s) + width, y);
                    let (lo_v, hi_v) = (left.min(right), left.max(right));
                    let got = out.get(j, y);
                    prop_assert!(
                        (lo_v..=hi_v).contains(&got),
                        "blend at col {} row {}: {} outside [{}, {}]",
                        j, y, got, lo_v, hi_v
                    );
                }
            }
        }
    }

    #[test]
    fn remapping_preserves_the_intensity_range(
        polar in raster(4..=48, 2..=20),
        fill in any::<u8>(),
    ) {
        let geom = PolarGeometry::for_polar(&polar, fill).unwrap();
        let (lo, hi) = polar.min_max();
        let cart = polar_to_cartesian(&polar, &geom).unwrap();
        for &p in cart.pixels() {
            prop_assert!((lo..=hi).contains(&p) || p == fill);
        }
        let (clo, chi) = cart.min_max();
        let back = cartesian_to_polar(&cart, &geom).unwrap();
        prop_assert_eq!((back.width(), back.height()), (polar.width(), polar.height()));
        for &p in back.pixels() {
            prop_assert!((clo..=chi).contains(&p));
        }
    }

    #[test]
    fn quarter_turn_column_shift_rotates_the_cartesian_image(
        polar in raster(4..=48, 2..=20),
    ) {
        // Round the width down to a multiple of 4 so the shift is an
        // exact quarter turn.
        let w = (polar.width() / 4) * 4;
        prop_assume!(w >= 4);
        let polar = polar.crop(0, 0, w, polar.height()).unwrap();
        let k = w / 4;
        let shifted = GrayRaster::from_fn(w, polar.height(), |x, y| {
            polar.get((x + w - k) % w, y)
        })
        .unwrap();

        let geom = PolarGeometry::for_polar(&polar, 0).unwrap();
        let cart = polar_to_cartesian(&polar, &geom).unwrap();
        let cart_shifted = polar_to_cartesian(&shifted, &geom).unwrap();
        let side = geom.cartesian_side();
        for y in 0..side {
            for x in 0..side {
                let rotated = cart.get(y, side - 1 - x);
                let got = cart_shifted.get(x, y);
                prop_assert!(
                    (got as i16 - rotated as i16).abs() <= 1,
                    "rotation mismatch at ({}, {}): {} vs {}",
                    x, y, got, rotated
                );
            }
        }
    }

    #[test]
    fn kmeans_inertia_never_increases(img in raster(2..=32, 2..=32)) {
        let (lo, hi) = img.min_max();
        prop_assume!(lo != hi);
        let (_, trace) = kmeans_segment(&img, 2, 0.5, 50).unwrap();
        for pair in trace.inertia_per_iter.windows(2) {
            prop_assert!(
                pair[1] <= pair[0],
                "inertia rose {} -> {}",
                pair[0], pair[1]
            );
        }
    }

    #[test]
    fn intensity_inversion_inverts_the_kmeans_mask(
        w in 2usize..=24,
        h in 2usize..=24,
        low in 5u8..=60,
        gap in 100u8..=180,
        seed in any::<u64>(),
    ) {
        let high = low.saturating_add(gap).min(253);
        let img = two_band_raster(w, h, low, high, seed);
        let (mask, _) = kmeans_segment(&img, 2, 0.5, 50).unwrap();
        let (inv_mask, _) = kmeans_segment(&invert(&img), 2, 0.5, 50).unwrap();
        for (a, b) in mask.pixels().iter().zip(inv_mask.pixels()) {
            prop_assert_eq!(*a, 255 - *b);
        }
    }

    #[test]
    fn otsu_equals_the_exhaustive_oracle(img in raster(1..=32, 1..=32)) {
        match otsu_oracle(&img) {
            None => prop_assert!(matches!(
                otsu_threshold(&img).unwrap_err(),
                Error::DegenerateHistogram
            )),
            Some((t, variance)) => {
                let got = otsu_threshold(&img).unwrap();
                prop_assert_eq!(got.threshold, t);
                prop_assert_eq!(got.between_class_variance, variance);
            }
        }
    }

    #[test]
    fn morph_refine_twice_changes_nothing(
        m in mask(1..=20, 1..=20),
        radius in 1usize..=2,
    ) {
        let once = morph_refine(&m, radius).unwrap();
        let twice = morph_refine(&once, radius).unwrap();
        prop_assert_eq!(once.pixels(), twice.pixels());
    }

    #[test]
    fn metrics_satisfy_the_accuracy_identity_and_f1_swap(
        labels in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200),
    ) {
        let truth: Vec<u8> = labels.iter().map(|&(t, _)| t as u8).collect();
        let pred: Vec<u8> = labels.iter().map(|&(_, p)| p as u8).collect();
        let report = evaluate(&truth, &pred).unwrap();

        let c = report.confusion;
        let expected =
            (c.true_pos + c.true_neg) as f64 / (c.true_pos + c.true_neg + c.false_pos + c.false_neg) as f64;
        prop_assert_eq!(report.accuracy, expected);

        // Relabeling which class is "positive" must swap the per-class
        // metrics verbatim.
        let truth_sw: Vec<u8> = truth.iter().map(|&t| 1 - t).collect();
        let pred_sw: Vec<u8> = pred.iter().map(|&p| 1 - p).collect();
        let swapped = evaluate(&truth_sw, &pred_sw).unwrap();
        prop_assert_eq!(report.class1, swapped.class0);
        prop_assert_eq!(report.class0, swapped.class1);
        prop_assert_eq!(report.accuracy, swapped.accuracy);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn median_strictly_reduces_impulses_on_smooth_frames(
        w in 16usize..=48,
        h in 16usize..=48,
        phase in 0.0f64..std::f64::consts::TAU,
        p in 0.01f64..=0.10,
        seed in any::<u64>(),
    ) {
        let clean = smooth_polar(w, h, phase);
        let n = w * h;
        let m = ((p * n as f64).ceil() as usize).max(1);
        let mut rng = SplitMix64::new(seed);
        let positions = rng.sample_indices(n, m);
        let mut px = clean.pixels().to_vec();
        for &i in &positions {
            px[i] = if rng.next_f64() < 0.5 { 0 } else { 255 };
        }
        let corrupted = GrayRaster::new(w, h, px).unwrap();

        // The smooth frame stays inside (5, 250), so the ratio counts
        // exactly the injected impulses.
        let before = salt_pepper_ratio(&corrupted, 5, 250).unwrap();
        prop_assert_eq!(before, m as f64 / n as f64);
        let filtered = median_filter(&corrupted, 3).unwrap();
        let after = salt_pepper_ratio(&filtered, 5, 250).unwrap();
        prop_assert!(
            after < before,
            "SPR did not drop: {} -> {}",
            before, after
        );
    }

    #[test]
    fn feature_rows_are_internally_consistent(
        img in raster(3..=24, 3..=24),
        patch in prop::sample::select(vec![3usize, 5, 7]),
    ) {
        prop_assume!(img.width().min(img.height()) > patch / 2);
        let rows = extract_features(&img, patch).unwrap();
        prop_assert_eq!(rows.len(), img.width() * img.height());
        for row in &rows {
            let [mean, std, min, max, median, entropy, grad] =
                <[f64; 7]>::try_from(row.as_slice()).unwrap();
            prop_assert!(min <= mean && mean <= max);
            prop_assert!(min <= median && median <= max);
            prop_assert!(std >= 0.0);
            prop_assert!((0.0..=9f64.log2() + 1e-12).contains(&entropy));
            prop_assert!(grad >= 0.0);
        }
    }

    #[test]
    fn extract_dataset_matches_the_brute_force_oracle(
        img in raster(3..=16, 3..=16),
        seed in any::<u64>(),
        patch in prop::sample::select(vec![3usize, 5]),
    ) {
        prop_assume!(img.width().min(img.height()) > patch / 2);
        let mut rng = SplitMix64::new(seed);
        let mask = BinaryMask::new(
            img.width(),
            img.height(),
            (0..img.width() * img.height())
                .map(|_| if rng.next_f64() < 0.5 { 255 } else { 0 })
                .collect(),
        )
        .unwrap();
        let ds = extract_dataset(&img, &mask, patch).unwrap();
        prop_assert_eq!(&ds.feature_names[..], &FEATURE_NAMES.map(String::from)[..]);
        for y in 0..img.height() {
            for x in 0..img.width() {
                let i = y * img.width() + x;
                let expected = feature_oracle(&img, x, y, patch);
                prop_assert_eq!(&ds.features[i][..], &expected[..], "pixel ({}, {})", x, y);
                prop_assert_eq!(ds.labels[i], u8::from(mask.get(x, y) == MASK_FOREGROUND));
            }
        }
    }

    #[test]
    fn balancing_keeps_minority_rows_and_never_duplicates(
        labels in prop::collection::vec(any::<bool>(), 2..120),
        seed in any::<u64>(),
    ) {
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        // One unique feature value per row makes identity checks exact.
        let ds = LabeledDataset::new(
            vec!["id".into()],
            (0..labels.len()).map(|i| vec![i as f64]).collect(),
            labels.iter().map(|&l| l as u8).collect(),
        )
        .unwrap();
        let balanced = balance_dataset(&ds, seed).unwrap();
        prop_assert!(balanced.balanced);

        let (n0, n1) = ds.class_counts();
        let minority = n0.min(n1);
        let (b0, b1) = balanced.class_counts();
        prop_assert_eq!((b0, b1), (minority, minority));

        let minority_label = u8::from(n1 <= n0);
        let kept: Vec<f64> = balanced.features.iter().map(|r| r[0]).collect();
        // No id may appear twice, and ids must stay in input order.
        for pair in kept.windows(2) {
            prop_assert!(pair[0] < pair[1], "rows reordered or duplicated");
        }
        for (i, &label) in ds.labels.iter().enumerate() {
            if label == minority_label {
                prop_assert!(
                    kept.binary_search_by(|v| v.partial_cmp(&(i as f64)).unwrap()).is_ok(),
                    "minority row {} dropped",
                    i
                );
            }
        }
    }

    #[test]
    fn splitting_partitions_the_dataset(
        labels in prop::collection::vec(any::<bool>(), 4..120),
        seed in any::<u64>(),
        train_fraction in 0.2f64..=0.9,
    ) {
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let ds = LabeledDataset::new(
            vec!["id".into()],
            (0..labels.len()).map(|i| vec![i as f64]).collect(),
            labels.iter().map(|&l| l as u8).collect(),
        )
        .unwrap();
        let spec = SplitSpec { train_fraction, seed, stratified: true };
        let (train, test) = split_dataset(&ds, &spec).unwrap();
        prop_assert_eq!(train.len() + test.len(), ds.len());
        let mut ids: Vec<i64> = train
            .features
            .iter()
            .chain(&test.features)
            .map(|r| r[0] as i64)
            .collect();
        ids.sort_unstable();
        let expected: Vec<i64> = (0..ds.len() as i64).collect();
        prop_assert_eq!(ids, expected, "split lost or duplicated rows");
    }

    #[test]
    fn logreg_gradient_matches_central_differences(
        n in 4usize..=30,
        d in 1usize..=4,
        seed in any::<u64>(),
        l2 in prop::sample::select(vec![0.0f64, 1e-4, 1e-2]),
    ) {
        let mut rng = SplitMix64::new(seed);
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.next_f64() * 4.0 - 2.0).collect())
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| (rng.next_f64() < 0.5) as u8).collect();
        // A non-zero evaluation point exercises asymmetric terms.
        let mut weights: Vec<f64> = (0..d).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let bias = rng.next_f64() * 2.0 - 1.0;

        let (_, grad_w, grad_b) = loss_and_gradient(&weights, bias, &features, &labels, l2);
        let h = 1e-5;
        let check = |analytic: f64, numeric: f64| -> Result<(), TestCaseError> {
            let denom = analytic.abs().max(numeric.abs()).max(1.0);
            prop_assert!(
                (analytic - numeric).abs() / denom <= 1e-5,
                "gradient mismatch: analytic {} vs numeric {}",
                analytic, numeric
            );
            Ok(())
        };
        for i in 0..d {
            let orig = weights[i];
            weights[i] = orig + h;
            let (plus, _, _) = loss_and_gradient(&weights, bias, &features, &labels, l2);
            weights[i] = orig - h;
            let (minus, _, _) = loss_and_gradient(&weights, bias, &features, &labels, l2);
            weights[i] = orig;
            check(grad_w[i], (plus - minus) / (2.0 * h))?;
        }
        let (plus, _, _) = loss_and_gradient(&weights, bias + h, &features, &labels, l2);
        let (minus, _, _) = loss_and_gradient(&weights, bias - h, &features, &labels, l2);
        check(grad_b, (plus - minus) / (2.0 * h))?;
    }

    #[test]
    fn svm_dual_is_feasible_and_decision_matches_the_kernel_formula(
        n in 4usize..=30,
        d in 1usize..=4,
        seed in any::<u64>(),
        c in prop::sample::select(vec![0.5f64, 1.0, 10.0]),
        gamma in 0.05f64..=2.0,
    ) {
        let mut rng = SplitMix64::new(seed);
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.next_f64() * 4.0 - 2.0).collect())
            .collect();
        let labels: Vec<u8> = (0..n)
            .map(|i| if i < 2 { i as u8 } else { (rng.next_f64() < 0.5) as u8 })
            .collect();
        let names = (0..d).map(|i| format!("f{i}")).collect();
        let ds = LabeledDataset::new(names, features.clone(), labels).unwrap();
        let model = train_svm(&ds, c, gamma, 1e-3, 5, seed).unwrap();

        prop_assert!(model.support_vectors.len() <= n);
        let mut sum = 0.0;
        for &coef in &model.dual_coefs {
            prop_assert!(coef.abs() <= c + 1e-12, "coefficient {} outside the box", coef);
            sum += coef;
        }
        prop_assert!(sum.abs() <= 1e-6, "Σ αᵢyᵢ = {}", sum);

        // The stored model must reproduce Σ αᵢyᵢ·exp(−γ‖xᵢ−x‖²) + b.
        for row in features.iter().take(3) {
            let mut manual = model.bias;
            for (sv, &coef) in model.support_vectors.iter().zip(&model.dual_coefs) {
                let d2: f64 = sv.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
                manual += coef * (-model.gamma * d2).exp();
            }
            let got = decision_value(&model, row).unwrap();
            prop_assert!(
                (got - manual).abs() <= 1e-9 * (1.0 + manual.abs()),
                "decision {} vs manual {}",
                got, manual
            );
        }
    }

    #[test]
    fn rbf_kernel_matrix_is_psd_with_unit_diagonal(
        n in 2usize..=12,
        d in 1usize..=4,
        seed in any::<u64>(),
        gamma in 0.05f64..=5.0,
    ) {
        let mut rng = SplitMix64::new(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.next_f64() * 4.0 - 2.0).collect())
            .collect();
        let mut kernel = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let d2: f64 = rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                kernel[i][j] = (-gamma * d2).exp();
            }
        }
        for (i, row) in kernel.iter().enumerate() {
            prop_assert_eq!(row[i], 1.0);
            for (j, &k_ij) in row.iter().enumerate() {
                prop_assert_eq!(k_ij, kernel[j][i]);
            }
        }
        let (eigenvalues, _) = jacobi_eigen(&kernel);
        for &ev in &eigenvalues {
            prop_assert!(ev >= -1e-8, "negative eigenvalue {}", ev);
        }
    }

    #[test]
    fn pca_reconstructs_rank_two_data(
        n in 5usize..=30,
        d in 3usize..=6,
        seed in any::<u64>(),
    ) {
        let mut rng = SplitMix64::new(seed);
        let mut vec_of = |scale: f64| -> Vec<f64> {
            (0..d).map(|_| (rng.next_f64() * 2.0 - 1.0) * scale).collect()
        };
        let mu = vec_of(3.0);
        let u = vec_of(1.0);
        let v = vec_of(1.0);
        // Coefficient magnitudes in [0.5, 2] keep the rank genuinely 2.
        let coeff = |rng: &mut SplitMix64| {
            let sign = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
            sign * (0.5 + 1.5 * rng.next_f64())
        };
        let data: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let (a, b) = (coeff(&mut rng), coeff(&mut rng));
                (0..d).map(|k| mu[k] + a * u[k] + b * v[k]).collect()
            })
            .collect();

        let model = pca_fit(&data).unwrap();
        for row in &data {
            let centered: Vec<f64> =
                row.iter().zip(&model.means).map(|(x, m)| x - m).collect();
            let mut recon = model.means.clone();
            for comp in &model.components {
                let score: f64 = centered.iter().zip(comp).map(|(x, c)| x * c).sum();
                for (r, c) in recon.iter_mut().zip(comp) {
                    *r += score * c;
                }
            }
            for (got, want) in recon.iter().zip(row) {
                prop_assert!(
                    (got - want).abs() <= 1e-8,
                    "reconstruction off: {} vs {}",
                    got, want
                );
            }
        }

        // Cross-check against a dense eigensolver: the variance carried
        // by the fitted plane equals the top-2 eigenvalue mass.
        let means = &model.means;
        let mut cov = vec![vec![0.0f64; d]; d];
        for row in &data {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (row[i] - means[i]) * (row[j] - means[j]);
                }
            }
        }
        for r in cov.iter_mut() {
            for x in r.iter_mut() {
                *x /= n as f64;
            }
        }
        let (eigenvalues, _) = jacobi_eigen(&cov);
        let top2: f64 = eigenvalues.iter().take(2).sum();
        let fitted: f64 = model.explained_variance.iter().sum();
        prop_assert!(
            (top2 - fitted).abs() <= 1e-6 * (1.0 + top2.abs()),
            "explained variance {} vs eigenvalue mass {}",
            fitted, top2
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn phantom_truth_ignores_noise_parameters(
        speckle in 0.0f64..=0.4,
        salt_pepper in 0.0f64..=0.3,
        seed in any::<u64>(),
    ) {
        let clean = PhantomSpec {
            speckle_sigma: 0.0,
            salt_pepper_fraction: 0.0,
            ..PhantomSpec::default()
        };
        let noisy = PhantomSpec {
            speckle_sigma: speckle,
            salt_pepper_fraction: salt_pepper,
            seed,
            ..clean.clone()
        };
        let (_, truth_clean) = generate_phantom(&clean).unwrap();
        let (_, truth_noisy) = generate_phantom(&noisy).unwrap();
        prop_assert_eq!(truth_clean.pixels(), truth_noisy.pixels());
    }

    #[test]
    fn denoised_kmeans_stays_close_to_phantom_truth(
        speckle in 0.0f64..=0.2,
        salt_pepper in 0.0f64..=0.05,
        seed in any::<u64>(),
    ) {
        let spec = PhantomSpec {
            speckle_sigma: speckle,
            salt_pepper_fraction: salt_pepper,
            shadow_width: 0,
            seed,
            ..PhantomSpec::default()
        };
        let (image, truth) = generate_phantom(&spec).unwrap();
        let filtered = median_filter(&image, 3).unwrap();
        let (mask, _) = kmeans_segment(&filtered, 2, 0.5, 50).unwrap();
        let score = dice(&mask, &truth).unwrap();
        prop_assert!(score >= 0.90, "Dice {} below 0.90", score);
    }
}

/// θ just under 2π must interpolate toward column 0 (wraparound), not
/// repeat the last column.
#[test]
fn sampling_below_two_pi_wraps_to_column_zero() {
    let polar = GrayRaster::from_fn(64, 64, |x, _| if x == 0 { 255 } else { 0 }).unwrap();
    let geom = PolarGeometry::for_polar(&polar, 0).unwrap();
    let cart = polar_to_cartesian(&polar, &geom).unwrap();
    // (120, 63) sits just below the +x axis: θ ≈ 2π − 0.009, so the
    // angular sample blends columns 63 (value 0) and 0 (value 255)
    // with nearly full weight on column 0.
    assert!(
        cart.get(120, 63) > 200,
        "wraparound sample too dark: {}",
        cart.get(120, 63)
    );
    // And just above the axis the same blend reads column 0 directly.
    assert!(cart.get(120, 64) > 200);
}
