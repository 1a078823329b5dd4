use atelier_core::fixtures::{random_image, sample_apparel, sample_apparel_without, sample_catalog};
use atelier_core::merge::{merge, MergeRecipe};
use atelier_core::raster::{rasterize_apparel, BinaryMask, Canvas};
use atelier_core::rng::SplitMix64;
use atelier_core::transfer::{
    compute_color_stats, compute_color_stats_in, mean_std_transfer, mean_std_values, stylize, wct_transfer, wct_values,
    working_values, ColorSpace, ColorStats, StyleContent, StyleSpec, TransferError, TransferMethod, DEFAULT_EPSILON,
};
use atelier_core::{ApparelId, SegmentClass};
use image::{Rgb, RgbImage};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn max_channel_diff(a: &RgbImage, b: &RgbImage) -> u8 {
    a.pixels()
        .zip(b.pixels())
        .flat_map(|(p, q)| (0..3).map(move |c| p.0[c].abs_diff(q.0[c])))
        .max()
        .unwrap_or(0)
}

/// Single-pass sums, no shared code with the library.
fn naive_stats(img: &RgbImage) -> ([f64; 3], [[f64; 3]; 3]) {
    let n = f64::from(img.width() * img.height());
    let mut s = [0.0; 3];
    let mut ss = [[0.0; 3]; 3];
    for p in img.pixels() {
        let v = p.0.map(|c| f64::from(c) / 255.0);
        for i in 0..3 {
            s[i] += v[i];
            for j in 0..3 {
                ss[i][j] += v[i] * v[j];
            }
        }
    }
    let mean = s.map(|x| x / n);
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            cov[i][j] = ss[i][j] / n - mean[i] * mean[j];
        }
    }
    (mean, cov)
}

#[test]
fn stats_match_naive_accumulation() {
    let mut rng = SplitMix64::new(99);
    for _ in 0..20 {
        let img = random_image(&mut rng, 16, 16, 0, 255);
        let s = compute_color_stats(&img, None).unwrap();
        let (mean, cov) = naive_stats(&img);
        for i in 0..3 {
            assert!((s.mean[i] - mean[i]).abs() < 1e-9);
            for (j, c) in cov[i].iter().enumerate() {
                assert!((s.cov[(i, j)] - c).abs() < 1e-9);
            }
        }
        let eig = s.cov.symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l >= -1e-9));
        assert_eq!(s.cov, s.cov.transpose());
    }
}

#[test]
fn identical_stats_are_identity() {
    let mut rng = SplitMix64::new(5);
    for _ in 0..10 {
        let img = random_image(&mut rng, 24, 24, 0, 255);
        let lab = compute_color_stats_in(&img, None, ColorSpace::Lab).unwrap();
        let out = mean_std_transfer(&img, &lab, &lab, DEFAULT_EPSILON).unwrap();
        assert!(max_channel_diff(&img, &out) <= 1);
        let lin = compute_color_stats(&img, None).unwrap();
        let out = wct_transfer(&img, &lin, &lin, DEFAULT_EPSILON).unwrap();
        assert!(max_channel_diff(&img, &out) <= 1);
    }
}

#[test]
fn zero_variance_channel_lands_on_style_mean() {
    let mut rng = SplitMix64::new(6);
    // Constant gray content: every lαβ channel has zero variance.
    let content = RgbImage::from_pixel(8, 8, Rgb([90, 90, 90]));
    let style = random_image(&mut rng, 8, 8, 30, 220);
    let cs = compute_color_stats_in(&content, None, ColorSpace::Lab).unwrap();
    let ss = compute_color_stats_in(&style, None, ColorSpace::Lab).unwrap();
    let values = working_values(&content, None, ColorSpace::Lab).unwrap();
    let out = mean_std_values(&values, &cs, &ss, DEFAULT_EPSILON).unwrap();
    for v in &out {
        assert!(v.iter().all(|x| x.is_finite()));
        assert!((v - ss.mean).norm() < 1e-9);
    }
    let img = mean_std_transfer(&content, &cs, &ss, DEFAULT_EPSILON).unwrap();
    assert!(img.pixels().all(|p| *p == img.pixels().next().copied().unwrap()));
}

fn to_rgb_in_gamut(values: &[Vector3<f64>], space: ColorSpace) -> bool {
    values.iter().all(|v| {
        let rgb = space.to_rgb(v);
        rgb.iter().all(|&c| (-0.5..=255.5).contains(&c))
    })
}

fn frobenius_rel(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Random content/style pairs whose transfer stays in gamut; others are
/// redrawn.
fn in_gamut_pairs(
    seed: u64,
    space: ColorSpace,
    transfer: impl Fn(&[Vector3<f64>], &ColorStats, &ColorStats) -> Vec<Vector3<f64>>,
    mut check: impl FnMut(&ColorStats, &ColorStats),
) -> usize {
    let mut rng = SplitMix64::new(seed);
    let mut accepted = 0;
    let mut tries = 0;
    while accepted < 50 {
        tries += 1;
        assert!(tries < 5000, "could not draw in-gamut pairs");
        let (lo, span) = (rng.below(100) as u8, 40 + rng.below(100) as u8);
        let content = random_image(&mut rng, 32, 32, lo, lo + span);
        let (lo, span) = (rng.below(100) as u8, 20 + rng.below(60) as u8);
        let style = random_image(&mut rng, 32, 32, lo, lo + span);
        let mask = BinaryMask::from_fn(32, 32, |x, y| (x * 7 + y * 3) % 5 != 0);
        let cs = compute_color_stats_in(&content, Some(&mask), space).unwrap();
        let ss = compute_color_stats_in(&style, None, space).unwrap();
        let values = working_values(&content, Some(&mask), space).unwrap();
        let out = transfer(&values, &cs, &ss);
        if !to_rgb_in_gamut(&out, space) {
            continue;
        }
        let os = ColorStats::from_values(&out, space).unwrap();
        check(&os, &ss);
        accepted += 1;
    }
    tries
}

#[test]
fn mean_std_matches_style_moments() {
    in_gamut_pairs(
        21,
        ColorSpace::Lab,
        |v, cs, ss| mean_std_values(v, cs, ss, DEFAULT_EPSILON).unwrap(),
        |out, style| {
            let (om, sm) = (out.mean, style.mean);
            let (od, sd) = (out.std_dev(), style.std_dev());
            for c in 0..3 {
                assert!((om[c] - sm[c]).abs() <= 0.5 / 255.0, "mean {c}: {om} vs {sm}");
                assert!((od[c] - sd[c]).abs() <= 0.01 * sd[c], "std {c}: {od} vs {sd}");
            }
        },
    );
}

#[test]
fn wct_matches_style_covariance() {
    in_gamut_pairs(
        22,
        ColorSpace::LinearRgb,
        |v, cs, ss| wct_values(v, cs, ss, DEFAULT_EPSILON).unwrap(),
        |out, style| {
            assert!(frobenius_rel(&out.cov, &style.cov) <= 0.02);
            assert!((out.mean - style.mean).norm() < 1e-9);
        },
    );
}

fn red_swatch(w: u32, h: u32) -> RgbImage {
    let mut rng = SplitMix64::new(3);
    RgbImage::from_fn(w, h, |_, _| {
        Rgb([
            200 + rng.below(40) as u8,
            20 + rng.below(30) as u8,
            30 + rng.below(30) as u8,
        ])
    })
}

fn masked_mean(img: &RgbImage, mask: &BinaryMask) -> [f64; 3] {
    let s = compute_color_stats(img, Some(mask)).unwrap();
    [s.mean[0], s.mean[1], s.mean[2]]
}

#[test]
fn dress_takes_the_swatch_color_inside_the_silhouette_only() {
    let (record, image) = sample_apparel("blue", 1, 96, 128);
    let style = red_swatch(40, 40);
    let silhouette = rasterize_apparel(&record)
        .unwrap()
        .get(SegmentClass::Silhouette)
        .unwrap()
        .clone();
    for method in [TransferMethod::MeanStd, TransferMethod::Wct] {
        let result = stylize(
            StyleContent::Apparel {
                record: &record,
                image: &image,
            },
            &style,
            &StyleSpec::new(method),
        )
        .unwrap();
        assert_eq!(result.image.dimensions(), image.dimensions());
        for (i, (p, q)) in result.image.pixels().zip(image.pixels()).enumerate() {
            if !silhouette.get_index(i) {
                assert_eq!(p, q, "{method:?} pixel {i}");
            }
        }
        let before = masked_mean(&image, &silhouette);
        let after = masked_mean(&result.image, &silhouette);
        let target = masked_mean(&style, &BinaryMask::full(40, 40));
        let dist = |m: [f64; 3]| (0..3).map(|c| (m[c] - target[c]).powi(2)).sum::<f64>().sqrt();
        assert!(
            dist(after) < dist(before) * 0.5,
            "{method:?}: {before:?} -> {after:?} (style {target:?})"
        );
        assert!(after[0] - after[2] > before[0] - before[2]);
    }
}

#[test]
fn merged_designs_are_restyled_through_their_coverage() {
    let catalog = sample_catalog(&["a", "b"], 80, 100);
    let id = |s: &str| ApparelId::new(s).unwrap();
    let recipe = MergeRecipe::new(id("a"), Canvas::new(90, 110)).then(id("b"), SegmentClass::SleeveLeft);
    let merged = merge(&recipe, &catalog).unwrap();
    let covered = merged.provenance.covered();
    let out = stylize(
        StyleContent::Merged(&merged),
        &red_swatch(20, 20),
        &StyleSpec::default(),
    )
    .unwrap();
    for (i, (p, q)) in out.image.pixels().zip(merged.image.pixels()).enumerate() {
        if !covered.get_index(i) {
            assert_eq!(p, q);
        }
    }
    assert_ne!(out.image, merged.image);

    let sleeve_only = StyleSpec {
        target_part: SegmentClass::SleeveLeft,
        ..StyleSpec::default()
    };
    let out = stylize(StyleContent::Merged(&merged), &red_swatch(20, 20), &sleeve_only).unwrap();
    let sleeve = merged.part_mask(SegmentClass::SleeveLeft);
    for (i, (p, q)) in out.image.pixels().zip(merged.image.pixels()).enumerate() {
        if !sleeve.get_index(i) {
            assert_eq!(p, q);
        }
    }
}

#[test]
fn stylize_with_itself_is_identity() {
    let mut rng = SplitMix64::new(8);
    let img = random_image(&mut rng, 50, 40, 0, 255);
    let full = BinaryMask::full(50, 40);
    for method in [TransferMethod::MeanStd, TransferMethod::Wct] {
        let out = stylize(
            StyleContent::Masked {
                image: &img,
                mask: &full,
            },
            &img,
            &StyleSpec::new(method),
        )
        .unwrap();
        assert!(max_channel_diff(&out.image, &img) <= 1, "{method:?}");
    }
}

#[test]
fn solid_swatch_is_a_valid_style() {
    let (record, image) = sample_apparel("s", 0, 64, 64);
    let swatch = RgbImage::from_pixel(8, 8, Rgb([20, 120, 60]));
    for method in [TransferMethod::MeanStd, TransferMethod::Wct] {
        let out = stylize(
            StyleContent::Apparel {
                record: &record,
                image: &image,
            },
            &swatch,
            &StyleSpec::new(method),
        )
        .unwrap();
        let sil = rasterize_apparel(&record)
            .unwrap()
            .get(SegmentClass::Silhouette)
            .unwrap()
            .clone();
        let m = masked_mean(&out.image, &sil);
        assert!((m[1] * 255.0 - 120.0).abs() < 6.0, "{method:?} {m:?}");
    }
}

#[test]
fn stylize_errors() {
    let (record, image) = sample_apparel_without("np", 0, 40, 40, SegmentClass::Print);
    let style = red_swatch(10, 10);
    let content = StyleContent::Apparel {
        record: &record,
        image: &image,
    };
    let spec = StyleSpec {
        target_part: SegmentClass::Print,
        ..StyleSpec::default()
    };
    assert_eq!(
        stylize(content, &style, &spec).unwrap_err(),
        TransferError::MissingPart(SegmentClass::Print)
    );

    let mut spec = StyleSpec {
        style_mask: Some(BinaryMask::empty(10, 10)),
        ..StyleSpec::default()
    };
    assert_eq!(
        stylize(content, &style, &spec).unwrap_err(),
        TransferError::EmptyStyleMask
    );

    spec.style_mask = Some(BinaryMask::full(11, 10));
    assert_eq!(stylize(content, &style, &spec).unwrap_err().code(), "DimensionMismatch");

    let spec = StyleSpec {
        epsilon: -1.0,
        ..StyleSpec::default()
    };
    assert_eq!(stylize(content, &style, &spec).unwrap_err().code(), "InvalidEpsilon");

    let spec = StyleSpec {
        target_part: SegmentClass::Background,
        ..StyleSpec::default()
    };
    assert_eq!(stylize(content, &style, &spec).unwrap_err().code(), "InvalidPart");
}

#[test]
fn style_mask_limits_sampled_pixels() {
    let (record, image) = sample_apparel("m", 2, 48, 48);
    // Left half red, right half blue; sampling only the right half must pull
    // toward blue.
    let style = RgbImage::from_fn(
        20,
        20,
        |x, _| if x < 10 { Rgb([220, 30, 30]) } else { Rgb([30, 30, 220]) },
    );
    let spec = StyleSpec {
        style_mask: Some(BinaryMask::from_fn(20, 20, |x, _| x >= 10)),
        ..StyleSpec::default()
    };
    let out = stylize(
        StyleContent::Apparel {
            record: &record,
            image: &image,
        },
        &style,
        &spec,
    )
    .unwrap();
    let sil = rasterize_apparel(&record)
        .unwrap()
        .get(SegmentClass::Silhouette)
        .unwrap()
        .clone();
    let m = masked_mean(&out.image, &sil);
    assert!(m[2] > m[0] + 0.3, "{m:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn outside_mask_is_bit_identical(
        seed in any::<u64>(),
        w in 1u32..24,
        h in 1u32..24,
        wct in any::<bool>(),
        density in 1u64..8,
    ) {
        let mut rng = SplitMix64::new(seed);
        let content = random_image(&mut rng, w, h, 0, 255);
        let style = random_image(&mut rng, 7, 5, 0, 255);
        let mut mask = BinaryMask::from_fn(w, h, |_, _| rng.below(8) < density);
        mask.set(0, 0, true);
        let method = if wct { TransferMethod::Wct } else { TransferMethod::MeanStd };
        let out = stylize(StyleContent::Masked { image: &content, mask: &mask }, &style, &StyleSpec::new(method)).unwrap();
        for (i, (p, q)) in out.image.pixels().zip(content.pixels()).enumerate() {
            if !mask.get_index(i) {
                prop_assert_eq!(p, q);
            }
        }
        let again = stylize(StyleContent::Masked { image: &content, mask: &mask }, &style, &StyleSpec::new(method)).unwrap();
        prop_assert_eq!(again.image, out.image);
    }
}
