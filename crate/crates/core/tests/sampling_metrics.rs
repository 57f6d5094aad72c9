mod common;

use nsb_core::corpus::{toy_corpus, ToyCorpusConfig, TOY_CLASSES};
use nsb_core::metrics::{eval_report, extract_features, frechet_distance, FeatureMethod, FeatureSpec};
use nsb_core::pixel::{bilinear_downsample, bilinear_upsample, compare_information_content};
use nsb_core::prior::{empirical_sample, fit_sampler, sample, TruncationLevel};
use nsb_core::pyramid::encode;
use nsb_core::wavelet::make_filter_bank;
use nsb_core::Image;
use proptest::prelude::*;

use common::rand_image;

fn small_corpus() -> Vec<nsb_core::corpus::ToyImage> {
    toy_corpus(&ToyCorpusConfig {
        per_class: 4,
        extent: 32,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn corpus_is_seeded_and_labelled() {
    let a = small_corpus();
    let b = small_corpus();
    assert_eq!(a.len(), 4 * TOY_CLASSES.len());
    assert!(a.iter().zip(&b).all(|(x, y)| x.image == y.image && x.name == y.name));
    assert_eq!(a[5].name, format!("{}/001", TOY_CLASSES[1]));
    let other = toy_corpus(&ToyCorpusConfig { per_class: 4, extent: 32, seed: 1, ..Default::default() }).unwrap();
    assert!(a.iter().zip(&other).any(|(x, y)| x.image != y.image));
    assert!(a.iter().all(|t| t.image.data().iter().all(|v| (0.0..=1.0).contains(v))));
}

#[test]
fn prior_fitted_on_latents_keeps_class_structure() {
    let fb = make_filter_bank("bior2.2").unwrap();
    let corpus = small_corpus();
    let tls: Vec<Image> = corpus.iter().map(|t| encode(&t.image, 2, &fb).unwrap().tl).collect();
    let labels: Vec<usize> = corpus.iter().map(|t| t.class).collect();
    let model = fit_sampler(&tls, &labels).unwrap();
    assert_eq!(model.class_count(), TOY_CLASSES.len());

    // Draws at the mode collapse onto the class mean.
    let at_mode = sample(&model, 3, TruncationLevel::new(1e-9).unwrap(), 2, 0).unwrap();
    let mean = model.mean(3).unwrap();
    assert!(at_mode[0].data().iter().zip(mean).all(|(a, b)| (a - b).abs() < 1e-6));

    let emp = empirical_sample(&tls, &labels, 2, 5, 0).unwrap();
    assert!(emp.iter().all(|e| tls.iter().zip(&labels).any(|(t, l)| *l == 2 && t == e)));
}

#[test]
fn truncated_draws_shrink_the_distance_to_the_class_mean() {
    let tls: Vec<Image> = (0..10).map(|i| rand_image(i, 4, 4, 3)).collect();
    let labels = vec![0; 10];
    let model = fit_sampler(&tls, &labels).unwrap();
    let spread = |t: f64| {
        let draws = sample(&model, 0, TruncationLevel::new(t).unwrap(), 500, 9).unwrap();
        let mean = model.mean(0).unwrap();
        draws
            .iter()
            .map(|d| d.data().iter().zip(mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum::<f64>()
    };
    assert!(spread(0.2) < spread(0.5) && spread(0.5) < spread(1.0));
    assert!(TruncationLevel::new(0.0).is_err() && TruncationLevel::new(1.5).is_err());
}

#[test]
fn eval_report_rows() {
    let real: Vec<Image> = (0..6).map(|i| rand_image(i, 16, 16, 3)).collect();
    let generated: Vec<Image> = (0..6).map(|i| rand_image(50 + i, 16, 16, 3)).collect();
    let spec = FeatureSpec::default();
    let r = eval_report(&real, &generated, Some(&real), &spec).unwrap();
    assert!(r.get("fd").unwrap() > 0.0);
    assert_eq!(r.get("mse"), Some(0.0));
    assert_eq!(r.get("psnr"), Some(f64::INFINITY));
    let csv = r.to_csv();
    assert!(csv.contains("inf") && csv.contains("pixel_moments"));
    assert_eq!(csv, eval_report(&real, &generated, Some(&real), &spec).unwrap().to_csv());
}

#[test]
fn fd_separates_shifted_sets() {
    let a: Vec<Image> = (0..8).map(|i| rand_image(i, 16, 16, 1)).collect();
    let b: Vec<Image> = a.iter().map(|x| x.map(|v| v * 0.5 + 0.5)).collect();
    for full in [false, true] {
        let spec = FeatureSpec {
            method: FeatureMethod::RandomProjection,
            dim: 8,
            seed: 1,
            full_covariance: full,
        };
        let sa = extract_features(&a, &spec).unwrap();
        let sb = extract_features(&b, &spec).unwrap();
        let d = frechet_distance(&sa, &sb).unwrap();
        assert!(d > 0.0 && (d - frechet_distance(&sb, &sa).unwrap()).abs() < 1e-9, "{d}");
    }
}

#[test]
fn compare_rows_cover_every_image() {
    let imgs: Vec<Image> = small_corpus().into_iter().map(|t| t.image).collect();
    let rows = compare_information_content(&imgs, 2, &make_filter_bank("haar").unwrap()).unwrap();
    assert_eq!(rows.len(), imgs.len());
    assert!(rows.iter().all(|r| r.wavelet_mse >= 0.0 && r.pixel_mse >= 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn resampling_preserves_constants(v in 0.0f64..1.0, k in 1usize..4, factor in prop::sample::select(vec![2usize, 4])) {
        let img = Image::filled(8 * k, 8 * k, 3, v);
        let down = bilinear_downsample(&img, factor).unwrap();
        prop_assert!(down.data().iter().all(|x| (x - v).abs() < 1e-12));
        let up = bilinear_upsample(&down, factor).unwrap();
        prop_assert_eq!(up.dims(), img.dims());
        prop_assert!(up.max_abs_diff(&img) < 1e-12);
    }

    #[test]
    fn fd_is_symmetric_and_nonnegative(s1 in 0u64..1000, s2 in 0u64..1000) {
        let a: Vec<Image> = (0..4).map(|i| rand_image(s1 * 10 + i, 16, 16, 3)).collect();
        let b: Vec<Image> = (0..4).map(|i| rand_image(s2 * 10 + i + 5000, 16, 16, 3)).collect();
        let spec = FeatureSpec::default();
        let (sa, sb) = (extract_features(&a, &spec).unwrap(), extract_features(&b, &spec).unwrap());
        let (ab, ba) = (frechet_distance(&sa, &sb).unwrap(), frechet_distance(&sb, &sa).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-9);
    }
}
