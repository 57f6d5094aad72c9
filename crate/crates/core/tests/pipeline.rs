mod common;

use nsb_core::pyramid::{
    build_level_datasets, decode, deserialize_code, deserialize_dataset, encode, full_decompose, low_pass_decode,
    recompose, serialize_code, serialize_dataset, BandPredictor, LevelGeometry, OraclePredictor, ZeroPredictor,
};
use nsb_core::recon::{DecoderModel, TrunkConfig};
use nsb_core::wavelet::{dwt2d, idwt2d, make_filter_bank, SUPPORTED_WAVELETS};
use nsb_core::{Error, FormatError};
use proptest::prelude::*;

use common::rand_image;

#[test]
fn zero_predictor_decode_is_low_pass_decode() {
    for name in SUPPORTED_WAVELETS {
        let fb = make_filter_bank(name).unwrap();
        let x = rand_image(1, 64, 64, 3);
        let code = encode(&x, 2, &fb).unwrap();
        let zeros = [ZeroPredictor(LevelGeometry::new(32, 8, 3).unwrap()), ZeroPredictor(LevelGeometry::new(16, 8, 3).unwrap())];
        let refs: Vec<&dyn BandPredictor> = zeros.iter().map(|z| z as &dyn BandPredictor).collect();
        let a = decode(&code, &refs, &fb).unwrap();
        let b = low_pass_decode(&code, &fb).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12, "{name}");
    }
}

#[test]
fn untrained_decoder_slots_into_the_pipeline() {
    let fb = make_filter_bank("haar").unwrap();
    let x = rand_image(2, 32, 32, 1);
    let code = encode(&x, 2, &fb).unwrap();
    let trunk = TrunkConfig { width: 4, head_width: 4, stages: 1 };
    let m1 = DecoderModel::build(1, LevelGeometry::for_level(32, 1, 8, 1).unwrap(), trunk, 0).unwrap();
    let m2 = DecoderModel::build(2, LevelGeometry::for_level(32, 2, 8, 1).unwrap(), trunk, 0).unwrap();
    let y = decode(&code, &[&m1, &m2], &fb).unwrap();
    assert_eq!(y.dims(), x.dims());
    assert!(y.data().iter().all(|v| v.is_finite()));

    let swapped = decode(&code, &[&m2, &m1], &fb);
    assert!(matches!(swapped, Err(Error::Geometry(msg)) if msg.contains("level")));
    assert!(decode(&code, &[&m1], &fb).is_err());
}

#[test]
fn wavelet_mismatch_is_rejected() {
    let x = rand_image(3, 16, 16, 1);
    let code = encode(&x, 1, &make_filter_bank("haar").unwrap()).unwrap();
    let other = make_filter_bank("bior2.2").unwrap();
    let z = ZeroPredictor(LevelGeometry::new(8, 8, 1).unwrap());
    assert!(decode(&code, &[&z], &other).is_err());
}

#[test]
fn indivisible_images_name_the_axis() {
    let fb = make_filter_bank("haar").unwrap();
    let err = encode(&rand_image(4, 48, 36, 1), 3, &fb).unwrap_err().to_string();
    assert!(err.contains("36") && err.contains("width"), "{err}");
}

#[test]
fn dataset_container_round_trip_and_faults() {
    let fb = make_filter_bank("bior2.2").unwrap();
    let imgs: Vec<_> = (0..3).map(|i| rand_image(10 + i, 16, 16, 3)).collect();
    let sets = build_level_datasets(&imgs, 2, &fb).unwrap();
    assert_eq!(sets.len(), 2);
    assert_eq!(sets[1].band_dims(), Some((4, 4, 3)));
    for ds in &sets {
        let bytes = serialize_dataset(ds).unwrap();
        let back = deserialize_dataset(&bytes).unwrap();
        assert_eq!((back.level, &back.image_ids, back.band_dims()), (ds.level, &ds.image_ids, ds.band_dims()));
        assert_eq!(serialize_dataset(&back).unwrap(), bytes);
        assert!(matches!(
            deserialize_dataset(&bytes[..bytes.len() - 1]),
            Err(FormatError::Truncated { .. })
        ));
    }
    assert!(matches!(deserialize_dataset(b"NSBC\x01\x00"), Err(FormatError::BadMagic { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn single_level_perfect_reconstruction(
        seed in 0u64..1_000_000,
        h in 1usize..40,
        w in 1usize..40,
        c in prop::sample::select(vec![1usize, 3]),
        wi in 0usize..2,
    ) {
        let fb = make_filter_bank(SUPPORTED_WAVELETS[wi]).unwrap();
        let x = rand_image(seed, 2 * h, 2 * w, c);
        let q = dwt2d(&x, &fb).unwrap();
        prop_assert_eq!(q.tl.dims(), (h, w, c));
        prop_assert!(idwt2d(&q, &fb).unwrap().max_abs_diff(&x) < 1e-10);
    }

    #[test]
    fn multi_level_recompose_and_oracle_decode(
        seed in 0u64..1_000_000,
        levels in 1usize..=3,
        wi in 0usize..2,
    ) {
        let fb = make_filter_bank(SUPPORTED_WAVELETS[wi]).unwrap();
        let x = rand_image(seed, 64, 64, 3);
        let quads = full_decompose(&x, levels, &fb).unwrap();
        prop_assert!(recompose(&quads, &fb).unwrap().max_abs_diff(&x) < 1e-10);

        let code = encode(&x, levels, &fb).unwrap();
        prop_assert_eq!(code.compression_ratio(), 1 << (2 * levels));
        let oracles = OraclePredictor::for_image(&x, levels, 4, &fb).unwrap();
        let refs: Vec<&dyn BandPredictor> = oracles.iter().map(|o| o as &dyn BandPredictor).collect();
        prop_assert!(decode(&code, &refs, &fb).unwrap().max_abs_diff(&x) < 1e-8);
    }

    #[test]
    fn code_container_round_trips(seed in 0u64..1_000_000, levels in 1usize..=2, c in prop::sample::select(vec![1usize, 3])) {
        let fb = make_filter_bank("bior2.2").unwrap();
        let code = encode(&rand_image(seed, 16, 32, c), levels, &fb).unwrap();
        let bytes = serialize_code(&code).unwrap();
        let back = deserialize_code(&bytes).unwrap();
        prop_assert_eq!(serialize_code(&back).unwrap(), bytes);
        prop_assert_eq!(back.tl.dims(), code.tl.dims());
        prop_assert_eq!(back.levels, levels);
    }

    #[test]
    fn head_count_follows_band_geometry(k in 0u32..4, p in prop::sample::select(vec![4usize, 8, 32])) {
        let band = p << k;
        let g = LevelGeometry::new(band, p, 3).unwrap();
        prop_assert_eq!(g.head_count(), 3 * (band / p).pow(2));
    }
}
