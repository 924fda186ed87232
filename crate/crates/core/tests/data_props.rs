use std::collections::HashSet;

use flowfactor::data::{render, Factors, ImageMatrix, LatentCodec, LatentLayout, ToyDataset, NUM_SCENES};
use flowfactor::metrics::{extract_attributes, MetricsError};
use flowfactor::rng::{splitmix64, Rng};
use proptest::prelude::*;

/// Reference mix written out from the published constants.
fn reference_next(state: u64) -> (u64, u64) {
    let s = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = s;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (s, z ^ (z >> 31))
}

#[test]
fn extractor_recovers_every_clean_scene() {
    let ds = ToyDataset;
    let wrong: Vec<usize> = (0..NUM_SCENES)
        .filter(|&i| extract_attributes(&ds.image(i)).ok() != Some(ds.factors(i)))
        .collect();
    assert!(wrong.is_empty(), "{} scenes misread, first {:?}", wrong.len(), wrong.first());
}

#[test]
fn every_scene_renders_a_distinct_image() {
    let ds = ToyDataset;
    let mut seen = HashSet::with_capacity(NUM_SCENES);
    for i in 0..NUM_SCENES {
        let key: Vec<u64> = ds.image(i).iter().map(|v| v.to_bits()).collect();
        assert!(seen.insert(key), "scene {i} duplicates an earlier one");
    }
}

#[test]
fn mean_image_has_no_object() {
    let ds = ToyDataset;
    let mut mean = vec![0.0; flowfactor::data::PIXELS];
    for i in 0..NUM_SCENES {
        mean.iter_mut().zip(ds.image(i)).for_each(|(m, v)| *m += v / NUM_SCENES as f64);
    }
    assert_eq!(extract_attributes(&mean), Err(MetricsError::NoObject));
}

#[test]
fn extractor_survives_small_noise() {
    let ds = ToyDataset;
    let mut rng = Rng::new(2024);
    let a = 0.02 * 3f64.sqrt();
    let trials = 2000;
    let hits = (0..trials)
        .filter(|_| {
            let i = rng.below(NUM_SCENES);
            let img: Vec<f64> = ds.image(i).iter().map(|v| v + rng.range(-a, a)).collect();
            extract_attributes(&img).ok() == Some(ds.factors(i))
        })
        .count();
    assert!(hits as f64 >= 0.99 * trials as f64, "{hits}/{trials}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn splitmix_matches_reference(seed in any::<u64>()) {
        let (mut a, mut b) = (seed, seed);
        for _ in 0..16 {
            let (sa, oa) = splitmix64(a);
            let (sb, ob) = reference_next(b);
            prop_assert_eq!((sa, oa), (sb, ob));
            a = sa;
            b = sb;
        }
        let mut rng = Rng::new(seed);
        prop_assert_eq!(rng.next_u64(), reference_next(seed).1);
    }

    #[test]
    fn rendering_is_pure(index in 0..NUM_SCENES) {
        let f = Factors::from_index(index).unwrap();
        prop_assert_eq!(f.to_index(), index);
        let a = render(&f);
        prop_assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
        let b = render(&f);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn codec_basis_is_orthonormal_and_latents_white(seed in any::<u64>(), dims in 1usize..6) {
        let mut rng = Rng::new(seed);
        let (n, pixels) = (40, 12);
        // Low-rank structure plus noise, so leading directions are well separated.
        let data: Vec<f64> = (0..n)
            .flat_map(|_| {
                let a = 3.0 * rng.gaussian();
                let b = rng.gaussian();
                (0..pixels).map(|p| a * (p as f64).sin() + b * (p as f64 * 0.3).cos() + 0.1 * rng.gaussian()).collect::<Vec<_>>()
            })
            .collect();
        let m = ImageMatrix { pixels, data: data.clone() };
        let codec = LatentCodec::fit(&m, LatentLayout { tokens: dims, channels: 1 }).unwrap();
        for i in 0..dims {
            for j in 0..dims {
                let dot: f64 = (0..pixels).map(|p| codec.basis[p * dims + i] * codec.basis[p * dims + j]).sum();
                prop_assert!((dot - (i == j) as u8 as f64).abs() < 1e-10);
            }
            let col: Vec<f64> = (0..pixels).map(|p| codec.basis[p * dims + i]).collect();
            let big = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            prop_assert!(big > 0.0);
        }
        let z = codec.encode_batch(&data).unwrap();
        for k in 0..dims {
            let col: Vec<f64> = z.iter().skip(k).step_by(dims).copied().collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-8);
        }
    }
}
