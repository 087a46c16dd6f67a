mod common;

use common::check_augmentation_laws;
use polypscope::preprocess::{
    augment, augment_variants, conform_size, fit_color_pca, normalize, AugmentConfig, ConformTarget, NormalizationStats,
    RotationMode,
};
use polypscope::{RandomStream, RasterImage};

#[test]
fn randomized_laws() {
    let root = RandomStream::new(99);
    for i in 0..200 {
        check_augmentation_laws(&mut root.derive_index(i)).unwrap();
    }
}

#[test]
fn conform_examples() {
    let img = RasterImage::from_fn(55, 40, |x, y| [x as u8, y as u8, 200]).unwrap();
    let target = ConformTarget::new(110, 85).unwrap();
    let out = conform_size(&img, target).unwrap();
    assert_eq!(out.dimensions(), (110, 85));
    assert_eq!(out.pixel(54, 39), [54, 39, 200]);
    assert_eq!(out.pixel(55, 0), [0, 0, 0]);
    assert_eq!(out.pixel(0, 40), [0, 0, 0]);

    let big = RasterImage::from_fn(220, 170, |_, _| [9, 9, 9]).unwrap();
    let out = conform_size(&big, target).unwrap();
    assert_eq!(out.dimensions(), (110, 85));
    assert_eq!(out.pixel(109, 84), [9, 9, 9]);
}

#[test]
fn augmentation_is_seeded() {
    let mut rng = RandomStream::new(1);
    let img = RasterImage::from_fn(9, 7, |_, _| [0; 3].map(|_| rng.below(256) as u8)).unwrap();
    let stats = NormalizationStats { mean: [120.0; 3], std: [50.0; 3] };
    let t = normalize(&img, &stats);
    let pca = fit_color_pca([&img]).unwrap();
    let cfg = AugmentConfig::default();
    let a = augment(&t, &pca, &cfg, &mut RandomStream::new(5));
    let b = augment(&t, &pca, &cfg, &mut RandomStream::new(5));
    assert_eq!(a, b);
    let four = augment_variants(&t, &pca, &AugmentConfig { rotation_mode: RotationMode::AllFour, ..cfg }, &mut RandomStream::new(5));
    assert_eq!(four.len(), 4);
}
