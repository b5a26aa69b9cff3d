mod common;

use capsule_screen::colorspace::{rgb_to_hsv, rgb_to_lab, srgb_to_hsv, srgb_to_lab};
use capsule_screen::dataset::RgbImage;
use common::reference_lab;
use proptest::prelude::*;

#[test]
fn sampled_colours_match_reference() {
    let samples: [[u8; 3]; 10] = [
        [255, 0, 0],
        [0, 255, 0],
        [0, 0, 255],
        [200, 120, 90],
        [12, 34, 56],
        [250, 250, 10],
        [90, 10, 160],
        [180, 60, 70],
        [5, 5, 6],
        [128, 200, 255],
    ];
    for rgb in samples {
        let got = srgb_to_lab(rgb);
        let want = reference_lab(rgb);
        for k in 0..3 {
            assert!(
                (got[k] - want[k]).abs() < 0.05,
                "{rgb:?}: {got:?} vs {want:?}"
            );
        }
    }
}

#[test]
fn red_matches_published_value() {
    let lab = srgb_to_lab([255, 0, 0]);
    for (g, w) in lab.iter().zip([53.24, 80.09, 67.20]) {
        assert!((g - w).abs() < 0.05, "{lab:?}");
    }
}

#[test]
fn neutral_axis_is_exact() {
    assert_eq!(srgb_to_lab([0, 0, 0]), [0.0, 0.0, 0.0]);
    let white = srgb_to_lab([255, 255, 255]);
    assert!((white[0] - 100.0).abs() < 1e-9);
    for v in 0..=255u8 {
        let lab = srgb_to_lab([v, v, v]);
        assert!(lab[1].abs() < 1e-9 && lab[2].abs() < 1e-9, "{v}: {lab:?}");
    }
}

#[test]
fn image_conversion_matches_pixelwise() {
    let data: Vec<u8> = (0..4 * 3 * 3).map(|i| (i * 37 % 256) as u8).collect();
    let img = RgbImage::new(4, 3, data).unwrap();
    let lab = rgb_to_lab(&img);
    let hsv = rgb_to_hsv(&img);
    for y in 0..3 {
        for x in 0..4 {
            let p = img.pixel(x, y);
            assert_eq!(
                [lab.l.get(x, y), lab.a.get(x, y), lab.b.get(x, y)],
                srgb_to_lab(p)
            );
            assert_eq!(
                [hsv.h.get(x, y), hsv.s.get(x, y), hsv.v.get(x, y)],
                srgb_to_hsv(p)
            );
        }
    }
}

proptest! {
    #[test]
    fn any_colour_matches_reference(r: u8, g: u8, b: u8) {
        let got = srgb_to_lab([r, g, b]);
        let want = reference_lab([r, g, b]);
        for k in 0..3 {
            prop_assert!((got[k] - want[k]).abs() < 0.05);
        }
    }

    #[test]
    fn value_is_max_channel(r: u8, g: u8, b: u8) {
        let hsv = srgb_to_hsv([r, g, b]);
        prop_assert_eq!(hsv[2], r.max(g).max(b) as f64 / 255.0);
        prop_assert!((0.0..360.0).contains(&hsv[0]));
        prop_assert!((0.0..=1.0).contains(&hsv[1]));
    }
}
