use capsule_screen::dataset::ClassLabel;
use capsule_screen::features::{read_csv, write_csv, FeatureVector, PointSample, CSV_HEADER};
use capsule_screen::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_samples(n: usize, seed: u64) -> Vec<PointSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut v = [0.0; 9];
            for x in v.iter_mut() {
                *x = rng.random_range(-128.0..128.0) * 10f64.powi(rng.random_range(-12..3));
            }
            PointSample {
                image_id: format!("img_{}", i % 13),
                x: rng.random_range(0..320) as f64,
                y: rng.random_range(0..320) as f64,
                scale: 1.2 * rng.random_range(9..154) as f64 / 9.0,
                features: FeatureVector::from_array(v),
                label: ClassLabel::ALL[rng.random_range(0..8)],
            }
        })
        .collect()
}

#[test]
fn round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    let samples = random_samples(100, 5);
    write_csv(&p, &samples).unwrap();
    let back = read_csv(&p).unwrap();
    assert_eq!(back, samples);
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
}

#[test]
fn empty_table_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    write_csv(&p, &[]).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 1);
    assert!(read_csv(&p).unwrap().is_empty());
}

#[test]
fn missing_column_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    let header: Vec<&str> = CSV_HEADER
        .iter()
        .copied()
        .filter(|c| *c != "max_b" && *c != "min_b")
        .collect();
    assert_eq!(header.len(), 12);
    std::fs::write(&p, format!("{}\n", header.join(","))).unwrap();
    let err = read_csv(&p).unwrap_err();
    assert!(matches!(err, Error::Header(_)), "{err:?}");
    assert!(err.to_string().contains("max_b"), "{err}");
}

#[test]
fn malformed_row_reports_row_number() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    write_csv(&p, &random_samples(3, 1)).unwrap();
    let mut text = std::fs::read_to_string(&p).unwrap();
    text.push_str("img_9,1,2,3,x,0,0,0,0,0,0,0,0,normal\n");
    std::fs::write(&p, text).unwrap();
    let err = read_csv(&p).unwrap_err();
    assert!(matches!(err, Error::MalformedRow { row: 4, .. }), "{err:?}");
}
