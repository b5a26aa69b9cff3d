use capsule_screen::dataset::{ClassLabel, Target};
use capsule_screen::eval_metrics::{aggregate_image, confusion, metrics, EvalLevel, PointVote};
use proptest::prelude::*;

const NEG: Target = Target::Label(ClassLabel::Normal);
const POS: Target = Target::Abnormal;

fn expand(cm: [[usize; 2]; 2]) -> (Vec<Target>, Vec<Target>) {
    let classes = [NEG, POS];
    let mut truths = Vec::new();
    let mut preds = Vec::new();
    for (i, row) in cm.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            truths.extend(std::iter::repeat_n(classes[i], n));
            preds.extend(std::iter::repeat_n(classes[j], n));
        }
    }
    (truths, preds)
}

#[test]
fn hand_computed_binary_example() {
    let (truths, preds) = expand([[50, 10], [5, 35]]);
    let cm = confusion(&[NEG, POS], &truths, &preds).unwrap();
    assert_eq!(cm.counts, vec![vec![50, 10], vec![5, 35]]);
    let r = metrics(&cm, EvalLevel::Point).unwrap();
    assert!((r.accuracy - 0.85).abs() < 1e-9);
    let pos = r.class(POS).unwrap();
    assert!((pos.precision - 35.0 / 45.0).abs() < 1e-9);
    assert!((pos.recall - 0.875).abs() < 1e-9);
    let f1 = 2.0 * (35.0 / 45.0) * 0.875 / (35.0 / 45.0 + 0.875);
    assert!((pos.f1 - f1).abs() < 1e-9);
    assert!((pos.f1 - 0.8235).abs() < 1e-4);
}

#[test]
fn image_aggregation() {
    let vote = |id: &str, t: Target, m: f64| PointVote {
        image_id: id.into(),
        predicted: t,
        margin: m,
    };
    let out = aggregate_image(&[
        vote("a", NEG, 0.1),
        vote("a", NEG, 0.1),
        vote("a", POS, 5.0),
        vote("b", NEG, 0.9),
        vote("b", POS, 0.2),
        vote("c", POS, 0.3),
    ])
    .unwrap();
    assert_eq!(out["a"], NEG);
    assert_eq!(out["b"], NEG);
    assert_eq!(out["c"], POS);
}

fn label(k: u8) -> Target {
    Target::Label(ClassLabel::ALL[k as usize])
}

proptest! {
    #[test]
    fn totals_equal_sample_count(pairs in prop::collection::vec((0u8..4, 0u8..4), 1..200)) {
        let classes: Vec<Target> = (0..4).map(label).collect();
        let truths: Vec<Target> = pairs.iter().map(|p| label(p.0)).collect();
        let preds: Vec<Target> = pairs.iter().map(|p| label(p.1)).collect();
        let cm = confusion(&classes, &truths, &preds).unwrap();
        prop_assert_eq!(cm.total(), pairs.len() as u64);
        for (i, c) in classes.iter().enumerate() {
            prop_assert_eq!(cm.row_sum(i), truths.iter().filter(|t| *t == c).count() as u64);
        }
        let r = metrics(&cm, EvalLevel::Point).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.accuracy));
        prop_assert!((0.0..=1.0).contains(&r.macro_f1));
    }

    #[test]
    fn permutation_invariance(pairs in prop::collection::vec((0u8..3, 0u8..3), 2..100), seed: u64) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let classes: Vec<Target> = (0..3).map(label).collect();
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let report = |ps: &[(u8, u8)]| {
            let t: Vec<Target> = ps.iter().map(|p| label(p.0)).collect();
            let p: Vec<Target> = ps.iter().map(|p| label(p.1)).collect();
            metrics(&confusion(&classes, &t, &p).unwrap(), EvalLevel::Image).unwrap()
        };
        prop_assert_eq!(report(&pairs), report(&shuffled));
    }
}
