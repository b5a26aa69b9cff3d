mod common;

use capsule_screen::dataset::{ClassLabel, Target};
use capsule_screen::learn::{train_binary, train_svm, KernelSpec, SmoParams, TrainConfig};
use common::{max_kkt_violation, separable_points, xor_points};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn train_accuracy(x: &[Vec<f64>], y: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    let ok = x.iter().zip(y).filter(|(xi, yi)| f(xi) * *yi > 0.0).count();
    ok as f64 / x.len() as f64
}

#[test]
fn separable_linear_problem() {
    let (x, y) = separable_points(100, 1.0, 11);
    let params = SmoParams::default();
    let fit = train_binary(&x, &y, KernelSpec::Linear, &params).unwrap();
    assert_eq!(train_accuracy(&x, &y, |p| fit.machine.decision(p)), 1.0);
    assert!(max_kkt_violation(&x, &y, &fit, params.c) <= 1e-3);
    let balance: f64 = fit.alphas.iter().zip(&y).map(|(a, yi)| a * yi).sum();
    assert!(balance.abs() <= 1e-6, "{balance}");
    assert!(fit.alphas.iter().all(|&a| (0.0..=params.c).contains(&a)));
}

#[test]
fn xor_with_rbf() {
    let (x, y) = xor_points();
    let params = SmoParams {
        c: 10.0,
        ..Default::default()
    };
    let fit = train_binary(&x, &y, KernelSpec::Rbf { gamma: 1.0 }, &params).unwrap();
    assert_eq!(train_accuracy(&x, &y, |p| fit.machine.decision(p)), 1.0);
    // The decision surface keeps the quadrant-parity pattern away from the
    // training points too.
    for (gx, gy) in [(2.0, 2.0), (-2.0, -2.0), (2.0, -2.0), (-2.0, 2.0)] {
        let d = fit.machine.decision(&[gx, gy]);
        assert_eq!(d > 0.0, gx * gy > 0.0);
    }
}

#[test]
fn two_symmetric_points() {
    let x = vec![vec![-1.0], vec![1.0]];
    let y = vec![-1.0, 1.0];
    let params = SmoParams {
        c: 10.0,
        ..Default::default()
    };
    let fit = train_binary(&x, &y, KernelSpec::Linear, &params).unwrap();
    assert!(fit.machine.bias.abs() < 1e-12);
    assert_eq!(fit.machine.support_vectors.len(), 2);
    assert!(fit.machine.decision(&[0.0]).abs() < 1e-12);
}

#[test]
fn free_support_vectors_sit_on_the_margin() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<Vec<f64>> = (0..80)
        .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|p| {
            if p[0] * p[0] + p[1] * p[1] < 1.5 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let params = SmoParams {
        c: 5.0,
        ..Default::default()
    };
    let fit = train_binary(&x, &y, KernelSpec::Rbf { gamma: 1.0 }, &params).unwrap();
    let mut free = 0;
    for ((xi, yi), &a) in x.iter().zip(&y).zip(&fit.alphas) {
        if a > 0.0 && a < params.c {
            free += 1;
            assert!(
                (yi * fit.machine.decision(xi) - 1.0).abs() <= params.tol,
                "alpha {a} margin {}",
                yi * fit.machine.decision(xi)
            );
        }
    }
    assert!(free > 0);
    assert!(max_kkt_violation(&x, &y, &fit, params.c) <= params.tol);
}

#[test]
fn decision_uses_only_support_vectors() {
    let (x, y) = separable_points(60, 0.3, 4);
    let kernel = KernelSpec::Rbf { gamma: 0.5 };
    let fit = train_binary(&x, &y, kernel, &SmoParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let p = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let full: f64 = x
            .iter()
            .zip(&y)
            .zip(&fit.alphas)
            .map(|((xi, yi), a)| a * yi * kernel.eval(xi, &p))
            .sum::<f64>()
            + fit.machine.bias;
        assert!((full - fit.machine.decision(&p)).abs() <= 1e-9);
    }
}

#[test]
fn kernel_matrices_are_symmetric_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for kernel in [KernelSpec::Linear, KernelSpec::Rbf { gamma: 0.7 }] {
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..9).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let k = DMatrix::from_fn(5, 5, |i, j| kernel.eval(&pts[i], &pts[j]));
            assert_eq!(k, k.transpose());
            assert!(k.symmetric_eigenvalues().iter().all(|&v| v >= -1e-8));
        }
    }
}

#[test]
fn prediction_is_invariant_to_affine_feature_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let classes = [
        Target::Label(ClassLabel::Normal),
        Target::Label(ClassLabel::Bleeding),
        Target::Label(ClassLabel::Polypoid),
    ];
    let centres = [[0.0, 0.0, 0.0], [3.0, 1.0, -1.0], [-1.0, 3.0, 2.0]];
    let mut x = Vec::new();
    let mut t = Vec::new();
    for _ in 0..90 {
        let c = rng.random_range(0..3);
        x.push(centres[c].map(|m| m + rng.random_range(-1.2..1.2)));
        t.push(classes[c]);
    }
    let scale = [250.0, -0.01, 3.0];
    let shift = [-40.0, 7.0, 1e3];
    let map = |v: &[f64; 3]| -> [f64; 3] { std::array::from_fn(|k| scale[k] * v[k] + shift[k]) };
    let x2: Vec<[f64; 3]> = x.iter().map(map).collect();
    for kernel in [KernelSpec::Linear, KernelSpec::Rbf { gamma: 0.5 }] {
        let cfg = TrainConfig {
            kernel,
            ..Default::default()
        };
        let m1 = train_svm(&x, &t, &cfg).unwrap();
        let m2 = train_svm(&x2, &t, &cfg).unwrap();
        for _ in 0..100 {
            let p = [
                rng.random_range(-2.0..4.0),
                rng.random_range(-2.0..4.0),
                rng.random_range(-2.0..3.0),
            ];
            assert_eq!(
                m1.predict(&p).unwrap().target,
                m2.predict(&map(&p)).unwrap().target
            );
        }
    }
}

#[test]
fn one_vs_one_machine_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 2..=5usize {
        let x: Vec<Vec<f64>> = (0..10 * k)
            .map(|i| vec![(i % k) as f64 * 4.0 + rng.random_range(-1.0..1.0)])
            .collect();
        let t: Vec<Target> = (0..10 * k)
            .map(|i| Target::Label(ClassLabel::ALL[i % k]))
            .collect();
        let m = train_svm(&x, &t, &TrainConfig::default()).unwrap();
        assert_eq!(m.machines.len(), k * (k - 1) / 2);
    }
}
