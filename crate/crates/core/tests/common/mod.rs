//! Reference computations shared by the oracle and acceptance tests. Each is
//! written from the textbook definition, independently of the library code.

#![allow(dead_code)]

use std::path::Path;

use capsule_screen::colorspace::PlaneImage;
use capsule_screen::dataset::{synth_dataset, ClassLabel, ClassMode, SplitSpec, SynthConfig};
use capsule_screen::features::{read_csv, write_csv, PointSample};
use capsule_screen::learn::{BinaryFit, KernelSpec, TrainConfig};
use capsule_screen::pipeline::{
    evaluate, extract_manifest, test_ids_path, train_from_samples, write_ids, EvalReport,
    ExtractConfig,
};
use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// sRGB → Lab with the RGB→XYZ matrix rebuilt from the primaries' and D65's
/// chromaticities.
pub fn reference_lab(rgb: [u8; 3]) -> [f64; 3] {
    let xyz_of = |x: f64, y: f64| Vector3::new(x / y, 1.0, (1.0 - x - y) / y);
    let primaries =
        Matrix3::from_columns(&[xyz_of(0.64, 0.33), xyz_of(0.30, 0.60), xyz_of(0.15, 0.06)]);
    let white = xyz_of(0.3127, 0.3290);
    let s = primaries.try_inverse().unwrap() * white;
    let m = primaries * Matrix3::from_diagonal(&s);

    let lin = Vector3::from_iterator(rgb.iter().map(|&c| {
        let v = c as f64 / 255.0;
        if v <= 0.04045 {
            v / 12.92
        } else {
            ((v + 0.055) / 1.055).powf(2.4)
        }
    }));
    let xyz = m * lin;
    let f = |t: f64| {
        let d: f64 = 6.0 / 29.0;
        if t > d.powi(3) {
            t.powf(1.0 / 3.0)
        } else {
            t / (3.0 * d * d) + 4.0 / 29.0
        }
    };
    let fx = f(xyz[0] / white[0]);
    let fy = f(xyz[1] / white[1]);
    let fz = f(xyz[2] / white[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Box-filter Hessian at `(x, y)` by direct summation of plane values
/// against the filter weights. Returns `(dxx, dyy, dxy)` normalised by 1/L².
pub fn direct_hessian(plane: &PlaneImage, x: usize, y: usize, size: usize) -> (f64, f64, f64) {
    let l = (size / 3) as i64;
    let b = ((size - 1) / 2) as i64;
    let half = (l - 1) / 2;
    let (mut dxx, mut dyy, mut dxy) = (0.0, 0.0, 0.0);
    for dy in -b..=b {
        for dx in -b..=b {
            let v = plane.get((x as i64 + dx) as usize, (y as i64 + dy) as usize);
            if dy.abs() < l {
                dxx += v * if dx.abs() <= half { -2.0 } else { 1.0 };
            }
            if dx.abs() < l {
                dyy += v * if dy.abs() <= half { -2.0 } else { 1.0 };
            }
            if (1..=l).contains(&dx.abs()) && (1..=l).contains(&dy.abs()) {
                dxy -= v * (dx.signum() * dy.signum()) as f64;
            }
        }
    }
    let norm = 1.0 / (size * size) as f64;
    (dxx * norm, dyy * norm, dxy * norm)
}

/// Random smooth plane: a sum of a few broad Gaussians and a gentle slope.
pub fn smooth_plane(seed: u64, size: usize) -> PlaneImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<[f64; 4]> = (0..6)
        .map(|_| {
            [
                rng.random_range(0.0..size as f64),
                rng.random_range(0.0..size as f64),
                rng.random_range(3.0..12.0),
                rng.random_range(-40.0..40.0),
            ]
        })
        .collect();
    let slope = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
    PlaneImage::from_fn(size, size, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        50.0 + slope[0] * fx
            + slope[1] * fy
            + bumps
                .iter()
                .map(|[cx, cy, s, a]| {
                    a * (-((fx - cx).powi(2) + (fy - cy).powi(2)) / (2.0 * s * s)).exp()
                })
                .sum::<f64>()
    })
    .unwrap()
}

pub fn gaussian_blob(size: usize, cx: f64, cy: f64, sigma: f64, amp: f64) -> PlaneImage {
    PlaneImage::from_fn(size, size, |x, y| {
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        amp * (-d2 / (2.0 * sigma * sigma)).exp()
    })
    .unwrap()
}

/// Largest KKT violation of `fit` on its training set.
pub fn max_kkt_violation(x: &[Vec<f64>], y: &[f64], fit: &BinaryFit, c: f64) -> f64 {
    let bound = 1e-12 * c;
    x.iter()
        .zip(y)
        .zip(&fit.alphas)
        .map(|((xi, yi), &a)| {
            let r = yi * fit.machine.decision(xi) - 1.0;
            if a <= bound {
                (-r).max(0.0)
            } else if a >= c - bound {
                r.max(0.0)
            } else {
                r.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// 2-d points labelled by the side of `x0 + x1 = 0`, at distance ≥ `margin`
/// from the line.
pub fn separable_points(n: usize, margin: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    while x.len() < n {
        let p = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let d = (p[0] + p[1]) / 2f64.sqrt();
        if d.abs() >= margin {
            x.push(p.to_vec());
            y.push(d.signum());
        }
    }
    (x, y)
}

pub fn xor_points() -> (Vec<Vec<f64>>, Vec<f64>) {
    let x = vec![
        vec![1.0, 1.0],
        vec![-1.0, -1.0],
        vec![1.0, -1.0],
        vec![-1.0, 1.0],
    ];
    (x, vec![1.0, 1.0, -1.0, -1.0])
}

/// Two concentric circles of radii 1 and 3, `n` points each; label 0 for the
/// inner one.
pub fn circles(n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for (label, r) in [(0, 1.0), (1, 3.0)] {
        for i in 0..n {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            x.push(vec![r * t.cos(), r * t.sin()]);
            labels.push(label);
        }
    }
    (x, labels)
}

/// Best accuracy of a single threshold on `scores` (either orientation).
pub fn threshold_accuracy(scores: &[f64], labels: &[usize]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n = scores.len();
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let mut best = ones.max(n - ones);
    let mut zeros_below = 0;
    let mut ones_below = 0;
    for &i in &order {
        if labels[i] == 0 {
            zeros_below += 1;
        } else {
            ones_below += 1;
        }
        let low_zero = zeros_below + (ones - ones_below);
        best = best.max(low_zero).max(n - low_zero);
    }
    best as f64 / n as f64
}

/// First two principal-component scores via the covariance eigenvectors.
pub fn pca_scores(x: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = x.len();
    let d = x[0].len();
    let mut m = DMatrix::from_fn(n, d, |i, j| x[i][j]);
    for j in 0..d {
        let mean = m.column(j).mean();
        m.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = m.transpose() * &m;
    let eig = cov.symmetric_eigen();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let v1 = eig.eigenvectors.column(idx[0]).into_owned();
    let v2 = eig.eigenvectors.column(idx[1]).into_owned();
    let s1 = &m * v1;
    let s2 = &m * v2;
    (0..n).map(|i| [s1[i], s2[i]]).collect()
}

/// Paths written by one `extract → train → eval` run.
pub struct RunArtifacts {
    pub features: Vec<u8>,
    pub model: Vec<u8>,
    pub test_ids: Vec<u8>,
    pub report: Vec<u8>,
    pub eval: EvalReport,
}

pub fn synth(dir: &Path, classes: &[ClassLabel], n: usize, seed: u64) -> std::path::PathBuf {
    synth_dataset(
        &SynthConfig {
            n_per_class: n,
            classes: classes.to_vec(),
            seed,
        },
        dir,
    )
    .unwrap()
}

/// Runs extraction, training and evaluation with default extraction
/// settings, writing every artifact under `dir`.
pub fn run_pipeline(
    manifest: &Path,
    dir: &Path,
    mode: ClassMode,
    kernel: KernelSpec,
    use_kpca: bool,
    split_seed: u64,
) -> RunArtifacts {
    let outcome = extract_manifest(manifest, &ExtractConfig::default()).unwrap();
    assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
    let features = dir.join("features.csv");
    write_csv(&features, &outcome.samples).unwrap();
    let samples: Vec<PointSample> = read_csv(&features).unwrap();
    let split = SplitSpec {
        seed: split_seed,
        ..Default::default()
    };
    let cfg = TrainConfig {
        kernel,
        use_kpca,
        ..Default::default()
    };
    let trained = train_from_samples(&samples, mode, &split, &cfg).unwrap();
    let model = dir.join("model.json");
    trained.model.save(&model).unwrap();
    let ids = test_ids_path(&model);
    write_ids(&ids, &trained.test_ids).unwrap();
    let eval = evaluate(&trained.model, &samples, &trained.test_ids).unwrap();
    let report = dir.join("report.json");
    eval.save(&report).unwrap();
    let read = |p: &Path| std::fs::read(p).unwrap();
    RunArtifacts {
        features: read(&features),
        model: read(&model),
        test_ids: read(&ids),
        report: read(&report),
        eval,
    }
}
