//! Kernel PCA down to two components.

use serde::{Deserialize, Serialize};

use super::jacobi::symmetric_eigen;
use super::kernel::KernelSpec;
use crate::{Error, Result};

pub const KPCA_COMPONENTS: usize = 2;
const EIGEN_TOL: f64 = 1e-10;
const MIN_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpcaModel {
    pub kernel: KernelSpec,
    pub train: Vec<Vec<f64>>,
    pub eigenvalues: [f64; KPCA_COMPONENTS],
    /// Eigenvectors of the centred kernel matrix divided by √eigenvalue.
    pub coefficients: [Vec<f64>; KPCA_COMPONENTS],
    pub row_means: Vec<f64>,
    pub total_mean: f64,
}

/// Fits kernel PCA: centres `K` as `K − 1ₙK − K1ₙ + 1ₙK1ₙ`, diagonalises it
/// and keeps the two leading eigenpairs.
pub fn fit_kpca(train: &[Vec<f64>], kernel: KernelSpec) -> Result<KpcaModel> {
    kernel.validate()?;
    let n = train.len();
    if n < 3 {
        return Err(Error::Data(format!(
            "kernel PCA needs at least 3 vectors, got {n}"
        )));
    }
    let dim = train[0].len();
    if let Some(bad) = train.iter().find(|r| r.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            actual: bad.len(),
        });
    }

    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = kernel.eval(&train[i], &train[j]);
        }
    }
    let row_means: Vec<f64> = (0..n)
        .map(|i| k[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();
    let total_mean = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] += total_mean - row_means[i] - row_means[j];
        }
    }
    // Centring can leave rounding-level asymmetry; the solver assumes exact.
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (k[i * n + j] + k[j * n + i]);
            k[i * n + j] = m;
            k[j * n + i] = m;
        }
    }

    let eig = symmetric_eigen(k, n, EIGEN_TOL)?;
    if eig.values[1] < MIN_EIGENVALUE {
        return Err(Error::Numeric(format!(
            "degenerate kernel PCA: leading eigenvalues {:e}, {:e}",
            eig.values[0], eig.values[1]
        )));
    }
    let coefficient = |c: usize| {
        let mut v = eig.vector(c);
        // Fix the sign so the largest-magnitude entry is positive.
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map_or(1.0, |(_, x)| x.signum());
        let norm = pivot / eig.values[c].sqrt();
        v.iter_mut().for_each(|x| *x *= norm);
        v
    };
    Ok(KpcaModel {
        kernel,
        train: train.to_vec(),
        eigenvalues: [eig.values[0], eig.values[1]],
        coefficients: [coefficient(0), coefficient(1)],
        row_means,
        total_mean,
    })
}

impl KpcaModel {
    pub fn input_dim(&self) -> usize {
        self.train[0].len()
    }

    /// Projects `x` onto the two components, centring its kernel row against
    /// the training statistics.
    pub fn project(&self, x: &[f64]) -> Result<[f64; KPCA_COMPONENTS]> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let n = self.train.len();
        let kx: Vec<f64> = self.train.iter().map(|t| self.kernel.eval(t, x)).collect();
        let mean = kx.iter().sum::<f64>() / n as f64;
        let mut out = [0.0; KPCA_COMPONENTS];
        for (o, coef) in out.iter_mut().zip(&self.coefficients) {
            *o = kx
                .iter()
                .zip(&self.row_means)
                .zip(coef)
                .map(|((k, r), a)| a * (k - mean - r + self.total_mean))
                .sum();
        }
        Ok(out)
    }
}
