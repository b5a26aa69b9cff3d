//! Binary soft-margin SVM trained with Platt's sequential minimal
//! optimisation.
//!
//! The decision function is `f(x) = Σ coefᵢ·K(svᵢ, x) + bias` with
//! `coefᵢ = αᵢ·yᵢ`. Errors `Eᵢ = f(xᵢ) − yᵢ` are cached for every training
//! point and updated after each successful pair step.

use std::collections::VecDeque;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use crate::{Error, Result};

/// Kernel rows kept in memory, in bytes.
const ROW_CACHE_BYTES: usize = 256 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    /// KKT tolerance.
    pub tol: f64,
    /// Minimum relative α change for a step to count.
    pub eps: f64,
    /// Seeds the start offsets of the fallback scans.
    pub seed: u64,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            eps: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmBinary {
    pub kernel: KernelSpec,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// Signed dual coefficients `αᵢ·yᵢ`.
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl SvmBinary {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }
}

/// Result of one SMO run, with the full α vector for diagnostics.
#[derive(Debug, Clone)]
pub struct BinaryFit {
    pub machine: SvmBinary,
    pub alphas: Vec<f64>,
    pub passes: usize,
}

struct RowCache<'a> {
    x: &'a [Vec<f64>],
    kernel: KernelSpec,
    rows: Vec<Option<Rc<Vec<f64>>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> RowCache<'a> {
    fn new(x: &'a [Vec<f64>], kernel: KernelSpec) -> Self {
        let n = x.len();
        let capacity = (ROW_CACHE_BYTES / (8 * n.max(1))).max(2);
        Self {
            x,
            kernel,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> Rc<Vec<f64>> {
        if let Some(r) = &self.rows[i] {
            return Rc::clone(r);
        }
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        let xi = &self.x[i];
        let r = Rc::new(self.x.iter().map(|xj| self.kernel.eval(xi, xj)).collect());
        self.rows[i] = Some(Rc::clone(&r));
        self.order.push_back(i);
        r
    }
}

struct Solver<'a> {
    y: &'a [f64],
    c: f64,
    tol: f64,
    eps: f64,
    alpha: Vec<f64>,
    errors: Vec<f64>,
    bias: f64,
    diag: Vec<f64>,
    cache: RowCache<'a>,
    rng: ChaCha8Rng,
}

impl Solver<'_> {
    fn is_free(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn objective_at(&self, a2: f64, a2_old: f64, eta: f64, delta_e: f64, y2: f64) -> f64 {
        0.5 * eta * a2 * a2 - (eta * a2_old + y2 * delta_e) * a2
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1_old, a2_old) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;
        let c = self.c;
        let (lo, hi) = if y1 != y2 {
            ((a2_old - a1_old).max(0.0), (c + a2_old - a1_old).min(c))
        } else {
            ((a1_old + a2_old - c).max(0.0), (a1_old + a2_old).min(c))
        };
        if lo >= hi {
            return false;
        }
        let row1 = self.cache.row(i1);
        let (k11, k22, k12) = (self.diag[i1], self.diag[i2], row1[i2]);
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2 = if eta > 0.0 {
            (a2_old + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            let f_lo = self.objective_at(lo, a2_old, eta, e1 - e2, y2);
            let f_hi = self.objective_at(hi, a2_old, eta, e1 - e2, y2);
            if f_lo < f_hi - self.eps {
                lo
            } else if f_lo > f_hi + self.eps {
                hi
            } else {
                a2_old
            }
        };
        // Snap to the box so rounding residue is not mistaken for a free
        // multiplier.
        if a2 < self.eps * c {
            a2 = 0.0;
        } else if a2 > c * (1.0 - self.eps) {
            a2 = c;
        }
        if (a2 - a2_old).abs() < self.eps * (a2 + a2_old + self.eps) {
            return false;
        }
        let mut a1 = a1_old + s * (a2_old - a2);
        let snap = 1e-12 * c;
        if a1 < snap {
            a2 += s * a1;
            a1 = 0.0;
        } else if a1 > c - snap {
            a2 += s * (a1 - c);
            a1 = c;
        }
        a2 = a2.clamp(0.0, c);

        let d1 = y1 * (a1 - a1_old);
        let d2 = y2 * (a2 - a2_old);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        let free1 = a1 > 0.0 && a1 < c;
        let free2 = a2 > 0.0 && a2 < c;
        let new_bias = if free1 {
            b1
        } else if free2 {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = new_bias - self.bias;

        let row2 = self.cache.row(i2);
        for (k, e) in self.errors.iter_mut().enumerate() {
            *e += d1 * row1[k] + d2 * row2[k] + db;
        }
        self.alpha[i1] = a1;
        self.alpha[i2] = a2;
        self.bias = new_bias;
        true
    }

    /// Scans indices starting at a seeded offset and tries each as partner.
    fn scan(&mut self, i2: usize, free_only: bool) -> bool {
        let n = self.alpha.len();
        let start = self.rng.random_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if free_only && !self.is_free(i1) {
                continue;
            }
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn examine(&mut self, i2: usize) -> bool {
        let r2 = self.errors[i2] * self.y[i2];
        let a2 = self.alpha[i2];
        if !((r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0)) {
            return false;
        }
        // Second choice: largest |E1 − E2| among free multipliers, lowest
        // index on ties.
        let e2 = self.errors[i2];
        let mut best: Option<(usize, f64)> = None;
        for i1 in 0..self.alpha.len() {
            if i1 == i2 || !self.is_free(i1) {
                continue;
            }
            let gap = (self.errors[i1] - e2).abs();
            if best.is_none_or(|(_, g)| gap > g) {
                best = Some((i1, gap));
            }
        }
        if let Some((i1, _)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        self.scan(i2, true) || self.scan(i2, false)
    }
}

/// Trains one binary machine on `x` with labels `y ∈ {−1, +1}`.
///
/// Full passes over all multipliers alternate with passes over the free
/// ones; training ends after a full pass that changes nothing. More than
/// `10·n` passes is reported as non-convergence.
pub fn train_binary(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: KernelSpec,
    params: &SmoParams,
) -> Result<BinaryFit> {
    kernel.validate()?;
    if !(params.c.is_finite() && params.c > 0.0) {
        return Err(Error::Parameter(format!(
            "C must be positive, got {}",
            params.c
        )));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Data("no training samples".into()));
    }
    if y.iter().any(|v| *v != 1.0 && *v != -1.0) {
        return Err(Error::Data("binary labels must be +1 or -1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::Data("binary training needs both classes".into()));
    }
    let dim = x[0].len();
    for row in x {
        if row.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
    }

    let n = x.len();
    let mut solver = Solver {
        y,
        c: params.c,
        tol: params.tol,
        eps: params.eps,
        alpha: vec![0.0; n],
        errors: y.iter().map(|v| -v).collect(),
        bias: 0.0,
        diag: x.iter().map(|xi| kernel.eval(xi, xi)).collect(),
        cache: RowCache::new(x, kernel),
        rng: ChaCha8Rng::seed_from_u64(params.seed),
    };

    let max_passes = 10 * n;
    let mut passes = 0;
    let mut examine_all = true;
    let mut changed = 0usize;
    while changed > 0 || examine_all {
        if passes >= max_passes {
            return Err(Error::NotConverged { passes });
        }
        passes += 1;
        changed = 0;
        for i in 0..n {
            if examine_all || solver.is_free(i) {
                changed += usize::from(solver.examine(i));
            }
        }
        if examine_all {
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }

    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..n {
        if solver.alpha[i] > 0.0 {
            support_vectors.push(x[i].clone());
            coefficients.push(solver.alpha[i] * y[i]);
        }
    }
    Ok(BinaryFit {
        machine: SvmBinary {
            kernel,
            c: params.c,
            support_vectors,
            coefficients,
            bias: solver.bias,
        },
        alphas: solver.alpha,
        passes,
    })
}
