//! Standardisation, one-vs-one SVM classification and kernel PCA.

pub mod jacobi;
pub mod kernel;
pub mod kpca;
pub mod scaler;
pub mod smo;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Target;
use crate::{Error, Result};

pub use kernel::{KernelSpec, DEFAULT_GAMMA};
pub use kpca::{fit_kpca, KpcaModel};
pub use scaler::Scaler;
pub use smo::{train_binary, BinaryFit, SmoParams, SvmBinary};

/// Kernel PCA is fitted on at most this many training vectors by default.
pub const DEFAULT_KPCA_MAX_SAMPLES: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kernel: KernelSpec,
    pub c: f64,
    pub use_kpca: bool,
    /// Cap on the kernel PCA fitting set; larger training sets are
    /// subsampled with `seed`.
    pub kpca_max_samples: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::default(),
            c: 1.0,
            use_kpca: false,
            kpca_max_samples: DEFAULT_KPCA_MAX_SAMPLES,
            seed: 0,
        }
    }
}

/// Binary machine for classes `positive < negative` (indices into
/// [`SvmModel::classes`]); a non-negative decision votes for `positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMachine {
    pub positive: usize,
    pub negative: usize,
    pub machine: SvmBinary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub config: TrainConfig,
    pub input_dim: usize,
    pub scaler: Scaler,
    pub classes: Vec<Target>,
    pub kpca: Option<KpcaModel>,
    pub machines: Vec<PairMachine>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub target: Target,
    /// Votes per entry of [`SvmModel::classes`].
    pub votes: Vec<usize>,
    /// Summed |decision| over the machines that voted for the winner.
    pub margin: f64,
}

/// Fits scaler, optional kernel PCA and one SMO machine per class pair.
pub fn train_svm<R: AsRef<[f64]> + Sync>(
    features: &[R],
    targets: &[Target],
    config: &TrainConfig,
) -> Result<SvmModel> {
    config.kernel.validate()?;
    if features.len() != targets.len() {
        return Err(Error::Dimension {
            expected: features.len(),
            actual: targets.len(),
        });
    }
    if features
        .iter()
        .any(|f| f.as_ref().iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Data("non-finite feature value".into()));
    }
    let mut classes: Vec<Target> = targets.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Data(format!(
            "training needs at least two classes, found {}",
            classes.len()
        )));
    }

    let scaler = Scaler::fit(features)?;
    let scaled: Vec<Vec<f64>> = features
        .iter()
        .map(|f| scaler.apply(f.as_ref()))
        .collect::<Result<_>>()?;

    let kpca = if config.use_kpca {
        let fit_set: Vec<Vec<f64>> = if scaled.len() > config.kpca_max_samples {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut idx = sample(&mut rng, scaled.len(), config.kpca_max_samples).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| scaled[i].clone()).collect()
        } else {
            scaled.clone()
        };
        Some(fit_kpca(&fit_set, config.kernel)?)
    } else {
        None
    };
    let inputs: Vec<Vec<f64>> = match &kpca {
        Some(k) => scaled
            .par_iter()
            .map(|x| k.project(x).map(|p| p.to_vec()))
            .collect::<Result<_>>()?,
        None => scaled,
    };

    let class_index: Vec<usize> = targets
        .iter()
        .map(|t| {
            classes
                .binary_search(t)
                .expect("class list built from targets")
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..classes.len())
        .flat_map(|i| (i + 1..classes.len()).map(move |j| (i, j)))
        .collect();
    let machines = pairs
        .par_iter()
        .map(|&(pos, neg)| {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (x, &c) in inputs.iter().zip(&class_index) {
                if c == pos || c == neg {
                    xs.push(x.clone());
                    ys.push(if c == pos { 1.0 } else { -1.0 });
                }
            }
            let params = SmoParams {
                c: config.c,
                seed: config.seed,
                ..Default::default()
            };
            let fit = train_binary(&xs, &ys, config.kernel, &params)?;
            Ok(PairMachine {
                positive: pos,
                negative: neg,
                machine: fit.machine,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SvmModel {
        config: *config,
        input_dim: scaler.dim(),
        scaler,
        classes,
        kpca,
        machines,
    })
}

impl SvmModel {
    /// Scaled (and, with kernel PCA, projected) machine input for `x`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        let scaled = self.scaler.apply(x)?;
        match &self.kpca {
            Some(k) => Ok(k.project(&scaled)?.to_vec()),
            None => Ok(scaled),
        }
    }

    /// Max-wins voting over the pairwise machines. Vote ties go to the class
    /// with the larger summed |decision|, then to the earlier class.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let z = self.transform(x)?;
        let k = self.classes.len();
        let mut votes = vec![0usize; k];
        let mut strength = vec![0.0f64; k];
        for pm in &self.machines {
            let d = pm.machine.decision(&z);
            let winner = if d >= 0.0 { pm.positive } else { pm.negative };
            votes[winner] += 1;
            strength[winner] += d.abs();
        }
        let best = (0..k)
            .max_by(|&a, &b| {
                votes[a]
                    .cmp(&votes[b])
                    .then(strength[a].total_cmp(&strength[b]))
                    .then(b.cmp(&a))
            })
            .expect("model has classes");
        Ok(Prediction {
            target: self.classes[best],
            margin: strength[best],
            votes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ClassLabel;

    const A: Target = Target::Label(ClassLabel::Normal);
    const B: Target = Target::Label(ClassLabel::Bleeding);
    const C: Target = Target::Abnormal;

    fn cluster(cx: f64, cy: f64, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                vec![cx + 0.3 * (t * 1.7).sin(), cy + 0.3 * (t * 2.3).cos()]
            })
            .collect()
    }

    #[test]
    fn binary_model_votes() {
        let x = vec![vec![-1.0], vec![1.0], vec![-2.0], vec![2.0]];
        let t = vec![A, B, A, B];
        let m = train_svm(&x, &t, &TrainConfig::default()).unwrap();
        assert_eq!(m.machines.len(), 1);
        let p = m.predict(&[-3.0]).unwrap();
        assert_eq!(p.target, A);
        assert_eq!(p.votes, vec![1, 0]);
        assert_eq!(m.predict(&[3.0]).unwrap().target, B);
    }

    #[test]
    fn three_class_unanimous() {
        let mut x = cluster(0.0, 0.0, 10);
        x.extend(cluster(5.0, 0.0, 10));
        x.extend(cluster(0.0, 5.0, 10));
        let t: Vec<Target> = [A, B, C].iter().flat_map(|c| [*c; 10]).collect();
        let cfg = TrainConfig {
            kernel: KernelSpec::Linear,
            ..Default::default()
        };
        let m = train_svm(&x, &t, &cfg).unwrap();
        assert_eq!(m.machines.len(), 3);
        assert_eq!(m.classes, vec![A, B, C]);
        let p = m.predict(&[0.0, 6.0]).unwrap();
        assert_eq!(p.target, C);
        assert_eq!(p.votes[2], 2);
    }

    #[test]
    fn vote_ties_use_margin() {
        // Three machines each voting for a different class: all tie on one
        // vote, so the strongest decision wins.
        let m = SvmModel {
            config: TrainConfig::default(),
            input_dim: 1,
            scaler: Scaler {
                mean: vec![0.0],
                std: vec![1.0],
            },
            classes: vec![A, B, C],
            kpca: None,
            machines: [(0, 1, 0.5), (1, 2, 0.9), (0, 2, -0.2)]
                .into_iter()
                .map(|(positive, negative, bias)| PairMachine {
                    positive,
                    negative,
                    machine: SvmBinary {
                        kernel: KernelSpec::Linear,
                        c: 1.0,
                        support_vectors: vec![],
                        coefficients: vec![],
                        bias,
                    },
                })
                .collect(),
        };
        let p = m.predict(&[0.0]).unwrap();
        assert_eq!(p.votes, vec![1, 1, 1]);
        assert_eq!(p.target, B);
        assert!((p.margin - 0.9).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(train_svm(&x, &[A, A], &TrainConfig::default()).is_err());
        assert!(train_svm(&x, &[A], &TrainConfig::default()).is_err());
        let nan = vec![vec![f64::INFINITY], vec![1.0]];
        assert!(train_svm(&nan, &[A, B], &TrainConfig::default()).is_err());
        let m = train_svm(&x, &[A, B], &TrainConfig::default()).unwrap();
        assert!(matches!(
            m.predict(&[1.0, 2.0]),
            Err(Error::Dimension { .. })
        ));
    }
}
