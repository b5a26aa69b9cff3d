use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-feature standardisation fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Population mean and standard deviation per column. Constant columns
    /// get a standard deviation of 1.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Data("cannot fit a scaler on no samples".into()))?;
        let dim = first.as_ref().len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: r.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .enumerate()
            .map(|(k, s)| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * mean[k].abs().max(1.0) {
                    sd
                } else {
                    log::warn!("feature {k} is constant in the training set; leaving it unscaled");
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_standardisation() {
        let s = Scaler::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[1.0, 5.0]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(s.apply(&[3.0, 5.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(s.apply(&[2.0, 5.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn scaled_training_set_is_standard() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let t = i as f64;
                vec![t * 3.0 + 7.0, (t * 0.7).sin() * 40.0, 1e6 + t]
            })
            .collect();
        let s = Scaler::fit(&rows).unwrap();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r).unwrap()).collect();
        for k in 0..3 {
            let mean = scaled.iter().map(|r| r[k]).sum::<f64>() / 50.0;
            let var = scaled.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        assert!(Scaler::fit::<Vec<f64>>(&[]).is_err());
        assert!(Scaler::fit(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let s = Scaler::fit(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(s.apply(&[1.0]), Err(Error::Dimension { .. })));
    }
}
