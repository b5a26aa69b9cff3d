use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `1 / number of features` for the 9-value descriptor.
pub const DEFAULT_GAMMA: f64 = 1.0 / 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    /// `exp(-gamma * |x - y|²)`
    Rbf {
        gamma: f64,
    },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Rbf {
            gamma: DEFAULT_GAMMA,
        }
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma.is_finite() && gamma > 0.0) => {
                Err(Error::Parameter(format!(
                    "RBF gamma must be finite and positive, got {gamma}"
                )))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match *self {
            KernelSpec::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Rbf { .. } => "rbf",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_and_symmetry() {
        let x = [1.0, 2.0, -0.5];
        let y = [0.5, -1.0, 2.0];
        assert_eq!(KernelSpec::Linear.eval(&x, &y), -2.5);
        let rbf = KernelSpec::Rbf { gamma: 0.5 };
        assert_eq!(rbf.eval(&x, &x), 1.0);
        assert_eq!(rbf.eval(&x, &y), rbf.eval(&y, &x));
        assert!((rbf.eval(&x, &y) - (-0.5f64 * 15.5).exp()).abs() < 1e-15);
    }

    #[test]
    fn gamma_must_be_positive() {
        assert!(KernelSpec::Rbf { gamma: 0.0 }.validate().is_err());
        assert!(KernelSpec::Rbf { gamma: f64::NAN }.validate().is_err());
        assert!(KernelSpec::default().validate().is_ok());
    }
}
